use serde::{Deserialize, Serialize};

use crate::buffer::{
    binomial_pmf, delivered_units, feasible_actions, receive_prefix, transition_distribution, view_after_playout,
    Action, ActionMode, ActionTag, BufferConfig, BufferState, Phase, StateIndex, SystemState,
};
use crate::channel::ChannelModel;
use crate::distortion::DistortionContext;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::manifest::hash_json;
use crate::stream::StreamProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub buffer: BufferConfig,
    pub mode: ActionMode,
    pub max_states: usize,
}

impl SpaceConfig {
    pub fn new(buffer: BufferConfig) -> Self {
        Self { buffer, mode: ActionMode::Canonical, max_states: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    /// Some of the window is still missing.
    Window,
    /// Window complete, reached in one step from a `Window` state.
    Boundary,
}

/// One feasible action of a `Window` state and its transition row.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionEntry {
    /// Descriptor for canonical actions; `None` in exhaustive mode.
    pub tag: Option<ActionTag>,
    pub next: Vec<(u32, f64)>,
}

/// Where a greedy step out of a window-complete state lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Interior(u32),
    Exit(u32),
}

/// Window-complete state under the fixed greedy action.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorNode {
    pub channel: usize,
    /// Outcome index for each number of good packets `n = 0..=N`.
    pub by_n: Vec<u16>,
    /// `targets[outcome][next channel]`, `None` where the step has probability 0.
    pub targets: Vec<Vec<Option<Target>>>,
}

/// The greedy chain on window-complete states, started from every boundary state.
#[derive(Debug, Clone, Default)]
pub struct InteriorChain {
    pub index: StateIndex,
    pub nodes: Vec<InteriorNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceManifest {
    pub profile: String,
    pub channel: String,
    pub config: String,
    pub states: usize,
    pub hash: String,
}

#[derive(Debug, Clone)]
pub struct StateSpace {
    pub index: StateIndex,
    pub part: Vec<Part>,
    /// Feasible actions of `Window` states in descriptor order; empty for `Boundary`.
    pub actions: Vec<Vec<ActionEntry>>,
    /// Distortion of the frame displayed in each state.
    pub cost: Vec<f64>,
    /// `Boundary` states in index order.
    pub boundary: Vec<usize>,
    pub interior: InteriorChain,
    pub start: usize,
    pub config: SpaceConfig,
    pub manifest: SpaceManifest,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn window_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.part[i] == Part::Window)
    }

    pub fn num_window_states(&self) -> usize {
        self.window_states().count()
    }

    /// Number of transition entries over all state-action pairs.
    pub fn num_transitions(&self) -> usize {
        self.actions.iter().flatten().map(|a| a.next.len()).sum()
    }
}

fn in_window(profile: &StreamProfile, s: &SystemState) -> bool {
    !s.buffer.window_complete(profile)
}

struct Expanded {
    cost: f64,
    actions: Vec<(Option<ActionTag>, Vec<(SystemState, f64)>)>,
}

fn expand_window(
    s: &SystemState,
    profile: &StreamProfile,
    channel: &ChannelModel,
    cfg: &SpaceConfig,
) -> Result<Expanded> {
    let cost = DistortionContext::new(profile).displayed(&s.buffer);
    let acts = feasible_actions(s, profile, &cfg.buffer, channel, cfg.mode)?;
    let mut actions = Vec::with_capacity(acts.len());
    for a in acts {
        let next = transition_distribution(s, &a, profile, &cfg.buffer, channel, Phase::Steady)?;
        actions.push((a.tag, next));
    }
    Ok(Expanded { cost, actions })
}

/// Greedy step out of a window-complete state: outcome per `n` and the
/// distinct outcomes (`None` where the outcome has probability 0).
pub(crate) fn greedy_outcomes(
    s: &SystemState,
    profile: &StreamProfile,
    buffer: &BufferConfig,
    channel: &ChannelModel,
) -> Result<(Vec<u16>, Vec<Option<BufferState>>)> {
    let advanced = s.buffer.advance(profile);
    let view = view_after_playout(&advanced, s.channel, profile, buffer, channel);
    let action: Action = view.greedy();
    let chan = &channel.states[s.channel];
    let mut by_n = Vec::with_capacity(chan.packets_per_slot as usize + 1);
    let mut ks: Vec<usize> = Vec::new();
    for n in 0..=chan.packets_per_slot {
        let k = delivered_units(&view, &action, chan.capacity_bits(n));
        if ks.last() != Some(&k) {
            ks.push(k);
        }
        by_n.push((ks.len() - 1) as u16);
    }
    let masses = outcome_masses(&by_n, channel, s.channel);
    let outcomes = ks
        .iter()
        .zip(masses)
        .map(|(&k, m)| if m > 0.0 { receive_prefix(&view, &action, k).map(Some) } else { Ok(None) })
        .collect::<Result<Vec<_>>>()?;
    Ok((by_n, outcomes))
}

/// Probability of each outcome of [`greedy_outcomes`] in channel state `c`.
pub(crate) fn outcome_masses(by_n: &[u16], channel: &ChannelModel, c: usize) -> Vec<f64> {
    let chan = &channel.states[c];
    let mut m = vec![0.0; by_n.iter().map(|&o| o as usize + 1).max().unwrap_or(0)];
    for (n, &o) in by_n.iter().enumerate() {
        m[o as usize] += binomial_pmf(chan.packets_per_slot, n as u32, chan.packet_error);
    }
    m
}

/// Breadth-first closure of the simplified system from `start`.
pub fn enumerate_states(
    profile: &StreamProfile,
    channel: &ChannelModel,
    cfg: &SpaceConfig,
    start: &SystemState,
    exec: Exec,
) -> Result<StateSpace> {
    cfg.buffer.validate(profile)?;
    start.buffer.validate(profile, &cfg.buffer)?;
    if start.channel >= channel.num_states() {
        return Err(Error::InvalidState(format!("start channel {} out of range", start.channel)));
    }

    let mut index = StateIndex::new();
    let mut part: Vec<Part> = Vec::new();
    let mut actions: Vec<Vec<ActionEntry>> = Vec::new();
    let mut cost: Vec<f64> = Vec::new();
    let mut interior = InteriorChain::default();

    let mut frontier_w: Vec<usize> = Vec::new();
    let mut frontier_b: Vec<usize> = Vec::new();

    // Interns a state of the simplified system; boundary states also seed the interior chain.
    let add = |s: SystemState,
                   index: &mut StateIndex,
                   part: &mut Vec<Part>,
                   interior: &mut InteriorChain,
                   fw: &mut Vec<usize>,
                   fb: &mut Vec<usize>|
     -> Result<usize> {
        let w = in_window(profile, &s);
        let (i, new) = index.insert(s.clone());
        if new {
            if index.len() > cfg.max_states {
                return Err(Error::StateBudgetExceeded { reached: index.len(), budget: cfg.max_states });
            }
            if w {
                part.push(Part::Window);
                fw.push(i);
            } else {
                part.push(Part::Boundary);
                let (j, inew) = interior.index.insert(s);
                if inew {
                    fb.push(j);
                }
            }
        }
        Ok(i)
    };

    let start_idx = add(start.clone(), &mut index, &mut part, &mut interior, &mut frontier_w, &mut frontier_b)?;

    while !frontier_w.is_empty() || !frontier_b.is_empty() {
        let batch = std::mem::take(&mut frontier_w);
        let states: Vec<SystemState> = batch.iter().map(|&i| index.states()[i].clone()).collect();
        let expanded = exec.map(&states, |s| expand_window(s, profile, channel, cfg));
        for (&i, e) in batch.iter().zip(expanded) {
            let e = e?;
            if actions.len() <= i {
                actions.resize(i + 1, Vec::new());
                cost.resize(i + 1, f64::NAN);
            }
            cost[i] = e.cost;
            let mut entries = Vec::with_capacity(e.actions.len());
            for (tag, next) in e.actions {
                let mut row = Vec::with_capacity(next.len());
                for (s2, p) in next {
                    let j = add(s2, &mut index, &mut part, &mut interior, &mut frontier_w, &mut frontier_b)?;
                    row.push((j as u32, p));
                }
                entries.push(ActionEntry { tag, next: row });
            }
            actions[i] = entries;
        }

        let batch = std::mem::take(&mut frontier_b);
        let states: Vec<SystemState> = batch.iter().map(|&j| interior.index.states()[j].clone()).collect();
        let expanded = exec.map(&states, |s| greedy_outcomes(s, profile, &cfg.buffer, channel));
        for ((&j, s), e) in batch.iter().zip(&states).zip(expanded) {
            let (by_n, outcomes) = e?;
            let mut targets = Vec::with_capacity(outcomes.len());
            for b in outcomes {
                let mut row = Vec::with_capacity(channel.num_states());
                let Some(b) = b else {
                    targets.push(vec![None; channel.num_states()]);
                    continue;
                };
                for (c2, &pc) in channel.transition[s.channel].iter().enumerate() {
                    if pc <= 0.0 {
                        row.push(None);
                        continue;
                    }
                    let s2 = SystemState::new(c2, b.clone());
                    let t = if in_window(profile, &s2) {
                        let i = add(s2, &mut index, &mut part, &mut interior, &mut frontier_w, &mut frontier_b)?;
                        Target::Exit(i as u32)
                    } else {
                        let (k, new) = interior.index.insert(s2);
                        if new {
                            if interior.index.len() > cfg.max_states {
                                return Err(Error::StateBudgetExceeded {
                                    reached: interior.index.len(),
                                    budget: cfg.max_states,
                                });
                            }
                            frontier_b.push(k);
                        }
                        Target::Interior(k as u32)
                    };
                    row.push(Some(t));
                }
                targets.push(row);
            }
            if interior.nodes.len() <= j {
                interior.nodes.resize(j + 1, InteriorNode { channel: 0, by_n: Vec::new(), targets: Vec::new() });
            }
            interior.nodes[j] = InteriorNode { channel: s.channel, by_n, targets };
        }
    }

    let n = index.len();
    actions.resize(n, Vec::new());
    cost.resize(n, f64::NAN);
    let mut ctx = DistortionContext::new(profile);
    let mut boundary = Vec::new();
    for i in 0..n {
        if part[i] == Part::Boundary {
            cost[i] = ctx.displayed(&index.states()[i].buffer);
            boundary.push(i);
        }
    }

    let manifest = SpaceManifest {
        profile: hash_json(profile),
        channel: channel.content_hash(),
        config: hash_json(cfg),
        states: n,
        hash: hash_json(&(hash_json(profile), channel.content_hash(), hash_json(cfg), index.states())),
    };
    Ok(StateSpace { index, part, actions, cost, boundary, interior, start: start_idx, config: *cfg, manifest })
}
