use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::buffer::{Action, ActionTag, BufferState, SystemState, View};
use crate::channel::{ChannelModel, ChannelState};
use crate::error::{Error, Result};
use crate::manifest::hash_json;
use crate::mdp::PolicyFile;
use crate::online::{online_schedule, OnlineParams};
use crate::stream::StreamProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Mdp,
    Online,
    OnlineNoIsplit,
    Sequential,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 4] =
        [SchedulerKind::Mdp, SchedulerKind::Online, SchedulerKind::OnlineNoIsplit, SchedulerKind::Sequential];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Mdp => "mdp",
            SchedulerKind::Online => "online",
            SchedulerKind::OnlineNoIsplit => "online_no_isplit",
            SchedulerKind::Sequential => "sequential",
        }
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchedulerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheduler '{s}' (mdp, online, online_no_isplit, sequential)")))
    }
}

/// Solved policy prepared for lookups on the original, uncapped system.
#[derive(Debug, Clone)]
pub struct MdpScheduler {
    pub table: HashMap<SystemState, ActionTag>,
    pub window: usize,
    /// Post counts above this are folded onto it before lookup.
    pub cap: u32,
}

impl MdpScheduler {
    pub fn from_policy(policy: &PolicyFile, profile: &StreamProfile, channel: &ChannelModel) -> Result<Self> {
        policy.check_inputs(&hash_json(profile), &channel.content_hash())?;
        Ok(Self { table: policy.table()?, window: policy.space.buffer.window, cap: policy.space.buffer.cap() })
    }

    fn project(&self, s: &SystemState) -> SystemState {
        let post = s.buffer.post.iter().map(|&b| b.min(self.cap)).collect();
        SystemState::new(s.channel, BufferState { post, ..s.buffer.clone() })
    }
}

#[derive(Debug, Clone)]
pub enum Scheduler {
    Mdp(MdpScheduler),
    Online(OnlineParams),
    /// Every layer of each frame before the next, in display order.
    Sequential,
}

/// What a scheduler chose for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub summary: String,
    /// The MDP policy had no entry for the state.
    pub fallback: bool,
}

impl Scheduler {
    pub fn kind(&self) -> SchedulerKind {
        match self {
            Scheduler::Mdp(_) => SchedulerKind::Mdp,
            Scheduler::Online(p) if p.i_preemption => SchedulerKind::Online,
            Scheduler::Online(_) => SchedulerKind::OnlineNoIsplit,
            Scheduler::Sequential => SchedulerKind::Sequential,
        }
    }

    /// Action for pre-display state `s`, given the transmitter's `view` of it.
    pub fn decide(&self, s: &SystemState, view: &View<'_>, chan: &ChannelState, startup: bool) -> Result<Decision> {
        let greedy = |fallback| Decision { action: view.greedy(), summary: "greedy".into(), fallback };
        match self {
            Scheduler::Sequential => Ok(greedy(false)),
            Scheduler::Online(params) => {
                let d = online_schedule(view, chan, params)?;
                Ok(Decision { action: d.action, summary: format!("L{}|I{:.0}", d.layers, d.bits_to_i), fallback: false })
            }
            Scheduler::Mdp(m) => {
                if startup || s.buffer.window_complete(view.profile()) {
                    return Ok(greedy(false));
                }
                match m.table.get(&m.project(s)) {
                    Some(&tag) => Ok(Decision {
                        action: view.canonical(tag),
                        summary: format!("L{}{}", tag.layers, if tag.i_first { "+I" } else { "" }),
                        fallback: false,
                    }),
                    None => Ok(greedy(true)),
                }
            }
        }
    }
}
