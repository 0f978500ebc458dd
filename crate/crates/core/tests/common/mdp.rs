//! Test-side MDP oracles: a depth-first state count, exact policy evaluation
//! by dense linear solves and policy iteration.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use svc_sched::buffer::{
    feasible_actions, transition_distribution, view_after_playout, BufferConfig, Phase, SystemState,
};
use svc_sched::channel::ChannelModel;
use svc_sched::mdp::{BoundaryDynamics, Part, SpaceConfig, StateSpace};
use svc_sched::stream::StreamProfile;

#[derive(Debug, Default)]
pub struct DfsCounts {
    pub window: usize,
    pub boundary: usize,
    pub interior: usize,
}

fn greedy_successors(
    s: &SystemState,
    p: &StreamProfile,
    buf: &BufferConfig,
    ch: &ChannelModel,
) -> Vec<SystemState> {
    let advanced = s.buffer.advance(p);
    let action = view_after_playout(&advanced, s.channel, p, buf, ch).greedy();
    transition_distribution(s, &action, p, buf, ch, Phase::Steady)
        .unwrap()
        .into_iter()
        .filter(|x| x.1 > 0.0)
        .map(|x| x.0)
        .collect()
}

/// Counts window-incomplete states, their window-complete successors, and the
/// window-complete states greedy play visits from those, by explicit DFS.
pub fn dfs_counts(p: &StreamProfile, ch: &ChannelModel, cfg: &SpaceConfig, start: &SystemState) -> DfsCounts {
    let buf = &cfg.buffer;
    let mut window: HashSet<SystemState> = HashSet::new();
    let mut boundary: HashSet<SystemState> = HashSet::new();
    let mut interior: HashSet<SystemState> = HashSet::new();
    // (state, reached from a window state)
    let mut stack = vec![start.clone()];
    window.insert(start.clone());
    let mut complete_stack: Vec<SystemState> = Vec::new();
    while !stack.is_empty() || !complete_stack.is_empty() {
        if let Some(s) = stack.pop() {
            for a in feasible_actions(&s, p, buf, ch, cfg.mode).unwrap() {
                for (t, q) in transition_distribution(&s, &a, p, buf, ch, Phase::Steady).unwrap() {
                    if q <= 0.0 {
                        continue;
                    }
                    if t.buffer.window_complete(p) {
                        if boundary.insert(t.clone()) && interior.insert(t.clone()) {
                            complete_stack.push(t);
                        }
                    } else if window.insert(t.clone()) {
                        stack.push(t);
                    }
                }
            }
        } else if let Some(s) = complete_stack.pop() {
            for t in greedy_successors(&s, p, buf, ch) {
                if t.buffer.window_complete(p) {
                    if interior.insert(t.clone()) {
                        complete_stack.push(t);
                    }
                } else if window.insert(t.clone()) {
                    stack.push(t);
                }
            }
        }
    }
    DfsCounts { window: window.len(), boundary: boundary.len(), interior: interior.len() }
}

/// Embedded-chain rows, costs per visit and holding times under `choice`
/// (one entry per window state, ignored elsewhere).
fn embedded(space: &StateSpace, bd: &BoundaryDynamics, choice: &[usize]) -> Vec<(Vec<(usize, f64)>, f64, f64)> {
    (0..space.len())
        .map(|s| match space.part[s] {
            Part::Window => {
                let row = space.actions[s][choice[s]].next.iter().map(|&(j, q)| (j as usize, q)).collect();
                (row, space.cost[s], 1.0)
            }
            Part::Boundary => {
                let b = bd.slot_of(s).unwrap();
                let t = bd.sojourn[b];
                (bd.reentry[b].clone(), space.cost[s] * t, t)
            }
        })
        .collect()
}

/// Gain and relative values of a stationary policy from
/// `h = C − g·T + P h`, `h[start] = 0`. `None` when the system is singular
/// (the policy is not unichain).
pub fn evaluate(space: &StateSpace, bd: &BoundaryDynamics, choice: &[usize]) -> Option<(f64, Vec<f64>)> {
    let n = space.len();
    let rows = embedded(space, bd, choice);
    let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for (i, (row, c, t)) in rows.iter().enumerate() {
        a[(i, i)] += 1.0;
        for &(j, q) in row {
            a[(i, j)] -= q;
        }
        a[(i, n)] = *t;
        rhs[i] = *c;
    }
    a[(n, space.start)] = 1.0;
    let x = a.lu().solve(&rhs)?;
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((x[n], x.iter().take(n).copied().collect()))
}

/// Howard policy iteration started from the first action everywhere.
pub fn policy_iteration(space: &StateSpace, bd: &BoundaryDynamics) -> (f64, Vec<usize>, usize) {
    let mut choice = vec![0usize; space.len()];
    for round in 1..=1000 {
        let (g, h) = evaluate(space, bd, &choice).expect("policy iteration stays unichain");
        let mut changed = false;
        for s in 0..space.len() {
            if space.part[s] != Part::Window {
                continue;
            }
            let q = |k: usize| space.actions[s][k].next.iter().map(|&(j, p)| p * h[j as usize]).sum::<f64>();
            let current = q(choice[s]);
            let (best_k, best) = (0..space.actions[s].len())
                .map(|k| (k, q(k)))
                .fold((choice[s], current), |acc, x| if x.1 < acc.1 { x } else { acc });
            if best < current - 1e-10 * (1.0 + current.abs()) {
                choice[s] = best_k;
                changed = true;
            }
        }
        if !changed {
            return (g, choice, round);
        }
    }
    panic!("policy iteration did not terminate");
}

/// Window states with more than one action.
pub fn decision_states(space: &StateSpace) -> Vec<usize> {
    (0..space.len()).filter(|&s| space.part[s] == Part::Window && space.actions[s].len() > 1).collect()
}

/// Minimum gain over every joint choice on `subset`, other states held at
/// `base`. Also returns how many of the joint choices were unichain.
pub fn enumerate_subset(space: &StateSpace, bd: &BoundaryDynamics, base: &[usize], subset: &[usize]) -> (f64, usize) {
    let radix: Vec<usize> = subset.iter().map(|&s| space.actions[s].len()).collect();
    let total: usize = radix.iter().product();
    let mut best = f64::INFINITY;
    let mut evaluated = 0;
    let mut choice = base.to_vec();
    for code in 0..total {
        let mut c = code;
        for (i, &s) in subset.iter().enumerate() {
            choice[s] = c % radix[i];
            c /= radix[i];
        }
        if let Some((g, _)) = evaluate(space, bd, &choice) {
            best = best.min(g);
            evaluated += 1;
        }
    }
    (best, evaluated)
}
