use nalgebra::DMatrix;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::space::{outcome_masses, StateSpace, Target};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::exec::{task_rng, Exec};

/// Largest interior chain solved densely.
pub const MAX_DENSE_INTERIOR: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMethod {
    MonteCarlo { samples: usize, seed: u64, step_cap: usize },
    TruncatedSolve,
}

impl BoundaryMethod {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        BoundaryMethod::MonteCarlo { samples, seed, step_cap: 10_000 }
    }
}

/// Sojourn times and re-entry laws of the boundary states, aligned with
/// `StateSpace::boundary`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDynamics {
    pub manifest: String,
    pub method: BoundaryMethod,
    pub states: Vec<usize>,
    pub sojourn: Vec<f64>,
    /// Standard errors; zero for the exact solve.
    pub sojourn_se: Vec<f64>,
    /// Re-entry probabilities over window states, sorted by state index.
    pub reentry: Vec<Vec<(usize, f64)>>,
    pub reentry_se: Vec<Vec<f64>>,
}

impl BoundaryDynamics {
    /// Position of space state `i` in the boundary arrays.
    pub fn slot_of(&self, i: usize) -> Option<usize> {
        self.states.binary_search(&i).ok()
    }
}

pub fn boundary_dynamics(
    space: &StateSpace,
    channel: &ChannelModel,
    method: BoundaryMethod,
    exec: Exec,
) -> Result<BoundaryDynamics> {
    let found = channel.content_hash();
    if found != space.manifest.channel {
        return Err(Error::ManifestMismatch { expected: space.manifest.channel.clone(), found });
    }
    let per_state = match method {
        BoundaryMethod::MonteCarlo { samples, seed, step_cap } => {
            if samples == 0 {
                return Err(Error::Domain("monte_carlo needs at least one sample".into()));
            }
            exec.map_range(space.boundary.len(), |b| simulate(space, channel, b, samples, seed, step_cap))
                .into_iter()
                .collect::<Result<Vec<_>>>()?
        }
        BoundaryMethod::TruncatedSolve => truncated_solve(space, channel)?,
    };
    let mut out = BoundaryDynamics {
        manifest: space.manifest.hash.clone(),
        method,
        states: space.boundary.clone(),
        sojourn: Vec::new(),
        sojourn_se: Vec::new(),
        reentry: Vec::new(),
        reentry_se: Vec::new(),
    };
    for e in per_state {
        out.sojourn.push(e.sojourn);
        out.sojourn_se.push(e.sojourn_se);
        out.reentry.push(e.reentry);
        out.reentry_se.push(e.reentry_se);
    }
    Ok(out)
}

struct Entry {
    sojourn: f64,
    sojourn_se: f64,
    reentry: Vec<(usize, f64)>,
    reentry_se: Vec<f64>,
}

fn interior_of(space: &StateSpace, b: usize) -> usize {
    let s = &space.index.states()[space.boundary[b]];
    space.interior.index.get(s).expect("boundary states seed the interior chain")
}

fn simulate(
    space: &StateSpace,
    channel: &ChannelModel,
    b: usize,
    samples: usize,
    seed: u64,
    step_cap: usize,
) -> Result<Entry> {
    let mut rng = task_rng(seed, b as u64);
    let binomials: Vec<Binomial> = channel
        .states
        .iter()
        .map(|c| Binomial::new(c.packets_per_slot as u64, 1.0 - c.packet_error).expect("packet error in [0, 1]"))
        .collect();
    let first = interior_of(space, b);
    let mut exits: std::collections::BTreeMap<usize, u64> = Default::default();
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let mut node = first;
        let mut steps = 0usize;
        let exit = loop {
            steps += 1;
            if steps > step_cap {
                return Err(Error::NonReturning { state: space.boundary[b], cap: step_cap });
            }
            let nd = &space.interior.nodes[node];
            let n = binomials[nd.channel].sample(&mut rng) as usize;
            let c2 = channel.sample_next(nd.channel, &mut rng);
            match nd.targets[nd.by_n[n] as usize][c2].expect("sampled channel step has positive mass") {
                Target::Interior(k) => node = k as usize,
                Target::Exit(i) => break i as usize,
            }
        };
        *exits.entry(exit).or_default() += 1;
        sum += steps as f64;
        sum_sq += (steps * steps) as f64;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = if samples > 1 { (sum_sq - m * mean * mean).max(0.0) / (m - 1.0) } else { 0.0 };
    let reentry: Vec<(usize, f64)> = exits.into_iter().map(|(i, c)| (i, c as f64 / m)).collect();
    let reentry_se = reentry.iter().map(|&(_, p)| (p * (1.0 - p) / m).sqrt()).collect();
    Ok(Entry { sojourn: mean, sojourn_se: (var / m).sqrt(), reentry, reentry_se })
}

/// Successor masses of interior node `k`: `(interior, exit)` lists.
fn node_rows(space: &StateSpace, channel: &ChannelModel, k: usize) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    let nd = &space.interior.nodes[k];
    let masses = outcome_masses(&nd.by_n, channel, nd.channel);
    let (mut inner, mut exit) = (Vec::new(), Vec::new());
    for (o, row) in nd.targets.iter().enumerate() {
        for (c2, t) in row.iter().enumerate() {
            let p = masses[o] * channel.transition[nd.channel][c2];
            match t {
                Some(Target::Interior(j)) if p > 0.0 => inner.push((*j as usize, p)),
                Some(Target::Exit(i)) if p > 0.0 => exit.push((*i as usize, p)),
                _ => {}
            }
        }
    }
    (inner, exit)
}

fn truncated_solve(space: &StateSpace, channel: &ChannelModel) -> Result<Vec<Entry>> {
    let m = space.interior.nodes.len();
    if m > MAX_DENSE_INTERIOR {
        return Err(Error::StateBudgetExceeded { reached: m, budget: MAX_DENSE_INTERIOR });
    }
    let rows: Vec<_> = (0..m).map(|k| node_rows(space, channel, k)).collect();
    check_returning(space, &rows)?;

    let mut exit_ids: Vec<usize> = rows.iter().flat_map(|(_, e)| e.iter().map(|x| x.0)).collect();
    exit_ids.sort_unstable();
    exit_ids.dedup();
    let col = |i: usize| exit_ids.binary_search(&i).unwrap();

    let mut a = DMatrix::<f64>::identity(m, m);
    let mut rhs = DMatrix::<f64>::zeros(m, exit_ids.len() + 1);
    for (k, (inner, exit)) in rows.iter().enumerate() {
        for &(j, p) in inner {
            a[(k, j)] -= p;
        }
        rhs[(k, 0)] = 1.0;
        for &(i, p) in exit {
            rhs[(k, col(i) + 1)] += p;
        }
    }
    let sol = a.lu().solve(&rhs).ok_or_else(|| Error::NonReturning { state: space.boundary[0], cap: m })?;
    let mut out = Vec::with_capacity(space.boundary.len());
    for b in 0..space.boundary.len() {
        let k = interior_of(space, b);
        let reentry: Vec<(usize, f64)> = exit_ids
            .iter()
            .enumerate()
            .map(|(c, &i)| (i, sol[(k, c + 1)]))
            .filter(|&(_, p)| p > 1e-15)
            .collect();
        let se = vec![0.0; reentry.len()];
        out.push(Entry { sojourn: sol[(k, 0)], sojourn_se: 0.0, reentry, reentry_se: se });
    }
    Ok(out)
}

/// Errors if some boundary state can reach interior nodes with no path back to the window set.
fn check_returning(space: &StateSpace, rows: &[(Vec<(usize, f64)>, Vec<(usize, f64)>)]) -> Result<()> {
    let m = rows.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut returns = vec![false; m];
    let mut stack = Vec::new();
    for (k, (inner, exit)) in rows.iter().enumerate() {
        for &(j, _) in inner {
            preds[j].push(k);
        }
        if !exit.is_empty() {
            returns[k] = true;
            stack.push(k);
        }
    }
    while let Some(k) = stack.pop() {
        for &p in &preds[k] {
            if !returns[p] {
                returns[p] = true;
                stack.push(p);
            }
        }
    }
    if returns.iter().all(|&r| r) {
        return Ok(());
    }
    for b in 0..space.boundary.len() {
        let mut seen = vec![false; m];
        let mut stack = vec![interior_of(space, b)];
        while let Some(k) = stack.pop() {
            if std::mem::replace(&mut seen[k], true) {
                continue;
            }
            if !returns[k] {
                return Err(Error::NonReturning { state: space.boundary[b], cap: m });
            }
            stack.extend(rows[k].0.iter().map(|x| x.0));
        }
    }
    Ok(())
}
