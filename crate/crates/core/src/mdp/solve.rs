use serde::{Deserialize, Serialize};

use super::boundary::BoundaryDynamics;
use super::space::{Part, StateSpace};
use crate::buffer::ActionTag;
use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Span tolerance on successive value differences.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Aperiodicity step of the data transformation, below the shortest sojourn.
    pub tau: f64,
    pub exec: Exec,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { epsilon: 1e-7, max_iters: 100_000, tau: 0.5, exec: Exec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub manifest: String,
    /// Chosen entry of `StateSpace::actions[s]` for window states.
    pub policy: Vec<Option<u32>>,
    /// Average distortion per slot.
    pub lambda: f64,
    /// Relative values with `h[start] = 0`.
    pub h: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Span residuals of the last sweeps, oldest first.
    pub residual_tail: Vec<f64>,
}

impl SolveResult {
    pub fn tag(&self, space: &StateSpace, s: usize) -> Option<ActionTag> {
        self.policy[s].and_then(|k| space.actions[s][k as usize].tag)
    }
}

pub(crate) fn check_boundary(space: &StateSpace, boundary: &BoundaryDynamics) -> Result<()> {
    if boundary.manifest != space.manifest.hash {
        return Err(Error::ManifestMismatch { expected: space.manifest.hash.clone(), found: boundary.manifest.clone() });
    }
    Ok(())
}

fn check_costs(space: &StateSpace, costs: &[f64]) -> Result<()> {
    if costs.len() != space.len() || costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain(format!("expected {} finite state costs", space.len())));
    }
    Ok(())
}

fn expect(row: &[(u32, f64)], h: &[f64]) -> f64 {
    row.iter().map(|&(j, p)| p * h[j as usize]).sum()
}

/// First action within a relative tolerance of the minimum.
fn argmin(qs: &[f64]) -> (usize, f64) {
    let best = qs.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + best.abs());
    let k = qs.iter().position(|&q| q <= best + tol).unwrap_or(0);
    (k, best)
}

/// Relative value iteration on the data-transformed semi-MDP.
pub fn solve_average_cost(
    space: &StateSpace,
    boundary: &BoundaryDynamics,
    costs: &[f64],
    opts: &SolveOptions,
) -> Result<SolveResult> {
    check_boundary(space, boundary)?;
    check_costs(space, costs)?;
    if !(opts.tau > 0.0 && opts.tau < 1.0) {
        return Err(Error::Domain(format!("tau = {} must lie in (0, 1)", opts.tau)));
    }
    let n = space.len();
    let tau = opts.tau;
    let reentry: Vec<Vec<(u32, f64)>> =
        boundary.reentry.iter().map(|r| r.iter().map(|&(j, p)| (j as u32, p)).collect()).collect();
    let slot: Vec<usize> = {
        let mut v = vec![usize::MAX; n];
        for (b, &i) in boundary.states.iter().enumerate() {
            v[i] = b;
        }
        v
    };

    let sweep = |h: &[f64]| -> Vec<f64> {
        opts.exec.map_range(n, |s| match space.part[s] {
            Part::Window => {
                let best = space.actions[s].iter().map(|a| expect(&a.next, h)).fold(f64::INFINITY, f64::min);
                costs[s] + tau * best + (1.0 - tau) * h[s]
            }
            Part::Boundary => {
                let b = slot[s];
                let w = tau / boundary.sojourn[b];
                costs[s] + w * expect(&reentry[b], h) + (1.0 - w) * h[s]
            }
        })
    };

    let mut h = vec![0.0; n];
    let mut tail: Vec<f64> = Vec::new();
    for it in 1..=opts.max_iters {
        let v = sweep(&h);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (a, b) in v.iter().zip(&h) {
            lo = lo.min(a - b);
            hi = hi.max(a - b);
        }
        let residual = hi - lo;
        if tail.len() == 10 {
            tail.remove(0);
        }
        tail.push(residual);
        if residual < opts.epsilon {
            let lambda = v[space.start] - h[space.start];
            let policy = (0..n)
                .map(|s| match space.part[s] {
                    Part::Window => {
                        let qs: Vec<f64> = space.actions[s].iter().map(|a| expect(&a.next, &h)).collect();
                        Some(argmin(&qs).0 as u32)
                    }
                    Part::Boundary => None,
                })
                .collect();
            let h = h.iter().map(|x| tau * x).collect();
            return Ok(SolveResult {
                manifest: space.manifest.hash.clone(),
                policy,
                lambda,
                h,
                iterations: it,
                residual,
                residual_tail: tail,
            });
        }
        let r = v[space.start];
        h = v.into_iter().map(|x| x - r).collect();
    }
    Err(Error::NotConverged { iterations: opts.max_iters, residual: tail.last().copied().unwrap_or(f64::NAN) })
}
