use nalgebra::{DMatrix, DVector};

use super::boundary::BoundaryDynamics;
use super::solve::check_boundary;
use super::space::{Part, StateSpace};
use crate::error::{Error, Result};

/// Largest recurrent class solved densely; bigger ones use power iteration.
const MAX_DENSE_CLASS: usize = 2500;

/// Embedded-chain rows and sojourn times under a fixed policy.
pub fn induced_chain(
    space: &StateSpace,
    boundary: &BoundaryDynamics,
    policy: &[Option<u32>],
) -> Result<(Vec<Vec<(usize, f64)>>, Vec<f64>)> {
    check_boundary(space, boundary)?;
    if policy.len() != space.len() {
        return Err(Error::Domain(format!("policy covers {} of {} states", policy.len(), space.len())));
    }
    let mut rows = Vec::with_capacity(space.len());
    let mut eta = Vec::with_capacity(space.len());
    for s in 0..space.len() {
        match space.part[s] {
            Part::Window => {
                let k = policy[s].ok_or_else(|| Error::Domain(format!("no action for window state {s}")))? as usize;
                let a = space.actions[s]
                    .get(k)
                    .ok_or_else(|| Error::Domain(format!("action {k} out of range in state {s}")))?;
                rows.push(a.next.iter().map(|&(j, p)| (j as usize, p)).collect());
                eta.push(1.0);
            }
            Part::Boundary => {
                let b = boundary.slot_of(s).ok_or(Error::StateNotInSpace)?;
                rows.push(boundary.reentry[b].clone());
                eta.push(boundary.sojourn[b]);
            }
        }
    }
    Ok((rows, eta))
}

/// Strongly connected components (iterative Kosaraju); returns the component id per node.
pub fn components(rows: &[Vec<(usize, f64)>]) -> (Vec<usize>, usize) {
    let n = rows.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some(&mut (v, ref mut e)) = stack.last_mut() {
            if let Some(&(w, _)) = rows[v].get(*e) {
                *e += 1;
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, r) in rows.iter().enumerate() {
        for &(w, _) in r {
            rev[w].push(v);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        let mut stack = vec![root];
        comp[root] = count;
        while let Some(v) = stack.pop() {
            for &w in &rev[v] {
                if comp[w] == usize::MAX {
                    comp[w] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

/// States of the unique closed class, or an error naming a second one.
pub fn recurrent_class(rows: &[Vec<(usize, f64)>]) -> Result<Vec<usize>> {
    let (comp, count) = components(rows);
    let mut closed = vec![true; count];
    for (v, r) in rows.iter().enumerate() {
        if r.iter().any(|&(w, p)| p > 0.0 && comp[w] != comp[v]) {
            closed[comp[v]] = false;
        }
    }
    let classes: Vec<usize> = (0..count).filter(|&c| closed[c]).collect();
    if classes.len() != 1 {
        let example = |c: usize| comp.iter().position(|&x| x == c).unwrap();
        return Err(Error::Reducible(format!(
            "{} closed classes; the class of state {} cannot reach the class of state {}",
            classes.len(),
            example(classes[1]),
            example(classes[0]),
        )));
    }
    Ok((0..rows.len()).filter(|&v| comp[v] == classes[0]).collect())
}

/// Stationary law of the embedded chain (zero outside the recurrent class).
pub fn stationary(rows: &[Vec<(usize, f64)>]) -> Result<Vec<f64>> {
    let class = recurrent_class(rows)?;
    let m = class.len();
    let mut local = vec![usize::MAX; rows.len()];
    for (k, &v) in class.iter().enumerate() {
        local[v] = k;
    }
    let pi_local = if m <= MAX_DENSE_CLASS {
        // πᵀ(P − I) = 0 with the last equation replaced by Σπ = 1
        let mut a = DMatrix::<f64>::zeros(m, m);
        for (k, &v) in class.iter().enumerate() {
            a[(k, k)] -= 1.0;
            for &(w, p) in &rows[v] {
                a[(local[w], k)] += p;
            }
        }
        for k in 0..m {
            a[(m - 1, k)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(m);
        b[m - 1] = 1.0;
        let x = a.lu().solve(&b).ok_or_else(|| Error::Reducible("singular stationary system".into()))?;
        x.iter().copied().collect::<Vec<_>>()
    } else {
        let mut pi = vec![1.0 / m as f64; m];
        let mut converged = false;
        for _ in 0..1_000_000 {
            let mut next: Vec<f64> = pi.iter().map(|x| 0.5 * x).collect();
            for (k, &v) in class.iter().enumerate() {
                for &(w, p) in &rows[v] {
                    next[local[w]] += 0.5 * pi[k] * p;
                }
            }
            let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if change < 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NotConverged { iterations: 1_000_000, residual: f64::NAN });
        }
        pi
    };
    let mut pi = vec![0.0; rows.len()];
    for (k, &v) in class.iter().enumerate() {
        pi[v] = pi_local[k];
    }
    Ok(pi)
}

/// Time-average distortion `Σπ·d·η / Σπ·η` of a deterministic policy.
pub fn evaluate_policy(
    space: &StateSpace,
    boundary: &BoundaryDynamics,
    policy: &[Option<u32>],
    costs: &[f64],
) -> Result<f64> {
    let (rows, eta) = induced_chain(space, boundary, policy)?;
    let pi = stationary(&rows)?;
    let num: f64 = (0..rows.len()).map(|s| pi[s] * costs[s] * eta[s]).sum();
    let den: f64 = (0..rows.len()).map(|s| pi[s] * eta[s]).sum();
    Ok(num / den)
}
