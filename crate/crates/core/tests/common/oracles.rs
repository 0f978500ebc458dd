//! Independent reference implementations used only by tests.

use svc_sched::stream::{FrameType, StreamProfile};

/// Dense tableau simplex for `max c·x` s.t. `A x ≤ b`, `x ≥ 0`, `b ≥ 0`,
/// with Bland's rule.
pub fn simplex_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        let Some(col) = (0..n + m).find(|&j| t[m][j] < -1e-12) else { break };
        let mut row = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][col] > 1e-12 {
                let ratio = t[i][width - 1] / t[i][col];
                if ratio < best - 1e-15 || (ratio <= best + 1e-15 && row.is_some_and(|r: usize| basis[i] < basis[r])) {
                    best = ratio;
                    row = Some(i);
                }
            }
        }
        let r = row.expect("bounded LP");
        let piv = t[r][col];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..=m {
            if i != r && t[i][col] != 0.0 {
                let f = t[i][col];
                for j in 0..width {
                    t[i][j] -= f * t[r][j];
                }
            }
        }
        basis[r] = col;
    }
    t[m][width - 1]
}

fn weights_and_envelopes(p: &StreamProfile) -> (Vec<f64>, Vec<Vec<(f64, f64)>>) {
    let counts = p.type_counts();
    let w = counts.iter().map(|&c| c as f64 / p.f_intra as f64).collect();
    let env = (0..counts.len()).map(|k| p.convex_envelope(FrameType::from_index(k)).knots).collect();
    (w, env)
}

/// Bound by linear programming over envelope segment fills.
pub fn lp_bound(p: &StreamProfile, r_avg: f64) -> f64 {
    let (w, env) = weights_and_envelopes(p);
    let mut c = Vec::new();
    let mut seg_len = Vec::new();
    let mut budget_row = Vec::new();
    let mut base = 0.0;
    for (k, knots) in env.iter().enumerate() {
        base += w[k] * knots[0].1;
        for s in knots.windows(2) {
            let len = s[1].0 - s[0].0;
            let slope = (s[1].1 - s[0].1) / len;
            c.push(-w[k] * slope);
            seg_len.push(len);
            budget_row.push(w[k]);
        }
    }
    let n = c.len();
    let mut a = vec![budget_row];
    let mut b = vec![r_avg];
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        a.push(row);
        b.push(seg_len[j]);
    }
    base - simplex_max(&a, &b, &c)
}

fn eval(knots: &[(f64, f64)], z: f64) -> f64 {
    if z <= knots[0].0 {
        return knots[0].1;
    }
    for s in knots.windows(2) {
        if z <= s[1].0 {
            return s[0].1 + (s[1].1 - s[0].1) * (z - s[0].0) / (s[1].0 - s[0].0);
        }
    }
    knots[knots.len() - 1].1
}

/// Search over the lattice of per-type allocations on the 8-bit grid that
/// can be optimal: every type at one of its envelope knots (all multiples of
/// 8 bits) except one free type that takes whatever budget remains.
pub fn lattice_bound(p: &StreamProfile, r_avg: f64) -> f64 {
    let (w, env) = weights_and_envelopes(p);
    for knots in &env {
        for &(z, _) in knots {
            assert_eq!(z % 8.0, 0.0, "knots lie on the 8-bit grid");
        }
    }
    let kk = env.len();
    let mut best = f64::INFINITY;
    for free in 0..kk {
        let others: Vec<usize> = (0..kk).filter(|&k| k != free).collect();
        let mut idx = vec![0usize; others.len()];
        loop {
            let spent: f64 = others.iter().zip(&idx).map(|(&k, &i)| w[k] * env[k][i].0).sum();
            if spent <= r_avg + 1e-9 {
                let max_free = env[free].last().unwrap().0;
                let z_free = ((r_avg - spent) / w[free]).clamp(0.0, max_free);
                let total = others.iter().zip(&idx).map(|(&k, &i)| w[k] * env[k][i].1).sum::<f64>()
                    + w[free] * eval(&env[free], z_free);
                best = best.min(total);
            }
            // advance the odometer over knot choices
            let mut d = 0;
            while d < idx.len() {
                idx[d] += 1;
                if idx[d] < env[others[d]].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == idx.len() {
                break;
            }
        }
    }
    best
}
