//! Distortion lower bound from the convex envelopes of the frame types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{FrameType, StreamProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    /// Lowest achievable mean MSE per frame.
    pub lower_bound: f64,
    /// Bits per frame allocated to each frame type (indexed like `FrameType::index`).
    pub allocation: Vec<f64>,
    /// Mean bits per frame actually used.
    pub budget_used: f64,
}

/// Minimises `Σ_k (F^k/F^intra)·ď^k(z^k)` subject to `Σ_k (F^k/F^intra)·z^k ≤ r_avg`
/// by spending the budget on envelope segments steepest first.
pub fn distortion_lower_bound(profile: &StreamProfile, r_avg: f64) -> Result<BoundResult> {
    if !(r_avg >= 0.0) || !r_avg.is_finite() {
        return Err(Error::Domain(format!("r_avg = {r_avg} must be a finite non-negative rate")));
    }
    let counts = profile.type_counts();
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / profile.f_intra as f64).collect();
    let envelopes: Vec<_> = (0..counts.len()).map(|k| profile.convex_envelope(FrameType::from_index(k))).collect();

    // (slope, type, segment length)
    let mut segments: Vec<(f64, usize, f64)> = Vec::new();
    for (k, env) in envelopes.iter().enumerate() {
        if counts[k] == 0 {
            continue;
        }
        for w in env.knots.windows(2) {
            let len = w[1].0 - w[0].0;
            segments.push(((w[1].1 - w[0].1) / len, k, len));
        }
    }
    segments.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut z = vec![0.0; counts.len()];
    let mut left = r_avg;
    for (_, k, len) in segments {
        if left <= 0.0 {
            break;
        }
        let cost = weights[k] * len;
        if cost <= left {
            z[k] += len;
            left -= cost;
        } else {
            z[k] += left / weights[k];
            left = 0.0;
        }
    }
    let lower_bound = (0..counts.len()).map(|k| weights[k] * envelopes[k].eval(z[k])).sum();
    let budget_used = (0..counts.len()).map(|k| weights[k] * z[k]).sum();
    Ok(BoundResult { lower_bound, allocation: z, budget_used })
}
