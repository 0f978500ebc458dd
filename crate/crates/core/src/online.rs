//! Online heuristic: forecast capacity, choose a layer target, and split the
//! slot budget between the current intra period and the next I frame.

use serde::{Deserialize, Serialize};

use crate::buffer::{Action, View};
use crate::channel::{Ar1Model, ChannelState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineParams {
    pub ar1: Ar1Model,
    /// Whether bits may be split towards the next I frame.
    pub i_preemption: bool,
}

/// Everything the heuristic computed for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineDecision {
    pub r_hat: f64,
    pub forecast: f64,
    pub layers: u8,
    pub omega: f64,
    pub bits_to_i: f64,
    pub bits_to_rest: f64,
    pub action: Action,
}

fn missing_bits(view: &View<'_>, f: i64, layers: u8) -> u64 {
    let k = view.frames.frame_type(f);
    let have = view.frames.count(f);
    (have..layers).map(|l| view.profile().unit_size(k, l as usize)).sum()
}

/// Missing bits in the first `layers` layers of the next `zeta` undecoded frames.
pub fn gamma(view: &View<'_>, layers: usize, zeta: usize) -> Result<f64> {
    let q = view.profile().quality_layers();
    if layers == q + 1 {
        return Ok(f64::INFINITY);
    }
    if layers == 0 || layers > q + 1 {
        return Err(Error::LayerOutOfRange { layers, max: q });
    }
    let start = view.cutoff;
    Ok((start..start + zeta as i64).map(|f| missing_bits(view, f, layers as u8)).sum::<u64>() as f64)
}

/// Layer target from `Γ(1..=L+1)` and the forecast `g`.
pub fn select_layers(gammas: &[f64], g: f64) -> u8 {
    for (i, &gm) in gammas.iter().enumerate() {
        if g < gm {
            return i.max(1) as u8;
        }
    }
    gammas.len() as u8
}

/// Budget split `(bits_to_i, bits_to_rest, omega)`.
pub fn split_budget(psi_cur: f64, psi_i: f64, r_now: f64, i_preemption: bool) -> (f64, f64, f64) {
    if !i_preemption {
        return (0.0, r_now, 0.0);
    }
    let total = psi_cur + psi_i;
    let omega = if total > 0.0 { psi_i / total } else { 0.0 };
    let to_i = (omega * r_now).min(psi_i);
    (to_i, r_now - to_i, omega)
}

/// Earliest undecoded I frame.
fn next_i_frame(view: &View<'_>) -> i64 {
    let fi = view.profile().f_intra as i64;
    let first = view.frames.p0 + view.cutoff;
    let pos = (first + fi - 1).div_euclid(fi) * fi;
    pos - view.frames.p0
}

/// `(Ψ^cur, Ψ^I)` for the first `layers` layers.
pub fn psi(view: &View<'_>, layers: u8) -> (f64, f64) {
    let i = next_i_frame(view);
    let cur: u64 = (view.cutoff..i).map(|f| missing_bits(view, f, layers)).sum();
    let schedulable = view.window_phase_frames().contains(&i);
    let psi_i = if schedulable { missing_bits(view, i, layers) } else { 0 };
    (cur as f64, psi_i as f64)
}

pub fn online_schedule(view: &View<'_>, chan: &ChannelState, params: &OnlineParams) -> Result<OnlineDecision> {
    let q = view.profile().quality_layers();
    let r_hat = chan.throughput();
    let forecast = params.ar1.forecast_capacity(r_hat);
    let gammas = (1..=q).map(|l| gamma(view, l, params.ar1.zeta)).collect::<Result<Vec<_>>>()?;
    let layers = select_layers(&gammas, forecast);
    let (psi_cur, psi_i) = psi(view, layers);
    let (bits_to_i, bits_to_rest, omega) = split_budget(psi_cur, psi_i, r_hat, params.i_preemption);

    let action = Action { units: view.schedule(layers, bits_to_i), tag: None };
    Ok(OnlineDecision { r_hat, forecast, layers, omega, bits_to_i, bits_to_rest, action })
}
