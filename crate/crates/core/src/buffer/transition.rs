use super::action::{Action, Phase, Tracker, View};
use super::state::{BufferConfig, BufferState, SystemState};
use crate::channel::{ChannelModel, ChannelState};
use crate::error::{Error, Result};
use crate::stream::StreamProfile;

/// Probability of `n` successes in `trials` packets with loss probability `y`.
pub fn binomial_pmf(trials: u32, n: u32, y: f64) -> f64 {
    let mut c = 1.0f64;
    for i in 0..n.min(trials - n) {
        c = c * (trials - i) as f64 / (i + 1) as f64;
    }
    c * (1.0 - y).powi(n as i32) * y.powi((trials - n) as i32)
}

/// Number of leading units that complete when `bits` are delivered.
pub fn delivered_units(view: &View<'_>, action: &Action, bits: u64) -> usize {
    let mut cum = 0u64;
    for (i, &u) in action.units.iter().enumerate() {
        cum += view.unit_bits(u);
        if cum > bits {
            return i;
        }
    }
    action.units.len()
}

/// Buffer after the first `k` units of `action` are received.
pub fn receive_prefix(view: &View<'_>, action: &Action, k: usize) -> Result<BufferState> {
    let mut tracker = Tracker::new(view);
    for &u in &action.units[..k] {
        tracker.check(view, u, false)?;
        tracker.receive(view, u);
    }
    Ok(tracker.into_state(view.state()))
}

/// Receives the maximal prefix of `action` fitting in `n` successful packets.
pub fn apply_delivery(view: &View<'_>, action: &Action, n: u32, packet_bits: u64) -> Result<BufferState> {
    let k = delivered_units(view, action, n as u64 * packet_bits);
    receive_prefix(view, action, k)
}

/// Distinct buffer outcomes of one slot's transmission with their binomial masses.
pub fn buffer_outcomes(view: &View<'_>, action: &Action, chan: &ChannelState) -> Result<Vec<(BufferState, f64)>> {
    let big_n = chan.packets_per_slot;
    let mut groups: Vec<(usize, f64)> = Vec::new();
    for n in 0..=big_n {
        let p = binomial_pmf(big_n, n, chan.packet_error);
        let k = delivered_units(view, action, chan.capacity_bits(n));
        match groups.last_mut() {
            Some((last, mass)) if *last == k => *mass += p,
            _ => groups.push((k, p)),
        }
    }
    groups
        .into_iter()
        .filter(|&(_, p)| p > 0.0)
        .map(|(k, p)| Ok((receive_prefix(view, action, k)?, p)))
        .collect()
}

/// Full slot transition from pre-display state `s`: playout, transmission of
/// `action` (relative to the post-playout buffer) and a channel step.
pub fn transition_distribution(
    s: &SystemState,
    action: &Action,
    profile: &StreamProfile,
    cfg: &BufferConfig,
    channel: &ChannelModel,
    phase: Phase,
) -> Result<Vec<(SystemState, f64)>> {
    if s.channel >= channel.num_states() {
        return Err(Error::InvalidState(format!("channel index {} out of range", s.channel)));
    }
    let chan = &channel.states[s.channel];
    let advanced = match phase {
        Phase::Steady => s.buffer.advance(profile),
        Phase::Startup => s.buffer.clone(),
    };
    let view = View::new(profile, &advanced, cfg, phase, chan.capacity_bits(chan.packets_per_slot));
    let outcomes = buffer_outcomes(&view, action, chan)?;
    let mut out = Vec::with_capacity(outcomes.len() * channel.num_states());
    for (b, p) in outcomes {
        for (c, &pc) in channel.transition[s.channel].iter().enumerate() {
            if pc > 0.0 {
                out.push((SystemState::new(c, b.clone()), p * pc));
            }
        }
    }
    Ok(out)
}
