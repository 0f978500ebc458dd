//! Receiver buffer model: state, playout, feasible actions and delivery.

mod action;
mod codec;
mod state;
mod transition;

pub use action::{Action, ActionMode, ActionTag, Phase, Unit, View};
pub use codec::StateIndex;
pub use state::{expected_pre_len, BufferConfig, BufferState, Frames, SystemState};
pub use transition::{
    apply_delivery, binomial_pmf, buffer_outcomes, delivered_units, receive_prefix, transition_distribution,
};

use crate::channel::ChannelModel;
use crate::error::Result;
use crate::stream::StreamProfile;

/// Post-playout view of a pre-display state for the transmitter.
pub fn view_after_playout<'a>(
    advanced: &'a BufferState,
    channel_index: usize,
    profile: &'a StreamProfile,
    cfg: &'a BufferConfig,
    channel: &ChannelModel,
) -> View<'a> {
    let c = &channel.states[channel_index];
    View::new(profile, advanced, cfg, Phase::Steady, c.capacity_bits(c.packets_per_slot))
}

/// Feasible actions in pre-display state `s`, expressed relative to the
/// buffer after the current frame is played out.
pub fn feasible_actions(
    s: &SystemState,
    profile: &StreamProfile,
    cfg: &BufferConfig,
    channel: &ChannelModel,
    mode: ActionMode,
) -> Result<Vec<Action>> {
    let advanced = s.buffer.advance(profile);
    let view = view_after_playout(&advanced, s.channel, profile, cfg, channel);
    view.feasible(mode)
}
