//! Small hand-built instance used by tests, the acceptance suite and the CLI
//! (`--profile toy`).

use crate::buffer::BufferConfig;
use crate::channel::{ChannelModel, ChannelState};
use crate::stream::StreamProfile;

pub const PACKET_BITS: u64 = 1000;

pub fn profile() -> StreamProfile {
    StreamProfile::new(
        "toy",
        4,
        2,
        vec![vec![1500, 1000], vec![800, 700], vec![400, 500]],
        vec![20.0, 5.0],
        Some(80.0),
        30.0,
    )
    .expect("toy profile is valid")
}

/// Channel state carrying `packets` packets of `PACKET_BITS` with loss probability `y`.
pub fn channel_state(packets: u32, y: f64) -> ChannelState {
    ChannelState {
        snr: 0.0,
        modulation_bits: 0,
        packet_bits: PACKET_BITS,
        packets_per_slot: packets,
        rate: (packets as u64 * PACKET_BITS) as f64,
        packet_error: y,
    }
}

pub fn channel() -> ChannelModel {
    ChannelModel::from_parts(
        vec![channel_state(1, 0.3), channel_state(3, 0.4)],
        vec![vec![0.8, 0.2], vec![0.2, 0.8]],
        1.0 / 30.0,
    )
    .expect("toy channel is valid")
}

pub fn buffer_config() -> BufferConfig {
    BufferConfig { window: 2, post_cap: Some(8) }
}

/// Single-state channel.
pub fn constant_channel(packets: u32, y: f64) -> ChannelModel {
    ChannelModel::from_parts(vec![channel_state(packets, y)], vec![vec![1.0]], 1.0 / 30.0).expect("valid channel")
}
