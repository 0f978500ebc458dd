//! Receiver buffer state `(v_I, v_pre, v_W, v_post)` and frame addressing.
//!
//! Frames are addressed relative to the current frame (index 0). `pre` holds
//! the expired frames back to the last expired key picture, `window` the first
//! `W` active frames, and `post` a per-layer unit count over the frames beyond
//! the window. Post frames are filled in decoding order, so frame ranks (and
//! therefore the staircase in `post`) follow decoding order rather than
//! display order; for a key picture entering the window the two agree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{FrameType, StreamProfile};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BufferState {
    /// Frame index of the earliest-deadline active I frame.
    pub v_i: usize,
    /// Received-layer counts of frames `[f_key, -1]`.
    pub pre: Vec<u8>,
    /// Received-layer counts of frames `0..W`.
    pub window: Vec<u8>,
    /// Per-layer received-unit counts beyond the window.
    pub post: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SystemState {
    pub channel: usize,
    pub buffer: BufferState,
}

/// Static parameters of the buffer model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferConfig {
    /// Window size W (≥ f_gop).
    pub window: usize,
    /// Per-layer saturation cap on `post`; `None` leaves it unbounded.
    pub post_cap: Option<u32>,
}

impl BufferConfig {
    pub const DEFAULT_WINDOW: usize = 9;

    /// Window of `window` frames and the default cap of four intra periods.
    pub fn with_default_cap(profile: &StreamProfile, window: usize) -> Self {
        Self { window, post_cap: Some(4 * profile.f_intra as u32) }
    }

    pub fn uncapped(window: usize) -> Self {
        Self { window, post_cap: None }
    }

    pub fn validate(&self, profile: &StreamProfile) -> Result<()> {
        if self.window < profile.f_gop {
            return Err(Error::InvalidState(format!(
                "window W = {} smaller than f_gop = {}",
                self.window, profile.f_gop
            )));
        }
        // window B frames may need references up to one GOP past the window
        if let Some(cap) = self.post_cap {
            if (cap as usize) < profile.f_gop {
                return Err(Error::InvalidState(format!(
                    "post cap {cap} smaller than f_gop = {}",
                    profile.f_gop
                )));
            }
        }
        Ok(())
    }

    pub fn cap(&self) -> u32 {
        self.post_cap.unwrap_or(u32::MAX)
    }
}

/// Read-only addressing over a buffer state.
#[derive(Debug, Clone, Copy)]
pub struct Frames<'a> {
    pub profile: &'a StreamProfile,
    pub state: &'a BufferState,
    /// Absolute position (within an intra-period-aligned numbering) of frame 0.
    pub p0: i64,
}

impl BufferState {
    /// Empty buffer whose current frame sits at `position` of an intra period.
    pub fn empty(profile: &StreamProfile, cfg: &BufferConfig, position: usize) -> Self {
        let v_i = (profile.f_intra - position % profile.f_intra) % profile.f_intra;
        Self {
            v_i,
            pre: vec![0; expected_pre_len(profile, position as i64)],
            window: vec![0; cfg.window],
            post: vec![0; profile.quality_layers()],
        }
    }

    /// Intra-period position of the current frame.
    pub fn position(&self, profile: &StreamProfile) -> usize {
        (profile.f_intra - self.v_i) % profile.f_intra
    }

    pub fn frames<'a>(&'a self, profile: &'a StreamProfile) -> Frames<'a> {
        Frames { profile, state: self, p0: self.position(profile) as i64 }
    }

    pub fn validate(&self, profile: &StreamProfile, cfg: &BufferConfig) -> Result<()> {
        if self.v_i >= profile.f_intra {
            return Err(Error::InvalidState(format!("v_I = {} out of range", self.v_i)));
        }
        let p0 = self.position(profile) as i64;
        let want = expected_pre_len(profile, p0);
        if self.pre.len() != want {
            return Err(Error::InvalidState(format!("v_pre has {} entries, expected {want}", self.pre.len())));
        }
        if self.window.len() != cfg.window {
            return Err(Error::InvalidState(format!("v_W has {} entries, expected {}", self.window.len(), cfg.window)));
        }
        let q = profile.quality_layers() as u8;
        if self.pre.iter().chain(&self.window).any(|&b| b > q) {
            return Err(Error::InvalidState("layer count above L+1".into()));
        }
        if self.post.len() != profile.quality_layers() {
            return Err(Error::InvalidState("v_post length differs from L+1".into()));
        }
        if self.post.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidState("v_post is not non-increasing in layer".into()));
        }
        if self.post.iter().any(|&b| b > cfg.cap()) {
            return Err(Error::InvalidState("v_post above cap".into()));
        }
        Ok(())
    }

    /// True when every unit of the window and of its expired predictors is buffered.
    pub fn window_complete(&self, profile: &StreamProfile) -> bool {
        let q = profile.quality_layers() as u8;
        self.pre.iter().chain(&self.window).all(|&b| b == q)
    }

    /// Playout of the current frame: shifts every region left by one frame.
    pub fn advance(&self, profile: &StreamProfile) -> BufferState {
        let f = self.frames(profile);
        let v_i = if self.v_i == 0 { profile.f_intra - 1 } else { self.v_i - 1 };
        let w = self.window.len() as i64;
        let new_current = f.p0 + 1;
        let pre = if profile.type_at_wrapped(new_current).is_key() {
            Vec::new()
        } else {
            let mut p = self.pre.clone();
            p.push(self.window[0]);
            p
        };
        let rank = f.post_rank(w) as u32;
        let entering = self.post.iter().filter(|&&b| b > rank).count() as u8;
        let mut window: Vec<u8> = self.window[1..].to_vec();
        window.push(entering);
        let post = self.post.iter().map(|&b| if b > rank { b - 1 } else { b }).collect();
        BufferState { v_i, pre, window, post }
    }
}

impl SystemState {
    pub fn new(channel: usize, buffer: BufferState) -> Self {
        Self { channel, buffer }
    }
}

/// Length of v_pre for a current frame at absolute `position`.
pub fn expected_pre_len(profile: &StreamProfile, position: i64) -> usize {
    if profile.type_at_wrapped(position).is_key() {
        0
    } else {
        position.rem_euclid(profile.f_gop as i64) as usize
    }
}

impl<'a> Frames<'a> {
    pub fn window_len(&self) -> i64 {
        self.state.window.len() as i64
    }

    pub fn position(&self, f: i64) -> i64 {
        self.p0 + f
    }

    pub fn frame_type(&self, f: i64) -> FrameType {
        self.profile.type_at_wrapped(self.p0 + f)
    }

    /// Relative indices of the reference frames of frame `f`.
    pub fn references(&self, f: i64) -> Vec<i64> {
        self.profile.references(self.p0 + f).into_iter().map(|p| p - self.p0).collect()
    }

    pub fn decode_key(&self, f: i64) -> (i64, u8, i64) {
        self.profile.decode_key(self.p0 + f)
    }

    /// GOP offsets `1..=f_gop` listed in decoding order.
    fn gop_decode_order(&self) -> Vec<i64> {
        let fg = self.profile.f_gop as i64;
        let mut g: Vec<i64> = (1..=fg).collect();
        // position fg*k + g has the same temporal level for every k ≥ 1
        g.sort_by_key(|&x| self.profile.decode_key(fg + x));
        g
    }

    /// Post frames of the GOP straddling the window edge, in decoding order.
    fn straddle(&self) -> (i64, Vec<i64>) {
        let fg = self.profile.f_gop as i64;
        let a = self.p0 + self.window_len();
        let g0 = self.profile.gop_of(a);
        let start = (g0 - 1) * fg;
        let first_offset = a - start;
        let order: Vec<i64> = self.gop_decode_order().into_iter().filter(|&x| x >= first_offset).collect();
        (g0, order.into_iter().map(|x| start + x).collect())
    }

    /// Rank of post frame `f` (≥ W) in decoding order among post frames.
    pub fn post_rank(&self, f: i64) -> usize {
        debug_assert!(f >= self.window_len());
        let fg = self.profile.f_gop as i64;
        let pos = self.p0 + f;
        let (g0, straddle) = self.straddle();
        let g = self.profile.gop_of(pos);
        if g == g0 {
            straddle.iter().position(|&p| p == pos).expect("post frame in straddling GOP")
        } else {
            let off = pos - (g - 1) * fg;
            let idx = self.gop_decode_order().iter().position(|&x| x == off).expect("offset in GOP");
            straddle.len() + ((g - g0 - 1) * fg) as usize + idx
        }
    }

    /// Post frame (relative index) holding `rank`.
    pub fn post_frame_at(&self, rank: usize) -> i64 {
        let fg = self.profile.f_gop as usize;
        let (g0, straddle) = self.straddle();
        if rank < straddle.len() {
            return straddle[rank] - self.p0;
        }
        let r = rank - straddle.len();
        let g = g0 + 1 + (r / fg) as i64;
        let off = self.gop_decode_order()[r % fg];
        (g - 1) * fg as i64 + off - self.p0
    }

    /// Received quality layers of frame `f`.
    pub fn count(&self, f: i64) -> u8 {
        let pre = self.state.pre.len() as i64;
        if f < 0 {
            let i = pre + f;
            if i < 0 {
                // older than the last expired key picture; no longer tracked
                return self.profile.quality_layers() as u8;
            }
            self.state.pre[i as usize]
        } else if f < self.window_len() {
            self.state.window[f as usize]
        } else {
            let r = self.post_rank(f) as u64;
            self.state.post.iter().filter(|&&b| b as u64 > r).count() as u8
        }
    }

    /// Bits received for frame `f`.
    pub fn received_bits(&self, f: i64) -> u64 {
        self.profile.cumulative_size(self.frame_type(f), self.count(f) as usize)
    }

    /// First relative index whose GOP is still undecoded, assuming frame −1
    /// has just been displayed.
    pub fn steady_cutoff(&self) -> i64 {
        let q = self.p0 - 1;
        let end = self.profile.gop_of(q) * self.profile.f_gop as i64;
        end - q
    }
}
