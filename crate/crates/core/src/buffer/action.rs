//! Scheduling actions: ordered lists of data units, their validity rules and
//! the canonical and exhaustive generators.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::state::{BufferConfig, BufferState, Frames};
use crate::error::{Error, Result};
use crate::stream::StreamProfile;

/// Data unit `(f, ℓ)`: layer `ℓ` of the frame at relative index `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Unit {
    pub frame: i64,
    pub layer: u8,
}

/// Descriptor of a canonical action: target layer count and I-preempt flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionTag {
    pub layers: u8,
    pub i_first: bool,
}

impl ActionTag {
    /// Position of this descriptor in the canonical enumeration order.
    pub fn ordinal(&self) -> usize {
        2 * (self.layers as usize - 1) + self.i_first as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub units: Vec<Unit>,
    pub tag: Option<ActionTag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Normal playout: the GOP of the frame just displayed has been decoded.
    Steady,
    /// Before the first display: nothing has been decoded yet.
    Startup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    Canonical,
    Exhaustive { cap: usize },
}

/// A post-display buffer seen by the transmitter for one slot.
#[derive(Debug, Clone, Copy)]
pub struct View<'a> {
    pub frames: Frames<'a>,
    pub cfg: &'a BufferConfig,
    /// Frames at relative index ≥ `cutoff` have not been decoded.
    pub cutoff: i64,
    /// Bits that fit in the slot if every packet succeeds.
    pub capacity: u64,
}

impl<'a> View<'a> {
    pub fn new(
        profile: &'a StreamProfile,
        state: &'a BufferState,
        cfg: &'a BufferConfig,
        phase: Phase,
        capacity: u64,
    ) -> Self {
        let frames = state.frames(profile);
        let cutoff = match phase {
            Phase::Steady => frames.steady_cutoff(),
            Phase::Startup => 0,
        };
        Self { frames, cfg, cutoff, capacity }
    }

    pub fn profile(&self) -> &'a StreamProfile {
        self.frames.profile
    }

    pub fn state(&self) -> &'a BufferState {
        self.frames.state
    }

    fn q(&self) -> u8 {
        self.profile().quality_layers() as u8
    }

    pub fn unit_bits(&self, u: Unit) -> u64 {
        self.profile().unit_size(self.frames.frame_type(u.frame), u.layer as usize)
    }

    /// Undecoded window frames that still miss units.
    pub fn open_window_frames(&self) -> Vec<i64> {
        let w = self.frames.window_len();
        (self.cutoff.max(0)..w).filter(|&f| self.frames.count(f) < self.q()).collect()
    }

    /// Post frames of the GOP straddling the window edge that open window
    /// frames depend on, i.e. those decoded before the last open window frame.
    pub fn closure_frames(&self) -> Vec<i64> {
        let w = self.frames.window_len();
        let g0 = self.profile().gop_of(self.frames.p0 + w);
        let last = self
            .open_window_frames()
            .into_iter()
            .filter(|&f| self.profile().gop_of(self.frames.p0 + f) == g0)
            .map(|f| self.frames.decode_key(f))
            .max();
        let Some(last) = last else { return Vec::new() };
        let mut out = Vec::new();
        for r in 0.. {
            let f = self.frames.post_frame_at(r);
            if self.profile().gop_of(self.frames.p0 + f) != g0 || self.frames.decode_key(f) > last {
                break;
            }
            out.push(f);
        }
        out
    }

    /// Frames scheduled before the greedy post continuation, in display order.
    pub fn window_phase_frames(&self) -> Vec<i64> {
        let mut v = self.open_window_frames();
        v.extend(self.closure_frames().into_iter().filter(|&f| self.frames.count(f) < self.q()));
        v.sort_unstable();
        v
    }

    /// Earliest undecoded I frame that may be scheduled now.
    pub fn pending_i_frame(&self) -> Option<i64> {
        let fi = self.profile().f_intra as i64;
        self.window_phase_frames().into_iter().find(|&f| self.frames.position(f).rem_euclid(fi) == 0)
    }

    /// Truncates a unit list after the first unit that cannot complete within
    /// the slot capacity.
    pub fn truncate(&self, units: &mut Vec<Unit>) {
        let mut cum = 0u64;
        for (i, &u) in units.iter().enumerate() {
            cum += self.unit_bits(u);
            if cum >= self.capacity {
                units.truncate(i + 1);
                return;
            }
        }
    }

    /// Units of `units` that complete within the full slot capacity.
    pub fn completable_prefix<'u>(&self, units: &'u [Unit]) -> &'u [Unit] {
        let mut cum = 0u64;
        for (i, &u) in units.iter().enumerate() {
            cum += self.unit_bits(u);
            if cum > self.capacity {
                return &units[..i];
            }
        }
        units
    }

    /// Builds the window-phase schedule: whole units of the pending I frame's
    /// first `layers` layers while they fit in `i_budget` bits, then the first `layers` layers of every
    /// window-phase frame in display order, then their remaining layers, then
    /// the greedy post continuation. Dependencies are pulled in on demand.
    pub fn schedule(&self, layers: u8, i_budget: f64) -> Vec<Unit> {
        let q = self.q();
        let mut b = Builder::new(self);
        if i_budget > 0.0 {
            if let Some(i) = self.pending_i_frame() {
                for layer in self.frames.count(i)..layers {
                    let mut trial = b.clone();
                    trial.push(Unit { frame: i, layer });
                    if trial.bits() as f64 > i_budget {
                        break;
                    }
                    b = trial;
                }
            }
        }
        let frames = self.window_phase_frames();
        for &f in &frames {
            for layer in 0..layers {
                b.push(Unit { frame: f, layer });
            }
        }
        for &f in &frames {
            for layer in layers..q {
                b.push(Unit { frame: f, layer });
            }
        }
        let cap = self.cfg.cap() as usize;
        let mut r = 0usize;
        while b.bits() < self.capacity && r < cap {
            let f = self.frames.post_frame_at(r);
            for layer in 0..q {
                b.push(Unit { frame: f, layer });
            }
            r += 1;
        }
        let mut units = b.units;
        self.truncate(&mut units);
        units
    }

    /// Canonical action `A(ℓ, φ)`.
    pub fn canonical(&self, tag: ActionTag) -> Action {
        let budget = if tag.i_first { f64::INFINITY } else { 0.0 };
        Action { units: self.schedule(tag.layers, budget), tag: Some(tag) }
    }

    /// Display-order greedy: every layer of each frame before the next.
    pub fn greedy(&self) -> Action {
        Action { units: self.schedule(self.q(), 0.0), tag: None }
    }

    /// Canonical family, deduplicated on the units that can complete in the slot.
    pub fn canonical_family(&self) -> Vec<Action> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for layers in 1..=self.q() {
            for i_first in [false, true] {
                let a = self.canonical(ActionTag { layers, i_first });
                if seen.insert(self.completable_prefix(&a.units).to_vec()) {
                    out.push(a);
                }
            }
        }
        out
    }

    /// Every precedence-respecting ordering of the window-phase units, each
    /// followed by the greedy continuation, deduplicated on effect.
    pub fn exhaustive_family(&self, cap: usize) -> Result<Vec<Action>> {
        let mut pool: Vec<Unit> = Vec::new();
        for f in self.window_phase_frames() {
            for layer in self.frames.count(f)..self.q() {
                pool.push(Unit { frame: f, layer });
            }
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        let mut tracker = Tracker::new(self);
        let mut used = vec![false; pool.len()];
        self.dfs(&pool, &mut used, &mut prefix, 0, &mut tracker, &mut seen, &mut out, cap)?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        pool: &[Unit],
        used: &mut [bool],
        prefix: &mut Vec<Unit>,
        cum: u64,
        tracker: &mut Tracker,
        seen: &mut HashSet<Vec<Unit>>,
        out: &mut Vec<Action>,
        cap: usize,
    ) -> Result<()> {
        let exhausted = used.iter().all(|&u| u);
        if cum >= self.capacity || exhausted {
            let mut units = prefix.clone();
            if exhausted {
                let mut b = Builder::new(self);
                for &u in &units {
                    b.push(u);
                }
                let cap = self.cfg.cap() as usize;
                let mut r = 0usize;
                while b.bits() < self.capacity && r < cap {
                    let f = self.frames.post_frame_at(r);
                    for layer in 0..self.q() {
                        b.push(Unit { frame: f, layer });
                    }
                    r += 1;
                }
                units = b.units;
                self.truncate(&mut units);
            }
            if seen.insert(self.completable_prefix(&units).to_vec()) {
                if out.len() >= cap {
                    return Err(Error::EnumerationCap { cap });
                }
                out.push(Action { units, tag: None });
            }
            return Ok(());
        }
        for i in 0..pool.len() {
            if used[i] || tracker.check(self, pool[i], false).is_err() {
                continue;
            }
            used[i] = true;
            tracker.receive(self, pool[i]);
            prefix.push(pool[i]);
            self.dfs(pool, used, prefix, cum + self.unit_bits(pool[i]), tracker, seen, out, cap)?;
            prefix.pop();
            tracker.undo(self, pool[i]);
            used[i] = false;
        }
        Ok(())
    }

    pub fn feasible(&self, mode: ActionMode) -> Result<Vec<Action>> {
        match mode {
            ActionMode::Canonical => Ok(self.canonical_family()),
            ActionMode::Exhaustive { cap } => self.exhaustive_family(cap),
        }
    }

    /// Checks precedence, decoding and window-first rules for every unit.
    pub fn validate(&self, action: &Action) -> Result<()> {
        let mut tracker = Tracker::new(self);
        for &u in &action.units {
            tracker.check(self, u, true)?;
            tracker.receive(self, u);
        }
        Ok(())
    }
}

/// Incremental action construction that inserts missing prerequisites
/// before each requested unit.
#[derive(Clone)]
struct Builder<'v, 'a> {
    view: &'v View<'a>,
    tracker: Tracker,
    units: Vec<Unit>,
    bits: u64,
}

impl<'v, 'a> Builder<'v, 'a> {
    fn new(view: &'v View<'a>) -> Self {
        Self { view, tracker: Tracker::new(view), units: Vec::new(), bits: 0 }
    }

    fn bits(&self) -> u64 {
        self.bits
    }

    fn has(&self, u: Unit) -> bool {
        self.tracker.count(self.view, u.frame) > u.layer
    }

    fn push(&mut self, u: Unit) {
        let v = self.view;
        if self.has(u) {
            return;
        }
        if u.layer > 0 {
            self.push(Unit { frame: u.frame, layer: u.layer - 1 });
        } else {
            for r in v.frames.references(u.frame) {
                if r >= v.cutoff {
                    self.push(Unit { frame: r, layer: 0 });
                }
            }
        }
        if u.frame >= v.frames.window_len() {
            let rank = v.frames.post_rank(u.frame);
            if rank as u32 >= v.cfg.cap() {
                return;
            }
            if rank > 0 {
                self.push(Unit { frame: v.frames.post_frame_at(rank - 1), layer: u.layer });
            }
        }
        debug_assert!(self.tracker.check(v, u, false).is_ok());
        self.tracker.receive(v, u);
        self.bits += v.unit_bits(u);
        self.units.push(u);
    }
}

/// Layer counts evolving along an action as units are received.
#[derive(Clone)]
pub(crate) struct Tracker {
    window: Vec<u8>,
    post: Vec<u32>,
    closure: Vec<i64>,
}

impl Tracker {
    pub(crate) fn new(view: &View<'_>) -> Self {
        Self {
            window: view.state().window.clone(),
            post: view.state().post.clone(),
            closure: view.closure_frames(),
        }
    }

    pub(crate) fn count(&self, view: &View<'_>, f: i64) -> u8 {
        if f < view.frames.window_len() {
            if f < 0 {
                return view.frames.count(f);
            }
            self.window[f as usize]
        } else {
            let r = view.frames.post_rank(f) as u64;
            self.post.iter().filter(|&&b| b as u64 > r).count() as u8
        }
    }

    pub(crate) fn check(&self, view: &View<'_>, u: Unit, strict_window: bool) -> Result<()> {
        let q = view.profile().quality_layers() as u8;
        if u.frame < view.cutoff || u.frame < 0 {
            return Err(Error::InvalidAction(format!("frame {} already decoded", u.frame)));
        }
        if u.layer >= q {
            return Err(Error::InvalidAction(format!("layer {} out of range", u.layer)));
        }
        let have = self.count(view, u.frame);
        if u.layer < have {
            return Err(Error::InvalidAction(format!("unit ({}, {}) already received", u.frame, u.layer)));
        }
        if u.layer > have {
            return Err(Error::InvalidAction(format!(
                "unit ({}, {}) sent before lower layers of its frame",
                u.frame, u.layer
            )));
        }
        if u.layer == 0 {
            for r in view.frames.references(u.frame) {
                if r >= view.cutoff && self.count(view, r) == 0 {
                    return Err(Error::InvalidAction(format!(
                        "base layer of frame {} sent before base layer of its reference {r}",
                        u.frame
                    )));
                }
            }
        }
        let w = view.frames.window_len();
        if u.frame >= w {
            let rank = view.frames.post_rank(u.frame) as u32;
            if rank < view.cfg.cap() && self.post[u.layer as usize] != rank {
                return Err(Error::InvalidAction(format!(
                    "layer {} of post frame {} sent out of decoding order",
                    u.layer, u.frame
                )));
            }
            if strict_window && !self.closure.contains(&u.frame) {
                let open = (view.cutoff.max(0)..w).any(|f| self.window[f as usize] < q);
                if open {
                    return Err(Error::InvalidAction(format!(
                        "post frame {} scheduled before the window is complete",
                        u.frame
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn receive(&mut self, view: &View<'_>, u: Unit) {
        if u.frame < view.frames.window_len() {
            self.window[u.frame as usize] += 1;
        } else {
            let rank = view.frames.post_rank(u.frame) as u32;
            if rank < view.cfg.cap() {
                self.post[u.layer as usize] += 1;
            }
        }
    }

    fn undo(&mut self, view: &View<'_>, u: Unit) {
        if u.frame < view.frames.window_len() {
            self.window[u.frame as usize] -= 1;
        } else {
            let rank = view.frames.post_rank(u.frame) as u32;
            if rank < view.cfg.cap() {
                self.post[u.layer as usize] -= 1;
            }
        }
    }

    pub(crate) fn into_state(self, base: &BufferState) -> BufferState {
        BufferState { v_i: base.v_i, pre: base.pre.clone(), window: self.window, post: self.post }
    }
}
