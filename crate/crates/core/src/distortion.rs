//! Displayed-frame distortion with drift, and the MS-SSIM to DMOS mapping.

use std::path::Path;

use serde::Deserialize;

use crate::buffer::{BufferState, Frames};
use crate::error::{Error, Result};
use crate::stream::StreamProfile;

/// Scratch space for evaluating the frame on display; references are
/// resolved recursively and memoised per call.
#[derive(Debug)]
pub struct DistortionContext<'a> {
    profile: &'a StreamProfile,
    cache: Vec<(i64, f64)>,
}

impl<'a> DistortionContext<'a> {
    pub fn new(profile: &'a StreamProfile) -> Self {
        Self { profile, cache: Vec::with_capacity(8) }
    }

    /// MSE of the frame displayed in state `s` (relative index 0).
    pub fn displayed(&mut self, s: &BufferState) -> f64 {
        self.cache.clear();
        let frames = s.frames(self.profile);
        self.frame(&frames, 0)
    }

    /// MSE of frame `f` given the received counts in `frames`.
    pub fn frame(&mut self, frames: &Frames<'_>, f: i64) -> f64 {
        if let Some(&(_, d)) = self.cache.iter().find(|(g, _)| *g == f) {
            return d;
        }
        let p = self.profile;
        let d_l = p.d_full();
        let b = frames.count(f) as usize;
        let d = if b == 0 {
            p.d_loss
        } else {
            let own = p.distortion_for_layers(b);
            if frames.frame_type(f).is_key() {
                own
            } else {
                let refs = frames.references(f);
                let sum: f64 = refs.iter().map(|&r| self.frame(frames, r)).sum();
                drift_distortion(own, 0.5 * sum, 0.5 * sum, d_l).min(p.d_loss)
            }
        };
        self.cache.push((f, d));
        d
    }
}

/// `d(s)` for a single state.
pub fn displayed_distortion(profile: &StreamProfile, s: &BufferState) -> f64 {
    DistortionContext::new(profile).displayed(s)
}

/// B-frame distortion with drift from two reference distortions, before the
/// concealment ceiling `d_loss` is applied.
pub fn drift_distortion(own: f64, ref1: f64, ref2: f64, d_full: f64) -> f64 {
    (own + 0.5 * (ref1 + ref2) - d_full).max(d_full)
}

/// DMOS predicted from a time-averaged MS-SSIM index.
pub fn dmos_from_msssim(q_ssim: f64) -> Result<f64> {
    if !(q_ssim > 0.0 && q_ssim < 1.0) {
        return Err(Error::Domain(format!("MS-SSIM {q_ssim} outside (0, 1)")));
    }
    let u = 1.0 - q_ssim;
    Ok(13.3442 * u.ln() + 3.6226 * u + 77.0117)
}

#[derive(Debug, Deserialize)]
struct MsssimRow {
    frame_index: usize,
    msssim: f64,
}

/// Reads a `frame_index,msssim` CSV.
pub fn read_msssim_csv(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: MsssimRow = row?;
        out.push((r.frame_index, r.msssim));
    }
    Ok(out)
}

/// DMOS of the time-averaged MS-SSIM of a per-frame series.
pub fn dmos_of_series(series: &[(usize, f64)]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Domain("empty MS-SSIM series".into()));
    }
    let mean = series.iter().map(|x| x.1).sum::<f64>() / series.len() as f64;
    dmos_from_msssim(mean)
}
