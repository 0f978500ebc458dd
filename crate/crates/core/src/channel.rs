//! Finite-state Markov model of a Rayleigh-fading link with adaptive
//! modulation, plus the AR(1) throughput model used by the online scheduler.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symbols per physical-layer packet.
pub const SYMBOLS_PER_PACKET: u64 = 2048;
/// Transmission time of one packet, seconds.
pub const PACKET_TIME: f64 = 1.5e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    /// Representative SNR (linear).
    pub snr: f64,
    /// Bits per symbol; 0 for hand-built states without a modulation.
    pub modulation_bits: u32,
    /// Packet length L^PHY in bits.
    pub packet_bits: u64,
    /// Packet transmissions per slot, N.
    pub packets_per_slot: u32,
    /// Transmission rate x in bits per slot.
    pub rate: f64,
    /// Packet error probability y.
    pub packet_error: f64,
}

impl ChannelState {
    /// Expected throughput x(1 − y), bits per slot.
    pub fn throughput(&self) -> f64 {
        self.rate * (1.0 - self.packet_error)
    }

    /// Bits carried by `n` successful packets.
    pub fn capacity_bits(&self, n: u32) -> u64 {
        n as u64 * self.packet_bits
    }
}

/// Config section for [`build_fsmc`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub f_d_hz: f64,
    pub snr_avg_db: f64,
    pub num_states: usize,
    pub frame_rate: f64,
    #[serde(default = "default_max_modulation")]
    pub max_modulation: u32,
}

fn unit_scale() -> f64 {
    1.0
}

fn default_max_modulation() -> u32 {
    3
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { f_d_hz: 5.0, snr_avg_db: 10.0, num_states: 4, frame_rate: 30.0, max_modulation: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub states: Vec<ChannelState>,
    /// Row-stochastic transition matrix.
    pub transition: Vec<Vec<f64>>,
    /// Interior SNR thresholds Λ_1..Λ_{|C|-1} (linear). Λ_0 = 0 and Λ_{|C|} = ∞ are implicit.
    pub thresholds: Vec<f64>,
    pub slot_length: f64,
    pub packet_time: f64,
    /// Common factor applied to every crossing probability (1 when none was needed).
    #[serde(default = "unit_scale")]
    pub rate_scale: f64,
    #[serde(default)]
    pub config: Option<ChannelConfig>,
}

/// Gaussian tail probability via the complementary error function.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn symbol_error_rate(modulation_bits: u32, snr: f64) -> Result<f64> {
    if !(1..=3).contains(&modulation_bits) {
        return Err(Error::UnsupportedModulation(modulation_bits));
    }
    if snr <= 0.0 {
        return Ok(1.0);
    }
    let arg = (2.0 * snr).sqrt() * (PI / (1u32 << modulation_bits) as f64).sin();
    Ok((2.0 * q_function(arg)).clamp(0.0, 1.0))
}

/// Packet parameters for a modulation at a given frame rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packetization {
    pub packet_bits: u64,
    pub packets_per_slot: u32,
    pub rate: f64,
}

pub fn packetize(modulation_bits: u32, frame_rate: f64) -> Result<Packetization> {
    if !(1..=3).contains(&modulation_bits) {
        return Err(Error::UnsupportedModulation(modulation_bits));
    }
    let packet_bits = SYMBOLS_PER_PACKET * modulation_bits as u64;
    let slot = 1.0 / frame_rate;
    let per_slot = slot / PACKET_TIME;
    Ok(Packetization {
        packet_bits,
        // guard against 33.33.../1.5 landing a hair above an integer
        packets_per_slot: (per_slot - 1e-9).ceil() as u32,
        rate: per_slot * packet_bits as f64,
    })
}

pub fn packet_error_rate(symbol_error: f64) -> f64 {
    1.0 - (1.0 - symbol_error).powi(SYMBOLS_PER_PACKET as i32)
}

/// Level-crossing rate of SNR threshold `lambda` for Rayleigh fading.
pub fn level_crossing_rate(lambda: f64, snr_avg: f64, f_d: f64) -> f64 {
    (2.0 * PI * lambda / snr_avg).sqrt() * f_d * (-lambda / snr_avg).exp()
}

/// Conditional mean of an exponential SNR with mean `avg` over `[a, b)`.
fn conditional_mean_snr(a: f64, b: f64, avg: f64) -> f64 {
    let mass = (-a / avg).exp() - if b.is_finite() { (-b / avg).exp() } else { 0.0 };
    let first = (a + avg) * (-a / avg).exp() - if b.is_finite() { (b + avg) * (-b / avg).exp() } else { 0.0 };
    first / mass
}

/// Build the equal-probability FSMC for a Rayleigh channel.
pub fn build_fsmc(cfg: &ChannelConfig) -> Result<ChannelModel> {
    let n = cfg.num_states;
    if n == 0 {
        return Err(Error::InvalidChannel("num_states must be at least 1".into()));
    }
    if !(cfg.f_d_hz >= 0.0) || !(cfg.frame_rate > 0.0) {
        return Err(Error::InvalidChannel("Doppler and frame rate must be non-negative / positive".into()));
    }
    if !(1..=3).contains(&cfg.max_modulation) {
        return Err(Error::UnsupportedModulation(cfg.max_modulation));
    }
    let avg = 10f64.powf(cfg.snr_avg_db / 10.0);
    let slot = 1.0 / cfg.frame_rate;
    // thresholds[i] for i = 0..=n, with [0] = 0 and [n] = ∞
    let edges: Vec<f64> = (0..=n)
        .map(|i| if i == n { f64::INFINITY } else { -avg * (1.0 - i as f64 / n as f64).ln() })
        .collect();
    let pi_i = 1.0 / n as f64;

    let mut states = Vec::with_capacity(n);
    for i in 0..n {
        let snr = conditional_mean_snr(edges[i], edges[i + 1], avg);
        let mut best: Option<ChannelState> = None;
        for m in 1..=cfg.max_modulation {
            let pk = packetize(m, cfg.frame_rate)?;
            let y = packet_error_rate(symbol_error_rate(m, snr)?);
            let cand = ChannelState {
                snr,
                modulation_bits: m,
                packet_bits: pk.packet_bits,
                packets_per_slot: pk.packets_per_slot,
                rate: pk.rate,
                packet_error: y,
            };
            if best.as_ref().map_or(true, |b| cand.throughput() > b.throughput()) {
                best = Some(cand);
            }
        }
        states.push(best.expect("at least one modulation"));
    }

    let rate = |lambda: f64| level_crossing_rate(lambda, avg, cfg.f_d_hz) * slot / pi_i;
    let mut up = vec![0.0; n];
    let mut down = vec![0.0; n];
    for i in 0..n {
        if i + 1 < n {
            up[i] = rate(edges[i + 1]);
            if up[i] >= 1.0 {
                return Err(Error::SlowFadingViolated { from: i, to: i + 1, value: up[i] });
            }
        }
        if i > 0 {
            down[i] = rate(edges[i]);
            if down[i] >= 1.0 {
                return Err(Error::SlowFadingViolated { from: i, to: i - 1, value: down[i] });
            }
        }
    }
    // Each crossing is individually below one per slot but a row may still
    // leave its state with probability above one. Slow every crossing by a
    // common factor so the busiest row just empties its diagonal.
    let max_exit = (0..n).map(|i| up[i] + down[i]).fold(0.0, f64::max);
    let rate_scale = if max_exit > 1.0 { 1.0 / max_exit } else { 1.0 };
    let mut transition = vec![vec![0.0; n]; n];
    for i in 0..n {
        let (u, d) = (up[i] * rate_scale, down[i] * rate_scale);
        if i + 1 < n {
            transition[i][i + 1] = u;
        }
        if i > 0 {
            transition[i][i - 1] = d;
        }
        transition[i][i] = (1.0 - u - d).max(0.0);
    }

    Ok(ChannelModel {
        states,
        transition,
        thresholds: edges[1..n].to_vec(),
        slot_length: slot,
        packet_time: PACKET_TIME,
        rate_scale,
        config: Some(cfg.clone()),
    })
}

impl ChannelModel {
    /// Hand-built model, mostly for small test instances.
    pub fn from_parts(states: Vec<ChannelState>, transition: Vec<Vec<f64>>, slot_length: f64) -> Result<Self> {
        let m = Self { states, transition, thresholds: vec![], slot_length, packet_time: PACKET_TIME, rate_scale: 1.0, config: None };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if n == 0 || self.transition.len() != n {
            return Err(Error::InvalidChannel("transition matrix shape does not match states".into()));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != n || row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidChannel(format!("row {i} malformed")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidChannel(format!("row {i} sums to {s}")));
            }
        }
        for (i, s) in self.states.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.packet_error) || s.packet_bits == 0 {
                return Err(Error::InvalidChannel(format!("state {i} malformed")));
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Stationary distribution, solved as a linear system.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.num_states();
        if n == 1 {
            return vec![1.0];
        }
        // (P^T - I) π = 0 with the last equation replaced by Σπ = 1
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(j, i)] = self.transition[i][j];
            }
            a[(i, i)] -= 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = nalgebra::DVector::<f64>::zeros(n);
        b[n - 1] = 1.0;
        match a.lu().solve(&b) {
            Some(x) => x.iter().copied().collect(),
            None => self.stationary_by_power(),
        }
    }

    fn stationary_by_power(&self) -> Vec<f64> {
        let n = self.num_states();
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..100_000 {
            let mut next = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    next[j] += 0.5 * pi[i] * self.transition[i][j];
                }
                next[i] += 0.5 * pi[i];
            }
            pi = next;
        }
        pi
    }

    /// Ergodic throughput Σ π_i x_i (1 − y_i).
    pub fn mean_throughput(&self) -> f64 {
        self.stationary().iter().zip(&self.states).map(|(p, s)| p * s.throughput()).sum()
    }

    pub fn max_packets(&self) -> u32 {
        self.states.iter().map(|s| s.packets_per_slot).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ChannelModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// Stable content hash used in state-space manifests.
    pub fn content_hash(&self) -> String {
        crate::manifest::hash_json(self)
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        sample_index(&self.transition[from], rng)
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Markov-chain trace of channel indices, starting from the stationary law.
pub fn sample_trace(model: &ChannelModel, length: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(length);
    if length == 0 {
        return out;
    }
    let mut cur = sample_index(&model.stationary(), &mut rng);
    out.push(cur);
    for _ in 1..length {
        cur = model.sample_next(cur, &mut rng);
        out.push(cur);
    }
    out
}

/// AR(1) throughput model `R_t − ρ R_{t−1} = r_avg (1 − ρ) + N_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Model {
    pub r_avg: f64,
    pub rho: f64,
    pub zeta: usize,
    /// Set when the estimation series had zero variance.
    #[serde(default)]
    pub constant_series: bool,
}

pub const RHO_MIN: f64 = 1e-6;
pub const RHO_MAX: f64 = 1.0 - 1e-6;
pub const AR1_MIN_SAMPLES: usize = 100;

/// Relaxation time ⌈−1/ln ρ⌉ in slots.
pub fn relaxation_slots(rho: f64) -> usize {
    let rho = rho.clamp(RHO_MIN, RHO_MAX);
    let t = -1.0 / rho.ln();
    ((t - 1e-9).ceil() as usize).max(1)
}

impl Ar1Model {
    pub fn new(r_avg: f64, rho: f64) -> Self {
        let rho = rho.clamp(RHO_MIN, RHO_MAX);
        Self { r_avg, rho, zeta: relaxation_slots(rho), constant_series: false }
    }

    /// Expected data delivered over the next ζ slots given the current throughput.
    pub fn forecast_capacity(&self, r_now: f64) -> f64 {
        (0..self.zeta)
            .map(|a| {
                let w = self.rho.powi(a as i32);
                r_now * w + self.r_avg * (1.0 - w)
            })
            .sum()
    }
}

pub fn estimate_ar1(series: &[f64]) -> Result<Ar1Model> {
    if series.len() < AR1_MIN_SAMPLES {
        return Err(Error::SeriesTooShort { len: series.len(), min: AR1_MIN_SAMPLES });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
    if var <= 0.0 {
        let mut m = Ar1Model::new(mean, RHO_MIN);
        m.constant_series = true;
        return Ok(m);
    }
    let cov: f64 = series.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    Ok(Ar1Model::new(mean, cov / var))
}

/// Closed-form AR(1) parameters of a channel model: stationary mean throughput
/// and lag-1 autocorrelation of the throughput process.
pub fn ar1_from_model(model: &ChannelModel) -> Ar1Model {
    let pi = model.stationary();
    let r: Vec<f64> = model.states.iter().map(|s| s.throughput()).collect();
    let mean: f64 = pi.iter().zip(&r).map(|(p, x)| p * x).sum();
    let var: f64 = pi.iter().zip(&r).map(|(p, x)| p * (x - mean).powi(2)).sum();
    if var <= 0.0 {
        let mut m = Ar1Model::new(mean, RHO_MIN);
        m.constant_series = true;
        return m;
    }
    let mut cov = 0.0;
    for i in 0..r.len() {
        for j in 0..r.len() {
            cov += pi[i] * model.transition[i][j] * (r[i] - mean) * (r[j] - mean);
        }
    }
    Ar1Model::new(mean, cov / var)
}
