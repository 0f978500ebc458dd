//! Monte Carlo streaming simulation, traces and scheduler comparison.

mod report;
mod scheduler;

use std::collections::BTreeMap;
use std::path::Path;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

pub use report::{compare, Report, ReportRow, REPORT_SCHEMA_VERSION};
pub use scheduler::{Decision, MdpScheduler, Scheduler, SchedulerKind};

use crate::bound::distortion_lower_bound;
use crate::buffer::{delivered_units, receive_prefix, view_after_playout, BufferConfig, BufferState, Phase, SystemState, Unit, View};
use crate::channel::{sample_index, ChannelModel};
use crate::distortion::DistortionContext;
use crate::error::{Error, Result};
use crate::exec::{task_rng, Exec};
use crate::manifest::hash_json;
use crate::stream::StreamProfile;

pub const TRACE_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Slots per replication, start-up included.
    pub run_length: usize,
    pub replications: usize,
    pub seed: u64,
    pub startup_delay: usize,
    /// Bits of a partly sent unit count towards it in the next slot.
    pub partial_carryover: bool,
    /// Receiver buffer; `post_cap: None` simulates the original unbounded system.
    pub buffer: BufferConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            run_length: 2000,
            replications: 200,
            seed: 1,
            startup_delay: 6,
            partial_carryover: false,
            buffer: BufferConfig::uncapped(9),
        }
    }
}

impl SimConfig {
    pub fn validate(&self, profile: &StreamProfile) -> Result<()> {
        if self.run_length < self.startup_delay || self.run_length == self.startup_delay {
            return Err(Error::Config(format!(
                "run_length {} must exceed startup_delay {}",
                self.run_length, self.startup_delay
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        self.buffer.validate(profile)
    }
}

/// One slot of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub rep: usize,
    pub slot: usize,
    pub chan: usize,
    /// Displayed frame; `None` during start-up.
    pub frame_pos: Option<usize>,
    pub frame_type: Option<String>,
    pub z_bits: Option<u64>,
    pub mse: Option<f64>,
    pub action: String,
    pub n_pkts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub scheduler: SchedulerKind,
    pub profile: String,
    pub profile_hash: String,
    pub channel_hash: String,
    pub seed: u64,
    pub replications: usize,
    pub run_length: usize,
    pub startup_delay: usize,
    pub mean_mse: f64,
    /// 95% normal-approximation half-width across replications.
    pub ci_half_width: f64,
    pub rep_means: Vec<f64>,
    pub per_type_mse: BTreeMap<String, f64>,
    /// Successfully delivered bits per displayed frame.
    pub throughput: f64,
    /// Distortion lower bound at `throughput`.
    pub bound: f64,
    pub channel_occupancy: Vec<f64>,
    pub fallbacks: u64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: Vec<SlotRecord>,
    pub summary: RunSummary,
}

#[derive(Default)]
struct RepStats {
    mse_sum: f64,
    frames: u64,
    per_type: BTreeMap<String, (f64, u64)>,
    bits: u64,
    occupancy: Vec<u64>,
    fallbacks: u64,
}

fn step_view<'a>(
    buffer: &'a BufferState,
    channel_index: usize,
    profile: &'a StreamProfile,
    cfg: &'a BufferConfig,
    channel: &ChannelModel,
    startup: bool,
) -> View<'a> {
    if startup {
        let c = &channel.states[channel_index];
        View::new(profile, buffer, cfg, Phase::Startup, c.capacity_bits(c.packets_per_slot))
    } else {
        view_after_playout(buffer, channel_index, profile, cfg, channel)
    }
}

/// One replication advanced slot by slot.
pub struct Replication<'a> {
    profile: &'a StreamProfile,
    channel: &'a ChannelModel,
    scheduler: &'a Scheduler,
    cfg: &'a SimConfig,
    binomials: Vec<Binomial>,
    ctx: DistortionContext<'a>,
    state: SystemState,
    carry: Option<(Unit, u64)>,
    slot: usize,
    rep: usize,
    stats: RepStats,
}

impl<'a> Replication<'a> {
    pub fn new<R: rand::Rng + ?Sized>(
        profile: &'a StreamProfile,
        channel: &'a ChannelModel,
        scheduler: &'a Scheduler,
        cfg: &'a SimConfig,
        rep: usize,
        rng: &mut R,
    ) -> Self {
        let binomials = channel
            .states
            .iter()
            .map(|c| Binomial::new(c.packets_per_slot as u64, 1.0 - c.packet_error).expect("packet error in [0, 1]"))
            .collect();
        let c0 = sample_index(&channel.stationary(), rng);
        Self {
            profile,
            channel,
            scheduler,
            cfg,
            binomials,
            ctx: DistortionContext::new(profile),
            state: SystemState::new(c0, BufferState::empty(profile, &cfg.buffer, 0)),
            carry: None,
            slot: 0,
            rep,
            stats: RepStats { occupancy: vec![0; channel.num_states()], ..Default::default() },
        }
    }

    /// Pre-display state of the next slot.
    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    /// Display, schedule, deliver, then step the channel.
    pub fn step<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> Result<SlotRecord> {
        let (profile, channel, cfg) = (self.profile, self.channel, self.cfg);
        let slot = self.slot;
        let c = self.state.channel;
        self.stats.occupancy[c] += 1;
        let startup = slot < cfg.startup_delay;
        let mut record = SlotRecord {
            rep: self.rep,
            slot,
            chan: c,
            frame_pos: None,
            frame_type: None,
            z_bits: None,
            mse: None,
            action: String::new(),
            n_pkts: 0,
        };
        let advanced = if startup {
            self.state.buffer.clone()
        } else {
            let frames = self.state.buffer.frames(profile);
            let d = self.ctx.displayed(&self.state.buffer);
            let kind = frames.frame_type(0).to_string();
            record.frame_pos = Some(self.state.buffer.position(profile));
            record.z_bits = Some(frames.received_bits(0));
            record.mse = Some(d);
            self.stats.mse_sum += d;
            self.stats.frames += 1;
            let e = self.stats.per_type.entry(kind.clone()).or_default();
            e.0 += d;
            e.1 += 1;
            record.frame_type = Some(kind);
            self.state.buffer.advance(profile)
        };

        let view = step_view(&advanced, c, profile, &cfg.buffer, channel, startup);
        let chan = &channel.states[c];
        let wrap = |e| Error::Scheduler { slot, source: Box::new(e) };
        let decision = self.scheduler.decide(&self.state, &view, chan, startup).map_err(wrap)?;
        self.stats.fallbacks += decision.fallback as u64;
        let n = self.binomials[c].sample(rng) as u32;
        let mut bits = chan.capacity_bits(n);
        self.stats.bits += bits;
        if cfg.partial_carryover {
            if let Some((u, extra)) = self.carry.take() {
                // carried in the previous view's indices; playout shifts them by one
                let shift = if startup { 0 } else { 1 };
                if decision.action.units.first() == Some(&Unit { frame: u.frame - shift, layer: u.layer }) {
                    bits += extra;
                }
            }
        }
        let k = delivered_units(&view, &decision.action, bits);
        if cfg.partial_carryover {
            if let Some(&u) = decision.action.units.get(k) {
                let used: u64 = decision.action.units[..k].iter().map(|&u| view.unit_bits(u)).sum();
                self.carry = Some((u, bits - used));
            }
        }
        let next = receive_prefix(&view, &decision.action, k).map_err(wrap)?;
        record.action = decision.summary;
        record.n_pkts = n;
        self.state = SystemState::new(channel.sample_next(c, rng), next);
        self.slot += 1;
        Ok(record)
    }
}

fn run_replication(
    profile: &StreamProfile,
    channel: &ChannelModel,
    scheduler: &Scheduler,
    cfg: &SimConfig,
    rep: usize,
) -> Result<(Vec<SlotRecord>, RepStats)> {
    let mut rng = task_rng(cfg.seed, rep as u64);
    let mut sim = Replication::new(profile, channel, scheduler, cfg, rep, &mut rng);
    let trace = (0..cfg.run_length).map(|_| sim.step(&mut rng)).collect::<Result<Vec<_>>>()?;
    Ok((trace, sim.stats))
}

/// Runs `cfg.replications` independent replications and aggregates them.
pub fn run_simulation(
    profile: &StreamProfile,
    channel: &ChannelModel,
    scheduler: &Scheduler,
    cfg: &SimConfig,
    exec: Exec,
) -> Result<SimOutput> {
    cfg.validate(profile)?;
    if let Scheduler::Mdp(m) = scheduler {
        if m.window != cfg.buffer.window {
            return Err(Error::Config(format!(
                "policy was solved for window {} but the simulation uses {}",
                m.window, cfg.buffer.window
            )));
        }
    }
    let reps = exec.map_range(cfg.replications, |r| run_replication(profile, channel, scheduler, cfg, r));
    let mut trace = Vec::with_capacity(cfg.replications * cfg.run_length);
    let mut rep_means = Vec::with_capacity(cfg.replications);
    let mut per_type: BTreeMap<String, (f64, u64)> = BTreeMap::new();
    let (mut bits, mut frames, mut fallbacks) = (0u64, 0u64, 0u64);
    let mut occupancy = vec![0u64; channel.num_states()];
    for r in reps {
        let (t, s) = r?;
        trace.extend(t);
        rep_means.push(s.mse_sum / s.frames as f64);
        for (k, (sum, n)) in s.per_type {
            let e = per_type.entry(k).or_default();
            e.0 += sum;
            e.1 += n;
        }
        bits += s.bits;
        frames += s.frames;
        fallbacks += s.fallbacks;
        for (o, x) in occupancy.iter_mut().zip(s.occupancy) {
            *o += x;
        }
    }
    let m = rep_means.len() as f64;
    let mean_mse = rep_means.iter().sum::<f64>() / m;
    let ci_half_width = if rep_means.len() > 1 {
        let var = rep_means.iter().map(|x| (x - mean_mse).powi(2)).sum::<f64>() / (m - 1.0);
        1.96 * (var / m).sqrt()
    } else {
        0.0
    };
    let throughput = bits as f64 / frames as f64;
    let total_slots: u64 = occupancy.iter().sum();
    let summary = RunSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        scheduler: scheduler.kind(),
        profile: profile.name.clone(),
        profile_hash: hash_json(profile),
        channel_hash: channel.content_hash(),
        seed: cfg.seed,
        replications: cfg.replications,
        run_length: cfg.run_length,
        startup_delay: cfg.startup_delay,
        mean_mse,
        ci_half_width,
        rep_means,
        per_type_mse: per_type.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
        throughput,
        bound: distortion_lower_bound(profile, throughput)?.lower_bound,
        channel_occupancy: occupancy.iter().map(|&o| o as f64 / total_slots as f64).collect(),
        fallbacks,
    };
    Ok(SimOutput { trace, summary })
}

#[derive(Serialize)]
struct TraceRow<'a> {
    schema_version: u32,
    rep: usize,
    slot: usize,
    chan: usize,
    frame_pos: Option<usize>,
    frame_type: Option<&'a str>,
    z_bits: Option<u64>,
    mse: Option<f64>,
    action: &'a str,
    n_pkts: u32,
}

pub fn write_trace<W: std::io::Write>(out: W, trace: &[SlotRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in trace {
        w.serialize(TraceRow {
            schema_version: TRACE_SCHEMA_VERSION,
            rep: r.rep,
            slot: r.slot,
            chan: r.chan,
            frame_pos: r.frame_pos,
            frame_type: r.frame_type.as_deref(),
            z_bits: r.z_bits,
            mse: r.mse,
            action: &r.action,
            n_pkts: r.n_pkts,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &[SlotRecord]) -> Result<()> {
    write_trace(std::fs::File::create(path)?, trace)
}
