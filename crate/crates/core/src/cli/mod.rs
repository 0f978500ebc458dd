//! Command implementations behind the `svc-sched` binary. Each command
//! writes into its own run directory and echoes what it resolved.

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use config::Config;

use crate::bound::{distortion_lower_bound, BoundResult};
use crate::buffer::{BufferState, SystemState};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::harness::{compare, run_simulation, write_trace_file, MdpScheduler, Report, RunSummary, Scheduler, SchedulerKind};
use crate::manifest::hash_json;
use crate::mdp::{boundary_dynamics, enumerate_states, solve_average_cost, PolicyFile};
use crate::online::OnlineParams;
use crate::stream::StreamProfile;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SVC_SCHED_OUT";
pub const DEFAULT_OUT_DIR: &str = "runs";
pub const BOUND_SCHEMA_VERSION: u32 = 1;

/// Creates `<base>/run-<unix seconds>-<millis>-<command>`, adding a suffix on collision.
pub fn create_run_dir(base: &Path, command: &str) -> Result<PathBuf> {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_err(|e| Error::Config(e.to_string()))?;
    let stem = format!("run-{}-{:03}-{command}", now.as_secs(), now.subsec_millis());
    std::fs::create_dir_all(base)?;
    for i in 0.. {
        let path = if i == 0 { base.join(&stem) } else { base.join(format!("{stem}-{i}")) };
        match std::fs::create_dir(&path) {
            Ok(()) => return Ok(path),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

/// Saves the resolved config into the run directory and echoes it.
pub fn record_config(cfg: &Config, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let text = cfg.to_toml();
    std::fs::write(dir.join("config.toml"), &text)?;
    writeln!(out, "# resolved config\n{text}")?;
    writeln!(out, "run_dir = {}", dir.display())?;
    Ok(())
}

fn echo_inputs(out: &mut dyn Write, profile: &StreamProfile, channel: &ChannelModel) -> Result<()> {
    writeln!(out, "profile = {} ({})", profile.name, hash_json(profile))?;
    writeln!(out, "channel_hash = {}", channel.content_hash())?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Builds the channel, writes `channel.json` and prints the mean throughput.
pub fn channel_build(cfg: &Config, dir: &Path, out: &mut dyn Write) -> Result<ChannelModel> {
    let ch = cfg.channel()?;
    let path = dir.join("channel.json");
    std::fs::write(&path, ch.to_json()?)?;
    writeln!(out, "channel_hash = {}", ch.content_hash())?;
    writeln!(out, "states = {} rate_scale = {}", ch.num_states(), ch.rate_scale)?;
    writeln!(out, "r_avg = {:.3} bits/slot", ch.mean_throughput())?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(ch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub manifest: String,
    pub states: usize,
    pub window_states: usize,
    pub transitions: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub residual: f64,
    pub residual_tail: Vec<f64>,
}

/// Enumerates, solves and writes `policy.json` plus `solve.json`.
pub fn mdp_solve(cfg: &Config, dir: &Path, out: &mut dyn Write) -> Result<PolicyFile> {
    let (p, ch) = cfg.inputs()?;
    echo_inputs(out, &p, &ch)?;
    let exec = cfg.sim.exec;
    let space_cfg = cfg.space_config(&p);
    let start = SystemState::new(0, BufferState::empty(&p, &space_cfg.buffer, 0));
    let space = enumerate_states(&p, &ch, &space_cfg, &start, exec)?;
    writeln!(out, "states = {} ({} window, {} transitions)", space.len(), space.num_window_states(), space.num_transitions())?;
    let boundary = boundary_dynamics(&space, &ch, cfg.boundary_method(), exec)?;
    let sol = solve_average_cost(&space, &boundary, &space.cost, &cfg.solve_options())?;
    let policy = PolicyFile::from_solution(&space, &sol)?;
    policy.save(&dir.join("policy.json"))?;
    let report = SolveReport {
        manifest: space.manifest.hash.clone(),
        states: space.len(),
        window_states: space.num_window_states(),
        transitions: space.num_transitions(),
        lambda: sol.lambda,
        iterations: sol.iterations,
        residual: sol.residual,
        residual_tail: sol.residual_tail.clone(),
    };
    write_json(&dir.join("solve.json"), &report)?;
    writeln!(out, "manifest = {}", space.manifest.hash)?;
    writeln!(out, "lambda = {:.6} after {} sweeps (residual {:e})", sol.lambda, sol.iterations, sol.residual)?;
    writeln!(out, "wrote {}", dir.join("policy.json").display())?;
    Ok(policy)
}

/// Builds the configured scheduler.
pub fn scheduler(cfg: &Config, profile: &StreamProfile, channel: &ChannelModel) -> Result<Scheduler> {
    Ok(match cfg.sim.scheduler {
        SchedulerKind::Mdp => {
            let path = cfg
                .sim
                .policy
                .as_ref()
                .ok_or_else(|| Error::Config("scheduler 'mdp' needs sim.policy".into()))?;
            Scheduler::Mdp(MdpScheduler::from_policy(&PolicyFile::load_unchecked(path)?, profile, channel)?)
        }
        SchedulerKind::Online => Scheduler::Online(OnlineParams { ar1: cfg.ar1(channel), i_preemption: true }),
        SchedulerKind::OnlineNoIsplit => Scheduler::Online(OnlineParams { ar1: cfg.ar1(channel), i_preemption: false }),
        SchedulerKind::Sequential => Scheduler::Sequential,
    })
}

/// Runs the replications and writes `trace.csv` plus `summary.json`.
pub fn simulate(cfg: &Config, dir: &Path, out: &mut dyn Write) -> Result<RunSummary> {
    let (p, ch) = cfg.inputs()?;
    echo_inputs(out, &p, &ch)?;
    writeln!(out, "seed = {}", cfg.sim.seed)?;
    let sched = scheduler(cfg, &p, &ch)?;
    let sim = run_simulation(&p, &ch, &sched, &cfg.sim_config(), cfg.sim.exec)?;
    write_trace_file(&dir.join("trace.csv"), &sim.trace)?;
    write_json(&dir.join("summary.json"), &sim.summary)?;
    let s = &sim.summary;
    writeln!(out, "scheduler = {}", s.scheduler.name())?;
    writeln!(out, "mean_mse = {:.6} ± {:.6} (95%)", s.mean_mse, s.ci_half_width)?;
    writeln!(out, "bound = {:.6} at {:.1} bits/frame", s.bound, s.throughput)?;
    if s.fallbacks > 0 {
        writeln!(out, "fallbacks = {}", s.fallbacks)?;
    }
    writeln!(out, "wrote {}", dir.join("summary.json").display())?;
    Ok(sim.summary)
}

/// Lower bound together with what it was computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFile {
    pub schema_version: u32,
    pub profile: String,
    pub profile_hash: String,
    pub r_avg: f64,
    pub result: BoundResult,
}

/// Bound at `r_avg`, or at the channel's mean throughput.
pub fn bound(cfg: &Config, r_avg: Option<f64>, dir: &Path, out: &mut dyn Write) -> Result<BoundFile> {
    let p = cfg.profile()?;
    let r = match r_avg {
        Some(r) => r,
        None => {
            let ch = cfg.inputs()?.1;
            writeln!(out, "channel_hash = {}", ch.content_hash())?;
            ch.mean_throughput()
        }
    };
    let result = distortion_lower_bound(&p, r)?;
    let file = BoundFile {
        schema_version: BOUND_SCHEMA_VERSION,
        profile: p.name.clone(),
        profile_hash: hash_json(&p),
        r_avg: r,
        result,
    };
    write_json(&dir.join("bound.json"), &file)?;
    writeln!(out, "profile = {} ({})", file.profile, file.profile_hash)?;
    writeln!(out, "r_avg = {r:.3} bits/frame")?;
    writeln!(out, "lower_bound = {:.6}", file.result.lower_bound)?;
    Ok(file)
}

/// Tabulates summary files against an optional bound file.
pub fn report(summaries: &[PathBuf], bound: Option<&Path>, dir: &Path, out: &mut dyn Write) -> Result<Report> {
    let runs = summaries.iter().map(|p| read_json::<RunSummary>(p)).collect::<Result<Vec<_>>>()?;
    let bound = bound.map(read_json::<BoundFile>).transpose()?;
    if runs.is_empty() && bound.is_none() {
        return Err(Error::Report("nothing to report: give summaries and/or a bound".into()));
    }
    if let (Some(b), Some(s)) = (&bound, runs.first()) {
        if b.profile_hash != s.profile_hash {
            return Err(Error::ManifestMismatch { expected: s.profile_hash.clone(), found: b.profile_hash.clone() });
        }
    }
    let mut rep = compare(&runs, bound.as_ref().map(|b| &b.result))?;
    if rep.profile.is_none() {
        rep.profile = bound.as_ref().map(|b| b.profile.clone());
    }
    let table = rep.to_table();
    write_json(&dir.join("report.json"), &rep)?;
    std::fs::write(dir.join("report.txt"), &table)?;
    write!(out, "{table}")?;
    Ok(rep)
}

/// One-line JSON error record.
pub fn error_record(e: &Error) -> String {
    serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}
