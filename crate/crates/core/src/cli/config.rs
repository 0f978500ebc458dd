use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::buffer::BufferConfig;
use crate::channel::{ar1_from_model, build_fsmc, Ar1Model, ChannelConfig, ChannelModel};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::harness::{SchedulerKind, SimConfig};
use crate::mdp::{BoundaryMethod, SolveOptions, SpaceConfig};
use crate::stream::{ProfileConfig, StreamProfile};
use crate::toy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSection {
    /// Bundled profile name, or `toy`.
    pub profile: String,
    /// TOML profile file; takes precedence over `profile`.
    pub file: Option<PathBuf>,
}

impl Default for StreamSection {
    fn default() -> Self {
        Self { profile: "foreman".into(), file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// `toy` selects the hand-built two-state channel.
    pub preset: Option<String>,
    /// Channel JSON written by `channel build`; takes precedence over the parameters.
    pub file: Option<PathBuf>,
    pub f_d_hz: f64,
    pub snr_avg_db: f64,
    pub num_states: usize,
    pub frame_rate: f64,
    pub max_modulation: u32,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let c = ChannelConfig::default();
        Self {
            preset: None,
            file: None,
            f_d_hz: c.f_d_hz,
            snr_avg_db: c.snr_avg_db,
            num_states: c.num_states,
            frame_rate: c.frame_rate,
            max_modulation: c.max_modulation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Truncated,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpSection {
    pub window: usize,
    /// Per-layer post cap; four intra periods when absent.
    pub post_cap: Option<u32>,
    pub max_states: usize,
    pub epsilon: f64,
    pub max_iters: usize,
    pub tau: f64,
    pub boundary: BoundaryKind,
    pub boundary_samples: usize,
    pub boundary_seed: u64,
}

impl Default for MdpSection {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            window: BufferConfig::DEFAULT_WINDOW,
            post_cap: None,
            max_states: 2_000_000,
            epsilon: o.epsilon,
            max_iters: o.max_iters,
            tau: o.tau,
            boundary: BoundaryKind::Truncated,
            boundary_samples: 100_000,
            boundary_seed: 7,
        }
    }
}

/// AR(1) overrides; unset fields come from the channel model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineSection {
    pub r_avg: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub scheduler: SchedulerKind,
    /// Policy file for the `mdp` scheduler.
    pub policy: Option<PathBuf>,
    pub run_length: usize,
    pub replications: usize,
    pub seed: u64,
    pub startup_delay: usize,
    pub partial_carryover: bool,
    pub window: usize,
    pub post_cap: Option<u32>,
    pub exec: Exec,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            scheduler: SchedulerKind::Online,
            policy: None,
            run_length: s.run_length,
            replications: s.replications,
            seed: s.seed,
            startup_delay: s.startup_delay,
            partial_carryover: s.partial_carryover,
            window: s.buffer.window,
            post_cap: s.buffer.post_cap,
            exec: Exec::default(),
        }
    }
}

/// Whole run configuration, one TOML section per component.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub stream: StreamSection,
    pub channel: ChannelSection,
    pub mdp: MdpSection,
    pub online: OnlineSection,
    pub sim: SimSection,
}

/// Parses `section.key=value`. The value is read as a TOML literal and falls
/// back to a plain string.
pub fn parse_override(text: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{text}' is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(Error::Config(format!("override key '{key}' has an empty component")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut t = table;
    for p in parents {
        let entry = t.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| Error::Config(format!("'{p}' is not a section")))?;
    }
    t.insert(last.clone(), value);
    Ok(())
}

impl Config {
    /// Reads `path` (if any) and applies the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str::<toml::Table>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (path, value) = parse_override(o)?;
            set_path(&mut table, &path, value)?;
        }
        Config::deserialize(toml::Value::Table(table)).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn profile(&self) -> Result<StreamProfile> {
        if let Some(path) = &self.stream.file {
            let text = std::fs::read_to_string(path)?;
            let cfg: ProfileConfig =
                toml::from_str(&text).map_err(|e| Error::InvalidProfile(format!("{}: {e}", path.display())))?;
            return StreamProfile::from_config(&cfg);
        }
        if self.stream.profile.eq_ignore_ascii_case("toy") {
            return Ok(toy::profile());
        }
        StreamProfile::bundled(&self.stream.profile).ok_or_else(|| {
            Error::InvalidProfile(format!(
                "unknown profile '{}' (toy, {})",
                self.stream.profile,
                StreamProfile::BUNDLED.join(", ")
            ))
        })
    }

    pub fn channel_config(&self) -> ChannelConfig {
        let c = &self.channel;
        ChannelConfig {
            f_d_hz: c.f_d_hz,
            snr_avg_db: c.snr_avg_db,
            num_states: c.num_states,
            frame_rate: c.frame_rate,
            max_modulation: c.max_modulation,
        }
    }

    pub fn channel(&self) -> Result<ChannelModel> {
        if let Some(path) = &self.channel.file {
            return ChannelModel::from_json(&std::fs::read_to_string(path)?);
        }
        match self.channel.preset.as_deref() {
            Some(p) if p.eq_ignore_ascii_case("toy") => Ok(toy::channel()),
            Some(p) => Err(Error::Config(format!("unknown channel preset '{p}' (toy)"))),
            None => build_fsmc(&self.channel_config()),
        }
    }

    /// Profile and channel, checked to share the slot length.
    pub fn inputs(&self) -> Result<(StreamProfile, ChannelModel)> {
        let p = self.profile()?;
        let c = self.channel()?;
        if (p.slot_length() - c.slot_length).abs() > 1e-9 * p.slot_length() {
            return Err(Error::Config(format!(
                "profile slot {:.6} s differs from channel slot {:.6} s",
                p.slot_length(),
                c.slot_length
            )));
        }
        Ok((p, c))
    }

    pub fn space_config(&self, profile: &StreamProfile) -> SpaceConfig {
        let buffer = BufferConfig {
            window: self.mdp.window,
            post_cap: Some(self.mdp.post_cap.unwrap_or(4 * profile.f_intra as u32)),
        };
        SpaceConfig { max_states: self.mdp.max_states, ..SpaceConfig::new(buffer) }
    }

    pub fn boundary_method(&self) -> BoundaryMethod {
        match self.mdp.boundary {
            BoundaryKind::Truncated => BoundaryMethod::TruncatedSolve,
            BoundaryKind::MonteCarlo => BoundaryMethod::monte_carlo(self.mdp.boundary_samples, self.mdp.boundary_seed),
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            epsilon: self.mdp.epsilon,
            max_iters: self.mdp.max_iters,
            tau: self.mdp.tau,
            exec: self.sim.exec,
        }
    }

    pub fn ar1(&self, channel: &ChannelModel) -> Ar1Model {
        let base = ar1_from_model(channel);
        match (self.online.r_avg, self.online.rho) {
            (None, None) => base,
            (r, rho) => Ar1Model::new(r.unwrap_or(base.r_avg), rho.unwrap_or(base.rho)),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            run_length: s.run_length,
            replications: s.replications,
            seed: s.seed,
            startup_delay: s.startup_delay,
            partial_carryover: s.partial_carryover,
            buffer: BufferConfig { window: s.window, post_cap: s.post_cap },
        }
    }
}
