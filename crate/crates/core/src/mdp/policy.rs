use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::solve::SolveResult;
use super::space::{SpaceConfig, SpaceManifest, StateSpace};
use crate::buffer::{ActionTag, SystemState};
use crate::error::{Error, Result};

pub const POLICY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub index: usize,
    pub state: SystemState,
    /// Entry of the state's action list.
    pub choice: u32,
    pub tag: Option<ActionTag>,
}

/// Solved policy keyed by the state-space manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub schema_version: u32,
    pub manifest: SpaceManifest,
    pub space: SpaceConfig,
    pub lambda: f64,
    pub entries: Vec<PolicyEntry>,
}

impl PolicyFile {
    pub fn from_solution(space: &StateSpace, result: &SolveResult) -> Result<Self> {
        if result.manifest != space.manifest.hash {
            return Err(Error::ManifestMismatch { expected: space.manifest.hash.clone(), found: result.manifest.clone() });
        }
        let entries = space
            .window_states()
            .map(|s| {
                let choice = result.policy[s].ok_or_else(|| Error::Domain(format!("no action for state {s}")))?;
                Ok(PolicyEntry {
                    index: s,
                    state: space.index.states()[s].clone(),
                    choice,
                    tag: space.actions[s][choice as usize].tag,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            schema_version: POLICY_SCHEMA_VERSION,
            manifest: space.manifest.clone(),
            space: space.config,
            lambda: result.lambda,
            entries,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Reads a policy, refusing it unless its manifest equals `expected`.
    pub fn load(path: &Path, expected: &SpaceManifest) -> Result<Self> {
        let p = Self::load_unchecked(path)?;
        p.check(expected)?;
        Ok(p)
    }

    pub fn load_unchecked(path: &Path) -> Result<Self> {
        let p: PolicyFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if p.schema_version != POLICY_SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported policy schema_version {}", p.schema_version)));
        }
        Ok(p)
    }

    pub fn check(&self, expected: &SpaceManifest) -> Result<()> {
        if &self.manifest != expected {
            return Err(Error::ManifestMismatch {
                expected: format!("{}/{}/{}", expected.profile, expected.channel, expected.hash),
                found: format!("{}/{}/{}", self.manifest.profile, self.manifest.channel, self.manifest.hash),
            });
        }
        Ok(())
    }

    /// Checks only the inputs the policy was built from.
    pub fn check_inputs(&self, profile_hash: &str, channel_hash: &str) -> Result<()> {
        for (want, have) in [(profile_hash, &self.manifest.profile), (channel_hash, &self.manifest.channel)] {
            if want != have {
                return Err(Error::ManifestMismatch { expected: want.to_string(), found: have.clone() });
            }
        }
        Ok(())
    }

    /// Descriptor lookup table for simulation.
    pub fn table(&self) -> Result<HashMap<SystemState, ActionTag>> {
        self.entries
            .iter()
            .map(|e| {
                let tag = e.tag.ok_or_else(|| Error::Config("policy has no canonical descriptors".into()))?;
                Ok((e.state.clone(), tag))
            })
            .collect()
    }
}
