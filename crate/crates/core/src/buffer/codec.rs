use std::collections::HashMap;

use super::state::SystemState;
use crate::error::{Error, Result};

/// Dense bijection between enumerated states and `0..len`.
#[derive(Debug, Clone, Default)]
pub struct StateIndex {
    states: Vec<SystemState>,
    map: HashMap<SystemState, usize>,
}

impl StateIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_states(states: Vec<SystemState>) -> Self {
        let mut idx = Self::new();
        for s in states {
            idx.insert(s);
        }
        idx
    }

    /// Index of `s`, inserting it if new. Returns `(index, inserted)`.
    pub fn insert(&mut self, s: SystemState) -> (usize, bool) {
        if let Some(&i) = self.map.get(&s) {
            return (i, false);
        }
        let i = self.states.len();
        self.map.insert(s.clone(), i);
        self.states.push(s);
        (i, true)
    }

    pub fn encode(&self, s: &SystemState) -> Result<usize> {
        self.map.get(s).copied().ok_or(Error::StateNotInSpace)
    }

    pub fn get(&self, s: &SystemState) -> Option<usize> {
        self.map.get(s).copied()
    }

    pub fn decode(&self, i: usize) -> Result<&SystemState> {
        self.states.get(i).ok_or(Error::StateNotInSpace)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }
}
