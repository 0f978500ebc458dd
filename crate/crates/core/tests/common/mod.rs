#![allow(dead_code)]

pub mod criteria;
pub mod mdp;
pub mod oracles;
pub mod stats;
