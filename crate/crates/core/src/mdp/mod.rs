//! Finite semi-Markov model of the buffer and channel, its boundary
//! dynamics and the average-cost solver.

mod boundary;
mod eval;
mod policy;
mod solve;
mod space;

pub use boundary::{boundary_dynamics, BoundaryDynamics, BoundaryMethod, MAX_DENSE_INTERIOR};
pub use eval::{components, evaluate_policy, induced_chain, recurrent_class, stationary};
pub use policy::{PolicyEntry, PolicyFile, POLICY_SCHEMA_VERSION};
pub use solve::{solve_average_cost, SolveOptions, SolveResult};
pub use space::{
    enumerate_states, ActionEntry, InteriorChain, InteriorNode, Part, SpaceConfig, SpaceManifest, StateSpace, Target,
};
