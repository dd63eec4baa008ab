//! Agent-based simulation of resource exploitation on a toroidal lattice.
//!
//! A square world of side `s` carries five grids: agent counts `G`, ecosystem
//! richness `B`, renewable energy `R`, fossil energy `E` and food `F`. Agents
//! move towards resources, reproduce, consume energy and food, cooperate or
//! compete, and live or die by a lifespan rule that rewards consumption and
//! punishes crowding. The crate provides the world stepper, batch runs and a
//! three-dimensional initialization mesh sweep over the movement probability,
//! the cooperation probability and the consumption-profile shape parameter.
//!
//! Everything is deterministic for a fixed configuration: a single run uses
//! one seeded generator, and sweep runs derive per-run seeds from the master
//! seed with a counter scheme, so results do not depend on thread scheduling.

use thiserror::Error;

pub mod config;
pub mod sweep;
pub mod world;

pub use config::{LifespanBasis, SimConfig};
pub use sweep::{mesh_sweep, NodeSummary, SweepRow, SweepTable};
pub use world::{
    chebyshev_torus, convert_profile, lifespan_update, line_of_sight, run_simulation,
    step_function, Agent, RunSummary, TurnStats, World,
};

/// Errors for configuration parsing and simulation preconditions.
#[derive(Debug, Error)]
pub enum SimError {
    /// A required configuration key is absent from the file.
    #[error("missing config key: {0}")]
    MissingKey(String),

    /// A key that is not part of the configuration schema.
    #[error("unknown config key: {0}")]
    UnknownKey(String),

    /// The same key appears more than once.
    #[error("duplicate config key: {0}")]
    DuplicateKey(String),

    /// A key is present but its value is out of range or unparseable.
    #[error("invalid value for {key}: {message}")]
    InvalidValue { key: String, message: String },

    /// A config line that is not `key=value`, a comment or blank.
    #[error("config line {line}: {message}")]
    Malformed { line: usize, message: String },

    /// A precondition violation outside of config parsing.
    #[error("{0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
