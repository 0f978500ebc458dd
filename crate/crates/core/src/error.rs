use thiserror::Error;

/// Errors raised anywhere in the scheduling toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid stream profile: {0}")]
    InvalidProfile(String),

    #[error("frame position {position} outside intra period of {f_intra} frames")]
    PositionOutOfRange { position: usize, f_intra: usize },

    #[error("unsupported modulation: {0} bits/symbol (expected 1, 2 or 3)")]
    UnsupportedModulation(u32),

    #[error("invalid channel parameters: {0}")]
    InvalidChannel(String),

    #[error(
        "slow-fading validity violated: P[{from}][{to}] = {value:.4} (crossing rate too high for the slot length; lower the Doppler frequency or raise the frame rate)"
    )]
    SlowFadingViolated { from: usize, to: usize, value: f64 },

    #[error("series too short for AR(1) estimation: {len} samples (need at least {min})")]
    SeriesTooShort { len: usize, min: usize },

    #[error("invalid buffer state: {0}")]
    InvalidState(String),

    #[error("action violates scheduling constraints: {0}")]
    InvalidAction(String),

    #[error("exhaustive action enumeration exceeded cap of {cap} actions")]
    EnumerationCap { cap: usize },

    #[error("layer count {layers} out of range 1..={max}")]
    LayerOutOfRange { layers: usize, max: usize },

    #[error("state not in the enumerated space")]
    StateNotInSpace,

    #[error("state budget exceeded: reached {reached} states (budget {budget})")]
    StateBudgetExceeded { reached: usize, budget: usize },

    #[error(
        "boundary trajectory from state {state} did not re-enter the window-incomplete set within {cap} slots; the channel is too fast or too slow for the video rate"
    )]
    NonReturning { state: usize, cap: usize },

    #[error("value iteration did not converge in {iterations} sweeps (last span residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("induced chain is not unichain: {0}")]
    Reducible(String),

    #[error("manifest mismatch: expected {expected}, found {found}")]
    ManifestMismatch { expected: String, found: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("scheduler failed at slot {slot}: {source}")]
    Scheduler {
        slot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("report error: {0}")]
    Report(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable snake_case name used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidProfile(_) => "invalid_profile",
            Error::PositionOutOfRange { .. } => "position_out_of_range",
            Error::UnsupportedModulation(_) => "unsupported_modulation",
            Error::InvalidChannel(_) => "invalid_channel",
            Error::SlowFadingViolated { .. } => "slow_fading_violated",
            Error::SeriesTooShort { .. } => "series_too_short",
            Error::InvalidState(_) => "invalid_state",
            Error::InvalidAction(_) => "invalid_action",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::LayerOutOfRange { .. } => "layer_out_of_range",
            Error::StateNotInSpace => "state_not_in_space",
            Error::StateBudgetExceeded { .. } => "state_budget_exceeded",
            Error::NonReturning { .. } => "non_returning",
            Error::NotConverged { .. } => "not_converged",
            Error::Reducible(_) => "reducible",
            Error::ManifestMismatch { .. } => "manifest_mismatch",
            Error::Domain(_) => "domain",
            Error::Scheduler { .. } => "scheduler",
            Error::Report(_) => "report",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
