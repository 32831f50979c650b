use thiserror::Error;

/// Errors raised by the closed-form energy model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NotFinite { name: &'static str, value: f64 },
    #[error("supply levels must satisfy v_high > v_low >= 0 (v_low = {v_low}, v_high = {v_high})")]
    SupplyLevels { v_low: f64, v_high: f64 },
    #[error("frequencies of a slope must differ (both {0} Hz)")]
    EqualFrequencies(f64),
}

/// Errors raised while building or running a transient simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid bus network: {0}")]
    Network(String),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("invalid switch schedule: {0}")]
    Schedule(String),
    #[error("time step {dt:e} s exceeds a tenth of the smallest active time constant {tau:e} s")]
    StepTooLarge { dt: f64, tau: f64 },
    #[error("time {t:e} s lies outside the trace [{start:e}, {end:e}] s")]
    OutsideTrace { t: f64, start: f64, end: f64 },
    #[error("invalid sweep: {0}")]
    Sweep(String),
}

/// Errors raised by the toggle memory machine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MachineError {
    #[error("bit index {index} out of range for word width {width}")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("instruction toggles nothing")]
    EmptyToggleSet,
    #[error("word width {found} does not match machine width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("instruction {index} is irreversible and cannot be inverted")]
    Irreversible { index: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}
