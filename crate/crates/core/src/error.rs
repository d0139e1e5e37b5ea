use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FracError {
    #[error("fractional order {0} is outside the supported range")]
    InvalidOrder(f64),
    #[error("grid needs at least 2 samples, got {0}")]
    GridTooSmall(usize),
    #[error("invalid grid (dt = {dt}, count = {count})")]
    InvalidGrid { dt: f64, count: usize },
    #[error("expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("signals live on different grids")]
    GridMismatch,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("element name `{0}` is used more than once")]
    DuplicateName(String),
    #[error("element `{name}`: {what} must be strictly positive, got {value}")]
    NonPositive {
        name: String,
        what: &'static str,
        value: f64,
    },
    #[error("element `{0}` has both terminals on the same node")]
    SelfLoop(String),
    #[error("no element named `{0}`")]
    UnknownElement(String),
    #[error("element `{0}` is not a resistor")]
    NotAResistor(String),
    #[error("circuit has no elements")]
    Empty,
    #[error("constitutive spec: {0}")]
    BadConstitutive(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("voltage sources {0:?} form a loop")]
    VoltageLoop(alloc::vec::Vec<String>),
    #[error("current sources {0:?} form a cut-set")]
    CurrentCutset(alloc::vec::Vec<String>),
    #[error("nodes {0:?} are not connected to ground")]
    Floating(alloc::vec::Vec<String>),
    #[error("circuit has no ground node `0`")]
    NoGround,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("circuit is not simulation-ready: {0}")]
    NotReady(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error("newton iteration failed at t = {time}: residual {residual:e} A after {iterations} iterations")]
    StepFailure {
        time: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("singular step matrix at t = {time}")]
    Singular { time: f64 },
    #[error("drive `{0}` does not name a source or output of this circuit")]
    UnknownDrive(String),
    #[error("waveform for `{name}` does not cover t = {time}")]
    WaveformRange { name: String, time: f64 },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("nudging strength must be finite and non-negative, got {0}")]
    NegativeBeta(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LagrangianError {
    #[error("circuit has no output capacitors")]
    MissingOutput,
    #[error("element `{0}` is not a trainable synapse")]
    NotTrainable(String),
    #[error("trajectory does not belong to this circuit")]
    Mismatch,
    #[error(transparent)]
    Frac(#[from] FracError),
}

/// Which simulation of a two-phase estimate failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Free,
    Nudged,
    Plus,
    Minus,
}

impl core::fmt::Display for Phase {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Phase::Free => "free",
            Phase::Nudged => "nudged",
            Phase::Plus => "plus",
            Phase::Minus => "minus",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EqpropError {
    #[error("{phase} phase: {source}")]
    Simulation {
        phase: Phase,
        #[source]
        source: SimError,
    },
    #[error("nudging strength must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("circuit has no trainable synapses")]
    NoTrainables,
    #[error("finite-difference step {eps} is not below the smallest conductance {g_min}")]
    StepTooLarge { eps: f64, g_min: f64 },
    #[error("epoch {epoch}, example {example}: {source}")]
    Training {
        epoch: usize,
        example: usize,
        #[source]
        source: alloc::boxed::Box<EqpropError>,
    },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Lagrangian(#[from] LagrangianError),
    #[error(transparent)]
    Frac(#[from] FracError),
}
