use thiserror::Error;

/// Everything that can go wrong in the numerical pipeline.
///
/// Variant names double as the error identifiers the CLI reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("NonHermitianInput: max |H - H^dagger| = {asymmetry:e} exceeds {tolerance:e}")]
    NonHermitianInput { asymmetry: f64, tolerance: f64 },

    #[error("ZeroVector: cannot fix the phase of a zero vector")]
    ZeroVector,

    #[error("DimensionMismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("DegenerateBand: band {band} at grid point {point} has gap {gap:e}")]
    DegenerateBand { point: usize, band: usize, gap: f64 },

    #[error("GridTooCoarse: {0}")]
    GridTooCoarse(String),

    #[error("OpenBoundaryUnsupported: axis {axis} is not periodic")]
    OpenBoundaryUnsupported { axis: usize },

    #[error("PathOffGrid: {0}")]
    PathOffGrid(String),

    #[error("VanishingOverlap: |<u_k|u_k+1>| = {overlap:e} between points {from} and {to}")]
    VanishingOverlap { from: usize, to: usize, overlap: f64 },

    #[error("PostSelectionOrthogonal: <phi|u_{band}> vanishes at every grid point")]
    PostSelectionOrthogonal { band: usize },

    #[error("NodeMasked: wavefunction amplitude vanishes at {0}")]
    NodeMasked(String),

    #[error("ParameterStateUndefined: {0}")]
    ParameterStateUndefined(String),

    #[error("StepTooLarge: {0}")]
    StepTooLarge(String),

    #[error("NonAdiabatic: max leakage {leakage:e} exceeds {bound:e}")]
    NonAdiabatic { leakage: f64, bound: f64 },

    #[error("InsideSolenoid: |r - center| = {distance} <= radius {radius}")]
    InsideSolenoid { distance: f64, radius: f64 },

    #[error("PathCrossesSolenoid: segment passes within {distance} of the solenoid axis (radius {radius})")]
    PathCrossesSolenoid { distance: f64, radius: f64 },

    #[error("NodeOnPath: |v_n| = {value:e} at path sample {index}")]
    NodeOnPath { index: usize, value: f64 },

    #[error("InvalidInput: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable identifier, e.g. `"DegenerateBand"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonHermitianInput { .. } => "NonHermitianInput",
            Error::ZeroVector => "ZeroVector",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DegenerateBand { .. } => "DegenerateBand",
            Error::GridTooCoarse(_) => "GridTooCoarse",
            Error::OpenBoundaryUnsupported { .. } => "OpenBoundaryUnsupported",
            Error::PathOffGrid(_) => "PathOffGrid",
            Error::VanishingOverlap { .. } => "VanishingOverlap",
            Error::PostSelectionOrthogonal { .. } => "PostSelectionOrthogonal",
            Error::NodeMasked(_) => "NodeMasked",
            Error::ParameterStateUndefined(_) => "ParameterStateUndefined",
            Error::StepTooLarge(_) => "StepTooLarge",
            Error::NonAdiabatic { .. } => "NonAdiabatic",
            Error::InsideSolenoid { .. } => "InsideSolenoid",
            Error::PathCrossesSolenoid { .. } => "PathCrossesSolenoid",
            Error::NodeOnPath { .. } => "NodeOnPath",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
