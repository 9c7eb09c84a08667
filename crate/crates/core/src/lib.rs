//! Berry connections, curvature and their weak-value decomposition on
//! discretised parameter spaces.

pub mod adiabatic;
pub mod aharonov_bohm;
pub mod checks;
pub mod error;
pub mod export;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod models;
pub mod weak_value;

pub use adiabatic::{evolve_tdse, extract_phases, path_bundle, EvolutionResult, PhaseSeries, TimePath};
pub use aharonov_bohm::{SolenoidConfig, Units, WellConfig};
pub use checks::{run_suite, Suite, SuiteOptions, SuiteReport};
pub use error::{Error, Result};
pub use geometry::{
    berry_connection, berry_curvature, berry_phase_line, berry_phase_wilson, build_bundle, ConnectionField,
    CurvatureField, CurvatureMethod, EigenBundle, GaugeFunction,
};
pub use grid::{Axis, Boundary, DiffOrder, ParameterGrid, PathContour, ScalarField, VectorField};
pub use linalg::{eig_hermitian, ComplexMatrix, ComplexVector, EigenDecomposition, HermitianMatrix, C64};
pub use models::Hamiltonian;
pub use weak_value::{curvature_decompose, decompose, PostSelection, WeakValueDecomposition};
