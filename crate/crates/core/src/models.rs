//! Parameterised Hamiltonians `H(R)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pauli_x, pauli_y, pauli_z, ComplexMatrix, HermitianMatrix, C64};

/// A Hermitian matrix-valued function of the parameters.
pub trait Hamiltonian: Sync {
    /// Hilbert-space dimension.
    fn dim(&self) -> usize;
    /// Number of parameters `R` is expected to have.
    fn n_params(&self) -> usize;
    fn at(&self, r: &[f64]) -> Result<HermitianMatrix>;
}

/// Adapter for closures.
pub struct FnHamiltonian<F> {
    dim: usize,
    n_params: usize,
    f: F,
}

impl<F> FnHamiltonian<F>
where
    F: Fn(&[f64]) -> ComplexMatrix + Sync,
{
    pub fn new(dim: usize, n_params: usize, f: F) -> Self {
        FnHamiltonian { dim, n_params, f }
    }
}

impl<F> Hamiltonian for FnHamiltonian<F>
where
    F: Fn(&[f64]) -> ComplexMatrix + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn n_params(&self) -> usize {
        self.n_params
    }
    fn at(&self, r: &[f64]) -> Result<HermitianMatrix> {
        HermitianMatrix::new((self.f)(r))
    }
}

fn sigma_dot(n: [f64; 3]) -> ComplexMatrix {
    pauli_x() * C64::new(n[0], 0.0) + pauli_y() * C64::new(n[1], 0.0) + pauli_z() * C64::new(n[2], 0.0)
}

/// Spin-1/2 in a field of fixed magnitude, parameterised by polar and
/// azimuthal angles `(theta, phi)`: `H = -B n(theta, phi) . sigma`.
///
/// The lower band is the spinor aligned with `n`,
/// `(cos(theta/2), sin(theta/2) e^{i phi})` in the reference gauge on the
/// northern hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinHalfSphere {
    pub field: f64,
}

impl Default for SpinHalfSphere {
    fn default() -> Self {
        SpinHalfSphere { field: 1.0 }
    }
}

impl SpinHalfSphere {
    pub fn direction(theta: f64, phi: f64) -> [f64; 3] {
        [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
    }
}

impl Hamiltonian for SpinHalfSphere {
    fn dim(&self) -> usize {
        2
    }
    fn n_params(&self) -> usize {
        2
    }
    fn at(&self, r: &[f64]) -> Result<HermitianMatrix> {
        let n = Self::direction(r[0], r[1]);
        HermitianMatrix::new(sigma_dot([-self.field * n[0], -self.field * n[1], -self.field * n[2]]))
    }
}

/// Spin-1/2 with a Cartesian field vector as the parameter: `H = -R . sigma`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpinHalfCartesian;

impl Hamiltonian for SpinHalfCartesian {
    fn dim(&self) -> usize {
        2
    }
    fn n_params(&self) -> usize {
        3
    }
    fn at(&self, r: &[f64]) -> Result<HermitianMatrix> {
        HermitianMatrix::new(sigma_dot([-r[0], -r[1], -r[2]]))
    }
}

/// `diag(-(1 + |R|^2), 1 + |R|^2)`: gapped everywhere, constant eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagTwoLevel {
    pub n_params: usize,
}

impl Hamiltonian for DiagTwoLevel {
    fn dim(&self) -> usize {
        2
    }
    fn n_params(&self) -> usize {
        self.n_params
    }
    fn at(&self, r: &[f64]) -> Result<HermitianMatrix> {
        let e = 1.0 + r.iter().map(|x| x * x).sum::<f64>();
        Ok(HermitianMatrix::from_real_diagonal(&[-e, e]))
    }
}

/// `H(R) = H0 + sum_m R_m H_m`, with matrices given as rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilModel {
    pub h0: Vec<Vec<[f64; 2]>>,
    pub terms: Vec<Vec<Vec<[f64; 2]>>>,
}

fn to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("stencil matrices must be square and non-empty".into()));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

impl StencilModel {
    pub fn validate(&self) -> Result<()> {
        let n = to_matrix(&self.h0)?.nrows();
        HermitianMatrix::new(to_matrix(&self.h0)?)?;
        for t in &self.terms {
            let m = to_matrix(t)?;
            if m.nrows() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
            }
            HermitianMatrix::new(m)?;
        }
        Ok(())
    }
}

impl Hamiltonian for StencilModel {
    fn dim(&self) -> usize {
        self.h0.len()
    }
    fn n_params(&self) -> usize {
        self.terms.len()
    }
    fn at(&self, r: &[f64]) -> Result<HermitianMatrix> {
        if r.len() != self.terms.len() {
            return Err(Error::DimensionMismatch { expected: self.terms.len(), found: r.len() });
        }
        let mut h = to_matrix(&self.h0)?;
        for (x, t) in r.iter().zip(&self.terms) {
            h += to_matrix(t)? * C64::new(*x, 0.0);
        }
        HermitianMatrix::new(h)
    }
}
