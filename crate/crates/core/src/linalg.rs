//! Dense complex vectors and matrices, plus a Hermitian eigensolver with a
//! deterministic ordering and eigenvector phase convention.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexVector = DVector<C64>;
pub type ComplexMatrix = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Entrywise tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Relative gap (in units of `||H||`) below which a band counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Relative magnitude window inside which two entries tie for "largest".
const TIE_TOL: f64 = 1e-12;

/// A matrix checked to be Hermitian at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        let asym = max_asymmetry(&m);
        if !(asym <= HERMITIAN_TOL) {
            return Err(Error::NonHermitianInput { asymmetry: asym, tolerance: HERMITIAN_TOL });
        }
        Ok(Self(m))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(ComplexMatrix::from_fn(n, n, |i, j| if i == j { C64::new(d[i], 0.0) } else { C64::new(0.0, 0.0) }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Largest entrywise `|M - M^dagger|`.
pub fn max_asymmetry(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if !(d <= worst) {
                worst = d;
            }
        }
    }
    worst
}

/// Eigenvalues ascending, eigenvectors orthonormal and phase-fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<ComplexVector>,
    /// Smallest adjacent eigenvalue difference (infinite for dim 1).
    pub gap: f64,
    /// `||H||` (Frobenius), kept for relative degeneracy checks.
    pub scale: f64,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Distance from band `n` to its nearest neighbour in energy.
    pub fn band_gap(&self, n: usize) -> f64 {
        let e = &self.eigenvalues;
        let below = if n > 0 { e[n] - e[n - 1] } else { f64::INFINITY };
        let above = if n + 1 < e.len() { e[n + 1] - e[n] } else { f64::INFINITY };
        below.min(above)
    }

    pub fn is_degenerate(&self, n: usize) -> bool {
        self.band_gap(n) < DEGENERACY_TOL * self.scale.max(f64::MIN_POSITIVE)
    }
}

/// Diagonalise a Hermitian matrix.
///
/// Eigenvalues come back ascending; ties in the sort keep the solver's
/// column order so identical inputs give bitwise identical outputs.
pub fn eig_hermitian(h: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = h.dim();
    let eig = h.0.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| {
            let v: ComplexVector = eig.eigenvectors.column(k).into_owned();
            let norm = v.norm();
            fix_reference_gauge(&(v / C64::new(norm, 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let gap = eigenvalues.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    Ok(EigenDecomposition { eigenvalues, eigenvectors, gap, scale: h.norm() })
}

/// Rotate `v` by a global phase so its largest-magnitude entry is real and
/// positive. Entries within a relative `1e-12` of the maximum tie, and the
/// lowest index wins.
pub fn fix_reference_gauge(v: &ComplexVector) -> Result<ComplexVector> {
    let max = v.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::ZeroVector);
    }
    let k = v.iter().position(|z| z.norm() >= max * (1.0 - TIE_TOL)).expect("max exists");
    let pivot = v[k];
    let mag = pivot.norm();
    let phase = pivot.conj() / mag;
    let mut out = v.map(|z| z * phase);
    out[k] = C64::new(mag, 0.0);
    Ok(out)
}

/// `<bra|ket>`, conjugate-linear in `bra`. Summed in index order.
pub fn inner(bra: &ComplexVector, ket: &ComplexVector) -> Result<C64> {
    if bra.len() != ket.len() {
        return Err(Error::DimensionMismatch { expected: bra.len(), found: ket.len() });
    }
    Ok(inner_unchecked(bra, ket))
}

#[inline]
pub(crate) fn inner_unchecked(bra: &ComplexVector, ket: &ComplexVector) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (b, k) in bra.iter().zip(ket.iter()) {
        acc += b.conj() * k;
    }
    acc
}

/// `exp(-i H t)` built from the spectral decomposition, unitary to rounding.
pub fn unitary_propagator(eig: &EigenDecomposition, t: f64) -> ComplexMatrix {
    let n = eig.dim();
    let mut u = ComplexMatrix::zeros(n, n);
    for (e, v) in eig.eigenvalues.iter().zip(&eig.eigenvectors) {
        let phase = C64::from_polar(1.0, -e * t);
        u += v * v.adjoint() * phase;
    }
    u
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Distance between two angles on the circle.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), -I, I, C64::new(0.0, 0.0)])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)])
}
