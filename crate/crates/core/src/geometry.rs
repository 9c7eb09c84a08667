//! Eigenbundles over parameter grids: Berry connection, phase and curvature,
//! gauge transformations, and the Wilson-loop and plaquette oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{planes, Boundary, ParameterGrid, PathContour, ScalarField, VectorField};
use crate::linalg::{eig_hermitian, inner_unchecked, wrap_phase, ComplexVector, DEGENERACY_TOL, C64, I};
use crate::models::Hamiltonian;

/// Overlaps between neighbouring states below this magnitude make link
/// phases meaningless.
pub const OVERLAP_TOL: f64 = 1e-6;

/// Stitching warns when a neighbour overlap drops below this.
pub const CONTINUITY_WARN: f64 = 0.5;

/// Eigenstates of `H(R)` on every grid point, for a subset of the bands.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBundle {
    grid: ParameterGrid,
    dim: usize,
    bands: Vec<usize>,
    energies: Vec<Vec<f64>>,
    scales: Vec<f64>,
    states: Vec<Vec<ComplexVector>>,
}

/// Eigensolve every grid point, keeping all bands.
pub fn build_bundle(h: &dyn Hamiltonian, grid: &ParameterGrid) -> Result<EigenBundle> {
    let bands: Vec<usize> = (0..h.dim()).collect();
    build_bundle_for_bands(h, grid, &bands)
}

/// Eigensolve every grid point, keeping only the listed bands.
pub fn build_bundle_for_bands(h: &dyn Hamiltonian, grid: &ParameterGrid, bands: &[usize]) -> Result<EigenBundle> {
    if h.n_params() != grid.n_dims() {
        return Err(Error::DimensionMismatch { expected: h.n_params(), found: grid.n_dims() });
    }
    let dim = h.dim();
    let mut bands = bands.to_vec();
    bands.sort_unstable();
    bands.dedup();
    if bands.is_empty() || bands[bands.len() - 1] >= dim {
        return Err(Error::InvalidInput(format!("bands {bands:?} not within 0..{dim}")));
    }
    let solved: Vec<(Vec<f64>, f64, Vec<ComplexVector>)> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let hm = h.at(&grid.coords(p))?;
            if hm.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: hm.dim() });
            }
            let eig = eig_hermitian(&hm)?;
            let states = bands.iter().map(|&n| eig.eigenvectors[n].clone()).collect();
            Ok((eig.eigenvalues, eig.scale, states))
        })
        .collect::<Result<_>>()?;
    let mut energies = Vec::with_capacity(solved.len());
    let mut scales = Vec::with_capacity(solved.len());
    let mut states = Vec::with_capacity(solved.len());
    for (e, s, v) in solved {
        energies.push(e);
        scales.push(s);
        states.push(v);
    }
    let mut bundle = EigenBundle { grid: grid.clone(), dim, bands, energies, scales, states };
    bundle.stitch();
    Ok(bundle)
}

impl EigenBundle {
    /// Assemble a bundle from precomputed eigenpairs. `states[p][k]` is the
    /// state of `bands[k]` at point `p`; `energies[p]` holds the full spectrum.
    pub fn from_parts(
        grid: ParameterGrid,
        bands: Vec<usize>,
        energies: Vec<Vec<f64>>,
        states: Vec<Vec<ComplexVector>>,
    ) -> Result<Self> {
        if energies.len() != grid.len() || states.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: states.len() });
        }
        let dim = states[0].first().map(|v| v.len()).unwrap_or(0);
        for (p, row) in states.iter().enumerate() {
            if row.len() != bands.len() || row.iter().any(|v| v.len() != dim) {
                return Err(Error::InvalidInput(format!("inconsistent states at point {p}")));
            }
        }
        let scales = energies.iter().map(|e| e.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        Ok(EigenBundle { grid, dim, bands, energies, scales, states })
    }

    pub fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored band indices, ascending.
    pub fn bands(&self) -> &[usize] {
        &self.bands
    }

    pub fn has_all_bands(&self) -> bool {
        self.bands.len() == self.dim
    }

    fn slot(&self, n: usize) -> Result<usize> {
        self.bands
            .binary_search(&n)
            .map_err(|_| Error::InvalidInput(format!("band {n} is not stored in this bundle")))
    }

    /// `|u_n(R_p)>`. Panics if band `n` was not stored.
    pub fn state(&self, p: usize, n: usize) -> &ComplexVector {
        &self.states[p][self.slot(n).expect("band stored")]
    }

    pub fn energy(&self, p: usize, n: usize) -> f64 {
        self.energies[p][n]
    }

    pub fn energies(&self, p: usize) -> &[f64] {
        &self.energies[p]
    }

    pub fn band_gap(&self, p: usize, n: usize) -> f64 {
        let e = &self.energies[p];
        let below = if n > 0 { e[n] - e[n - 1] } else { f64::INFINITY };
        let above = if n + 1 < e.len() { e[n + 1] - e[n] } else { f64::INFINITY };
        below.min(above)
    }

    /// Band `n` must be stored and separated from its neighbours everywhere.
    pub fn check_band(&self, n: usize) -> Result<()> {
        self.slot(n)?;
        for p in 0..self.grid.len() {
            let gap = self.band_gap(p, n);
            if gap < DEGENERACY_TOL * self.scales[p].max(f64::MIN_POSITIVE) {
                return Err(Error::DegenerateBand { point: p, band: n, gap });
            }
        }
        Ok(())
    }

    /// Walk the grid in storage order and flip the sign of any state whose
    /// overlap with an already-visited neighbour is dominated by a negative
    /// real part.
    fn stitch(&mut self) {
        let grid = self.grid.clone();
        for p in 1..grid.len() {
            let idx = grid.multi_index(p);
            let Some(axis) = (0..grid.n_dims()).rev().find(|&m| idx[m] > 0) else { continue };
            let q = grid.neighbor(p, axis, -1).expect("interior neighbour");
            for k in 0..self.bands.len() {
                let o = inner_unchecked(&self.states[q][k], &self.states[p][k]);
                if o.re < 0.0 && o.re.abs() > o.im.abs() {
                    self.states[p][k].neg_mut();
                }
                if o.norm() < CONTINUITY_WARN {
                    log::warn!(
                        "band {} overlap {:.3} between points {q} and {p}: grid may be too coarse",
                        self.bands[k],
                        o.norm()
                    );
                }
            }
        }
    }

    /// Covariant derivative of `|u_n>` at `p` along every axis, together with
    /// the connection components it implies.
    ///
    /// Neighbours are first rotated by their link phase `arg <u(p)|u(q)>`,
    /// which makes the result transform exactly like the state under a
    /// gauge change.
    pub fn ket_derivative(&self, p: usize, n: usize) -> Result<KetDerivative> {
        let k = self.slot(n)?;
        let u = &self.states[p][k];
        let nd = self.grid.n_dims();
        let mut connection = Vec::with_capacity(nd);
        let mut kets = Vec::with_capacity(nd);
        for m in 0..nd {
            let stencil = self.grid.stencil(p, m)?;
            let mut a = 0.0;
            let mut acc = ComplexVector::zeros(self.dim);
            for (q, w) in stencil.iter() {
                if q == p {
                    continue;
                }
                let v = &self.states[q][k];
                let link = inner_unchecked(u, v);
                let mag = link.norm();
                if mag < OVERLAP_TOL {
                    return Err(Error::VanishingOverlap { from: p, to: q, overlap: mag });
                }
                let phase = link.arg();
                a -= w * phase;
                let rot = C64::from_polar(w, -phase);
                acc.axpy(rot, v, C64::new(1.0, 0.0));
                acc.axpy(C64::new(-w * mag, 0.0), u, C64::new(1.0, 0.0));
            }
            acc.axpy(-I * a, u, C64::new(1.0, 0.0));
            connection.push(a);
            kets.push(acc);
        }
        Ok(KetDerivative { connection, kets })
    }
}

/// `d_m |u_n>` for each axis `m`, with `A_m = i <u_n|d_m u_n>`.
#[derive(Debug, Clone, PartialEq)]
pub struct KetDerivative {
    pub connection: Vec<f64>,
    pub kets: Vec<ComplexVector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Full,
    SelfPart,
    Mutual,
    MutualComponent(usize),
}

impl FieldKind {
    pub fn label(&self) -> String {
        match self {
            FieldKind::Full => "full".into(),
            FieldKind::SelfPart => "self".into(),
            FieldKind::Mutual => "mutual".into(),
            FieldKind::MutualComponent(m) => format!("mutual_component_{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionField {
    pub field: VectorField,
    pub band: usize,
    pub kind: FieldKind,
}

impl ConnectionField {
    pub fn grid(&self) -> &ParameterGrid {
        &self.field.grid
    }

    /// Largest imaginary part over all points and components.
    pub fn max_imag(&self) -> f64 {
        let g = self.grid();
        (0..g.len())
            .flat_map(|p| self.field.at(p).iter().map(|z| z.im.abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

pub fn berry_connection(bundle: &EigenBundle, n: usize) -> Result<ConnectionField> {
    bundle.check_band(n)?;
    let grid = bundle.grid();
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|p| bundle.ket_derivative(p, n).map(|d| d.connection))
        .collect::<Result<_>>()?;
    let mut field = VectorField::zeros(grid);
    for (p, row) in rows.into_iter().enumerate() {
        for (m, a) in row.into_iter().enumerate() {
            field.at_mut(p)[m] = C64::new(a, 0.0);
        }
    }
    Ok(ConnectionField { field, band: n, kind: FieldKind::Full })
}

/// Trapezoidal line integral of the real part, wrapped to `(-pi, pi]` on
/// closed paths.
pub fn berry_phase_line(conn: &ConnectionField, path: &PathContour) -> Result<f64> {
    let v = crate::grid::line_integral(&conn.field, path)?.re;
    Ok(if path.is_closed() { wrap_phase(v) } else { v })
}

/// `-arg prod_k <u_k|u_k+1>` along the path.
pub fn berry_phase_wilson(bundle: &EigenBundle, n: usize, path: &PathContour) -> Result<f64> {
    let k = bundle.slot(n)?;
    let mut prod = C64::new(1.0, 0.0);
    for w in path.points().windows(2) {
        let o = inner_unchecked(&bundle.states[w[0]][k], &bundle.states[w[1]][k]);
        if o.norm() < OVERLAP_TOL {
            return Err(Error::VanishingOverlap { from: w[0], to: w[1], overlap: o.norm() });
        }
        prod *= o / o.norm();
    }
    Ok(-prod.arg())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureMethod {
    Curl,
    Plaquette,
}

/// Curvature on the `(a, b)` plane. For plaquettes, the value at a point
/// belongs to the cell spanned from it in the `+a`, `+b` directions.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneCurvature {
    pub plane: (usize, usize),
    pub values: ScalarField,
    /// True where no value exists (missing cell) or the value is unreliable.
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub band: usize,
    pub kind: FieldKind,
    pub method: CurvatureMethod,
    pub planes: Vec<PlaneCurvature>,
}

impl CurvatureField {
    pub fn plane(&self, a: usize, b: usize) -> Option<&PlaneCurvature> {
        self.planes.iter().find(|pc| pc.plane == (a, b))
    }
}

pub fn berry_curvature(bundle: &EigenBundle, n: usize, method: CurvatureMethod) -> Result<CurvatureField> {
    let grid = bundle.grid();
    if grid.n_dims() < 2 {
        return Err(Error::InvalidInput("curvature needs at least two parameter dimensions".into()));
    }
    bundle.check_band(n)?;
    let planes = match method {
        CurvatureMethod::Curl => {
            let conn = berry_connection(bundle, n)?;
            crate::grid::curl(&conn.field)?
                .into_iter()
                .map(|(plane, values)| PlaneCurvature { plane, values, mask: vec![false; grid.len()] })
                .collect()
        }
        CurvatureMethod::Plaquette => planes(grid.n_dims())
            .into_iter()
            .map(|(a, b)| plaquette_plane(bundle, n, a, b))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(CurvatureField { band: n, kind: FieldKind::Full, method, planes })
}

/// Flux `-arg` of the four-link product around the cell at `p`, or `None`
/// if the cell leaves the grid.
pub fn plaquette_flux(bundle: &EigenBundle, n: usize, p: usize, a: usize, b: usize) -> Result<Option<f64>> {
    let grid = bundle.grid();
    let corners = (|| {
        let p1 = grid.neighbor(p, a, 1)?;
        let p2 = grid.neighbor(p1, b, 1)?;
        let p3 = grid.neighbor(p, b, 1)?;
        Some([p, p1, p2, p3, p])
    })();
    let Some(c) = corners else { return Ok(None) };
    let k = bundle.slot(n)?;
    let mut prod = C64::new(1.0, 0.0);
    for w in c.windows(2) {
        let o = inner_unchecked(&bundle.states[w[0]][k], &bundle.states[w[1]][k]);
        if o.norm() < OVERLAP_TOL {
            return Err(Error::VanishingOverlap { from: w[0], to: w[1], overlap: o.norm() });
        }
        prod *= o / o.norm();
    }
    Ok(Some(-prod.arg()))
}

fn plaquette_plane(bundle: &EigenBundle, n: usize, a: usize, b: usize) -> Result<PlaneCurvature> {
    let grid = bundle.grid();
    let area = grid.axis(a).spacing * grid.axis(b).spacing;
    let fluxes: Vec<Option<f64>> =
        (0..grid.len()).into_par_iter().map(|p| plaquette_flux(bundle, n, p, a, b)).collect::<Result<_>>()?;
    let mask = fluxes.iter().map(Option::is_none).collect();
    let values = fluxes.iter().map(|f| C64::new(f.unwrap_or(0.0) / area, 0.0)).collect();
    Ok(PlaneCurvature { plane: (a, b), values: ScalarField::new(grid.clone(), values)?, mask })
}

/// Sum of plaquette fluxes over every cell of a two-dimensional grid,
/// added in storage order. On a closed surface this is `2 pi` times the
/// Chern number.
pub fn chern_flux(bundle: &EigenBundle, n: usize) -> Result<f64> {
    let grid = bundle.grid();
    if grid.n_dims() != 2 {
        return Err(Error::InvalidInput("Chern sums need a two-dimensional grid".into()));
    }
    let mut total = 0.0;
    for p in 0..grid.len() {
        if let Some(f) = plaquette_flux(bundle, n, p, 0, 1)? {
            total += f;
        }
    }
    Ok(total)
}

pub fn chern_number(bundle: &EigenBundle, n: usize) -> Result<f64> {
    Ok(chern_flux(bundle, n)? / (2.0 * std::f64::consts::PI))
}

/// Real phase fields `zeta`, one per transformed band, plus an optional one
/// for the post-selected bra.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaugeFunction {
    pub bands: Vec<(usize, Vec<f64>)>,
    pub post_selection: Option<Vec<f64>>,
}

impl GaugeFunction {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn with_band(mut self, n: usize, zeta: Vec<f64>) -> Self {
        self.bands.retain(|(m, _)| *m != n);
        self.bands.push((n, zeta));
        self
    }

    pub fn with_band_fn(self, grid: &ParameterGrid, n: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let zeta = (0..grid.len()).map(|p| f(&grid.coords(p))).collect();
        self.with_band(n, zeta)
    }

    pub fn with_post_selection(mut self, zeta: Vec<f64>) -> Self {
        self.post_selection = Some(zeta);
        self
    }

    pub fn band(&self, n: usize) -> Option<&[f64]> {
        self.bands.iter().find(|(m, _)| *m == n).map(|(_, z)| z.as_slice())
    }

    /// Random smooth phases for every listed band and for the bra.
    pub fn random_smooth(grid: &ParameterGrid, bands: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = GaugeFunction::identity();
        for &n in bands {
            let z = random_smooth_field(grid, &mut rng);
            g = g.with_band(n, z);
        }
        let z = random_smooth_field(grid, &mut rng);
        g.with_post_selection(z)
    }

    /// `zeta_n` as a scalar field, zero if the band is untransformed.
    pub fn band_field(&self, grid: &ParameterGrid, n: usize) -> ScalarField {
        let values = match self.band(n) {
            Some(z) => z.iter().map(|&x| C64::new(x, 0.0)).collect(),
            None => vec![C64::new(0.0, 0.0); grid.len()],
        };
        ScalarField { grid: grid.clone(), values }
    }
}

/// Band-limited random Fourier sum with `max |zeta| <= pi`. Wavenumbers on
/// periodic axes are integers so the field stays single valued.
pub fn random_smooth_field(grid: &ParameterGrid, rng: &mut impl Rng) -> Vec<f64> {
    const TERMS: usize = 4;
    let weights: Vec<f64> = (0..TERMS).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let budget = std::f64::consts::PI * rng.random_range(0.5..1.0);
    let terms: Vec<(f64, Vec<f64>, f64)> = weights
        .iter()
        .map(|w| {
            let k = grid
                .axes()
                .iter()
                .map(|ax| match ax.boundary {
                    Boundary::Periodic => {
                        rng.random_range(-2i32..=2) as f64 * 2.0 * std::f64::consts::PI / ax.period()
                    }
                    Boundary::Open => {
                        let extent = (ax.spacing * (ax.points - 1) as f64).max(f64::MIN_POSITIVE);
                        rng.random_range(-2.0..2.0) * std::f64::consts::PI / extent
                    }
                })
                .collect();
            (budget * w / total, k, rng.random_range(0.0..2.0 * std::f64::consts::PI))
        })
        .collect();
    (0..grid.len())
        .map(|p| {
            let r = grid.coords(p);
            terms
                .iter()
                .map(|(amp, k, ph)| {
                    let arg: f64 = k.iter().zip(&r).zip(grid.axes()).map(|((k, x), ax)| k * (x - ax.origin)).sum();
                    amp * (arg + ph).cos()
                })
                .sum()
        })
        .collect()
}

/// `|u_n> -> e^{i zeta_n} |u_n>` pointwise. Energies are untouched.
pub fn apply_gauge(bundle: &EigenBundle, g: &GaugeFunction) -> Result<EigenBundle> {
    let mut out = bundle.clone();
    for (n, zeta) in &g.bands {
        if zeta.len() != bundle.grid.len() {
            return Err(Error::DimensionMismatch { expected: bundle.grid.len(), found: zeta.len() });
        }
        let Ok(k) = bundle.slot(*n) else { continue };
        for (p, z) in zeta.iter().enumerate() {
            if *z != 0.0 {
                let phase = C64::from_polar(1.0, *z);
                out.states[p][k] *= phase;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{grad_scalar, Axis, DiffOrder};
    use crate::linalg::{pauli_z, phase_distance};
    use crate::models::{FnHamiltonian, SpinHalfCartesian, SpinHalfSphere};
    use std::f64::consts::PI;

    fn sphere_patch(nth: usize, nph: usize) -> ParameterGrid {
        ParameterGrid::new(vec![Axis::open(0.3, 1.3, nth), Axis::periodic(0.0, 2.0 * PI, nph)])
            .unwrap()
            .with_order(DiffOrder::Fourth)
    }

    fn azimuthal_ring(theta: f64, steps: usize) -> (EigenBundle, PathContour) {
        let g = ParameterGrid::new(vec![Axis::open(theta - 0.02, theta + 0.02, 5), Axis::periodic(0.0, 2.0 * PI, steps)])
            .unwrap();
        let b = build_bundle(&SpinHalfSphere::default(), &g).unwrap();
        let path = PathContour::axis_loop(&g, g.linear_index(&[2, 0]), 1).unwrap();
        (b, path)
    }

    #[test]
    fn diagonal_builder_has_constant_states() {
        let h = FnHamiltonian::new(2, 1, |r: &[f64]| pauli_z() * C64::new(r[0], 0.0));
        let g = ParameterGrid::new(vec![Axis::open(0.5, 2.0, 16)]).unwrap();
        let b = build_bundle(&h, &g).unwrap();
        for p in 0..g.len() {
            let r = g.coords(p)[0];
            assert!((b.energy(p, 0) + r).abs() < 1e-14 && (b.energy(p, 1) - r).abs() < 1e-14);
            assert_eq!(b.state(p, 0)[0], C64::new(0.0, 0.0));
            assert_eq!(b.state(p, 1)[1], C64::new(0.0, 0.0));
        }
        let a = berry_connection(&b, 0).unwrap();
        assert!((0..g.len()).all(|p| a.field.get(p, 0).norm() == 0.0));
    }

    #[test]
    fn cartesian_spin_spectrum() {
        let g = ParameterGrid::new(vec![Axis::open(0.5, 1.0, 4), Axis::open(-1.0, 1.0, 5), Axis::open(0.2, 0.6, 3)])
            .unwrap();
        let b = build_bundle(&SpinHalfCartesian, &g).unwrap();
        for p in 0..g.len() {
            let r = g.coords(p);
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((b.energy(p, 1) - norm).abs() < 1e-12);
            assert!((b.energy(p, 0) + norm).abs() < 1e-12);
        }
    }

    #[test]
    fn crossing_is_reported() {
        let h = FnHamiltonian::new(2, 1, |r: &[f64]| pauli_z() * C64::new(r[0], 0.0));
        let g = ParameterGrid::new(vec![Axis::open(-1.0, 1.0, 5)]).unwrap();
        let b = build_bundle(&h, &g).unwrap();
        assert!(matches!(berry_connection(&b, 0), Err(Error::DegenerateBand { point: 2, .. })));
    }

    #[test]
    fn connection_matches_analytic_spinor() {
        // lower band (cos t/2, sin t/2 e^{i phi}): A_theta = 0, A_phi = -sin^2(t/2)
        let g = sphere_patch(21, 64);
        let b = build_bundle(&SpinHalfSphere::default(), &g).unwrap();
        let a = berry_connection(&b, 0).unwrap();
        assert!(a.max_imag() == 0.0);
        for p in 0..g.len() {
            let th = g.coords(p)[0];
            assert!(a.field.get(p, 0).re.abs() < 1e-5);
            assert!((a.field.get(p, 1).re + (th / 2.0).sin().powi(2)).abs() < 1e-5);
        }
    }

    #[test]
    fn loop_phases_match_solid_angle() {
        for th in [PI / 6.0, PI / 3.0, PI / 2.0] {
            let want = -PI * (1.0 - th.cos());
            let (b, path) = azimuthal_ring(th, 400);
            let a = berry_connection(&b, 0).unwrap();
            let line = berry_phase_line(&a, &path).unwrap();
            assert!(phase_distance(line, want) < 1e-4, "{th}: {line} vs {want}");
            let (b, path) = azimuthal_ring(th, 10_000);
            let w = berry_phase_wilson(&b, 0, &path).unwrap();
            assert!(phase_distance(w, want) < 1e-6, "{th}: {w} vs {want}");
        }
    }

    #[test]
    fn reversed_loop_flips_sign() {
        let (b, path) = azimuthal_ring(PI / 2.0, 400);
        let a = berry_connection(&b, 0).unwrap();
        let fwd = berry_phase_line(&a, &path).unwrap();
        let rev = berry_phase_line(&a, &path.reversed()).unwrap();
        assert!(phase_distance(fwd, -rev) < 1e-12);
        assert!(phase_distance(fwd, -PI) < 1e-3);
    }

    #[test]
    fn wilson_loop_ignores_pointwise_phases() {
        let (b, path) = azimuthal_ring(PI / 3.0, 400);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zeta: Vec<f64> = (0..b.grid().len()).map(|_| rng.random_range(-PI..PI)).collect();
        let b2 = apply_gauge(&b, &GaugeFunction::identity().with_band(0, zeta)).unwrap();
        let w1 = berry_phase_wilson(&b, 0, &path).unwrap();
        let w2 = berry_phase_wilson(&b2, 0, &path).unwrap();
        assert!(phase_distance(w1, w2) < 1e-12);
    }

    #[test]
    fn gauge_shift_is_exact() {
        let g = sphere_patch(17, 48);
        let b = build_bundle(&SpinHalfSphere::default(), &g).unwrap();
        let a = berry_connection(&b, 0).unwrap();

        let same = apply_gauge(&b, &GaugeFunction::identity()).unwrap();
        assert_eq!(same, b);

        let c = apply_gauge(&b, &GaugeFunction::identity().with_band_fn(&g, 0, |_| 0.7)).unwrap();
        let ac = berry_connection(&c, 0).unwrap();
        let d = ac.field.sub(&a.field);
        assert!((0..g.len()).all(|p| d.at(p).iter().all(|z| z.norm() < 1e-10)));

        let lin = apply_gauge(&b, &GaugeFunction::identity().with_band_fn(&g, 0, |r| r[0])).unwrap();
        let al = berry_connection(&lin, 0).unwrap();
        let d = al.field.sub(&a.field);
        for p in 0..g.len() {
            assert!((d.get(p, 0) + 1.0).norm() < 1e-8);
            assert!(d.get(p, 1).norm() < 1e-8);
        }

        let gf = GaugeFunction::random_smooth(&g, &[0, 1], 11);
        let ar = berry_connection(&apply_gauge(&b, &gf).unwrap(), 0).unwrap();
        let grad = grad_scalar(&gf.band_field(&g, 0)).unwrap();
        let d = ar.field.sub(&a.field.sub(&grad));
        assert!((0..g.len()).all(|p| d.at(p).iter().all(|z| z.norm() < 1e-8)));
    }

    #[test]
    fn curl_and_plaquette_agree() {
        // lower band curvature on (theta, phi) is -sin(theta)/2
        let g = sphere_patch(41, 96);
        let b = build_bundle(&SpinHalfSphere::default(), &g).unwrap();
        let curl = berry_curvature(&b, 0, CurvatureMethod::Curl).unwrap();
        let plaq = berry_curvature(&b, 0, CurvatureMethod::Plaquette).unwrap();
        let (c, q) = (curl.plane(0, 1).unwrap(), plaq.plane(0, 1).unwrap());
        let (ht, hp) = (g.axis(0).spacing, g.axis(1).spacing);
        for p in 0..g.len() {
            let th = g.coords(p)[0];
            assert!((c.values.values[p].re + th.sin() / 2.0).abs() < 1e-6);
            if !q.mask[p] {
                let mid = th + ht / 2.0;
                assert!((q.values.values[p].re + mid.sin() / 2.0).abs() < 2.0 * (ht + hp) * (ht + hp));
            }
        }
    }

    #[test]
    fn curvature_is_gauge_invariant() {
        let g = sphere_patch(21, 48);
        let b = build_bundle(&SpinHalfSphere::default(), &g).unwrap();
        let b2 = apply_gauge(&b, &GaugeFunction::random_smooth(&g, &[0, 1], 5)).unwrap();
        for method in [CurvatureMethod::Curl, CurvatureMethod::Plaquette] {
            let c1 = berry_curvature(&b, 0, method).unwrap();
            let c2 = berry_curvature(&b2, 0, method).unwrap();
            let (x, y) = (&c1.planes[0].values.values, &c2.planes[0].values.values);
            assert!(x.iter().zip(y).all(|(a, b)| (a - b).norm() < 1e-8));
        }
    }

    #[test]
    fn sphere_chern_number() {
        let g = ParameterGrid::new(vec![Axis::open(0.0, PI, 33), Axis::periodic(0.0, 2.0 * PI, 48)]).unwrap();
        let b = build_bundle(&SpinHalfSphere::default(), &g).unwrap();
        let flux = chern_flux(&b, 0).unwrap();
        assert!((flux + 2.0 * PI).abs() < 1e-9, "{flux}");
        assert!((chern_number(&b, 1).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn random_gauge_is_bounded_and_periodic() {
        let g = sphere_patch(9, 16);
        let gf = GaugeFunction::random_smooth(&g, &[0], 1);
        assert!(gf.band(0).unwrap().iter().all(|z| z.abs() <= PI));
        let z = gf.band(0).unwrap();
        let h = g.axis(1).spacing;
        let ring_closes = (0..9).all(|i| {
            let last = g.linear_index(&[i, 15]);
            let first = g.linear_index(&[i, 0]);
            (z[first] - z[last]).abs() < 10.0 * h
        });
        assert!(ring_closes);
    }
}
