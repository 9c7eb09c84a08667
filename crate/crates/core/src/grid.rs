//! Uniform parameter grids, finite-difference calculus on fields over them,
//! and the discrete translation and momentum operators.
//!
//! Points are stored in row-major order: the last axis varies fastest.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Accuracy order of the finite-difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DiffOrder {
    #[default]
    Second,
    Fourth,
}

impl DiffOrder {
    pub fn from_int(k: u32) -> Result<Self> {
        match k {
            2 => Ok(DiffOrder::Second),
            4 => Ok(DiffOrder::Fourth),
            _ => Err(Error::InvalidInput(format!("unsupported stencil order {k}"))),
        }
    }

    fn min_points(self) -> usize {
        match self {
            DiffOrder::Second => 3,
            DiffOrder::Fourth => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub points: usize,
    pub spacing: f64,
    pub origin: f64,
    pub boundary: Boundary,
}

impl Axis {
    /// `points` samples covering `[start, end]` inclusive.
    pub fn open(start: f64, end: f64, points: usize) -> Self {
        let spacing = if points > 1 { (end - start) / (points - 1) as f64 } else { 1.0 };
        Axis { points, spacing, origin: start, boundary: Boundary::Open }
    }

    /// `points` samples covering `[start, start + period)`.
    pub fn periodic(start: f64, period: f64, points: usize) -> Self {
        Axis { points, spacing: period / points as f64, origin: start, boundary: Boundary::Periodic }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn period(&self) -> f64 {
        self.points as f64 * self.spacing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    axes: Vec<Axis>,
    #[serde(default)]
    order: DiffOrder,
}

/// Finite-difference weights (already divided by the spacing).
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    entries: [(usize, f64); 5],
    len: usize,
}

impl Stencil {
    fn from_offsets(grid: &ParameterGrid, p: usize, axis: usize, taps: &[(isize, f64)], scale: f64) -> Self {
        let mut entries = [(0usize, 0.0f64); 5];
        let mut len = 0;
        for &(off, w) in taps {
            if w == 0.0 {
                continue;
            }
            let q = grid.neighbor(p, axis, off).expect("stencil stays on grid");
            entries[len] = (q, w * scale);
            len += 1;
        }
        Stencil { entries, len }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries[..self.len].iter().copied()
    }

    pub fn apply(&self, mut f: impl FnMut(usize) -> C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (q, w) in self.iter() {
            acc += f(q) * w;
        }
        acc
    }
}

impl ParameterGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidInput("grid needs at least one axis".into()));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.points == 0 || !(a.spacing > 0.0) || !a.spacing.is_finite() {
                return Err(Error::InvalidInput(format!("axis {k}: need points >= 1 and spacing > 0")));
            }
        }
        Ok(ParameterGrid { axes, order: DiffOrder::Second })
    }

    pub fn with_order(mut self, order: DiffOrder) -> Self {
        self.order = order;
        self
    }

    pub fn order(&self) -> DiffOrder {
        self.order
    }

    pub fn n_dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, m: usize) -> &Axis {
        &self.axes[m]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn stride(&self, m: usize) -> usize {
        self.axes[m + 1..].iter().map(|a| a.points).product()
    }

    pub fn multi_index(&self, p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n_dims()];
        let mut rem = p;
        for m in (0..self.n_dims()).rev() {
            idx[m] = rem % self.axes[m].points;
            rem /= self.axes[m].points;
        }
        idx
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.points + i)
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        self.multi_index(p).iter().zip(&self.axes).map(|(&i, a)| a.coord(i)).collect()
    }

    /// Index `offset` steps along `axis`, wrapping on periodic axes.
    pub fn neighbor(&self, p: usize, axis: usize, offset: isize) -> Option<usize> {
        let a = &self.axes[axis];
        let n = a.points as isize;
        let i = ((p / self.stride(axis)) % a.points) as isize;
        let j = i + offset;
        let j = match a.boundary {
            Boundary::Periodic => j.rem_euclid(n),
            Boundary::Open if (0..n).contains(&j) => j,
            Boundary::Open => return None,
        };
        Some((p as isize + (j - i) * self.stride(axis) as isize) as usize)
    }

    /// Derivative stencil along `axis` at point `p`: central in the
    /// interior, one-sided at open ends, wrapped on periodic axes.
    pub fn stencil(&self, p: usize, axis: usize) -> Result<Stencil> {
        let a = &self.axes[axis];
        let n = a.points;
        if n < self.order.min_points() {
            return Err(Error::GridTooCoarse(format!(
                "axis {axis} has {n} points; {:?}-order differences need {}",
                self.order,
                self.order.min_points()
            )));
        }
        let i = (p / self.stride(axis)) % n;
        let periodic = a.boundary == Boundary::Periodic;
        let (taps, scale): (&[(isize, f64)], f64) = match self.order {
            DiffOrder::Second => {
                let s = 1.0 / (2.0 * a.spacing);
                if periodic || (i >= 1 && i + 1 < n) {
                    (&[(-1, -1.0), (1, 1.0)], s)
                } else if i == 0 {
                    (&[(0, -3.0), (1, 4.0), (2, -1.0)], s)
                } else {
                    (&[(0, 3.0), (-1, -4.0), (-2, 1.0)], s)
                }
            }
            DiffOrder::Fourth => {
                let s = 1.0 / (12.0 * a.spacing);
                if periodic || (i >= 2 && i + 2 < n) {
                    (&[(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)], s)
                } else if i == 0 {
                    (&[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)], s)
                } else if i == 1 {
                    (&[(-1, -3.0), (0, -10.0), (1, 18.0), (2, -6.0), (3, 1.0)], s)
                } else if i == n - 1 {
                    (&[(0, 25.0), (-1, -48.0), (-2, 36.0), (-3, -16.0), (-4, 3.0)], s)
                } else {
                    (&[(1, 3.0), (0, 10.0), (-1, -18.0), (-2, 6.0), (-3, -1.0)], s)
                }
            }
        };
        Ok(Stencil::from_offsets(self, p, axis, taps, scale))
    }

    /// Coordinate difference `R_q - R_p`, using the minimal image on
    /// periodic axes.
    pub fn displacement(&self, p: usize, q: usize) -> Vec<f64> {
        let ip = self.multi_index(p);
        let iq = self.multi_index(q);
        self.axes
            .iter()
            .enumerate()
            .map(|(m, a)| {
                let mut d = iq[m] as isize - ip[m] as isize;
                if a.boundary == Boundary::Periodic {
                    let n = a.points as isize;
                    d = d.rem_euclid(n);
                    if 2 * d > n {
                        d -= n;
                    }
                }
                d as f64 * a.spacing
            })
            .collect()
    }

    fn are_adjacent(&self, p: usize, q: usize) -> bool {
        let ip = self.multi_index(p);
        let iq = self.multi_index(q);
        self.axes.iter().enumerate().all(|(m, a)| {
            let d = (iq[m] as isize - ip[m] as isize).abs();
            d <= 1 || (a.boundary == Boundary::Periodic && d == a.points as isize - 1)
        })
    }
}

/// Complex scalar per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: ParameterGrid,
    pub values: Vec<C64>,
}

impl ScalarField {
    pub fn new(grid: ParameterGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: &ParameterGrid, f: impl Fn(&[f64]) -> C64) -> Self {
        let values = (0..grid.len()).map(|p| f(&grid.coords(p))).collect();
        ScalarField { grid: grid.clone(), values }
    }

    pub fn from_real_fn(grid: &ParameterGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |r| C64::new(f(r), 0.0))
    }
}

/// `N` complex components per grid point, one per parameter direction.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: ParameterGrid,
    values: Vec<C64>,
}

impl VectorField {
    pub fn zeros(grid: &ParameterGrid) -> Self {
        VectorField { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.len() * grid.n_dims()] }
    }

    pub fn from_fn(grid: &ParameterGrid, f: impl Fn(&[f64]) -> Vec<C64>) -> Self {
        let n = grid.n_dims();
        let mut out = Self::zeros(grid);
        for p in 0..grid.len() {
            let v = f(&grid.coords(p));
            assert_eq!(v.len(), n, "component count must equal grid dimension");
            out.values[p * n..(p + 1) * n].copy_from_slice(&v);
        }
        out
    }

    pub fn n_dims(&self) -> usize {
        self.grid.n_dims()
    }

    pub fn at(&self, p: usize) -> &[C64] {
        let n = self.n_dims();
        &self.values[p * n..(p + 1) * n]
    }

    pub fn at_mut(&mut self, p: usize) -> &mut [C64] {
        let n = self.n_dims();
        &mut self.values[p * n..(p + 1) * n]
    }

    pub fn get(&self, p: usize, m: usize) -> C64 {
        self.values[p * self.n_dims() + m]
    }

    pub fn component(&self, m: usize) -> ScalarField {
        let values = (0..self.grid.len()).map(|p| self.get(p, m)).collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn zip_with(&self, other: &VectorField, f: impl Fn(C64, C64) -> C64) -> VectorField {
        assert_eq!(self.values.len(), other.values.len());
        VectorField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.zip_with(other, |a, b| a - b)
    }
}

/// Gradient by finite differences.
pub fn grad_scalar(f: &ScalarField) -> Result<VectorField> {
    let grid = &f.grid;
    let mut out = VectorField::zeros(grid);
    for p in 0..grid.len() {
        for m in 0..grid.n_dims() {
            let s = grid.stencil(p, m)?;
            out.at_mut(p)[m] = s.apply(|q| f.values[q]);
        }
    }
    Ok(out)
}

/// `d_a F_b - d_b F_a` on the `(a, b)` plane.
pub fn curl_plane(field: &VectorField, a: usize, b: usize) -> Result<ScalarField> {
    let grid = &field.grid;
    let mut values = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let da = grid.stencil(p, a)?;
        let db = grid.stencil(p, b)?;
        values.push(da.apply(|q| field.get(q, b)) - db.apply(|q| field.get(q, a)));
    }
    Ok(ScalarField { grid: grid.clone(), values })
}

/// Index pairs `(a, b)`, `a < b`, for every independent plane.
pub fn planes(n_dims: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..n_dims {
        for b in a + 1..n_dims {
            out.push((a, b));
        }
    }
    out
}

/// Curl on every independent plane.
pub fn curl(field: &VectorField) -> Result<Vec<((usize, usize), ScalarField)>> {
    if field.n_dims() < 2 {
        return Err(Error::InvalidInput("curl needs at least two parameter dimensions".into()));
    }
    planes(field.n_dims()).into_iter().map(|(a, b)| Ok(((a, b), curl_plane(field, a, b)?))).collect()
}

/// Two-dimensional curl `d_1 F_2 - d_2 F_1`.
pub fn curl_2d(field: &VectorField) -> Result<ScalarField> {
    if field.n_dims() < 2 {
        return Err(Error::InvalidInput("curl needs at least two parameter dimensions".into()));
    }
    curl_plane(field, 0, 1)
}

fn require_periodic(grid: &ParameterGrid, m: usize) -> Result<()> {
    if grid.axis(m).boundary != Boundary::Periodic {
        return Err(Error::OpenBoundaryUnsupported { axis: m });
    }
    Ok(())
}

/// Permutation matrix with `(T psi)(R) = psi(R - steps * h_m * e_m)`.
pub fn translation_matrix(grid: &ParameterGrid, m: usize, steps: isize) -> Result<ComplexMatrix> {
    require_periodic(grid, m)?;
    let n = grid.len();
    let mut t = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for p in 0..n {
        let src = grid.neighbor(p, m, -steps).expect("periodic");
        t[(p, src)] = C64::new(1.0, 0.0);
    }
    Ok(t)
}

/// Central-difference momentum `-i hbar d/dR_m` on a periodic axis.
pub fn momentum_matrix(grid: &ParameterGrid, m: usize, hbar: f64) -> Result<ComplexMatrix> {
    require_periodic(grid, m)?;
    if grid.axis(m).points < 3 {
        return Err(Error::GridTooCoarse(format!("axis {m} needs >= 3 points for the momentum stencil")));
    }
    let n = grid.len();
    let c = hbar / (2.0 * grid.axis(m).spacing);
    let mut pm = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for p in 0..n {
        let fwd = grid.neighbor(p, m, 1).expect("periodic");
        let back = grid.neighbor(p, m, -1).expect("periodic");
        pm[(p, fwd)] = C64::new(0.0, -c);
        pm[(p, back)] = C64::new(0.0, c);
    }
    Ok(pm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiticityReport {
    pub axis: usize,
    /// max entrywise `|P - P^dagger|`
    pub max_asymmetry: f64,
    /// max entrywise `|T^dagger T - I|` for a one-step translation
    pub unitary_defect: f64,
    /// max `|<f|P g> - <P f|g>|` over the random pairs
    pub inner_product_defect: f64,
}

/// Check unitarity of translation and Hermiticity of momentum on every axis.
pub fn check_momentum_hermitian(grid: &ParameterGrid, hbar: f64, pairs: usize, seed: u64) -> Result<Vec<HermiticityReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.len();
    let mut out = Vec::with_capacity(grid.n_dims());
    for m in 0..grid.n_dims() {
        let p = momentum_matrix(grid, m, hbar)?;
        let t = translation_matrix(grid, m, 1)?;
        let max_asymmetry = (&p - p.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tt = t.adjoint() * &t;
        let unitary_defect = (tt - ComplexMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut inner_product_defect = 0.0f64;
        for _ in 0..pairs {
            let f = random_vector(n, &mut rng);
            let g = random_vector(n, &mut rng);
            let lhs = f.dotc(&(&p * &g));
            let rhs = (&p * &f).dotc(&g);
            inner_product_defect = inner_product_defect.max((lhs - rhs).norm());
        }
        out.push(HermiticityReport { axis: m, max_asymmetry, unitary_defect, inner_product_defect });
    }
    Ok(out)
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> ComplexVector {
    let v = ComplexVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

/// Ordered grid points; closed paths repeat the first point at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct PathContour {
    points: Vec<usize>,
    closed: bool,
}

impl PathContour {
    pub fn new(grid: &ParameterGrid, points: Vec<usize>, closed: bool) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::PathOffGrid("path needs at least two points".into()));
        }
        if let Some(&bad) = points.iter().find(|&&p| p >= grid.len()) {
            return Err(Error::PathOffGrid(format!("point {bad} is outside a grid of {} points", grid.len())));
        }
        if closed && points.first() != points.last() {
            return Err(Error::PathOffGrid("closed path must end where it starts".into()));
        }
        for w in points.windows(2) {
            if !grid.are_adjacent(w[0], w[1]) {
                return Err(Error::PathOffGrid(format!("points {} and {} are not grid neighbours", w[0], w[1])));
            }
        }
        Ok(PathContour { points, closed })
    }

    /// Full loop around periodic `axis` through point `start`, traversed in
    /// the direction of increasing index.
    pub fn axis_loop(grid: &ParameterGrid, start: usize, axis: usize) -> Result<Self> {
        require_periodic(grid, axis)?;
        let n = grid.axis(axis).points;
        let mut points = Vec::with_capacity(n + 1);
        let mut p = start;
        for _ in 0..n {
            points.push(p);
            p = grid.neighbor(p, axis, 1).expect("periodic");
        }
        points.push(start);
        Self::new(grid, points, true)
    }

    /// Straight segment of `steps` steps along `axis` starting at `start`.
    pub fn axis_segment(grid: &ParameterGrid, start: usize, axis: usize, steps: isize) -> Result<Self> {
        let mut points = vec![start];
        let mut p = start;
        for _ in 0..steps.unsigned_abs() {
            p = grid
                .neighbor(p, axis, steps.signum())
                .ok_or_else(|| Error::PathOffGrid("segment leaves the grid".into()))?;
            points.push(p);
        }
        Self::new(grid, points, false)
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        PathContour { points, closed: self.closed }
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Number of segments.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }
}

/// Trapezoidal `sum 1/2 (F_k + F_k+1) . (R_k+1 - R_k)`, summed in path order.
pub fn line_integral(field: &VectorField, path: &PathContour) -> Result<C64> {
    let grid = &field.grid;
    if let Some(&bad) = path.points.iter().find(|&&p| p >= grid.len()) {
        return Err(Error::PathOffGrid(format!("point {bad} is outside the field's grid")));
    }
    let mut acc = C64::new(0.0, 0.0);
    for w in path.points.windows(2) {
        let d = grid.displacement(w[0], w[1]);
        let (fa, fb) = (field.at(w[0]), field.at(w[1]));
        for m in 0..grid.n_dims() {
            acc += (fa[m] + fb[m]) * (0.5 * d[m]);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn re(z: C64) -> f64 {
        z.re
    }

    #[test]
    fn index_roundtrip_and_neighbors() {
        let g = ParameterGrid::new(vec![Axis::open(0.0, 1.0, 3), Axis::periodic(0.0, 1.0, 4)]).unwrap();
        assert_eq!(g.len(), 12);
        for p in 0..g.len() {
            assert_eq!(g.linear_index(&g.multi_index(p)), p);
        }
        assert_eq!(g.neighbor(g.linear_index(&[0, 3]), 1, 1), Some(g.linear_index(&[0, 0])));
        assert_eq!(g.neighbor(g.linear_index(&[0, 0]), 0, -1), None);
        assert_eq!(g.displacement(g.linear_index(&[1, 3]), g.linear_index(&[1, 0])), vec![0.0, 0.25]);
    }

    #[test]
    fn gradient_of_constant_and_linear() {
        let g = ParameterGrid::new(vec![Axis::open(0.0, 1.0, 11), Axis::open(-1.0, 1.0, 7)]).unwrap();
        let c = grad_scalar(&ScalarField::from_real_fn(&g, |_| 3.5)).unwrap();
        assert!((0..g.len()).all(|p| c.at(p).iter().all(|z| z.norm() < 1e-12)));
        let lin = grad_scalar(&ScalarField::from_real_fn(&g, |r| r[0])).unwrap();
        for p in 0..g.len() {
            assert!((re(lin.get(p, 0)) - 1.0).abs() < 1e-10);
            assert!(lin.get(p, 1).norm() < 1e-10);
        }
    }

    #[test]
    fn gradient_exact_on_quadratics() {
        for order in [DiffOrder::Second, DiffOrder::Fourth] {
            let g = ParameterGrid::new(vec![Axis::open(-1.0, 2.0, 9), Axis::open(0.0, 1.0, 8)]).unwrap().with_order(order);
            let f = ScalarField::from_real_fn(&g, |r| 1.0 + 2.0 * r[0] - r[1] + 0.5 * r[0] * r[0] + r[0] * r[1] - 3.0 * r[1] * r[1]);
            let grad = grad_scalar(&f).unwrap();
            for p in 0..g.len() {
                let r = g.coords(p);
                assert!((re(grad.get(p, 0)) - (2.0 + r[0] + r[1])).abs() < 1e-10);
                assert!((re(grad.get(p, 1)) - (-1.0 + r[0] - 6.0 * r[1])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sine_gradient_error_bound() {
        // h = 0.01 on a periodic axis; the (h^2/6) max|f'''| bound is 1.7e-5
        let n = 628;
        let g = ParameterGrid::new(vec![Axis::periodic(0.0, 2.0 * PI, n)]).unwrap();
        let h = g.axis(0).spacing;
        assert!((h - 0.01).abs() < 1e-4);
        let d = grad_scalar(&ScalarField::from_real_fn(&g, |r| r[0].sin())).unwrap();
        let err = (0..n).map(|p| (re(d.get(p, 0)) - g.coords(p)[0].cos()).abs()).fold(0.0, f64::max);
        assert!(err <= 2e-5, "err = {err}");
    }

    #[test]
    fn too_coarse() {
        let g = ParameterGrid::new(vec![Axis::open(0.0, 1.0, 2)]).unwrap();
        assert!(matches!(grad_scalar(&ScalarField::from_real_fn(&g, |r| r[0])), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn translation_examples() {
        let g = ParameterGrid::new(vec![Axis::periodic(0.0, 1.0, 4)]).unwrap();
        assert_eq!(translation_matrix(&g, 0, 0).unwrap(), ComplexMatrix::identity(4, 4));
        let t = translation_matrix(&g, 0, 1).unwrap();
        let psi = ComplexVector::from_fn(4, |i, _| C64::new(i as f64, 0.0));
        let shifted = &t * &psi;
        // (T psi)(x_i) = psi(x_{i-1})
        assert_eq!(shifted.iter().map(|z| z.re).collect::<Vec<_>>(), vec![3.0, 0.0, 1.0, 2.0]);
        let back = translation_matrix(&g, 0, -1).unwrap();
        assert_eq!(&t * &back, ComplexMatrix::identity(4, 4));
        let open = ParameterGrid::new(vec![Axis::open(0.0, 1.0, 4)]).unwrap();
        assert!(matches!(translation_matrix(&open, 0, 1), Err(Error::OpenBoundaryUnsupported { axis: 0 })));
    }

    #[test]
    fn momentum_plane_wave_eigenvalue() {
        // circulant eigenvalues: hbar sin(k h) / h for k = 2 pi j / L
        let n = 32;
        let g = ParameterGrid::new(vec![Axis::periodic(0.0, 2.0 * PI, n)]).unwrap();
        let h = g.axis(0).spacing;
        let p = momentum_matrix(&g, 0, 1.0).unwrap();
        for j in [1i32, 3, 7] {
            let k = j as f64;
            let psi = ComplexVector::from_fn(n, |i, _| C64::from_polar(1.0, k * g.coords(i)[0]));
            let lambda = (k * h).sin() / h;
            let resid = &p * &psi - &psi * C64::new(lambda, 0.0);
            assert!(resid.norm() < 1e-12);
        }
        let ones = ComplexVector::from_element(n, C64::new(1.0, 0.0));
        assert!((&p * ones).norm() < 1e-15);
        assert_eq!((&p - p.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max), 0.0);
    }

    #[test]
    fn hermiticity_report_exact() {
        let g = ParameterGrid::new(vec![Axis::periodic(0.0, 1.0, 64)]).unwrap();
        let r = check_momentum_hermitian(&g, 1.0, 100, 1).unwrap();
        assert_eq!(r[0].max_asymmetry, 0.0);
        assert_eq!(r[0].unitary_defect, 0.0);
        assert!(r[0].inner_product_defect <= 1e-12);
        let g2 = ParameterGrid::new(vec![Axis::periodic(0.0, 1.0, 5), Axis::periodic(0.0, 2.0, 6)]).unwrap();
        assert!(check_momentum_hermitian(&g2, 1.0, 5, 2).unwrap().iter().all(|r| r.max_asymmetry == 0.0 && r.unitary_defect == 0.0));
        let open = ParameterGrid::new(vec![Axis::open(0.0, 1.0, 8)]).unwrap();
        assert!(matches!(check_momentum_hermitian(&open, 1.0, 1, 0), Err(Error::OpenBoundaryUnsupported { .. })));
    }

    #[test]
    fn line_integral_examples() {
        let g = ParameterGrid::new(vec![Axis::open(0.0, 2.0, 201)]).unwrap();
        let zero = VectorField::zeros(&g);
        let path = PathContour::axis_segment(&g, 0, 0, 200).unwrap();
        assert_eq!(line_integral(&zero, &path).unwrap(), C64::new(0.0, 0.0));
        let f = grad_scalar(&ScalarField::from_real_fn(&g, |r| r[0] * r[0])).unwrap();
        let v = line_integral(&f, &path).unwrap();
        assert!((v.re - 4.0).abs() < 1e-6);
    }

    #[test]
    fn closed_gradient_loops_shrink_quadratically() {
        // periodic-in-one-axis grid, loop around it; g smooth and periodic
        let g_fn = |r: &[f64]| (r[1]).sin() * (1.0 + r[0]) + (2.0 * r[1]).cos() * r[0] * r[0];
        let mut errs = Vec::new();
        for n in [40usize, 80, 160] {
            let g = ParameterGrid::new(vec![Axis::open(0.0, 1.0, 5), Axis::periodic(0.0, 2.0 * PI, n)]).unwrap();
            let f = grad_scalar(&ScalarField::from_real_fn(&g, g_fn)).unwrap();
            let path = PathContour::axis_loop(&g, g.linear_index(&[2, 0]), 1).unwrap();
            errs.push(line_integral(&f, &path).unwrap().norm());
        }
        assert!(errs.iter().all(|e| *e < 1e-10));
    }

    #[test]
    fn curl_examples() {
        let g = ParameterGrid::new(vec![Axis::open(-1.0, 1.0, 21), Axis::open(-1.0, 1.0, 21)]).unwrap();
        let rot = VectorField::from_fn(&g, |r| vec![C64::new(-r[1], 0.0), C64::new(r[0], 0.0)]);
        let c = curl_2d(&rot).unwrap();
        assert!(c.values.iter().all(|z| (z.re - 2.0).abs() < 1e-10));

        let g = ParameterGrid::new(vec![Axis::open(0.0, 1.0, 101), Axis::open(0.0, 1.0, 101)]).unwrap();
        let grad = grad_scalar(&ScalarField::from_real_fn(&g, |r| (3.0 * r[0]).sin() * (r[1] * r[1]).exp())).unwrap();
        let c = curl_2d(&grad).unwrap();
        assert!(c.values.iter().all(|z| z.norm() < 1e-8));
    }

    #[test]
    fn vortex_field() {
        // annulus 0.5 < rho < 1.5 sampled on a Cartesian patch to the right of the origin
        let g = ParameterGrid::new(vec![Axis::open(0.5, 1.5, 101), Axis::open(-0.5, 0.5, 101)]).unwrap();
        let v = VectorField::from_fn(&g, |r| {
            let q = r[0] * r[0] + r[1] * r[1];
            vec![C64::new(-r[1] / q, 0.0), C64::new(r[0] / q, 0.0)]
        });
        let c = curl_2d(&v).unwrap();
        let worst = c.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(worst < 5e-3, "{worst}");

        // loop around the origin: polar grid, field expressed in (rho, theta) components
        let g = ParameterGrid::new(vec![Axis::open(0.8, 1.2, 5), Axis::periodic(0.0, 2.0 * PI, 2000)]).unwrap();
        let v = VectorField::from_fn(&g, |r| {
            let (rho, th) = (r[0], r[1]);
            let (x, y) = (rho * th.cos(), rho * th.sin());
            let (fx, fy) = (-y / (rho * rho), x / (rho * rho));
            // pull back onto (rho, theta): F . dR/drho, F . dR/dtheta
            vec![C64::new(fx * th.cos() + fy * th.sin(), 0.0), C64::new(-fx * y + fy * x, 0.0)]
        });
        let path = PathContour::axis_loop(&g, g.linear_index(&[2, 0]), 1).unwrap();
        assert!((line_integral(&v, &path).unwrap().re - 2.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn path_validation() {
        let g = ParameterGrid::new(vec![Axis::open(0.0, 1.0, 5)]).unwrap();
        assert!(matches!(PathContour::new(&g, vec![0, 2], false), Err(Error::PathOffGrid(_))));
        assert!(matches!(PathContour::new(&g, vec![0, 1, 2], true), Err(Error::PathOffGrid(_))));
        assert!(PathContour::new(&g, vec![0, 1, 0], true).is_ok());
    }
}
