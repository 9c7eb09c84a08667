//! Weak-value decomposition of the Berry connection and curvature under a
//! post-selected bra `<phi(R)|`.
//!
//! `A = A_S + A_MP` with `A_S = i <phi|du_n> / <phi|u_n>` and
//! `A_MP = -i sum_{m != n} <phi|u_m><u_m|du_n> / <phi|u_n>`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adiabatic::TimePath;
use crate::error::{Error, Result};
use crate::geometry::{
    apply_gauge, berry_connection, ConnectionField, CurvatureField, CurvatureMethod, EigenBundle, FieldKind,
    GaugeFunction, KetDerivative, PlaneCurvature,
};
use crate::grid::{curl, grad_scalar, planes, ParameterGrid, ScalarField, VectorField};
use crate::linalg::{inner_unchecked, ComplexVector, C64, I};

/// Points with `|<phi|u_n>|` below this fraction of the maximum are masked.
pub const MASK_REL: f64 = 1e-8;

/// Which basis component plays the role of `<R|` at each grid point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentMap(pub Vec<usize>);

impl ComponentMap {
    pub fn constant(grid: &ParameterGrid, k: usize) -> Self {
        ComponentMap(vec![k; grid.len()])
    }

    pub fn from_fn(grid: &ParameterGrid, f: impl Fn(&[f64]) -> usize) -> Self {
        ComponentMap((0..grid.len()).map(|p| f(&grid.coords(p))).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PostSelection {
    /// The same bra at every point.
    Fixed(ComplexVector),
    /// `<R|`: the basis vector selected by the map.
    ParameterState(ComponentMap),
    /// An arbitrary bra per grid point.
    Custom(Vec<ComplexVector>),
}

impl PostSelection {
    /// Post-select on the band's own states, `phi = u_n` pointwise.
    pub fn eigenstate(bundle: &EigenBundle, n: usize) -> Self {
        PostSelection::Custom((0..bundle.grid().len()).map(|p| bundle.state(p, n).clone()).collect())
    }

    fn validate(&self, bundle: &EigenBundle) -> Result<()> {
        let (len, dim) = (bundle.grid().len(), bundle.dim());
        match self {
            PostSelection::Fixed(v) if v.len() != dim => {
                Err(Error::DimensionMismatch { expected: dim, found: v.len() })
            }
            PostSelection::Fixed(v) if v.iter().all(|z| z.norm() == 0.0) => Err(Error::ZeroVector),
            PostSelection::ParameterState(map) if map.0.len() != len => {
                Err(Error::DimensionMismatch { expected: len, found: map.0.len() })
            }
            PostSelection::ParameterState(map) => match map.0.iter().find(|&&k| k >= dim) {
                Some(k) => Err(Error::ParameterStateUndefined(format!(
                    "component {k} does not exist in a {dim}-dimensional space"
                ))),
                None => Ok(()),
            },
            PostSelection::Custom(v) if v.len() != len => Err(Error::DimensionMismatch { expected: len, found: v.len() }),
            PostSelection::Custom(v) => match v.iter().find(|b| b.len() != dim) {
                Some(b) => Err(Error::DimensionMismatch { expected: dim, found: b.len() }),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// The bra at grid point `p`, as a ket.
    pub fn bra(&self, p: usize, dim: usize) -> ComplexVector {
        match self {
            PostSelection::Fixed(v) => v.clone(),
            PostSelection::ParameterState(map) => {
                let mut e = ComplexVector::zeros(dim);
                e[map.0[p]] = C64::new(1.0, 0.0);
                e
            }
            PostSelection::Custom(v) => v[p].clone(),
        }
    }

    /// `<phi(R_p)|v>`.
    pub fn overlap(&self, p: usize, v: &ComplexVector) -> C64 {
        match self {
            PostSelection::Fixed(b) => inner_unchecked(b, v),
            PostSelection::ParameterState(map) => v[map.0[p]],
            PostSelection::Custom(b) => inner_unchecked(&b[p], v),
        }
    }

    /// `|phi> -> e^{i zeta} |phi>` pointwise. The result is always `Custom`.
    pub fn gauge_transformed(&self, grid: &ParameterGrid, dim: usize, zeta: &[f64]) -> Self {
        PostSelection::Custom(
            (0..grid.len()).map(|p| self.bra(p, dim) * C64::from_polar(1.0, zeta[p])).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakValueDecomposition {
    pub band: usize,
    pub a_self: ConnectionField,
    pub a_mutual: ConnectionField,
    /// One field per stored band `m != n`, in band order.
    pub components: Vec<ConnectionField>,
    /// True where `|<phi|u_n>|` is below the mask threshold.
    pub mask: Vec<bool>,
}

impl WeakValueDecomposition {
    pub fn component(&self, m: usize) -> Option<&ConnectionField> {
        self.components.iter().find(|c| c.kind == FieldKind::MutualComponent(m))
    }

    pub fn unmasked(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, m)| !**m).map(|(p, _)| p)
    }
}

struct PointValues {
    a_self: Vec<C64>,
    a_mutual: Vec<C64>,
    components: Vec<Vec<C64>>,
}

fn overlap_mask(bundle: &EigenBundle, n: usize, phi: &PostSelection) -> Result<(Vec<C64>, Vec<bool>)> {
    let len = bundle.grid().len();
    let f: Vec<C64> = (0..len).map(|p| phi.overlap(p, bundle.state(p, n))).collect();
    let max = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mask: Vec<bool> = f.iter().map(|z| !(z.norm() >= MASK_REL * max) || max == 0.0).collect();
    if mask.iter().all(|&m| m) {
        return Err(Error::PostSelectionOrthogonal { band: n });
    }
    Ok((f, mask))
}

fn others(bundle: &EigenBundle, n: usize) -> Vec<usize> {
    bundle.bands().iter().copied().filter(|&m| m != n).collect()
}

/// Full decomposition at every grid point; masked points hold zeros.
pub fn decompose(bundle: &EigenBundle, n: usize, phi: &PostSelection) -> Result<WeakValueDecomposition> {
    bundle.check_band(n)?;
    phi.validate(bundle)?;
    let grid = bundle.grid();
    let nd = grid.n_dims();
    let (f, mask) = overlap_mask(bundle, n, phi)?;
    let rest = others(bundle, n);
    let complete = bundle.has_all_bands();
    let rows: Vec<PointValues> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let zero = || vec![C64::new(0.0, 0.0); nd];
            if mask[p] {
                return Ok(PointValues { a_self: zero(), a_mutual: zero(), components: vec![zero(); rest.len()] });
            }
            let d = bundle.ket_derivative(p, n)?;
            let fnn = f[p];
            let a_self: Vec<C64> = d.kets.iter().map(|dk| I * phi.overlap(p, dk) / fnn).collect();
            let components: Vec<Vec<C64>> = rest
                .iter()
                .map(|&m| {
                    let um = bundle.state(p, m);
                    let fm = phi.overlap(p, um);
                    d.kets.iter().map(|dk| -I * fm * inner_unchecked(um, dk) / fnn).collect()
                })
                .collect();
            let a_mutual = if complete {
                (0..nd).map(|k| components.iter().fold(C64::new(0.0, 0.0), |acc, c| acc + c[k])).collect()
            } else {
                // only some bands stored: use 1 - |u_n><u_n| for the full sum
                let un = bundle.state(p, n);
                d.kets.iter().map(|dk| -I * (phi.overlap(p, dk) - fnn * inner_unchecked(un, dk)) / fnn).collect()
            };
            Ok(PointValues { a_self, a_mutual, components })
        })
        .collect::<Result<_>>()?;

    let mut a_self = VectorField::zeros(grid);
    let mut a_mutual = VectorField::zeros(grid);
    let mut comps = vec![VectorField::zeros(grid); rest.len()];
    for (p, row) in rows.into_iter().enumerate() {
        a_self.at_mut(p).copy_from_slice(&row.a_self);
        a_mutual.at_mut(p).copy_from_slice(&row.a_mutual);
        for (c, v) in comps.iter_mut().zip(&row.components) {
            c.at_mut(p).copy_from_slice(v);
        }
    }
    Ok(WeakValueDecomposition {
        band: n,
        a_self: ConnectionField { field: a_self, band: n, kind: FieldKind::SelfPart },
        a_mutual: ConnectionField { field: a_mutual, band: n, kind: FieldKind::Mutual },
        components: comps
            .into_iter()
            .zip(&rest)
            .map(|(field, &m)| ConnectionField { field, band: n, kind: FieldKind::MutualComponent(m) })
            .collect(),
        mask,
    })
}

pub fn a_self(bundle: &EigenBundle, n: usize, phi: &PostSelection) -> Result<ConnectionField> {
    Ok(decompose(bundle, n, phi)?.a_self)
}

pub fn a_mutual(bundle: &EigenBundle, n: usize, phi: &PostSelection) -> Result<(ConnectionField, Vec<ConnectionField>)> {
    let d = decompose(bundle, n, phi)?;
    Ok((d.a_mutual, d.components))
}

/// `A_MP` with `<R|` realised as a component index:
/// `-i sum_{m != n} u_m(R) <u_m|du_n> / u_n(R)`, where `u_k(R)` is the
/// selected component of `|u_k>`. Needs every band in the bundle.
pub fn a_mutual_position(bundle: &EigenBundle, n: usize, map: &ComponentMap) -> Result<(ConnectionField, Vec<bool>)> {
    bundle.check_band(n)?;
    let grid = bundle.grid();
    if !bundle.has_all_bands() {
        return Err(Error::ParameterStateUndefined("position-basis sums need every band of the bundle".into()));
    }
    if map.0.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: map.0.len() });
    }
    if let Some(k) = map.0.iter().find(|&&k| k >= bundle.dim()) {
        return Err(Error::ParameterStateUndefined(format!("component {k} out of range")));
    }
    let amp: Vec<C64> = (0..grid.len()).map(|p| bundle.state(p, n)[map.0[p]]).collect();
    let max = amp.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mask: Vec<bool> = amp.iter().map(|z| !(z.norm() >= MASK_REL * max)).collect();
    if mask.iter().all(|&m| m) {
        return Err(Error::NodeMasked(format!("band {n} vanishes at every selected component")));
    }
    let rest = others(bundle, n);
    let nd = grid.n_dims();
    let rows: Vec<Vec<C64>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            if mask[p] {
                return Ok(vec![C64::new(0.0, 0.0); nd]);
            }
            let d = bundle.ket_derivative(p, n)?;
            let site = map.0[p];
            Ok(d.kets
                .iter()
                .map(|dk| {
                    let mut acc = C64::new(0.0, 0.0);
                    for &m in &rest {
                        let um = bundle.state(p, m);
                        acc += um[site] * inner_unchecked(um, dk);
                    }
                    -I * acc / amp[p]
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut field = VectorField::zeros(grid);
    for (p, row) in rows.into_iter().enumerate() {
        field.at_mut(p).copy_from_slice(&row);
    }
    Ok((ConnectionField { field, band: n, kind: FieldKind::Mutual }, mask))
}

/// Samples of `d gamma_n / dt` along a time path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSeries {
    pub times: Vec<f64>,
    pub rate: Vec<f64>,
    /// Imaginary part of `A_S + A_MP` along `t`; zero up to rounding.
    pub imag: Vec<f64>,
    pub mask: Vec<bool>,
}

impl RateSeries {
    /// Rectangle rule on closed paths (which is the periodic trapezoid),
    /// trapezoid on open ones. Masked samples contribute nothing.
    pub fn integral(&self, closed: bool, dt: f64) -> f64 {
        let r: Vec<f64> = self.rate.iter().zip(&self.mask).map(|(v, m)| if *m { 0.0 } else { *v }).collect();
        if closed {
            r.iter().sum::<f64>() * dt
        } else {
            r.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum()
        }
    }
}

/// Right-hand side of the weak-value rate equation along `path`,
/// `(A_S + A_MP)_t`, using a bundle whose grid is `path.time_grid()`.
pub fn gamma_rate_weak(bundle: &EigenBundle, n: usize, phi: &PostSelection, path: &TimePath) -> Result<RateSeries> {
    if bundle.grid() != &path.time_grid() {
        return Err(Error::InvalidInput("bundle must be sampled on the path's time grid".into()));
    }
    let d = decompose(bundle, n, phi)?;
    let grid = bundle.grid();
    let mut rate = Vec::with_capacity(grid.len());
    let mut imag = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let total = d.a_self.field.get(p, 0) + d.a_mutual.field.get(p, 0);
        rate.push(total.re);
        imag.push(total.im);
    }
    let times = (0..grid.len()).map(|p| grid.coords(p)[0]).collect();
    Ok(RateSeries { times, rate, imag, mask: d.mask })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeCovarianceReport {
    /// `max |A_S' - (A_S - grad zeta_n)|`
    pub self_shift: f64,
    /// `max |A_MP' - A_MP|`
    pub mutual: f64,
    /// `(m, max |A_MP-m' - A_MP-m|)` for every stored `m != n`.
    pub components: Vec<(usize, f64)>,
    /// `max |A' - (A - grad zeta_n)|` for the full connection.
    pub connection_shift: f64,
    pub points_compared: usize,
}

impl GaugeCovarianceReport {
    pub fn worst(&self) -> f64 {
        self.components.iter().map(|c| c.1).fold(self.self_shift.max(self.mutual).max(self.connection_shift), f64::max)
    }
}

fn max_diff(a: &VectorField, b: &VectorField, points: &[usize]) -> f64 {
    points
        .iter()
        .flat_map(|&p| a.at(p).iter().zip(b.at(p)).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max)
}

/// Recompute the decomposition after the gauge change `g` and compare
/// against the expected transformation laws.
pub fn gauge_covariance_test(
    bundle: &EigenBundle,
    n: usize,
    phi: &PostSelection,
    g: &GaugeFunction,
) -> Result<GaugeCovarianceReport> {
    let grid = bundle.grid();
    let before = decompose(bundle, n, phi)?;
    let conn = berry_connection(bundle, n)?;
    let transformed = apply_gauge(bundle, g)?;
    let phi2 = match &g.post_selection {
        Some(z) => phi.gauge_transformed(grid, bundle.dim(), z),
        None => phi.clone(),
    };
    let after = decompose(&transformed, n, &phi2)?;
    let conn2 = berry_connection(&transformed, n)?;
    let grad = grad_scalar(&g.band_field(grid, n))?;

    let points: Vec<usize> = (0..grid.len()).filter(|&p| !before.mask[p] && !after.mask[p]).collect();
    let components = before
        .components
        .iter()
        .zip(&after.components)
        .map(|(c0, c1)| {
            let FieldKind::MutualComponent(m) = c0.kind else { unreachable!() };
            (m, max_diff(&c1.field, &c0.field, &points))
        })
        .collect();
    Ok(GaugeCovarianceReport {
        self_shift: max_diff(&after.a_self.field, &before.a_self.field.sub(&grad), &points),
        mutual: max_diff(&after.a_mutual.field, &before.a_mutual.field, &points),
        components,
        connection_shift: max_diff(&conn2.field, &conn.field.sub(&grad), &(0..grid.len()).collect::<Vec<_>>()),
        points_compared: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureDecomposition {
    pub band: usize,
    /// Curl of `A_S`.
    pub b_self: CurvatureField,
    /// Curl of `A_MP`.
    pub b_mutual: CurvatureField,
    /// Curl of each `A_MP-m`.
    pub components: Vec<CurvatureField>,
    /// Each `B_MP-m` evaluated directly from states and their derivatives:
    /// `-i (r_m <du_m| x |du_n> + grad r_m x <u_m|du_n>)`, `r_m = <phi|u_m>/<phi|u_n>`.
    pub direct_components: Vec<CurvatureField>,
    /// The same with the sign of the second term reversed.
    pub direct_components_alt: Vec<CurvatureField>,
    /// Sum of `direct_components`.
    pub b_mutual_direct: CurvatureField,
    /// `|<dphi| x |du_n> - <dphi|u_n> x <phi|du_n> / <phi|u_n>|`; vanishes
    /// exactly when `B_S` does.
    pub zero_condition_residual: Vec<PlaneCurvature>,
    /// The same without dividing the second term by `<phi|u_n>`.
    pub zero_condition_residual_alt: Vec<PlaneCurvature>,
    /// Base mask dilated by the derivative stencils.
    pub mask: Vec<bool>,
}

/// Mark every point whose derivative stencil on any axis touches a masked point.
pub fn dilate_mask(grid: &ParameterGrid, mask: &[bool]) -> Result<Vec<bool>> {
    let mut out = mask.to_vec();
    for p in 0..grid.len() {
        for m in 0..grid.n_dims() {
            if grid.stencil(p, m)?.iter().any(|(q, _)| mask[q]) {
                out[p] = true;
            }
        }
    }
    Ok(out)
}

fn curl_field(conn: &ConnectionField, mask: &[bool]) -> Result<CurvatureField> {
    let planes = curl(&conn.field)?
        .into_iter()
        .map(|(plane, values)| PlaneCurvature { plane, values, mask: mask.to_vec() })
        .collect();
    Ok(CurvatureField { band: conn.band, kind: conn.kind, method: CurvatureMethod::Curl, planes })
}

fn cross(a: usize, b: usize, x: &[C64], y: &[C64]) -> C64 {
    x[a] * y[b] - x[b] * y[a]
}

/// Curvature of `A_S`, `A_MP` and every `A_MP-m`, by curl and by direct
/// evaluation, with the zero-curvature residual of `A_S`.
pub fn curvature_decompose(bundle: &EigenBundle, n: usize, phi: &PostSelection) -> Result<CurvatureDecomposition> {
    let grid = bundle.grid();
    let nd = grid.n_dims();
    if nd < 2 {
        return Err(Error::InvalidInput("curvature needs at least two parameter dimensions".into()));
    }
    let dec = decompose(bundle, n, phi)?;
    let mask = dilate_mask(grid, &dec.mask)?;
    let rest = others(bundle, n);
    for &m in &rest {
        bundle.check_band(m)?;
    }
    let (f, _) = overlap_mask(bundle, n, phi)?;
    let ratios: Vec<Vec<C64>> = rest
        .iter()
        .map(|&m| {
            (0..grid.len())
                .map(|p| if dec.mask[p] { C64::new(0.0, 0.0) } else { phi.overlap(p, bundle.state(p, m)) / f[p] })
                .collect()
        })
        .collect();
    let ratio_grads: Vec<VectorField> = ratios
        .iter()
        .map(|r| grad_scalar(&ScalarField { grid: grid.clone(), values: r.clone() }))
        .collect::<Result<_>>()?;
    let plane_list = planes(nd);
    let dim = bundle.dim();

    struct Row {
        direct: Vec<Vec<C64>>,
        alt: Vec<Vec<C64>>,
        residual: Vec<f64>,
        residual_alt: Vec<f64>,
    }
    let rows: Vec<Row> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let nplanes = plane_list.len();
            if mask[p] {
                return Ok(Row {
                    direct: vec![vec![C64::new(0.0, 0.0); nplanes]; rest.len()],
                    alt: vec![vec![C64::new(0.0, 0.0); nplanes]; rest.len()],
                    residual: vec![0.0; nplanes],
                    residual_alt: vec![0.0; nplanes],
                });
            }
            let dn: KetDerivative = bundle.ket_derivative(p, n)?;
            let mut direct = Vec::with_capacity(rest.len());
            let mut alt = Vec::with_capacity(rest.len());
            for (j, &m) in rest.iter().enumerate() {
                let dm = bundle.ket_derivative(p, m)?;
                let um = bundle.state(p, m);
                let g: Vec<C64> = dn.kets.iter().map(|k| inner_unchecked(um, k)).collect();
                let r = ratios[j][p];
                let gr = ratio_grads[j].at(p);
                let mut d_row = Vec::with_capacity(nplanes);
                let mut a_row = Vec::with_capacity(nplanes);
                for &(a, b) in &plane_list {
                    let x = inner_unchecked(&dm.kets[a], &dn.kets[b]) - inner_unchecked(&dm.kets[b], &dn.kets[a]);
                    let t = cross(a, b, gr, &g);
                    d_row.push(-I * (r * x + t));
                    a_row.push(-I * (r * x - t));
                }
                direct.push(d_row);
                alt.push(a_row);
            }
            // derivative of the bra field, by the same stencils
            let un = bundle.state(p, n);
            let mut dphi = Vec::with_capacity(nd);
            for m in 0..nd {
                let s = grid.stencil(p, m)?;
                let mut acc = ComplexVector::zeros(dim);
                for (q, w) in s.iter() {
                    acc.axpy(C64::new(w, 0.0), &phi.bra(q, dim), C64::new(1.0, 0.0));
                }
                dphi.push(acc);
            }
            let phi_du: Vec<C64> = dn.kets.iter().map(|k| phi.overlap(p, k)).collect();
            let dphi_u: Vec<C64> = dphi.iter().map(|b| inner_unchecked(b, un)).collect();
            let mut residual = Vec::with_capacity(nplanes);
            let mut residual_alt = Vec::with_capacity(nplanes);
            for &(a, b) in &plane_list {
                let first = inner_unchecked(&dphi[a], &dn.kets[b]) - inner_unchecked(&dphi[b], &dn.kets[a]);
                let second = cross(a, b, &dphi_u, &phi_du);
                residual.push((first - second / f[p]).norm());
                residual_alt.push((first - second).norm());
            }
            Ok(Row { direct, alt, residual, residual_alt })
        })
        .collect::<Result<_>>()?;

    let make_planes = |get: &dyn Fn(&Row, usize) -> C64| -> Vec<PlaneCurvature> {
        plane_list
            .iter()
            .enumerate()
            .map(|(i, &plane)| PlaneCurvature {
                plane,
                values: ScalarField { grid: grid.clone(), values: rows.iter().map(|r| get(r, i)).collect() },
                mask: mask.clone(),
            })
            .collect()
    };
    let direct_field = |j: usize, alt: bool| CurvatureField {
        band: n,
        kind: FieldKind::MutualComponent(rest[j]),
        method: CurvatureMethod::Curl,
        planes: make_planes(&|r, i| if alt { r.alt[j][i] } else { r.direct[j][i] }),
    };
    let direct_components: Vec<CurvatureField> = (0..rest.len()).map(|j| direct_field(j, false)).collect();
    let direct_components_alt: Vec<CurvatureField> = (0..rest.len()).map(|j| direct_field(j, true)).collect();
    let b_mutual_direct = CurvatureField {
        band: n,
        kind: FieldKind::Mutual,
        method: CurvatureMethod::Curl,
        planes: make_planes(&|r, i| r.direct.iter().fold(C64::new(0.0, 0.0), |acc, d| acc + d[i])),
    };
    let zero_condition_residual = make_planes(&|r, i| C64::new(r.residual[i], 0.0));
    let zero_condition_residual_alt = make_planes(&|r, i| C64::new(r.residual_alt[i], 0.0));

    Ok(CurvatureDecomposition {
        band: n,
        b_self: curl_field(&dec.a_self, &mask)?,
        b_mutual: curl_field(&dec.a_mutual, &mask)?,
        components: dec.components.iter().map(|c| curl_field(c, &mask)).collect::<Result<_>>()?,
        direct_components,
        direct_components_alt,
        b_mutual_direct,
        zero_condition_residual,
        zero_condition_residual_alt,
        mask,
    })
}

/// Largest `|a - b|` over unmasked points of two curvature fields, all planes.
pub fn max_curvature_diff(a: &CurvatureField, b: &CurvatureField) -> f64 {
    let mut worst: f64 = 0.0;
    for (pa, pb) in a.planes.iter().zip(&b.planes) {
        for p in 0..pa.values.values.len() {
            if !pa.mask[p] && !pb.mask[p] {
                worst = worst.max((pa.values.values[p] - pb.values.values[p]).norm());
            }
        }
    }
    worst
}

/// Largest `|value|` over unmasked points, all planes.
pub fn max_curvature_abs(c: &[PlaneCurvature]) -> f64 {
    c.iter()
        .flat_map(|pc| pc.values.values.iter().zip(&pc.mask).filter(|(_, m)| !**m).map(|(v, _)| v.norm()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_bundle;
    use crate::grid::{Axis, DiffOrder};
    use crate::models::{DiagTwoLevel, SpinHalfSphere};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn patch(nth: usize, nph: usize) -> EigenBundle {
        let g = ParameterGrid::new(vec![Axis::open(0.3, 1.3, nth), Axis::periodic(0.0, 2.0 * PI, nph)])
            .unwrap()
            .with_order(DiffOrder::Fourth);
        build_bundle(&SpinHalfSphere::default(), &g).unwrap()
    }

    fn e1() -> ComplexVector {
        ComplexVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
    }

    fn random_bra(rng: &mut ChaCha8Rng) -> ComplexVector {
        ComplexVector::from_fn(2, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn closure_holds_for_random_bras() {
        let b = patch(33, 48);
        let a = berry_connection(&b, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let d = decompose(&b, 0, &PostSelection::Fixed(random_bra(&mut rng))).unwrap();
            assert_eq!(d.components.len(), 1);
            let sum = d.a_self.field.add(&d.a_mutual.field);
            let pts: Vec<usize> = d.unmasked().collect();
            assert!(max_diff(&sum, &a.field, &pts) < 1e-8);
        }
    }

    #[test]
    fn eigenstate_post_selection_kills_mutual_part() {
        let b = patch(17, 32);
        let d = decompose(&b, 0, &PostSelection::eigenstate(&b, 0)).unwrap();
        let a = berry_connection(&b, 0).unwrap();
        let all: Vec<usize> = (0..b.grid().len()).collect();
        assert!(max_diff(&d.a_self.field, &a.field, &all) < 1e-8);
        assert!(max_diff(&d.a_mutual.field, &VectorField::zeros(b.grid()), &all) < 1e-8);
    }

    #[test]
    fn constant_states_give_zero_fields() {
        let g = ParameterGrid::new(vec![Axis::open(-1.0, 1.0, 9), Axis::open(-1.0, 1.0, 9)]).unwrap();
        let b = build_bundle(&DiagTwoLevel { n_params: 2 }, &g).unwrap();
        let phi = PostSelection::Fixed(ComplexVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]));
        let d = decompose(&b, 0, &phi).unwrap();
        let all: Vec<usize> = (0..g.len()).collect();
        assert_eq!(max_diff(&d.a_self.field, &VectorField::zeros(&g), &all), 0.0);
        assert_eq!(max_diff(&d.a_mutual.field, &VectorField::zeros(&g), &all), 0.0);
    }

    #[test]
    fn self_part_matches_spinor_oracle() {
        // phi = e1: A_S = i d log <e1|u> = i d log cos(t/2) up to the pointwise
        // gauge; the gauge-fixed state has u[0] = cos(t/2) real positive on the patch
        let b = patch(41, 64);
        let d = decompose(&b, 0, &PostSelection::Fixed(e1())).unwrap();
        let g = b.grid();
        for p in 0..g.len() {
            let th = g.coords(p)[0];
            let want_theta = I * (-0.5 * (th / 2.0).tan());
            assert!((d.a_self.field.get(p, 0) - want_theta).norm() < 1e-6);
            assert!(d.a_self.field.get(p, 1).norm() < 1e-6);
        }
    }

    #[test]
    fn orthogonal_bra_is_rejected() {
        let g = ParameterGrid::new(vec![Axis::open(-1.0, 1.0, 5)]).unwrap();
        let b = build_bundle(&DiagTwoLevel { n_params: 1 }, &g).unwrap();
        let phi = PostSelection::Fixed(ComplexVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]));
        assert!(matches!(decompose(&b, 0, &phi), Err(Error::PostSelectionOrthogonal { band: 0 })));
    }

    #[test]
    fn gauge_splitting() {
        let b = patch(25, 40);
        let phi = PostSelection::Fixed(e1());
        let zero = gauge_covariance_test(&b, 0, &phi, &GaugeFunction::identity()).unwrap();
        assert_eq!(zero.worst(), 0.0);
        for seed in 0..3 {
            let g = GaugeFunction::random_smooth(b.grid(), &[0, 1], seed);
            let r = gauge_covariance_test(&b, 0, &phi, &g).unwrap();
            assert!(r.worst() < 1e-8, "{r:?}");
        }
        let lin = GaugeFunction::identity().with_band_fn(b.grid(), 0, |r| r[0]);
        let r = gauge_covariance_test(&b, 0, &phi, &lin).unwrap();
        assert!(r.self_shift < 1e-8 && r.mutual < 1e-8);
    }

    #[test]
    fn parameter_state_matches_position_route() {
        let b = patch(17, 24);
        let map = ComponentMap::from_fn(b.grid(), |r| usize::from(r[0] > 0.8));
        let d = decompose(&b, 0, &PostSelection::ParameterState(map.clone())).unwrap();
        let (pos, mask) = a_mutual_position(&b, 0, &map).unwrap();
        assert_eq!(mask, d.mask);
        let pts: Vec<usize> = d.unmasked().collect();
        assert!(max_diff(&pos.field, &d.a_mutual.field, &pts) < 1e-10);
    }

    #[test]
    fn curvature_sourcing_with_fixed_bra() {
        let b = patch(41, 96);
        let c = curvature_decompose(&b, 0, &PostSelection::Fixed(e1())).unwrap();
        assert!(max_curvature_abs(&c.b_self.planes) < 1e-6);
        assert!(max_curvature_abs(&c.zero_condition_residual) < 1e-12);
        assert!(max_curvature_diff(&c.b_mutual_direct, &c.b_mutual) < 1e-6);
        assert!(max_curvature_diff(&c.direct_components[0], &c.components[0]) < 1e-6);
        let g = b.grid();
        let pc = &c.b_mutual.planes[0];
        for p in 0..g.len() {
            if !pc.mask[p] {
                let th = g.coords(p)[0];
                assert!((pc.values.values[p].re + th.sin() / 2.0).abs() < 1e-4);
            }
        }
    }
}
