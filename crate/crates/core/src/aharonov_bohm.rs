//! Charged particle in a hard-wall well dragged around a thin solenoid.
//!
//! Outside the solenoid the field vanishes, so eigenstates factor into a
//! Peierls phase times a field-free bound state `v_n(r - R)`. The mutually
//! projected part of the connection is then `A_MP = -i grad_R log v_n(r - R)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, DiffOrder, ParameterGrid, VectorField};
use crate::geometry::{ConnectionField, FieldKind};
use crate::linalg::{ComplexMatrix, HermitianMatrix, C64, I};
use crate::models::Hamiltonian;

/// Node mask: `|v| < NODE_MASK_REL * max |v|`.
pub const NODE_MASK_REL: f64 = 1e-6;

/// Minimum interior points for a bound-state solve.
pub const MIN_WELL_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub hbar: f64,
    pub mass: f64,
    pub charge: f64,
}

impl Default for Units {
    fn default() -> Self {
        Units { hbar: 1.0, mass: 1.0, charge: 1.0 }
    }
}

impl Units {
    /// `q / hbar`
    pub fn coupling(&self) -> f64 {
        self.charge / self.hbar
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolenoidConfig {
    pub flux: f64,
    pub center: [f64; 2],
    pub radius: f64,
}

impl SolenoidConfig {
    pub fn new(flux: f64, center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!("solenoid radius must be positive, got {radius}")));
        }
        Ok(SolenoidConfig { flux, center, radius })
    }

    fn distance(&self, r: [f64; 2]) -> f64 {
        (r[0] - self.center[0]).hypot(r[1] - self.center[1])
    }

}

/// `A(r) = (flux / 2 pi) (-(y - y0), x - x0) / |r - r0|^2` outside the core.
pub fn vector_potential_a(r: [f64; 2], s: &SolenoidConfig) -> Result<[f64; 2]> {
    let d = s.distance(r);
    if d <= s.radius {
        return Err(Error::InsideSolenoid { distance: d, radius: s.radius });
    }
    let k = s.flux / (2.0 * PI * d * d);
    Ok([-k * (r[1] - s.center[1]), k * (r[0] - s.center[0])])
}

/// Trapezoidal `sum 1/2 (A_k + A_k+1) . (r_k+1 - r_k)` along a polyline.
/// Closed loops should repeat the first point at the end.
pub fn line_integral_a(points: &[[f64; 2]], s: &SolenoidConfig) -> Result<f64> {
    let a: Vec<[f64; 2]> = points.iter().map(|&r| vector_potential_a(r, s)).collect::<Result<_>>()?;
    Ok(points
        .windows(2)
        .zip(a.windows(2))
        .map(|(r, a)| 0.5 * ((a[0][0] + a[1][0]) * (r[1][0] - r[0][0]) + (a[0][1] + a[1][1]) * (r[1][1] - r[0][1])))
        .sum())
}

/// Closed polyline on an ellipse with semi-axes `(a, b)` rotated by `tilt`,
/// counter-clockwise, first point repeated at the end.
pub fn ellipse_loop(center: [f64; 2], a: f64, b: f64, tilt: f64, steps: usize) -> Vec<[f64; 2]> {
    let (c, s) = (tilt.cos(), tilt.sin());
    (0..=steps)
        .map(|k| {
            let t = 2.0 * PI * (k % steps) as f64 / steps as f64;
            let (x, y) = (a * t.cos(), b * t.sin());
            [center[0] + c * x - s * y, center[1] + s * x + c * y]
        })
        .collect()
}

pub fn circle_loop(center: [f64; 2], radius: f64, steps: usize) -> Vec<[f64; 2]> {
    ellipse_loop(center, radius, radius, 0.0, steps)
}

/// Straight segments through `waypoints`, each cut into `per_segment` steps.
pub fn polyline(waypoints: &[[f64; 2]], per_segment: usize) -> Vec<[f64; 2]> {
    let mut out = vec![waypoints[0]];
    for w in waypoints.windows(2) {
        for k in 1..=per_segment {
            let f = k as f64 / per_segment as f64;
            out.push([w[0][0] + f * (w[1][0] - w[0][0]), w[0][1] + f * (w[1][1] - w[0][1])]);
        }
    }
    out
}

fn segment_distance(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((c[0] - a[0]) * dx + (c[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a[0] + t * dx - c[0]).hypot(a[1] + t * dy - c[1])
}

/// Integration path for the Peierls phase.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathChoice {
    #[default]
    Straight,
    /// Intermediate points visited in order between `R` and `r`.
    Via(Vec<[f64; 2]>),
}

/// `g(r, R) = (q / hbar) int_R^r A . dr'` along the chosen path. Each
/// straight segment contributes `flux / 2 pi` times the angle it subtends
/// at the axis, so the value is exact; its winding class is fixed by the
/// path.
pub fn peierls_phase(r: [f64; 2], big_r: [f64; 2], s: &SolenoidConfig, units: &Units, path: &PathChoice) -> Result<f64> {
    let mut pts = vec![big_r];
    if let PathChoice::Via(v) = path {
        pts.extend_from_slice(v);
    }
    pts.push(r);
    let mut angle = 0.0;
    for w in pts.windows(2) {
        let d = segment_distance(w[0], w[1], s.center);
        if d <= s.radius {
            return Err(Error::PathCrossesSolenoid { distance: d, radius: s.radius });
        }
        let (a, b) = ([w[0][0] - s.center[0], w[0][1] - s.center[1]], [w[1][0] - s.center[0], w[1][1] - s.center[1]]);
        angle += (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
    }
    Ok(units.coupling() * s.flux * angle / (2.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellConfig {
    pub width: f64,
}

/// A hard-wall bound state on `N` interior points, `x` measured from the
/// well centre. Values between samples come from the sine series that
/// interpolates the samples and vanishes at both walls.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    pub mode: usize,
    pub energy: f64,
    pub width: f64,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    /// Interior zeros located on the interpolant.
    pub nodes: Vec<f64>,
    coeffs: Vec<f64>,
}

impl BoundState {
    pub fn dx(&self) -> f64 {
        self.width / (self.x.len() + 1) as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    fn phase(&self, x: f64) -> f64 {
        PI * (x + 0.5 * self.width) / self.width
    }

    /// `v_n(x)`, zero outside the well.
    pub fn value(&self, x: f64) -> f64 {
        if x.abs() >= 0.5 * self.width {
            return 0.0;
        }
        let th = self.phase(x);
        self.coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * th).sin()).sum()
    }

    /// `v_n'(x)`, zero outside the well.
    pub fn derivative(&self, x: f64) -> f64 {
        if x.abs() >= 0.5 * self.width {
            return 0.0;
        }
        let th = self.phase(x);
        let s = PI / self.width;
        self.coeffs.iter().enumerate().map(|(k, c)| c * (k + 1) as f64 * s * ((k + 1) as f64 * th).cos()).sum()
    }

    /// `x = -w/2 + k w / (n + 1)` for `k = 1..n`.
    pub fn analytic_nodes(&self) -> Vec<f64> {
        (1..=self.mode).map(|k| -0.5 * self.width + self.width * k as f64 / (self.mode + 1) as f64).collect()
    }

    fn is_masked(&self, v: f64) -> bool {
        v.abs() < NODE_MASK_REL * self.max_abs()
    }

    /// `A_MP,x(x) = -i d_R log v(r - R) = i v'(x) / v(x)` at `x = r - R`.
    pub fn a_mp_at(&self, x: f64) -> Result<C64> {
        let v = self.value(x);
        if self.is_masked(v) {
            return Err(Error::NodeMasked(format!("v_{}({x}) = {v:e}", self.mode)));
        }
        Ok(I * (self.derivative(x) / v))
    }
}

/// Dense finite-difference eigenproblem of `-hbar^2/2m d^2/dx^2` with
/// Dirichlet walls on `points` interior samples. Returns the lowest `modes`
/// states, normalised with `sum v^2 dx = 1` and `v(x_1) > 0`.
pub fn bound_states_1d(well: &WellConfig, points: usize, modes: usize, units: &Units) -> Result<Vec<BoundState>> {
    if points < MIN_WELL_POINTS {
        return Err(Error::GridTooCoarse(format!("{points} interior points; at least {MIN_WELL_POINTS} required")));
    }
    if !(well.width > 0.0) {
        return Err(Error::InvalidInput("well width must be positive".into()));
    }
    if modes > points {
        return Err(Error::InvalidInput(format!("{modes} modes requested from {points} points")));
    }
    let n = points;
    let dx = well.width / (n + 1) as f64;
    let t = units.hbar * units.hbar / (2.0 * units.mass * dx * dx);
    let h = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * t
        } else if i.abs_diff(j) == 1 {
            -t
        } else {
            0.0
        }
    });
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let x: Vec<f64> = (1..=n).map(|j| -0.5 * well.width + j as f64 * dx).collect();

    order
        .into_iter()
        .take(modes)
        .enumerate()
        .map(|(mode, k)| {
            let col = eig.eigenvectors.column(k);
            let norm = (col.iter().map(|v| v * v).sum::<f64>() * dx).sqrt();
            let sign = if col[0] < 0.0 { -1.0 } else { 1.0 };
            let values: Vec<f64> = col.iter().map(|v| sign * v / norm).collect();
            let coeffs = sine_coefficients(&values);
            let mut state = BoundState {
                mode,
                energy: eig.eigenvalues[k],
                width: well.width,
                x: x.clone(),
                values,
                nodes: Vec::new(),
                coeffs,
            };
            state.nodes = locate_nodes(&state);
            Ok(state)
        })
        .collect()
}

/// Inverse of `v_j = sum_k c_k sin(k pi j / (N + 1))`.
fn sine_coefficients(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let scale = 2.0 / (n + 1) as f64;
    (1..=n)
        .map(|k| {
            scale
                * v.iter()
                    .enumerate()
                    .map(|(j, vj)| vj * (PI * (k * (j + 1)) as f64 / (n + 1) as f64).sin())
                    .sum::<f64>()
        })
        .collect()
}

fn locate_nodes(s: &BoundState) -> Vec<f64> {
    let tiny = 1e-9 * s.max_abs();
    let mut nodes = Vec::new();
    let mut j = 0;
    while j < s.values.len() {
        if s.values[j].abs() < tiny {
            nodes.push(s.x[j]);
            j += 1;
            continue;
        }
        if j + 1 < s.values.len() && s.values[j + 1].abs() >= tiny && s.values[j] * s.values[j + 1] < 0.0 {
            let (mut a, mut b) = (s.x[j], s.x[j + 1]);
            let fa = s.value(a);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if s.value(m) * fa > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            nodes.push(0.5 * (a + b));
        }
        j += 1;
    }
    nodes
}

/// `A_MP,x = i v'/v` on the state's own samples, zero where masked.
pub fn a_mp_closed_form(state: &BoundState) -> Result<(ConnectionField, Vec<bool>)> {
    let n = state.x.len();
    let grid = ParameterGrid::new(vec![Axis::open(state.x[0], state.x[n - 1], n)])?;
    let mut field = VectorField::zeros(&grid);
    let mut mask = vec![false; n];
    for (j, &x) in state.x.iter().enumerate() {
        match state.a_mp_at(x) {
            Ok(a) => field.at_mut(j)[0] = a,
            Err(_) => mask[j] = true,
        }
    }
    if mask.iter().all(|&m| m) {
        return Err(Error::NodeMasked(format!("mode {} vanishes everywhere", state.mode)));
    }
    Ok((ConnectionField { field, band: state.mode, kind: FieldKind::Mutual }, mask))
}

/// Separable bound state `v(x, y) = v_a(x) v_b(y)` of a square hard-wall well.
#[derive(Debug, Clone, PartialEq)]
pub struct WellProfile2D {
    pub x_mode: BoundState,
    pub y_mode: BoundState,
}

impl WellProfile2D {
    pub fn new(width: f64, points: usize, modes: [usize; 2], units: &Units) -> Result<Self> {
        let states = bound_states_1d(&WellConfig { width }, points, modes[0].max(modes[1]) + 1, units)?;
        Ok(WellProfile2D { x_mode: states[modes[0]].clone(), y_mode: states[modes[1]].clone() })
    }

    pub fn value(&self, d: [f64; 2]) -> f64 {
        self.x_mode.value(d[0]) * self.y_mode.value(d[1])
    }

    fn peak(&self) -> f64 {
        self.x_mode.max_abs() * self.y_mode.max_abs()
    }

    /// `A_MP(d) = i grad v(d) / v(d)` at offset `d = r - R`.
    pub fn a_mp_at(&self, d: [f64; 2]) -> Result<[C64; 2]> {
        let (vx, vy) = (self.x_mode.value(d[0]), self.y_mode.value(d[1]));
        if (vx * vy).abs() < NODE_MASK_REL * self.peak() {
            return Err(Error::NodeMasked(format!("v({}, {}) = {:e}", d[0], d[1], vx * vy)));
        }
        Ok([I * (self.x_mode.derivative(d[0]) / vx), I * (self.y_mode.derivative(d[1]) / vy)])
    }
}

/// `A_S = (q/hbar) A(R) - A_MP(r - R)`.
pub fn a_s_ab(
    profile: &WellProfile2D,
    s: &SolenoidConfig,
    units: &Units,
    big_r: [f64; 2],
    r: [f64; 2],
) -> Result<[C64; 2]> {
    let a = vector_potential_a(big_r, s)?;
    let mp = profile.a_mp_at([r[0] - big_r[0], r[1] - big_r[1]])?;
    let k = units.coupling();
    Ok([C64::new(k * a[0], 0.0) - mp[0], C64::new(k * a[1], 0.0) - mp[1]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourKind {
    /// Move the well along the path, observe at fixed `r`.
    VaryRFixedR([f64; 2]),
    /// Observe along the path, well fixed at `R`.
    VaryRFixedWell([f64; 2]),
}

impl ContourKind {
    fn offset(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            ContourKind::VaryRFixedR(r) => [r[0] - p[0], r[1] - p[1]],
            ContourKind::VaryRFixedWell(big_r) => [p[0] - big_r[0], p[1] - big_r[1]],
        }
    }
}

/// Trapezoidal integral of `A_MP` along `path`: `int A_MP . dR` for a moving
/// well, or `int A_MP . dr` for a moving observation point.
pub fn contour_gamma_mp(kind: ContourKind, path: &[[f64; 2]], profile: &WellProfile2D) -> Result<C64> {
    let vals: Vec<[C64; 2]> = path
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            profile.a_mp_at(kind.offset(p)).map_err(|_| Error::NodeOnPath {
                index: k,
                value: profile.value(kind.offset(p)),
            })
        })
        .collect::<Result<_>>()?;
    let mut acc = C64::new(0.0, 0.0);
    for (p, a) in path.windows(2).zip(vals.windows(2)) {
        acc += (a[0][0] + a[1][0]) * (0.5 * (p[1][0] - p[0][0])) + (a[0][1] + a[1][1]) * (0.5 * (p[1][1] - p[0][1]));
    }
    Ok(acc)
}

/// Endpoint form of [`contour_gamma_mp`]:
/// `-i log[v(r - R_f) / v(r - R_s)]` for a moving well,
/// `-i log[v(r_s - R) / v(r_f - R)]` for a moving observation point.
pub fn contour_gamma_mp_endpoints(kind: ContourKind, start: [f64; 2], end: [f64; 2], profile: &WellProfile2D) -> Result<C64> {
    let (vs, vf) = (profile.value(kind.offset(start)), profile.value(kind.offset(end)));
    for (index, v) in [(0, vs), (1, vf)] {
        if v.abs() < NODE_MASK_REL * profile.peak() {
            return Err(Error::NodeOnPath { index, value: v });
        }
    }
    let ratio = match kind {
        ContourKind::VaryRFixedR(_) => C64::new(vf / vs, 0.0),
        ContourKind::VaryRFixedWell(_) => C64::new(vs / vf, 0.0),
    };
    Ok(-I * ratio.ln())
}

/// Wilson-loop phase `-arg prod <u(R_k)|u(R_k+1)>` of the Peierls-factorised
/// states `u(r_j; R) = exp(i g(r_j, R)) v(r_j - R)` on a fixed lattice of
/// observation points with spacing `h`.
pub fn peierls_wilson_loop(
    loop_points: &[[f64; 2]],
    profile: &WellProfile2D,
    s: &SolenoidConfig,
    units: &Units,
    h: f64,
) -> Result<f64> {
    let w = profile.x_mode.width;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in loop_points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k] - 0.5 * w);
            hi[k] = hi[k].max(p[k] + 0.5 * w);
        }
    }
    let nx = ((hi[0] - lo[0]) / h).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / h).ceil() as usize + 1;
    let state = |big_r: [f64; 2]| -> Result<Vec<(usize, C64)>> {
        let i0 = ((big_r[0] - 0.5 * w - lo[0]) / h).floor().max(0.0) as usize;
        let i1 = (((big_r[0] + 0.5 * w - lo[0]) / h).ceil() as usize).min(nx - 1);
        let j0 = ((big_r[1] - 0.5 * w - lo[1]) / h).floor().max(0.0) as usize;
        let j1 = (((big_r[1] + 0.5 * w - lo[1]) / h).ceil() as usize).min(ny - 1);
        let vy: Vec<f64> = (j0..=j1).map(|j| profile.y_mode.value(lo[1] + j as f64 * h - big_r[1])).collect();
        let mut out = Vec::new();
        for i in i0..=i1 {
            let vx = profile.x_mode.value(lo[0] + i as f64 * h - big_r[0]);
            if vx == 0.0 {
                continue;
            }
            for j in j0..=j1 {
                let r = [lo[0] + i as f64 * h, lo[1] + j as f64 * h];
                let v = vx * vy[j - j0];
                if v != 0.0 {
                    let g = peierls_phase(r, big_r, s, units, &PathChoice::Straight)?;
                    out.push((i * ny + j, C64::from_polar(v, g)));
                }
            }
        }
        let norm = out.iter().map(|(_, z)| z.norm_sqr()).sum::<f64>().sqrt();
        Ok(out.into_iter().map(|(k, z)| (k, z / norm)).collect())
    };
    let states: Vec<Vec<(usize, C64)>> = loop_points.iter().map(|&p| state(p)).collect::<Result<_>>()?;
    let mut prod = C64::new(1.0, 0.0);
    for (k, w) in states.windows(2).enumerate() {
        let mut o = C64::new(0.0, 0.0);
        let (mut a, mut b) = (0, 0);
        while a < w[0].len() && b < w[1].len() {
            match w[0][a].0.cmp(&w[1][b].0) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    o += w[0][a].1.conj() * w[1][b].1;
                    a += 1;
                    b += 1;
                }
            }
        }
        if o.norm() < crate::geometry::OVERLAP_TOL {
            return Err(Error::VanishingOverlap { from: k, to: k + 1, overlap: o.norm() });
        }
        prod *= o / o.norm();
    }
    Ok(-prod.arg())
}

/// One row of a well profile table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig2Row {
    /// `(2m / hbar) x`
    pub x_scaled: f64,
    pub re_v: f64,
    pub re_a_mp: f64,
    pub im_a_mp: f64,
    pub masked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Profile {
    pub mode: usize,
    pub rows: Vec<Fig2Row>,
    /// Largest `|Re A_MP,x|` over unmasked rows.
    pub max_re: f64,
    /// Centres of contiguous masked runs, in `x` (unscaled).
    pub windows: Vec<f64>,
    pub analytic_nodes: Vec<f64>,
}

pub fn fig2_profiles(mode: usize, well: &WellConfig, points: usize, units: &Units) -> Result<Fig2Profile> {
    let states = bound_states_1d(well, points, mode + 1, units)?;
    let state = &states[mode];
    let (field, mask) = a_mp_closed_form(state)?;
    let scale = 2.0 * units.mass / units.hbar;
    let rows: Vec<Fig2Row> = state
        .x
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let a = field.field.get(j, 0);
            Fig2Row { x_scaled: scale * x, re_v: state.values[j], re_a_mp: a.re, im_a_mp: a.im, masked: mask[j] }
        })
        .collect();
    let max_re = rows.iter().filter(|r| !r.masked).map(|r| r.re_a_mp.abs()).fold(0.0, f64::max);
    let mut windows = Vec::new();
    let mut j = 0;
    while j < mask.len() {
        if mask[j] {
            let start = j;
            while j < mask.len() && mask[j] {
                j += 1;
            }
            windows.push(0.5 * (state.x[start] + state.x[j - 1]));
        } else {
            j += 1;
        }
    }
    Ok(Fig2Profile { mode, rows, max_re, windows, analytic_nodes: state.analytic_nodes() })
}

/// Hard-wall well of `interior + 1` lattice spacings on a tight-binding
/// line at height `line_y`, with Peierls hopping phases from the solenoid.
/// The parameter is the well centre `R` along the line; the lattice spacing
/// is also the parameter step, so the well moves by whole sites.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingWell1D {
    pub solenoid: SolenoidConfig,
    pub units: Units,
    pub width: f64,
    pub line_y: f64,
    pub x_min: f64,
    pub dx: f64,
    pub sites: usize,
    pub wall: f64,
    bond_phase: Vec<f64>,
}

impl MovingWell1D {
    /// Lattice covering the well for centres `center +- travel * dx`.
    pub fn new(
        solenoid: SolenoidConfig,
        units: Units,
        width: f64,
        interior: usize,
        line_y: f64,
        center: f64,
        travel: usize,
    ) -> Result<Self> {
        if (line_y - solenoid.center[1]).abs() <= solenoid.radius {
            return Err(Error::PathCrossesSolenoid {
                distance: (line_y - solenoid.center[1]).abs(),
                radius: solenoid.radius,
            });
        }
        let dx = width / (interior + 1) as f64;
        let half = (interior + 1) / 2;
        let margin = 2;
        let x_min = center - (travel + half + margin) as f64 * dx;
        let sites = 2 * (travel + half + margin) + 1;
        let dy = line_y - solenoid.center[1];
        let prim = |x: f64| -solenoid.flux / (2.0 * PI) * ((x - solenoid.center[0]) / dy).atan();
        let bond_phase = (0..sites - 1)
            .map(|j| {
                let (a, b) = (x_min + j as f64 * dx, x_min + (j + 1) as f64 * dx);
                units.coupling() * (prim(b) - prim(a))
            })
            .collect();
        let kinetic = units.hbar * units.hbar / (2.0 * units.mass * dx * dx);
        Ok(MovingWell1D { solenoid, units, width, line_y, x_min, dx, sites, wall: 1e3 * kinetic, bond_phase })
    }

    pub fn site_x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn nearest_site(&self, x: f64) -> usize {
        (((x - self.x_min) / self.dx).round().max(0.0) as usize).min(self.sites - 1)
    }

    /// Centres `center +- travel * dx`, with the given stencil order.
    pub fn parameter_grid(&self, center: f64, travel: usize, order: DiffOrder) -> Result<ParameterGrid> {
        let h = travel as f64 * self.dx;
        Ok(ParameterGrid::new(vec![Axis::open(center - h, center + h, 2 * travel + 1)])?.with_order(order))
    }

    /// `(q / hbar) A_x(R, line_y)`, the expected Berry connection.
    pub fn expected_connection(&self, big_r: f64) -> Result<f64> {
        Ok(self.units.coupling() * vector_potential_a([big_r, self.line_y], &self.solenoid)?[0])
    }

    fn inside(&self, j: usize, big_r: f64) -> bool {
        (self.site_x(j) - big_r).abs() < 0.5 * (self.width - self.dx)
    }
}

impl Hamiltonian for MovingWell1D {
    fn dim(&self) -> usize {
        self.sites
    }
    fn n_params(&self) -> usize {
        1
    }
    fn at(&self, r: &[f64]) -> Result<HermitianMatrix> {
        let big_r = r[0];
        let t = self.units.hbar * self.units.hbar / (2.0 * self.units.mass * self.dx * self.dx);
        let mut h = ComplexMatrix::zeros(self.sites, self.sites);
        for j in 0..self.sites {
            let inside = self.inside(j, big_r);
            h[(j, j)] = C64::new(2.0 * t + if inside { 0.0 } else { self.wall }, 0.0);
            if j + 1 < self.sites && inside == self.inside(j + 1, big_r) {
                let hop = C64::from_polar(-t, self.bond_phase[j]);
                h[(j + 1, j)] = hop;
                h[(j, j + 1)] = hop.conj();
            }
        }
        HermitianMatrix::new(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{berry_connection, build_bundle};
    use crate::weak_value::{a_mutual_position, decompose, ComponentMap, PostSelection};

    fn sol(flux: f64) -> SolenoidConfig {
        SolenoidConfig::new(flux, [0.0, 0.0], 0.05).unwrap()
    }

    #[test]
    fn potential_and_flux() {
        assert_eq!(vector_potential_a([1.0, 2.0], &sol(0.0)).unwrap(), [0.0, 0.0]);
        assert!(matches!(vector_potential_a([0.01, 0.0], &sol(1.0)), Err(Error::InsideSolenoid { .. })));
        let s = sol(1.3);
        let enclosed = line_integral_a(&circle_loop([0.1, -0.2], 0.7, 10_000), &s).unwrap();
        assert!((enclosed - 1.3).abs() < 1e-6 * 1.3);
        let outside = line_integral_a(&circle_loop([2.0, 0.0], 0.7, 10_000), &s).unwrap();
        assert!(outside.abs() < 1e-6 * 1.3);
    }

    #[test]
    fn peierls_phase_properties() {
        let u = Units::default();
        let s = sol(2.2);
        let r = [0.4, 0.9];
        assert_eq!(peierls_phase(r, r, &s, &u, &PathChoice::Straight).unwrap(), 0.0);
        assert_eq!(peierls_phase(r, [1.0, 1.0], &sol(0.0), &u, &PathChoice::Straight).unwrap(), 0.0);

        // grad_R g = -(q/hbar) A(R)
        let big_r = [1.1, 0.3];
        let h = 1e-5;
        let a = vector_potential_a(big_r, &s).unwrap();
        for k in 0..2 {
            let (mut p, mut m) = (big_r, big_r);
            p[k] += h;
            m[k] -= h;
            let d = (peierls_phase(r, p, &s, &u, &PathChoice::Straight).unwrap()
                - peierls_phase(r, m, &s, &u, &PathChoice::Straight).unwrap())
                / (2.0 * h);
            assert!((d + a[k]).abs() < 1e-5);
        }

        let straight = peierls_phase(r, big_r, &s, &u, &PathChoice::Straight).unwrap();
        let bent = peierls_phase(r, big_r, &s, &u, &PathChoice::Via(vec![[1.5, 1.5]])).unwrap();
        assert!((straight - bent).abs() < 1e-6 * 2.2);
        // around the other side of the axis: one winding apart
        let around = peierls_phase(r, big_r, &s, &u, &PathChoice::Via(vec![[0.5, -1.0], [-1.0, -0.5], [-0.5, 1.0]]))
            .unwrap();
        assert!(((straight - around).abs() - 2.2).abs() < 1e-5);

        let crossing = peierls_phase([-1.0, 0.0], [1.0, 0.0], &s, &u, &PathChoice::Straight);
        assert!(matches!(crossing, Err(Error::PathCrossesSolenoid { .. })));
    }

    #[test]
    fn hard_wall_spectrum() {
        let u = Units::default();
        let states = bound_states_1d(&WellConfig { width: 1.0 }, 209, 3, &u).unwrap();
        for (n, st) in states.iter().enumerate() {
            let exact = ((n + 1) as f64 * PI).powi(2) / 2.0;
            assert!((st.energy - exact).abs() / exact < 5e-3);
            assert_eq!(st.nodes.len(), n);
            let norm: f64 = st.values.iter().map(|v| v * v).sum::<f64>() * st.dx();
            assert!((norm - 1.0).abs() < 1e-10);
            assert!(st.values[0] > 0.0);
            for (a, b) in st.nodes.iter().zip(st.analytic_nodes()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
        let overlap: f64 = states[0].values.iter().zip(&states[2].values).map(|(a, b)| a * b).sum::<f64>() * states[0].dx();
        assert!(overlap.abs() < 1e-8);
        assert!(matches!(bound_states_1d(&WellConfig { width: 1.0 }, 50, 1, &u), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn ground_state_log_derivative() {
        let u = Units::default();
        let w = 1.3;
        let st = &bound_states_1d(&WellConfig { width: w }, 209, 1, &u).unwrap()[0];
        assert!(st.a_mp_at(0.0).unwrap().norm() < 1e-8);
        let (field, mask) = a_mp_closed_form(st).unwrap();
        for (j, &x) in st.x.iter().enumerate() {
            if mask[j] {
                continue;
            }
            let a = field.field.get(j, 0);
            let want = -(PI / w) * (PI * x / w).tan();
            assert!(a.re.abs() <= 1e-10 * a.im.abs().max(1.0));
            assert!((a.im - want).abs() < 1e-6 * want.abs().max(1.0), "{x}: {} vs {want}", a.im);
        }
    }

    #[test]
    fn second_mode_diverges_at_nodes() {
        let u = Units::default();
        let st = &bound_states_1d(&WellConfig { width: 1.0 }, 209, 3, &u).unwrap()[2];
        for node in st.analytic_nodes() {
            for side in [-1.0, 1.0] {
                let a = st.a_mp_at(node + side * 0.5e-3).unwrap();
                assert!(a.norm() > 1e3);
            }
        }
    }

    #[test]
    fn fig2_tables() {
        let u = Units::default();
        let well = WellConfig { width: 1.0 };
        let f0 = fig2_profiles(0, &well, 209, &u).unwrap();
        assert!(f0.max_re <= 1e-8);
        assert!(f0.windows.is_empty());
        let n = f0.rows.len();
        for j in 0..n / 2 {
            assert!((f0.rows[j].im_a_mp + f0.rows[n - 1 - j].im_a_mp).abs() < 1e-8 * f0.rows[j].im_a_mp.abs().max(1.0));
        }
        let f2 = fig2_profiles(2, &well, 209, &u).unwrap();
        assert!(f2.max_re <= 1e-8);
        assert_eq!(f2.windows.len(), 2);
        for (w, node) in f2.windows.iter().zip(&f2.analytic_nodes) {
            assert!((w - node).abs() < 1e-3);
        }
    }

    #[test]
    fn contour_integrals() {
        let u = Units::default();
        let prof = WellProfile2D::new(1.0, 209, [0, 0], &u).unwrap();
        let r = [0.05, -0.02];
        let kind = ContourKind::VaryRFixedR(r);

        let closed = contour_gamma_mp(kind, &circle_loop([0.0, 0.0], 0.2, 2000), &prof).unwrap();
        assert!(closed.norm() < 1e-6);
        let (a, b) = ([0.1, 0.15], [-0.2, -0.1]);
        let straight = contour_gamma_mp(kind, &polyline(&[a, b], 2000), &prof).unwrap();
        let dogleg = contour_gamma_mp(kind, &polyline(&[a, [0.25, -0.2], b], 2000), &prof).unwrap();
        let oracle = contour_gamma_mp_endpoints(kind, a, b, &prof).unwrap();
        assert!((straight - dogleg).norm() < 1e-6);
        assert!((straight - oracle).norm() < 1e-6);
        let fine = contour_gamma_mp(kind, &polyline(&[a, b], 8000), &prof).unwrap();
        assert!((fine - straight).norm() < 1e-6);

        let obs = ContourKind::VaryRFixedWell([0.3, 0.1]);
        let ring = contour_gamma_mp(obs, &ellipse_loop([0.3, 0.1], 0.3, 0.2, 0.4, 2000), &prof).unwrap();
        assert!(ring.norm() < 1e-6);

        // v(0)/v(x1) = e on the ground-state cosine (times the y factor at 0)
        let x1 = (1.0 / PI) * (1.0f64 / std::f64::consts::E).acos();
        let val = contour_gamma_mp_endpoints(kind, [r[0] - x1, r[1]], r, &prof).unwrap();
        assert!((val - C64::new(0.0, -1.0)).norm() < 1e-5);
    }

    #[test]
    fn aharonov_bohm_loops() {
        let u = Units::default();
        let prof = WellProfile2D::new(1.0, 209, [0, 0], &u).unwrap();
        for flux in [0.5, 1.5, 3.2] {
            let s = sol(flux);
            let want = crate::linalg::wrap_phase(flux);
            for lp in [circle_loop([0.0, 0.0], 1.0, 400), ellipse_loop([0.1, 0.0], 1.2, 0.95, 0.3, 400)] {
                let w = peierls_wilson_loop(&lp, &prof, &s, &u, 0.05).unwrap();
                assert!(crate::linalg::phase_distance(w, want) < 1e-9, "{flux}: {w}");
            }
            let far = peierls_wilson_loop(&circle_loop([3.0, 0.0], 1.0, 400), &prof, &s, &u, 0.05).unwrap();
            assert!(far.abs() < 1e-9);
        }
        // A_S + A_MP = (q/hbar) A by construction
        let s = sol(1.5);
        let big_r = [0.8, 0.4];
        let r = [0.9, 0.3];
        let a_s = a_s_ab(&prof, &s, &u, big_r, r).unwrap();
        let mp = prof.a_mp_at([r[0] - big_r[0], r[1] - big_r[1]]).unwrap();
        let a = vector_potential_a(big_r, &s).unwrap();
        assert!((a_s[0] + mp[0] - a[0]).norm() < 1e-12 && (a_s[1] + mp[1] - a[1]).norm() < 1e-12);
    }

    #[test]
    fn moving_well_bundle_reproduces_closed_forms() {
        let u = Units::default();
        let s = sol(1.5);
        let (interior, travel) = (209, 12);
        let model = MovingWell1D::new(s, u, 1.0, interior, -0.7, 0.0, travel).unwrap();
        let grid = model.parameter_grid(0.0, travel, DiffOrder::Fourth).unwrap();
        let bundle = build_bundle(&model, &grid).unwrap();

        let conn = berry_connection(&bundle, 0).unwrap();
        for p in 0..grid.len() {
            let want = model.expected_connection(grid.coords(p)[0]).unwrap();
            assert!((conn.field.get(p, 0).re - want).abs() < 1e-4);
        }

        let st = &bound_states_1d(&WellConfig { width: 1.0 }, interior, 1, &u).unwrap()[0];
        let site = model.nearest_site(0.1);
        let map = ComponentMap::constant(&grid, site);
        let (pos, mask) = a_mutual_position(&bundle, 0, &map).unwrap();
        let general = decompose(&bundle, 0, &PostSelection::ParameterState(map)).unwrap();
        for p in 0..grid.len() {
            assert!(!mask[p]);
            let x = model.site_x(site) - grid.coords(p)[0];
            let want = st.a_mp_at(x).unwrap();
            let got = pos.field.get(p, 0);
            // one-sided stencils see the |s|^3 kink of a translated hard wall
            if p >= 2 && p + 2 < grid.len() {
                assert!((got - want).norm() < 1e-5, "{x}: {got} vs {want}");
            }
            assert!((got - general.a_mutual.field.get(p, 0)).norm() < 1e-10);
        }
    }
}
