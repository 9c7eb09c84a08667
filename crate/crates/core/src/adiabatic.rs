//! Time-dependent Schrodinger evolution along a parameter path, with
//! dynamical and geometric phase extraction and leakage bookkeeping.
//! Units: hbar = 1.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{build_bundle_for_bands, EigenBundle};
use crate::grid::{Axis, DiffOrder, ParameterGrid};
use crate::linalg::{eig_hermitian, inner_unchecked, unitary_propagator, wrap_phase, ComplexVector, HermitianMatrix, C64};
use crate::models::Hamiltonian;
use crate::weak_value::{gamma_rate_weak, PostSelection};

/// Norm drift beyond this aborts a run.
pub const NORM_DRIFT_TOL: f64 = 1e-6;

/// Phase extraction is refused above this leakage.
pub const LEAKAGE_BOUND: f64 = 0.1;

type PositionFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// `R(t)` on `[0, T]`, sampled at `steps + 1` uniformly spaced times.
#[derive(Clone)]
pub struct TimePath {
    position: Arc<PositionFn>,
    n_params: usize,
    total_time: f64,
    steps: usize,
    closed: bool,
}

impl fmt::Debug for TimePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimePath")
            .field("n_params", &self.n_params)
            .field("total_time", &self.total_time)
            .field("steps", &self.steps)
            .field("closed", &self.closed)
            .finish()
    }
}

impl TimePath {
    pub fn new(
        n_params: usize,
        total_time: f64,
        steps: usize,
        closed: bool,
        position: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(total_time > 0.0) || steps < 1 {
            return Err(Error::InvalidInput("time path needs T > 0 and at least two samples".into()));
        }
        let path = TimePath { position: Arc::new(position), n_params, total_time, steps, closed };
        let (a, b) = (path.position(0.0), path.position(total_time));
        if a.len() != n_params || b.len() != n_params {
            return Err(Error::DimensionMismatch { expected: n_params, found: a.len() });
        }
        if closed {
            let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if gap > 1e-9 * (1.0 + a.iter().map(|x| x.abs()).fold(0.0, f64::max)) {
                return Err(Error::InvalidInput(format!("closed path does not return to its start (gap {gap:e})")));
            }
        }
        Ok(path)
    }

    /// Piecewise-linear path through `samples` at spacing `dt`.
    pub fn from_samples(samples: Vec<Vec<f64>>, dt: f64, closed: bool) -> Result<Self> {
        if samples.len() < 2 || !(dt > 0.0) {
            return Err(Error::InvalidInput("time path needs dt > 0 and at least two samples".into()));
        }
        let n_params = samples[0].len();
        let steps = samples.len() - 1;
        let s = samples.clone();
        Self::new(n_params, dt * steps as f64, steps, closed, move |t| {
            let x = (t / dt).clamp(0.0, steps as f64);
            let i = (x.floor() as usize).min(steps - 1);
            let frac = x - i as f64;
            s[i].iter().zip(&s[i + 1]).map(|(a, b)| a + frac * (b - a)).collect()
        })
    }

    /// Spin-1/2 sphere coordinates `(theta, omega t)`: `turns` trips around
    /// a cone of half-angle `theta` at angular speed `omega`.
    pub fn cone(theta: f64, omega: f64, turns: usize, steps: usize) -> Result<Self> {
        let total = 2.0 * PI * turns as f64 / omega;
        Self::new(2, total, steps, true, move |t| vec![theta, wrap_phase(omega * t)])
    }

    pub fn position(&self, t: f64) -> Vec<f64> {
        (self.position)(t)
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.steps as f64
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }

    /// One-dimensional grid over `t`; periodic without the repeated end
    /// sample when the path is closed.
    pub fn time_grid(&self) -> ParameterGrid {
        let axis = if self.closed {
            Axis::periodic(0.0, self.total_time, self.steps)
        } else {
            Axis::open(0.0, self.total_time, self.steps + 1)
        };
        ParameterGrid::new(vec![axis]).expect("one axis").with_order(DiffOrder::Fourth)
    }

    /// Grid point of sample `i`.
    pub fn grid_point(&self, i: usize) -> usize {
        if self.closed {
            i % self.steps
        } else {
            i
        }
    }
}

struct OnPath<'a> {
    h: &'a dyn Hamiltonian,
    path: &'a TimePath,
}

impl Hamiltonian for OnPath<'_> {
    fn dim(&self) -> usize {
        self.h.dim()
    }
    fn n_params(&self) -> usize {
        1
    }
    fn at(&self, t: &[f64]) -> Result<HermitianMatrix> {
        self.h.at(&self.path.position(t[0]))
    }
}

/// Eigenbundle of `H(R(t))` over `path.time_grid()`, all bands.
pub fn path_bundle(h: &dyn Hamiltonian, path: &TimePath) -> Result<EigenBundle> {
    if h.n_params() != path.n_params() {
        return Err(Error::DimensionMismatch { expected: h.n_params(), found: path.n_params() });
    }
    let bands: Vec<usize> = (0..h.dim()).collect();
    build_bundle_for_bands(&OnPath { h, path }, &path.time_grid(), &bands)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<ComplexVector>,
    /// `E_m(R(t))`, all bands.
    pub energies: Vec<Vec<f64>>,
    /// `c_m(t) = <u_m(R(t))|psi(t)>` with reference-gauge eigenvectors.
    pub coefficients: Vec<Vec<C64>>,
    /// The band `psi_0` overlaps most.
    pub band: usize,
    /// `sum_{m != band} |c_m|^2`.
    pub leakage: Vec<f64>,
    /// `max_t | <psi|psi> - 1 |`.
    pub norm_drift: f64,
}

impl EvolutionResult {
    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().copied().fold(0.0, f64::max)
    }
}

/// Exponential-midpoint propagation: each sub-step applies
/// `exp(-i H(R(t_mid)) dt_sub)` built from an exact eigendecomposition.
pub fn evolve_tdse(h: &dyn Hamiltonian, path: &TimePath, psi0: &ComplexVector, dt_sub: f64) -> Result<EvolutionResult> {
    let dim = h.dim();
    if psi0.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: psi0.len() });
    }
    let norm = psi0.norm();
    if !(norm > 0.0) {
        return Err(Error::ZeroVector);
    }
    let dt = path.dt();
    if !(dt_sub > 0.0) || dt_sub > dt * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("dt_sub = {dt_sub} must lie in (0, dt = {dt}]")));
    }
    let sub = (dt / dt_sub).ceil() as usize;
    let h_sub = dt / sub as f64;

    let mut psi = psi0 / C64::new(norm, 0.0);
    let mut states = Vec::with_capacity(path.steps() + 1);
    let mut energies = Vec::with_capacity(path.steps() + 1);
    let mut coefficients = Vec::with_capacity(path.steps() + 1);
    let mut norm_drift: f64 = 0.0;

    let record = |psi: &ComplexVector, t: f64, energies: &mut Vec<Vec<f64>>, coefficients: &mut Vec<Vec<C64>>| {
        let eig = eig_hermitian(&h.at(&path.position(t))?)?;
        coefficients.push(eig.eigenvectors.iter().map(|u| inner_unchecked(u, psi)).collect());
        energies.push(eig.eigenvalues);
        Ok::<(), Error>(())
    };

    record(&psi, 0.0, &mut energies, &mut coefficients)?;
    states.push(psi.clone());
    for i in 0..path.steps() {
        let t0 = path.time(i);
        for j in 0..sub {
            let tm = t0 + (j as f64 + 0.5) * h_sub;
            let eig = eig_hermitian(&h.at(&path.position(tm))?)?;
            psi = unitary_propagator(&eig, h_sub) * psi;
        }
        let drift = (psi.norm_squared() - 1.0).abs();
        norm_drift = norm_drift.max(drift);
        if drift > NORM_DRIFT_TOL {
            return Err(Error::StepTooLarge(format!("norm drift {drift:e} at t = {}", path.time(i + 1))));
        }
        record(&psi, path.time(i + 1), &mut energies, &mut coefficients)?;
        states.push(psi.clone());
    }

    let band = (0..dim)
        .max_by(|&a, &b| coefficients[0][a].norm().total_cmp(&coefficients[0][b].norm()).then(b.cmp(&a)))
        .expect("dim >= 1");
    let leakage = coefficients
        .iter()
        .map(|c| c.iter().enumerate().filter(|(m, _)| *m != band).map(|(_, z)| z.norm_sqr()).sum::<f64>().min(1.0))
        .collect();
    Ok(EvolutionResult { times: path.times(), states, energies, coefficients, band, leakage, norm_drift })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSeries {
    pub times: Vec<f64>,
    /// `theta_n(t) = -int_0^t E_n dt'`.
    pub dynamical: Vec<f64>,
    /// `arg <u_n(R(t))|psi(t)> - theta_n(t)`, unwrapped.
    pub geometric: Vec<f64>,
    /// `1 - |<u_n|psi>|^2` against the bundle's states.
    pub leakage: Vec<f64>,
}

/// Dynamical and geometric phases of band `n`, with `bundle` built by
/// [`path_bundle`] on the same path.
pub fn extract_phases(result: &EvolutionResult, bundle: &EigenBundle, path: &TimePath, n: usize) -> Result<PhaseSeries> {
    if result.states.len() != path.steps() + 1 || bundle.grid() != &path.time_grid() {
        return Err(Error::InvalidInput("result, bundle and path do not describe the same run".into()));
    }
    let overlaps: Vec<C64> = result
        .states
        .iter()
        .enumerate()
        .map(|(i, psi)| inner_unchecked(bundle.state(path.grid_point(i), n), psi))
        .collect();
    let leakage: Vec<f64> = overlaps.iter().map(|o| (1.0 - o.norm_sqr()).clamp(0.0, 1.0)).collect();
    let worst = leakage.iter().copied().fold(0.0, f64::max);
    if worst >= LEAKAGE_BOUND {
        return Err(Error::NonAdiabatic { leakage: worst, bound: LEAKAGE_BOUND });
    }
    let dt = path.dt();
    let mut dynamical = vec![0.0; overlaps.len()];
    for i in 1..overlaps.len() {
        let e0 = bundle.energy(path.grid_point(i - 1), n);
        let e1 = bundle.energy(path.grid_point(i), n);
        dynamical[i] = dynamical[i - 1] - 0.5 * (e0 + e1) * dt;
    }
    let mut geometric = vec![overlaps[0].arg(); overlaps.len()];
    for i in 1..overlaps.len() {
        let step = wrap_phase((overlaps[i].arg() - dynamical[i]) - (overlaps[i - 1].arg() - dynamical[i - 1]));
        if step.abs() > 0.75 * PI {
            return Err(Error::StepTooLarge(format!(
                "geometric phase jumps by {step:.3} between samples {} and {i}",
                i - 1
            )));
        }
        geometric[i] = geometric[i - 1] + step;
    }
    Ok(PhaseSeries { times: result.times.clone(), dynamical, geometric, leakage })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakRateReport {
    pub times: Vec<f64>,
    /// `d gamma_n / dt` from the simulated phase, by central differences.
    pub simulated_rate: Vec<f64>,
    /// The weak-value rate for the given post-selection.
    pub weak_rate: Vec<f64>,
    pub max_deviation: f64,
    pub max_leakage: f64,
}

/// Compare the simulated geometric phase rate with the weak-value rate.
pub fn verify_eq4_along_path(
    result: &EvolutionResult,
    bundle: &EigenBundle,
    path: &TimePath,
    n: usize,
    phi: &PostSelection,
) -> Result<WeakRateReport> {
    let phases = extract_phases(result, bundle, path, n)?;
    let weak = gamma_rate_weak(bundle, n, phi, path)?;
    let g = &phases.geometric;
    let dt = path.dt();
    let len = weak.rate.len();
    let simulated_rate: Vec<f64> = (0..len)
        .map(|i| {
            if path.is_closed() {
                // samples 0..=steps; wrap with the unwrapped series' winding removed
                let total = g[path.steps()] - g[0];
                let prev = if i == 0 { g[path.steps() - 1] - total } else { g[i - 1] };
                (g[i + 1] - prev) / (2.0 * dt)
            } else if i == 0 {
                (g[1] - g[0]) / dt
            } else if i == len - 1 {
                (g[i] - g[i - 1]) / dt
            } else {
                (g[i + 1] - g[i - 1]) / (2.0 * dt)
            }
        })
        .collect();
    let max_deviation = (0..len)
        .filter(|&i| !weak.mask[i])
        .map(|i| (simulated_rate[i] - weak.rate[i]).abs())
        .fold(0.0, f64::max);
    Ok(WeakRateReport {
        times: weak.times.clone(),
        simulated_rate,
        weak_rate: weak.rate,
        max_deviation,
        max_leakage: phases.leakage.iter().copied().fold(0.0, f64::max),
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
