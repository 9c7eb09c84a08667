//! CSV and JSON writers.
//!
//! CSV files carry a header row; complex values are split into `_re`/`_im`
//! columns and floats use Rust's shortest round-trip formatting, so equal
//! inputs give byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::adiabatic::{EvolutionResult, PhaseSeries};
use crate::aharonov_bohm::Fig2Profile;
use crate::error::{Error, Result};
use crate::geometry::{ConnectionField, CurvatureField, PlaneCurvature};
use crate::grid::ParameterGrid;
use crate::linalg::C64;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::InvalidInput(format!("csv: {e}"))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::InvalidInput(format!("io: {e}"))
    }
}

fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        x.to_string()
    }
}

fn flag(b: bool) -> String {
    (b as u8).to_string()
}

fn point_columns(grid: &ParameterGrid) -> Vec<String> {
    let n = grid.n_dims();
    (0..n).map(|k| format!("i{k}")).chain((0..n).map(|k| format!("r{k}"))).collect()
}

fn point_values(grid: &ParameterGrid, p: usize) -> Vec<String> {
    grid.multi_index(p)
        .into_iter()
        .map(|i| i.to_string())
        .chain(grid.coords(p).into_iter().map(num))
        .collect()
}

fn complex_pair(z: C64) -> [String; 2] {
    [num(z.re), num(z.im)]
}

/// Grid indices, coordinates, `<name>{m}_re/_im` per component, then
/// `masked` when a mask is given.
pub fn write_connection_csv<W: Write>(out: W, field: &ConnectionField, name: &str, mask: Option<&[bool]>) -> Result<()> {
    let all: Vec<usize> = (0..field.grid().len()).collect();
    write_connection_csv_at(out, field, name, &all, mask)
}

/// As [`write_connection_csv`], restricted to the listed grid points in order.
pub fn write_connection_csv_at<W: Write>(
    out: W,
    field: &ConnectionField,
    name: &str,
    points: &[usize],
    mask: Option<&[bool]>,
) -> Result<()> {
    let grid = &field.field.grid;
    let mut w = csv::Writer::from_writer(out);
    let mut header = point_columns(grid);
    for m in 0..grid.n_dims() {
        header.push(format!("{name}{m}_re"));
        header.push(format!("{name}{m}_im"));
    }
    if mask.is_some() {
        header.push("masked".into());
    }
    w.write_record(&header)?;
    for &p in points {
        let mut row = point_values(grid, p);
        for m in 0..grid.n_dims() {
            row.extend(complex_pair(field.field.get(p, m)));
        }
        if let Some(mask) = mask {
            row.push(flag(mask[p]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One block of columns per plane: `<name>_ab_re`, `<name>_ab_im`,
/// `masked_ab`.
pub fn write_planes_csv<W: Write>(out: W, planes: &[PlaneCurvature], name: &str) -> Result<()> {
    let Some(first) = planes.first() else {
        return Err(Error::InvalidInput("no curvature planes to export".into()));
    };
    let grid = &first.values.grid;
    let mut w = csv::Writer::from_writer(out);
    let mut header = point_columns(grid);
    for pl in planes {
        let (a, b) = pl.plane;
        header.push(format!("{name}_{a}{b}_re"));
        header.push(format!("{name}_{a}{b}_im"));
        header.push(format!("masked_{a}{b}"));
    }
    w.write_record(&header)?;
    for p in 0..grid.len() {
        let mut row = point_values(grid, p);
        for pl in planes {
            row.extend(complex_pair(pl.values.values[p]));
            row.push(flag(pl.mask[p]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curvature_csv<W: Write>(out: W, field: &CurvatureField, name: &str) -> Result<()> {
    write_planes_csv(out, &field.planes, name)
}

/// `t`, `psi{k}_re/_im`, `theta`, `gamma`, `leakage`.
pub fn write_trajectory_csv<W: Write>(out: W, result: &EvolutionResult, phases: &PhaseSeries) -> Result<()> {
    let dim = result.states.first().map_or(0, |s| s.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    for k in 0..dim {
        header.push(format!("psi{k}_re"));
        header.push(format!("psi{k}_im"));
    }
    header.extend(["theta".into(), "gamma".into(), "leakage".into()]);
    w.write_record(&header)?;
    for (i, t) in result.times.iter().enumerate() {
        let mut row = vec![num(*t)];
        for z in result.states[i].iter() {
            row.extend(complex_pair(*z));
        }
        row.push(num(phases.dynamical[i]));
        row.push(num(phases.geometric[i]));
        row.push(num(result.leakage[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `X, Re_v, Re_AMP_x, Im_AMP_x, masked`.
pub fn write_fig2_csv<W: Write>(out: W, profile: &Fig2Profile) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["X", "Re_v", "Re_AMP_x", "Im_AMP_x", "masked"])?;
    for r in &profile.rows {
        w.write_record([num(r.x_scaled), num(r.re_v), num(r.re_a_mp), num(r.im_a_mp), flag(r.masked)])?;
    }
    w.flush()?;
    Ok(())
}

/// Column-wise table of named real series of equal length.
pub fn write_series_csv<W: Write>(out: W, columns: &[(&str, &[f64])]) -> Result<()> {
    let len = columns.first().map_or(0, |c| c.1.len());
    if columns.iter().any(|c| c.1.len() != len) {
        return Err(Error::InvalidInput("series columns differ in length".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns.iter().map(|c| c.0))?;
    for i in 0..len {
        w.write_record(columns.iter().map(|c| num(c.1[i])))?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

/// Writes into a file, creating parent directories.
pub fn create_file(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::File::create(path)?)
}
