use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gaugeweave::aharonov_bohm::{MovingWell1D, SolenoidConfig, Units};
use gaugeweave::models::{DiagTwoLevel, SpinHalfSphere, StencilModel};
use gaugeweave::{Axis, DiffOrder, Error, Hamiltonian, ParameterGrid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    SpinHalf,
    DiagTwoLevel,
    AbWell,
    CustomFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub start: f64,
    /// Inclusive for open axes; one period past `start` for periodic ones.
    pub end: f64,
    pub points: usize,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
    #[serde(default = "default_order")]
    pub order: u32,
}

fn default_order() -> u32 {
    4
}

impl GridSpec {
    pub fn build(&self) -> Result<ParameterGrid> {
        let axes = self
            .axes
            .iter()
            .map(|a| {
                if a.periodic {
                    Axis::periodic(a.start, a.end - a.start, a.points)
                } else {
                    Axis::open(a.start, a.end, a.points)
                }
            })
            .collect();
        Ok(ParameterGrid::new(axes)?.with_order(DiffOrder::from_int(self.order)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PostSelectionSpec {
    /// The band's own eigenstate.
    Eigenstate,
    /// One bra for every grid point, as `[re, im]` pairs.
    FixedBra(Vec<[f64; 2]>),
    /// Position-basis component, either a fixed index or, for the
    /// `ab_well` model, the lattice site nearest `x`.
    ParameterState {
        #[serde(default)]
        component: Option<usize>,
        #[serde(default)]
        x: Option<f64>,
    },
    /// A JSON file holding one bra per grid point.
    Custom(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    /// Constant-`theta` loop on the (theta, phi) sphere.
    Latitude { theta: f64, steps: usize },
    /// Closed loop along a periodic axis of the configured grid.
    GridLoop { axis: usize, start: Vec<usize> },
    /// Open run of `steps` grid steps along `axis`.
    GridSegment { axis: usize, start: Vec<usize>, steps: isize },
    /// Field direction precessing at fixed `theta`.
    Cone {
        theta: f64,
        omega: f64,
        #[serde(default = "one")]
        turns: usize,
        steps: usize,
        #[serde(default = "default_dt_sub")]
        dt_sub: f64,
    },
}

fn one() -> usize {
    1
}

fn default_dt_sub() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbSpec {
    #[serde(default = "default_flux")]
    pub flux: f64,
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    /// Interior points of the hard-wall well.
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_modes")]
    pub modes: Vec<usize>,
    /// Height of the line the one-dimensional well slides along.
    #[serde(default = "default_line")]
    pub line_y: f64,
    /// Parameter steps either side of the origin for the sliding well.
    #[serde(default = "default_travel")]
    pub travel: usize,
    /// Explicit list of fluxes for the loop checks; defaults to `[flux]`
    /// when `flux` is given and to the standard set otherwise.
    #[serde(default)]
    pub fluxes: Option<Vec<f64>>,
}

fn default_flux() -> f64 {
    1.5
}
fn default_radius() -> f64 {
    0.05
}
fn default_width() -> f64 {
    1.0
}
fn default_points() -> usize {
    209
}
fn default_modes() -> Vec<usize> {
    vec![0, 2]
}
fn default_line() -> f64 {
    -0.7
}
fn default_travel() -> usize {
    12
}

impl Default for AbSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl AbSpec {
    pub fn solenoid(&self) -> Result<SolenoidConfig> {
        SolenoidConfig::new(self.flux, self.center, self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelKind,
    /// Stencil-model file for `custom_file`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    /// Field strength for `spin_half`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_selection: Option<PostSelectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ab: Option<AbSpec>,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> std::result::Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.tolerances.scale > 0.0) {
            return Err("tolerances.scale must be positive".into());
        }
        if self.model == ModelKind::CustomFile && self.model_file.is_none() {
            return Err("model custom_file needs model_file".into());
        }
        if !(self.units.hbar > 0.0 && self.units.mass > 0.0) {
            return Err("units.hbar and units.mass must be positive".into());
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn ab(&self) -> AbSpec {
        self.ab.clone().unwrap_or_default()
    }

    pub fn moving_well(&self) -> Result<MovingWell1D> {
        let ab = self.ab();
        MovingWell1D::new(ab.solenoid()?, self.units, ab.width, ab.points, ab.line_y, 0.0, ab.travel)
    }

    pub fn hamiltonian(&self) -> Result<Box<dyn Hamiltonian>> {
        Ok(match self.model {
            ModelKind::SpinHalf => Box::new(SpinHalfSphere { field: self.field.unwrap_or(1.0) }),
            ModelKind::DiagTwoLevel => {
                let n = self.grid.as_ref().map_or(2, |g| g.axes.len());
                Box::new(DiagTwoLevel { n_params: n })
            }
            ModelKind::AbWell => Box::new(self.moving_well()?),
            ModelKind::CustomFile => {
                let file = self.resolve(self.model_file.as_deref().unwrap_or(Path::new("")));
                let text = std::fs::read_to_string(&file)
                    .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", file.display())))?;
                let m: StencilModel = serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidInput(format!("invalid model file {}: {e}", file.display())))?;
                m.validate()?;
                Box::new(m)
            }
        })
    }

    /// The configured grid, or the model's default one.
    pub fn parameter_grid(&self) -> Result<ParameterGrid> {
        if self.model == ModelKind::AbWell {
            let ab = self.ab();
            return self.moving_well()?.parameter_grid(0.0, ab.travel, DiffOrder::Fourth);
        }
        if let Some(g) = &self.grid {
            return g.build();
        }
        match self.model {
            ModelKind::SpinHalf => Ok(ParameterGrid::new(vec![Axis::open(0.3, 1.3, 41), Axis::periodic(0.0, 2.0 * PI, 64)])?
                .with_order(DiffOrder::Fourth)),
            ModelKind::DiagTwoLevel => Ok(ParameterGrid::new(vec![Axis::open(-1.0, 1.0, 21), Axis::open(-1.0, 1.0, 21)])?
                .with_order(DiffOrder::Fourth)),
            _ => Err(Error::InvalidInput("this model needs an explicit grid".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"model": "spin_half", "band": 0}"#).unwrap();
        assert_eq!(cfg.band, Some(0));
        assert_eq!(cfg.parameter_grid().unwrap().len(), 41 * 64);
        assert_eq!(cfg.ab().points, 209);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"modle": "spin_half"}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"model": "qubit"}"#).is_err());
    }

    #[test]
    fn post_selection_forms() {
        let p: PostSelectionSpec = serde_json::from_str(r#"{"fixed_bra": [[1, 0], [0, 0]]}"#).unwrap();
        assert_eq!(p, PostSelectionSpec::FixedBra(vec![[1.0, 0.0], [0.0, 0.0]]));
        let p: PostSelectionSpec = serde_json::from_str(r#""eigenstate""#).unwrap();
        assert_eq!(p, PostSelectionSpec::Eigenstate);
        let p: PostSelectionSpec = serde_json::from_str(r#"{"parameter_state": {"component": 3}}"#).unwrap();
        assert_eq!(p, PostSelectionSpec::ParameterState { component: Some(3), x: None });
    }

    #[test]
    fn path_forms() {
        let p: PathSpec = serde_json::from_str(r#"{"type": "latitude", "theta": 1.0, "steps": 400}"#).unwrap();
        assert_eq!(p, PathSpec::Latitude { theta: 1.0, steps: 400 });
        let p: PathSpec = serde_json::from_str(r#"{"type": "cone", "theta": 1.0, "omega": 0.1, "steps": 40}"#).unwrap();
        assert!(matches!(p, PathSpec::Cone { turns: 1, .. }));
    }
}
