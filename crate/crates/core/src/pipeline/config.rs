//! Pipeline configuration, read from TOML. Every section has defaults, and
//! the defaults form the reference experiment. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::characteristics::PdeCoefficients;
use crate::cwt::{Boundary, Method, ScaleSet, TransformOptions};
use crate::error::{Error, Result};
use crate::grid::{make_grid2d, Grid1D, Grid2D, InitialDataSpec, InitialKind};
use crate::lipschitz::ClassificationBands;
use crate::solver::{CauchyProblem, InitialData};
use crate::wavelets::MIN_TRUNCATION;

/// `ScaleSet` as a `"JMIN..JMAX"` string.
mod scale_str {
    use super::*;

    pub fn serialize<S: Serializer>(s: &ScaleSet, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&format!("{}..{}", s.j_min, s.j_max))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> std::result::Result<ScaleSet, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub grid: GridConfig,
    pub problem: ProblemConfig,
    pub transform: TransformConfig,
    pub detect: DetectConfig,
    pub lipschitz: LipschitzConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub m: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min: -2.0,
            x_max: 2.0,
            n: 1024,
            t_min: 0.0,
            t_max: 1.0,
            m: 256,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid2D> {
        make_grid2d(
            self.x_min, self.x_max, self.n, self.t_min, self.t_max, self.m,
        )
    }
}

/// Initial data as written in a config. `x0` is mandatory for kinds with a
/// singularity and defaults to 0 otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataConfig {
    pub kind: InitialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl InitialDataConfig {
    pub fn new(kind: InitialKind, x0: f64) -> Self {
        Self {
            kind,
            x0: Some(x0),
            amplitude: 1.0,
            width: None,
        }
    }

    pub fn spec(&self, what: &str) -> Result<InitialDataSpec> {
        let x0 = match (self.x0, self.kind.is_singular()) {
            (Some(x0), _) => x0,
            (None, false) => 0.0,
            (None, true) => {
                return Err(Error::Config(format!(
                    "{what}: kind `{}` needs an explicit x0",
                    kind_name(self.kind)
                )))
            }
        };
        let mut spec = InitialDataSpec::new(self.kind, x0, self.amplitude);
        if let Some(w) = self.width {
            spec = spec.with_width(w);
        }
        spec.validate()
            .map_err(|e| Error::Config(format!("{what}: {e}")))?;
        Ok(spec)
    }
}

fn kind_name(kind: InitialKind) -> String {
    serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_else(|| format!("{kind:?}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "one")]
    pub nu: f64,
    pub phi: InitialDataConfig,
    /// Initial velocity; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<InitialDataConfig>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            phi: InitialDataConfig::new(InitialKind::C1ParabolicKink, 0.0),
            psi: None,
        }
    }
}

impl ProblemConfig {
    pub fn build(&self, grid: &Grid1D) -> Result<CauchyProblem> {
        let phi = self.phi.spec("problem.phi")?;
        phi.validate_on(grid)?;
        let psi = match &self.psi {
            Some(p) => {
                let s = p.spec("problem.psi")?;
                s.validate_on(grid)?;
                InitialData::Spec(s)
            }
            None => InitialData::Zero,
        };
        CauchyProblem::new(self.nu, InitialData::Spec(phi), psi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    pub boundary: Boundary,
    pub method: Method,
    /// Kernel support half-width in units of σ.
    pub truncation: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        let d = TransformOptions::default();
        Self {
            boundary: d.boundary,
            method: d.method,
            truncation: d.truncation,
        }
    }
}

impl TransformConfig {
    pub fn options(&self) -> TransformOptions {
        TransformOptions {
            boundary: self.boundary,
            method: self.method,
            truncation: self.truncation,
            ..TransformOptions::default()
        }
    }
}

/// Which second-derivative surface to analyse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    /// `(2, 0)`: `σ² ∂²_x`.
    Xx,
    /// `(0, 2)`: `σ² ∂²_t`.
    Tt,
}

impl Surface {
    pub fn orders(self) -> (u8, u8) {
        match self {
            Surface::Xx => (2, 0),
            Surface::Tt => (0, 2),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Surface::Xx => "xx",
            Surface::Tt => "tt",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    #[serde(with = "scale_str")]
    pub levels: ScaleSet,
    /// Level whose ridges are fitted and verified.
    pub reference_level: i32,
    /// Maxima below this fraction of the trusted peak modulus are dropped.
    pub threshold: f64,
    pub ridge_max_jump_cells: f64,
    pub linking_radius_cells: f64,
    pub surfaces: Vec<Surface>,
    pub min_ridge_points: usize,
    /// Also write the gradient fields of every level and surface.
    pub dump_fields: bool,
    pub bands: ClassificationBands,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            levels: ScaleSet { j_min: 2, j_max: 3 },
            reference_level: 2,
            threshold: 0.1,
            ridge_max_jump_cells: 3.0,
            linking_radius_cells: 2.0,
            surfaces: vec![Surface::Xx, Surface::Tt],
            min_ridge_points: 5,
            dump_fields: false,
            bands: ClassificationBands::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LipschitzConfig {
    pub signal: InitialDataConfig,
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(with = "scale_str")]
    pub scales: ScaleSet,
    /// Derivative order of the analysing wavelet (1 or 2).
    pub order: u8,
    pub threshold: f64,
    pub linking_radius_cells: f64,
    pub bands: ClassificationBands,
}

impl Default for LipschitzConfig {
    fn default() -> Self {
        Self {
            signal: InitialDataConfig::new(InitialKind::Step, 0.0),
            n: 4096,
            x_min: -1.0,
            x_max: 1.0,
            scales: ScaleSet { j_min: 1, j_max: 5 },
            order: 1,
            threshold: 0.1,
            linking_radius_cells: 2.0,
            bands: ClassificationBands::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub n_lines: usize,
    /// Where the characteristics start; defaults to `problem.phi.x0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    pub slope_tol: f64,
    pub intercept_tol: f64,
    /// Ridge points within this many cells of a true line count as covered.
    pub coverage_cells: f64,
    /// Wave speed to verify against; defaults to `problem.nu`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// General second-order coefficients; overrides `nu`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<PdeCoefficients>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n_lines: 2,
            x0: None,
            slope_tol: 0.05,
            intercept_tol: 0.02,
            coverage_cells: 2.0,
            nu: None,
            coefficients: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every section up front so commands fail before doing work.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        let grid = self
            .grid
            .build()
            .map_err(|e| Error::Config(format!("grid: {e}")))?;
        self.problem
            .build(grid.x())
            .map_err(|e| Error::Config(format!("problem: {e}")))?;
        if !(self.transform.truncation >= MIN_TRUNCATION) {
            return cfg_err(format!(
                "transform.truncation must be at least {MIN_TRUNCATION}, got {}",
                self.transform.truncation
            ));
        }
        let d = &self.detect;
        if !(d.threshold > 0.0 && d.threshold < 1.0) {
            return cfg_err(format!(
                "detect.threshold must lie in (0, 1), got {}",
                d.threshold
            ));
        }
        if !d.levels.levels().any(|j| j == d.reference_level) {
            return cfg_err(format!(
                "detect.reference_level {} is outside detect.levels {}..{}",
                d.reference_level, d.levels.j_min, d.levels.j_max
            ));
        }
        if d.surfaces.is_empty() {
            return cfg_err("detect.surfaces must name at least one surface".into());
        }
        if !(d.ridge_max_jump_cells > 0.0 && d.linking_radius_cells > 0.0) {
            return cfg_err("detect linking distances must be positive".into());
        }
        if d.min_ridge_points < crate::characteristics::MIN_RIDGE_POINTS {
            return cfg_err(format!(
                "detect.min_ridge_points must be at least {}",
                crate::characteristics::MIN_RIDGE_POINTS
            ));
        }
        let l = &self.lipschitz;
        l.signal.spec("lipschitz.signal")?;
        Grid1D::new(l.x_min, l.x_max, l.n).map_err(|e| Error::Config(format!("lipschitz: {e}")))?;
        if !(1..=2).contains(&l.order) {
            return cfg_err(format!("lipschitz.order must be 1 or 2, got {}", l.order));
        }
        if !(l.threshold > 0.0 && l.threshold < 1.0) {
            return cfg_err(format!(
                "lipschitz.threshold must lie in (0, 1), got {}",
                l.threshold
            ));
        }
        if l.scales.len() < 3 {
            return cfg_err("lipschitz.scales must span at least three levels".into());
        }
        let v = &self.verify;
        if !(1..=2).contains(&v.n_lines) {
            return cfg_err(format!("verify.n_lines must be 1 or 2, got {}", v.n_lines));
        }
        if !(v.slope_tol > 0.0 && v.intercept_tol > 0.0 && v.coverage_cells > 0.0) {
            return cfg_err("verify tolerances must be positive".into());
        }
        self.verify_coefficients()?;
        Ok(())
    }

    /// Coefficients the ridges are verified against.
    pub fn verify_coefficients(&self) -> Result<PdeCoefficients> {
        match (self.verify.coefficients, self.verify.nu) {
            (Some(k), _) => PdeCoefficients::new(k.a, k.b, k.c)
                .map_err(|e| Error::Config(format!("verify.coefficients: {e}"))),
            (None, Some(nu)) if !(nu > 0.0 && nu.is_finite()) => Err(Error::Config(format!(
                "verify.nu must be positive, got {nu}"
            ))),
            (None, nu) => Ok(PdeCoefficients::wave(nu.unwrap_or(self.problem.nu))),
        }
    }

    /// Start of the expected characteristics.
    pub fn verify_x0(&self) -> f64 {
        self.verify.x0.or(self.problem.phi.x0).unwrap_or(0.0)
    }
}
