//! Run configuration, read from TOML: flat keys plus dotted sections
//! (`[time]`, `[mesh]`, `[high_order]`, ...).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::high_order::HighOrderConfig;
use crate::limiting::LimiterConfig;
use crate::solver::Scheme;
use crate::time_integration::SspMethod;

use super::presets;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscretizationKind {
    Fv,
    CgP1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementChoice {
    Quads,
    Triangles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Vtk,
}

/// Physical parameters; unset values take the preset's choice.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub gamma: Option<f64>,
    pub covolume: Option<f64>,
    pub gravity: Option<f64>,
    pub manning: Option<f64>,
    pub friction_exponent: Option<f64>,
    pub velocity: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshParams {
    pub cells: usize,
    /// Cells along y for 2D presets; defaults to `cells`.
    pub cells_y: Option<usize>,
    pub lower: Option<[f64; 2]>,
    pub upper: Option<[f64; 2]>,
    pub periodic: Option<bool>,
    /// 2D element shape; finite volumes need quads, P1 needs triangles.
    pub elements: Option<ElementChoice>,
    /// Random node displacement as a fraction of the mesh size.
    pub jitter: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams { cells: 100, cells_y: None, lower: None, upper: None, periodic: None, elements: None, jitter: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeParams {
    pub cfl: f64,
    pub ssp: SspMethod,
    pub t_final: Option<f64>,
    pub max_steps: usize,
}

impl Default for TimeParams {
    fn default() -> Self {
        TimeParams { cfl: 0.9, ssp: SspMethod::Ssp33, t_final: None, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputParams {
    /// No files are written without a directory.
    pub dir: Option<PathBuf>,
    /// Snapshot every `cadence` steps; 0 writes the initial and final states only.
    pub cadence: usize,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputParams {
    fn default() -> Self {
        OutputParams { dir: None, cadence: 0, formats: vec![OutputFormat::Csv] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub discretization: DiscretizationKind,
    pub scheme: Scheme,
    pub seed: u64,
    /// Abort on any bound or admissibility violation.
    pub strict: bool,
    pub system: SystemParams,
    pub mesh: MeshParams,
    pub time: TimeParams,
    pub high_order: HighOrderConfig,
    pub limiter: LimiterConfig,
    pub output: OutputParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "sod".into(),
            discretization: DiscretizationKind::Fv,
            scheme: Scheme::Limited,
            seed: 0,
            strict: false,
            system: SystemParams::default(),
            mesh: MeshParams::default(),
            time: TimeParams::default(),
            high_order: HighOrderConfig::default(),
            limiter: LimiterConfig::default(),
            output: OutputParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let preset = presets::find(&self.problem).ok_or_else(|| {
            ConfigError::invalid("problem", format!("unknown preset `{}`, expected one of {:?}", self.problem, presets::names()))
        })?;
        if !(self.time.cfl > 0.0 && self.time.cfl <= 1.0) {
            return Err(ConfigError::invalid("time.cfl", format!("{} is outside (0, 1]", self.time.cfl)));
        }
        if let Some(t) = self.time.t_final {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(ConfigError::invalid("time.t_final", format!("{t} must be finite and nonnegative")));
            }
        }
        if self.mesh.cells < 2 || self.mesh.cells_y == Some(0) || self.mesh.cells_y == Some(1) {
            return Err(ConfigError::invalid("mesh.cells", "at least two cells per direction are needed"));
        }
        if !(0.0..0.5).contains(&self.mesh.jitter) {
            return Err(ConfigError::invalid("mesh.jitter", format!("{} is outside [0, 0.5)", self.mesh.jitter)));
        }
        if let (Some(lo), Some(hi)) = (self.mesh.lower, self.mesh.upper) {
            if hi[0] <= lo[0] || (preset.dim == 2 && hi[1] <= lo[1]) {
                return Err(ConfigError::invalid("mesh.upper", "upper corner must exceed the lower corner"));
            }
        }
        match (self.discretization, self.mesh.elements) {
            (DiscretizationKind::Fv, Some(ElementChoice::Triangles)) => {
                return Err(ConfigError::invalid("mesh.elements", "finite volumes need quads"));
            }
            (DiscretizationKind::CgP1, Some(ElementChoice::Quads)) => {
                return Err(ConfigError::invalid("mesh.elements", "continuous P1 needs triangles"));
            }
            _ => {}
        }
        self.high_order.validate().map_err(|m| ConfigError::invalid("high_order", m))?;
        self.limiter.validate().map_err(|m| ConfigError::invalid("limiter", m))?;
        if self.output.formats.is_empty() {
            return Err(ConfigError::invalid("output.formats", "at least one format is needed"));
        }
        Ok(())
    }
}
