//! Run configuration: a single JSON document, validated up front.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use weylrat::{GridSpec, PoleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Direct,
    Inverse,
    Roundtrip,
    WeylSet,
    Sg,
    Selftest,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Direct => "direct",
            Mode::Inverse => "inverse",
            Mode::Roundtrip => "roundtrip",
            Mode::WeylSet => "weyl-set",
            Mode::Sg => "sg",
            Mode::Selftest => "selftest",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleConfig {
    pub d: f64,
    pub b: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub l: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { l: 1.0, n: 256 }
    }
}

/// Sampling line μ = ζ + iη with `zeta_count` midpoints on [−zeta_max, zeta_max].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub eta: f64,
    pub zeta_max: f64,
    pub zeta_count: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            eta: -4.0,
            zeta_max: 640.0,
            zeta_count: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative residual of the operator identity.
    pub identity: f64,
    /// Projector error / Weyl mismatch / cos ω error of a reconstruction.
    pub roundtrip: f64,
    /// Substep-doubling change of the fundamental solution.
    pub ode: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-3,
            roundtrip: 5e-2,
            ode: 1e-2,
        }
    }
}

/// Built-in ground-truth potentials on the two-pole structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    #[default]
    Smooth,
    /// β_2(0) = (0, 1): needs the Weyl-set path.
    WeylSet,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Potential CSV (direct, roundtrip), Weyl CSV (inverse) or boundary CSV (sg).
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SgSolutionConfig {
    Kink { velocity: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgConfig {
    /// Source of boundary data when no input file is given.
    pub solution: SgSolutionConfig,
    /// Half-width T of the boundary window; default 20/(|η| − M̂/4).
    pub horizon: Option<f64>,
    pub steps_per_unit: usize,
    /// Must be multiples of 1/steps_per_unit inside the window.
    pub times: Vec<f64>,
    /// Allowed change of ψ̃(0, μ) between horizons T/2 and T.
    pub horizon_tol: f64,
}

impl Default for SgConfig {
    fn default() -> Self {
        SgConfig {
            solution: SgSolutionConfig::Kink { velocity: 0.5 },
            horizon: None,
            steps_per_unit: 256,
            times: vec![0.0],
            horizon_tol: 1e-6,
        }
    }
}

fn default_poles() -> Vec<PoleConfig> {
    vec![PoleConfig { d: 1.0, b: 1 }, PoleConfig { d: -1.0, b: 1 }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default = "default_poles")]
    pub poles: Vec<PoleConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub potential: Preset,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub sg: SgConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

/// Invalid configuration, with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            ConfigError::new(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    /// Reads a config file; relative input paths are taken relative to it.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_json(&text)?;
        if let (Some(input), Some(dir)) = (&cfg.paths.input, path.parent()) {
            if input.is_relative() {
                cfg.paths.input = Some(dir.join(input));
            }
        }
        Ok(cfg)
    }

    pub fn pole_set(&self) -> Result<PoleSet, ConfigError> {
        PoleSet::new(
            self.poles.iter().map(|p| p.d).collect(),
            self.poles.iter().map(|p| p.b).collect(),
        )
        .map_err(|e| ConfigError::new("poles", e.to_string()))
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        positive("grid.l", self.grid.l)?;
        GridSpec::new(self.grid.l, self.grid.n).map_err(|e| ConfigError::new("grid.n", e.to_string()))
    }

    /// Checks everything that does not need the numerics; `mode` is the subcommand.
    pub fn validate(&self, mode: Mode) -> Result<(), ConfigError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(ConfigError::new(
                    "mode",
                    format!("config is for '{m}' but the subcommand is '{mode}'"),
                ));
            }
        }
        self.pole_set()?;
        self.grid_spec()?;
        let s = &self.spectral;
        if !(s.eta.is_finite() && s.eta < 0.0) {
            return Err(ConfigError::new("spectral.eta", "must be negative"));
        }
        positive("spectral.zeta_max", s.zeta_max)?;
        if s.zeta_count < 2 {
            return Err(ConfigError::new("spectral.zeta_count", "needs at least 2 samples"));
        }
        positive("tolerances.identity", self.tolerances.identity)?;
        positive("tolerances.roundtrip", self.tolerances.roundtrip)?;
        positive("tolerances.ode", self.tolerances.ode)?;
        if let Some(input) = &self.paths.input {
            if !input.is_file() {
                return Err(ConfigError::new(
                    "paths.input",
                    format!("{} is not a readable file", input.display()),
                ));
            }
        }
        if mode == Mode::Inverse && self.paths.input.is_none() {
            return Err(ConfigError::new("paths.input", "inverse mode needs a Weyl CSV"));
        }
        if mode == Mode::Sg {
            self.validate_sg()?;
        }
        Ok(())
    }

    fn validate_sg(&self) -> Result<(), ConfigError> {
        if self.pole_set()? != PoleSet::sine_gordon_x() {
            return Err(ConfigError::new(
                "poles",
                "sg mode uses the fixed structure d = (1, -1), b = (1, 1)",
            ));
        }
        let sg = &self.sg;
        match sg.solution {
            SgSolutionConfig::Kink { velocity } => {
                if !(velocity.abs() < 1.0) {
                    return Err(ConfigError::new("sg.solution.velocity", "needs |v| < 1"));
                }
            }
            SgSolutionConfig::Constant { value } => {
                if !(value.is_finite() && value.sin().abs() < 1e-12) {
                    return Err(ConfigError::new(
                        "sg.solution.value",
                        "a constant solution needs sin(value) = 0",
                    ));
                }
            }
        }
        if let Some(h) = sg.horizon {
            positive("sg.horizon", h)?;
        }
        if sg.steps_per_unit < 4 {
            return Err(ConfigError::new("sg.steps_per_unit", "needs at least 4"));
        }
        positive("sg.horizon_tol", sg.horizon_tol)?;
        if sg.times.is_empty() {
            return Err(ConfigError::new("sg.times", "is empty"));
        }
        for (i, t) in sg.times.iter().enumerate() {
            let j = t * sg.steps_per_unit as f64;
            if !t.is_finite() || (j - j.round()).abs() > 1e-9 {
                return Err(ConfigError::new(
                    format!("sg.times[{i}]"),
                    format!("{t} is not a multiple of 1/{}", sg.steps_per_unit),
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything that determines the output
    /// (the output directory excluded), plus the input file contents.
    pub fn hash(&self) -> Result<String, ConfigError> {
        let mut canonical = self.clone();
        canonical.paths = Paths::default();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&canonical).expect("config serializes"));
        if let Some(input) = &self.paths.input {
            let bytes = std::fs::read(input)
                .map_err(|e| ConfigError::new("paths.input", format!("{}: {e}", input.display())))?;
            h.update(&bytes);
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg.grid.n, 256);
        assert_eq!(cfg.spectral.zeta_count, 1024);
        assert!(cfg.validate(Mode::Roundtrip).is_ok());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = RunConfig::from_json(r#"{"grid": {"l": 1, "n": 8, "h": 2}}"#).unwrap_err();
        assert!(err.message.contains("unknown field"), "{err}");
    }

    #[test]
    fn errors_name_the_field() {
        let mut cfg = RunConfig::default();
        cfg.tolerances.ode = -1.0;
        assert_eq!(cfg.validate(Mode::Direct).unwrap_err().field, "tolerances.ode");
        let mut cfg = RunConfig::default();
        cfg.poles[1].b = 2;
        assert_eq!(cfg.validate(Mode::Direct).unwrap_err().field, "poles");
        let mut cfg = RunConfig::default();
        cfg.mode = Some(Mode::Sg);
        assert_eq!(cfg.validate(Mode::Direct).unwrap_err().field, "mode");
        let cfg = RunConfig::default();
        assert_eq!(cfg.validate(Mode::Inverse).unwrap_err().field, "paths.input");
    }

    #[test]
    fn sg_times_must_sit_on_the_time_grid() {
        let mut cfg = RunConfig::default();
        cfg.sg.times = vec![0.0, 0.3];
        cfg.sg.steps_per_unit = 4;
        assert_eq!(cfg.validate(Mode::Sg).unwrap_err().field, "sg.times[1]");
        cfg.sg.times = vec![0.25, -0.5];
        assert!(cfg.validate(Mode::Sg).is_ok());
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.paths.output = Some("elsewhere".into());
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.grid.n = 128;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }
}
