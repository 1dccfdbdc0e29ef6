use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use solvq_core::{CoefficientPair, CoefficientSpec, ScanPolicy, TOL_CRITERIA, TOL_GREEN};

use crate::error::CliError;

/// Everything a run needs besides the subcommand flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub coefficients: CoefficientSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub grid: GridPolicy,
    /// Default output file; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub criteria: f64,
    pub green: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            criteria: TOL_CRITERIA,
            green: TOL_GREEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    pub x_max: f64,
    pub samples_per_doubling: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            x_max: 1024.0,
            samples_per_doubling: 8,
        }
    }
}

impl RunConfig {
    pub fn new(coefficients: CoefficientSpec) -> Self {
        RunConfig {
            coefficients,
            tolerances: Tolerances::default(),
            grid: GridPolicy::default(),
            out: None,
            seed: 0,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = self.tolerances;
        if !(t.criteria > 0.0) || !(t.green > 0.0) {
            return Err(CliError::Config(format!("tolerances must be positive, got {t:?}")));
        }
        if !(self.grid.x_max >= 8.0) || !self.grid.x_max.is_finite() {
            return Err(CliError::Config(format!(
                "grid.x_max must be at least 8, got {}",
                self.grid.x_max
            )));
        }
        if self.grid.samples_per_doubling == 0 {
            return Err(CliError::Config("grid.samples_per_doubling must be positive".into()));
        }
        Ok(())
    }

    pub fn pair(&self) -> Result<CoefficientPair, CliError> {
        Ok(self.coefficients.build()?)
    }

    pub fn scan_policy(&self) -> ScanPolicy {
        ScanPolicy {
            x_max: self.grid.x_max,
            samples_per_doubling: self.grid.samples_per_doubling,
            tol: self.tolerances.criteria,
            ..ScanPolicy::default()
        }
    }
}
