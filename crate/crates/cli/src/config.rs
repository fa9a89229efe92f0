//! The experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use drough::scale::SpectralVector;
use drough::solver::{DriverSource, ModelSpec, Perturbation, SolverOptions};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelSpec,
    pub driver: DriverConfig,
    pub initial: InitialData,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityConfig>,
    #[serde(default)]
    pub validate: ValidateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverConfig {
    pub source: DriverSource,
    pub seed: u64,
    /// cells on `[0, T]`
    pub n: usize,
    /// Read the driver from a DRPD1 file instead of sampling it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

/// `φ_t = φ_0 + Σ_i c_i (X^i_t - X^i_0)` on `[-r, 0]`, each vector given by
/// `(cos, sin)` coefficients for `k = 0, 1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub max_mode: usize,
    pub value: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slope: Vec<Vec<(f64, f64)>>,
}

impl InitialData {
    pub fn value(&self) -> SpectralVector {
        SpectralVector::from_trig(self.max_mode, &self.value)
    }

    pub fn slope(&self) -> Vec<SpectralVector> {
        self.slope.iter().map(|c| SpectralVector::from_trig(self.max_mode, c)).collect()
    }
}

/// Seeds are `driver.seed, driver.seed + 1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub r_list: Vec<f64>,
    pub n_seeds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub perturbation: PerturbationConfig,
    pub epsilons: Vec<f64>,
}

/// Like [`Perturbation`], with the direction in `(cos, sin)` coefficients
/// on the modes of the initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationConfig {
    InitialData { direction: Vec<(f64, f64)> },
    Driver { frequency: f64 },
}

impl PerturbationConfig {
    pub fn resolve(&self, max_mode: usize) -> Perturbation {
        match self {
            PerturbationConfig::InitialData { direction } => {
                Perturbation::InitialData { direction: SpectralVector::from_trig(max_mode, direction) }
            }
            PerturbationConfig::Driver { frequency } => Perturbation::Driver { frequency: *frequency },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    /// Adds `amount` to entry `(i, j)` of one cell area before the checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject_area_defect: Option<AreaDefect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaDefect {
    pub cell: usize,
    pub i: usize,
    pub j: usize,
    pub amount: f64,
}

pub const PRESETS: &[(&str, &str)] = &[
    ("heat_delay", include_str!("../presets/heat_delay.json")),
    ("heat_delay_brownian", include_str!("../presets/heat_delay_brownian.json")),
    ("delay_to_zero", include_str!("../presets/delay_to_zero.json")),
    ("decay_ode", include_str!("../presets/decay_ode.json")),
];

pub const DEFAULT_PRESET: &str = "heat_delay";

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("bad config: {e}")))
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::Usage(format!("unknown preset {name:?}, available: {}", names.join(", ")))
        })?;
        Self::parse(text)
    }

    /// A file path, or `preset:<name>` for a shipped preset.
    pub fn load(spec: &str) -> Result<Self, CliError> {
        if let Some(name) = spec.strip_prefix("preset:") {
            return Self::preset(name);
        }
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    /// SHA-256 of the compact serialization, in hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configs always serialize");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
