//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use polysplit_core::sim::{Scenario, SimDesign, SnrCentering, Sparsity};
use polysplit_core::{GlmFamily, TdcConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Test,
    Simulate,
    Calibrate,
    Power,
    Stability,
    Snr,
}

/// Grid for the size study; each cell uses every variant (J₂ = J).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeGrid {
    pub rhos: Vec<f64>,
    pub n_variants: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerGrid {
    pub effect_sizes: Vec<f64>,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySettings {
    /// Number of repetitions K of each arm.
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrSettings {
    pub mc_reps: usize,
    #[serde(default)]
    pub centering: SnrCentering,
}

/// Input files for `test`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFiles {
    pub genotypes: Option<PathBuf>,
    pub phenotype: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    /// Center and scale genotype columns before testing.
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn yes() -> bool {
    true
}

impl Default for DataFiles {
    fn default() -> Self {
        DataFiles { genotypes: None, phenotype: None, covariates: None, standardize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub mode: Mode,
    #[serde(default)]
    pub design: Option<SimDesign>,
    #[serde(default)]
    pub test: TdcConfig,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_alphas")]
    pub alpha_levels: Vec<f64>,
    #[serde(default)]
    pub master_seed: u64,
    /// 0 means one worker per available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub data: DataFiles,
    #[serde(default)]
    pub size_grid: Option<SizeGrid>,
    #[serde(default)]
    pub power_grid: Option<PowerGrid>,
    #[serde(default)]
    pub stability: Option<StabilitySettings>,
    #[serde(default)]
    pub snr: Option<SnrSettings>,
}

fn default_replicates() -> usize {
    10_000
}

fn default_alphas() -> Vec<f64> {
    vec![0.05, 0.01]
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            mode,
            design: None,
            test: TdcConfig::default(),
            replicates: default_replicates(),
            alpha_levels: default_alphas(),
            master_seed: 0,
            workers: 0,
            output: None,
            data: DataFiles::default(),
            size_grid: None,
            power_grid: None,
            stability: None,
            snr: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = crate::io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Input(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if let Some(a) = self.alpha_levels.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
            return bad(format!("alpha level {a} outside (0, 1]"));
        }
        self.test.validate()?;
        if let Some(d) = &self.design {
            d.validate()?;
        }
        let needs_design = matches!(self.mode, Mode::Simulate | Mode::Power | Mode::Stability | Mode::Snr);
        if needs_design && self.design.is_none() {
            return bad(format!("mode {:?} needs a simulation design", self.mode));
        }
        match self.mode {
            Mode::Power if self.power_grid.is_none() => bad("power mode needs power_grid".into()),
            Mode::Stability if self.stability.is_none() => bad("stability mode needs stability settings".into()),
            Mode::Snr if self.snr.is_none() => bad("snr mode needs snr settings".into()),
            _ => Ok(()),
        }
    }

    /// Design used for the size study cells, or a logistic null default.
    pub fn design_or_default(&self) -> SimDesign {
        self.design.clone().unwrap_or(SimDesign {
            n_total: 200,
            n_variants: 10,
            rho: 0.5,
            sparsity: Sparsity::Count(0),
            effect_size: 0.0,
            family: GlmFamily::BinomialLogit,
            intercept: 1.0,
            scenario: Scenario::AllVariants,
            seed: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut cfg = ExperimentConfig::new(Mode::Calibrate);
        cfg.design = Some(ExperimentConfig::new(Mode::Calibrate).design_or_default());
        cfg.size_grid = Some(SizeGrid { rhos: vec![0.2, 0.5], n_variants: vec![10, 50] });
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        back.validate().unwrap();
    }

    #[test]
    fn minimal_document_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"schema_version": 1, "mode": "test"}"#).unwrap();
        assert_eq!(cfg.test, TdcConfig::default());
        assert_eq!(cfg.alpha_levels, [0.05, 0.01]);
        assert!(cfg.data.standardize);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_documents() {
        let mut cfg = ExperimentConfig::new(Mode::Test);
        cfg.alpha_levels = vec![0.0];
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::new(Mode::Power);
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"schema_version": 1, "mode": "test", "bogus": 1}"#).is_err());
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"schema_version": 2, "mode": "test"}"#).unwrap();
        assert!(cfg.validate().is_err());
    }
}
