//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Modality, Scenario};
use crate::error::{Error, Result};
use crate::eval::CvSettings;
use crate::gbdt::GbdtParams;
use crate::prep1d::PipelineConfig;

/// The seven modality subsets, unimodal first.
pub const CONFIGURATIONS: [&[Modality]; 7] = [
    &[Modality::Ftir],
    &[Modality::Raman],
    &[Modality::Eem],
    &[Modality::Ftir, Modality::Raman],
    &[Modality::Ftir, Modality::Eem],
    &[Modality::Raman, Modality::Eem],
    &[Modality::Ftir, Modality::Raman, Modality::Eem],
];

/// `ftir_raman_eem` style name of a modality subset.
pub fn configuration_name(subset: &[Modality]) -> String {
    let mut s = subset.to_vec();
    s.sort();
    s.iter()
        .map(|m| m.name().to_lowercase())
        .collect::<Vec<_>>()
        .join("_")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { k: 10, seed: 42 }
    }
}

fn default_fractions() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8, 1.0]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Manifest path, relative paths resolved against the config file.
    pub dataset: PathBuf,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub modalities: Vec<Modality>,
    /// Run all seven configurations in both scenarios.
    #[serde(default)]
    pub suite: bool,
    #[serde(default)]
    pub ftir: PipelineConfig,
    #[serde(default)]
    pub gbdt: GbdtParams,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default = "default_fractions")]
    pub learning_curve: Vec<f64>,
    #[serde(default = "default_true")]
    pub pca: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// One scenario x modality-subset cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub scenario: Scenario,
    pub modalities: Vec<Modality>,
}

impl Cell {
    pub fn name(&self) -> String {
        format!(
            "{}_{}",
            self.scenario.name(),
            configuration_name(&self.modalities)
        )
    }
}

impl ExperimentConfig {
    /// Reads and validates a config; `dataset` becomes absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if cfg.dataset.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.dataset = base.join(&cfg.dataset);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cv.k < 2 {
            return Err(Error::InvalidParameter(format!(
                "cv.k must be >= 2, got {}",
                self.cv.k
            )));
        }
        if !self.suite {
            if self.modalities.is_empty() {
                return Err(Error::InvalidParameter(
                    "modalities must not be empty".into(),
                ));
            }
            if self.scenario.is_none() {
                return Err(Error::InvalidParameter(
                    "scenario is required unless suite is set".into(),
                ));
            }
        }
        self.gbdt.validate()
    }

    pub fn cells(&self) -> Vec<Cell> {
        if self.suite {
            Scenario::ALL
                .iter()
                .flat_map(|&scenario| {
                    CONFIGURATIONS.iter().map(move |m| Cell {
                        scenario,
                        modalities: m.to_vec(),
                    })
                })
                .collect()
        } else {
            let mut modalities = self.modalities.clone();
            modalities.sort();
            modalities.dedup();
            vec![Cell {
                scenario: self.scenario.expect("validated"),
                modalities,
            }]
        }
    }

    /// Modalities any cell needs.
    pub fn required_modalities(&self) -> Vec<Modality> {
        let mut all: Vec<Modality> = self
            .cells()
            .into_iter()
            .flat_map(|c| c.modalities)
            .collect();
        all.sort();
        all.dedup();
        all
    }

    pub fn cv_settings(&self, threshold: f64) -> CvSettings {
        CvSettings {
            k: self.cv.k,
            seed: self.cv.seed,
            threshold,
        }
    }
}
