//! One-dimensional preprocessing for FTIR and Raman spectra and the
//! composition of a full FTIR pipeline.

mod baseline;
mod filters;
mod ops;

use serde::{Deserialize, Serialize};

use crate::data::Spectrum1D;
use crate::error::Result;

pub use baseline::{
    als_fit, baseline_als, baseline_polynomial, modpoly_baseline, AlsFit, AlsParams, Pentadiagonal,
    PolyBaselineParams,
};
pub use filters::{moving_average, savitzky_golay, SavGolParams, UNIFORM_STEP_TOL};
pub use ops::{
    average_replicates, derivative_block, normalize, select_region, snv, DerivativeMode, NormMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicateMode {
    Average,
    KeepAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "full_650_4000")]
    Full,
    #[serde(rename = "fingerprint_900_1800")]
    Fingerprint,
    #[serde(rename = "amide_1500_1700")]
    Amide,
    #[serde(rename = "lipid_2800_3000")]
    Lipid,
    #[serde(rename = "nucleic_1000_1250")]
    Nucleic,
}

impl Region {
    /// Inclusive window in cm⁻¹.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Region::Full => (650.0, 4000.0),
            Region::Fingerprint => (900.0, 1800.0),
            Region::Amide => (1500.0, 1700.0),
            Region::Lipid => (2800.0, 3000.0),
            Region::Nucleic => (1000.0, 1250.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    None,
    Polynomial,
    Als,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scatter {
    None,
    Snv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    SavitzkyGolay,
    MovingAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivative {
    None,
    First,
    Second,
    FirstAndSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    Area,
    L2,
    Max,
}

/// One point of the FTIR preprocessing space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub replicate_mode: ReplicateMode,
    pub region: Region,
    pub baseline: Baseline,
    pub scatter: Scatter,
    pub smoothing: Smoothing,
    pub derivative: Derivative,
    pub normalization: Normalization,
}

impl PipelineConfig {
    /// Every stage disabled, full region, replicates averaged.
    pub const IDENTITY: PipelineConfig = PipelineConfig {
        replicate_mode: ReplicateMode::Average,
        region: Region::Full,
        baseline: Baseline::None,
        scatter: Scatter::None,
        smoothing: Smoothing::None,
        derivative: Derivative::None,
        normalization: Normalization::None,
    };

    /// Replicate-level, full region, polynomial baseline, SNV, SG smoothing,
    /// second derivative, no normalization.
    pub const SELECTED_FTIR: PipelineConfig = PipelineConfig {
        replicate_mode: ReplicateMode::KeepAll,
        region: Region::Full,
        baseline: Baseline::Polynomial,
        scatter: Scatter::Snv,
        smoothing: Smoothing::SavitzkyGolay,
        derivative: Derivative::Second,
        normalization: Normalization::None,
    };
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::SELECTED_FTIR
    }
}

/// Numerical settings of the individual operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorParams {
    pub poly: PolyBaselineParams,
    pub als: AlsParams,
    pub smoothing: SavGolParams,
    pub derivative: SavGolParams,
    pub moving_average_window: usize,
}

impl Default for OperatorParams {
    fn default() -> Self {
        Self {
            poly: PolyBaselineParams::default(),
            als: AlsParams::default(),
            smoothing: SavGolParams::default(),
            derivative: SavGolParams::default(),
            moving_average_window: 9,
        }
    }
}

/// Runs `cfg` over the replicates of one patient: replicates, region,
/// baseline, scatter, smoothing, derivative, normalization. Returns one
/// vector per replicate (`KeepAll`) or a single averaged vector.
pub fn apply_pipeline(cfg: &PipelineConfig, records: &[&Spectrum1D]) -> Result<Vec<Vec<f64>>> {
    apply_pipeline_with(cfg, &OperatorParams::default(), records)
}

pub fn apply_pipeline_with(
    cfg: &PipelineConfig,
    params: &OperatorParams,
    records: &[&Spectrum1D],
) -> Result<Vec<Vec<f64>>> {
    match cfg.replicate_mode {
        ReplicateMode::Average => Ok(vec![process_one(
            cfg,
            params,
            &average_replicates(records)?,
        )?]),
        ReplicateMode::KeepAll => {
            if records.is_empty() {
                return Err(crate::error::Error::Empty("no spectra for patient".into()));
            }
            records
                .iter()
                .map(|s| process_one(cfg, params, s))
                .collect()
        }
    }
}

fn process_one(cfg: &PipelineConfig, params: &OperatorParams, s: &Spectrum1D) -> Result<Vec<f64>> {
    let (lo, hi) = cfg.region.bounds();
    let mut s = select_region(s, lo, hi)?;
    s = match cfg.baseline {
        Baseline::None => s,
        Baseline::Polynomial => baseline_polynomial(&s, params.poly)?,
        Baseline::Als => baseline_als(&s, params.als)?,
    };
    if cfg.scatter == Scatter::Snv {
        s = snv(&s)?;
    }
    s = match cfg.smoothing {
        Smoothing::None => s,
        Smoothing::SavitzkyGolay => {
            savitzky_golay(&s, params.smoothing.window, params.smoothing.polyorder, 0)?
        }
        Smoothing::MovingAverage => moving_average(&s, params.moving_average_window)?,
    };
    let (features, dx) = match cfg.derivative {
        Derivative::None => (s.intensity().to_vec(), s.axis().mean_step()),
        Derivative::First => (
            derivative_block(&s, DerivativeMode::First, params.derivative)?,
            s.axis().mean_step(),
        ),
        Derivative::Second => (
            derivative_block(&s, DerivativeMode::Second, params.derivative)?,
            s.axis().mean_step(),
        ),
        Derivative::FirstAndSecond => (
            derivative_block(&s, DerivativeMode::FirstAndSecond, params.derivative)?,
            1.0,
        ),
    };
    match cfg.normalization {
        Normalization::None => Ok(features),
        Normalization::Area => normalize(&features, NormMode::Area, dx),
        Normalization::L2 => normalize(&features, NormMode::L2, dx),
        Normalization::Max => normalize(&features, NormMode::Max, dx),
    }
}

/// Raman shift window retained before baseline correction.
pub const RAMAN_WINDOW: (f64, f64) = (600.0, 1800.0);

/// Fixed Raman chain: 600–1800 cm⁻¹ window, ALS baseline, SNV.
pub fn raman_pipeline(s: &Spectrum1D) -> Result<Vec<f64>> {
    raman_pipeline_with(s, AlsParams::default())
}

pub fn raman_pipeline_with(s: &Spectrum1D, als: AlsParams) -> Result<Vec<f64>> {
    let s = select_region(s, RAMAN_WINDOW.0, RAMAN_WINDOW.1)?;
    let s = baseline_als(&s, als)?;
    Ok(snv(&s)?.intensity().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AxisUnit, SpectralAxis};
    use crate::error::Error;

    fn ftir_like(seed: f64) -> Spectrum1D {
        let axis = SpectralAxis::uniform(650.0, 4.0, 838, AxisUnit::Wavenumber).unwrap();
        let y = axis
            .values()
            .iter()
            .map(|&x| {
                0.1 + 1e-5 * x
                    + (0.8 + seed) * (-((x - 1650.0) / 20.0).powi(2)).exp()
                    + 0.5 * (-((x - 2920.0) / 15.0).powi(2)).exp()
                    + 0.01 * (x / 37.0 + seed).sin()
            })
            .collect();
        Spectrum1D::new(axis, y).unwrap()
    }

    #[test]
    fn identity_config_returns_input() {
        let s = ftir_like(0.0);
        let out = apply_pipeline(&PipelineConfig::IDENTITY, &[&s]).unwrap();
        assert_eq!(out, vec![s.intensity().to_vec()]);
    }

    #[test]
    fn selected_ftir_pipeline_runs_per_replicate() {
        let reps = [ftir_like(0.0), ftir_like(0.1), ftir_like(0.2)];
        let refs: Vec<&Spectrum1D> = reps.iter().collect();
        let out = apply_pipeline(&PipelineConfig::SELECTED_FTIR, &refs).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out
            .iter()
            .all(|v| v.len() == 838 && v.iter().all(|x| x.is_finite())));
    }

    #[test]
    fn averaging_yields_one_vector() {
        let reps = [ftir_like(0.0), ftir_like(0.1)];
        let refs: Vec<&Spectrum1D> = reps.iter().collect();
        let cfg = PipelineConfig {
            replicate_mode: ReplicateMode::Average,
            ..PipelineConfig::SELECTED_FTIR
        };
        assert_eq!(apply_pipeline(&cfg, &refs).unwrap().len(), 1);
    }

    #[test]
    fn first_and_second_doubles_region_length() {
        let s = ftir_like(0.0);
        let cfg = PipelineConfig {
            region: Region::Fingerprint,
            derivative: Derivative::FirstAndSecond,
            ..PipelineConfig::IDENTITY
        };
        let out = apply_pipeline(&cfg, &[&s]).unwrap();
        let region_len = select_region(&s, 900.0, 1800.0).unwrap().len();
        assert_eq!(out[0].len(), 2 * region_len);
    }

    #[test]
    fn pipeline_is_pure() {
        let s = ftir_like(0.3);
        let cfg = PipelineConfig {
            baseline: Baseline::Als,
            normalization: Normalization::Area,
            ..PipelineConfig::SELECTED_FTIR
        };
        let a = apply_pipeline(&cfg, &[&s]).unwrap();
        let b = apply_pipeline(&cfg, &[&s]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_json_uses_named_fields() {
        let json = serde_json::to_value(PipelineConfig::SELECTED_FTIR).unwrap();
        assert_eq!(json["replicate_mode"], "keep_all");
        assert_eq!(json["region"], "full_650_4000");
        assert_eq!(json["derivative"], "second");
        let back: PipelineConfig = serde_json::from_value(json).unwrap();
        assert_eq!(back, PipelineConfig::SELECTED_FTIR);
    }

    fn raman_axis() -> SpectralAxis {
        SpectralAxis::uniform(30.0, 2.0, 1665, AxisUnit::Wavenumber).unwrap()
    }

    #[test]
    fn raman_output_is_standardized() {
        let axis = raman_axis();
        let y: Vec<f64> = axis
            .values()
            .iter()
            .map(|&x| 500.0 * (-x / 900.0).exp() + 20.0 * (-((x - 1004.0) / 6.0).powi(2)).exp())
            .collect();
        let out = raman_pipeline(&Spectrum1D::new(axis, y).unwrap()).unwrap();
        assert_eq!(out.len(), 601);
        let n = out.len() as f64;
        let m = out.iter().sum::<f64>() / n;
        let sd = (out.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        assert!(m.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_raman_fails_in_snv() {
        let axis = raman_axis();
        let n = axis.len();
        let s = Spectrum1D::new(axis, vec![7.0; n]).unwrap();
        assert!(matches!(raman_pipeline(&s), Err(Error::ZeroVariance(_))));
    }
}
