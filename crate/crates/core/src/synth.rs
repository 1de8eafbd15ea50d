//! Synthetic cohorts with known ground truth: Gaussian bands on smooth
//! baselines for FTIR and Raman, 2-D Gaussian fluorophores plus Rayleigh
//! ridges for EEM.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{
    write_dataset, AxisUnit, EEMatrix, Group, Modality, Payload, SampleRecord, SampleTable,
    SpectralAxis, Spectrum1D,
};
use crate::error::{Error, Result};

/// Which patients have which modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Availability {
    /// Every patient in every modality.
    Complete,
    /// Published cohort shape: FTIR for all 300 patients, Raman for 272 and
    /// EEM for 276, with trimodal overlaps of 166 (breast) and 165 (colon).
    /// Requires 100 patients per group.
    Table1,
}

/// Where the class effect lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectMode {
    /// Disease bands shift in every modality.
    Shared,
    /// Each cancer patient carries the effect in exactly one of FTIR or EEM
    /// (chosen at random), never in Raman.
    Complementary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl AxisSpec {
    fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step).round() as usize + 1
    }

    fn build(&self, unit: AxisUnit) -> Result<SpectralAxis> {
        if !(self.step > 0.0 && self.hi > self.lo) {
            return Err(Error::InvalidParameter(format!(
                "axis needs lo < hi and step > 0, got {self:?}"
            )));
        }
        SpectralAxis::uniform(self.lo, self.step, self.len(), unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum1DSpec {
    pub axis: AxisSpec,
    pub peaks: Vec<Peak>,
    /// Indices into `peaks` whose amplitude carries the class effect.
    pub disease_peaks: Vec<usize>,
    /// Polynomial baseline coefficients in the axis mapped to [-1, 1].
    pub baseline_poly: Vec<f64>,
    /// Exponential fluorescence background `a * exp(-(x - lo) / decay)`.
    pub ramp_amplitude: f64,
    pub ramp_decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fluorophore {
    pub ex: f64,
    pub em: f64,
    pub width_ex: f64,
    pub width_em: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EemSpec {
    pub ex: AxisSpec,
    pub em: AxisSpec,
    pub fluorophores: Vec<Fluorophore>,
    pub disease_fluorophores: Vec<usize>,
    pub rayleigh_amplitude: f64,
    /// Ridges are planted only where `|em - ex|` (or `|em - 2 ex|`) is at
    /// most this many nanometres.
    pub rayleigh_support: f64,
    pub blank_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_breast: usize,
    pub n_colon: usize,
    pub n_control: usize,
    pub availability: Availability,
    pub replicate_count: u32,
    pub noise_sigma: f64,
    /// Relative amplitude increase of disease bands in cancer patients.
    pub effect_size: f64,
    pub effect_mode: EffectMode,
    /// Relative between-patient spread of every band amplitude.
    pub patient_sd: f64,
    /// Relative between-replicate spread of FTIR band amplitudes.
    pub replicate_jitter: f64,
    /// Relative between-patient spread of the baseline.
    pub baseline_jitter: f64,
    pub ftir: Spectrum1DSpec,
    pub raman: Spectrum1DSpec,
    pub eem: EemSpec,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let p = |center, width, amplitude| Peak {
            center,
            width,
            amplitude,
        };
        let f = |ex, em, width_ex, width_em, amplitude| Fluorophore {
            ex,
            em,
            width_ex,
            width_em,
            amplitude,
        };
        Self {
            seed: 0,
            n_breast: 100,
            n_colon: 100,
            n_control: 100,
            availability: Availability::Table1,
            replicate_count: 3,
            noise_sigma: 0.01,
            effect_size: 0.5,
            effect_mode: EffectMode::Shared,
            patient_sd: 0.15,
            replicate_jitter: 0.02,
            baseline_jitter: 0.3,
            ftir: Spectrum1DSpec {
                axis: AxisSpec {
                    lo: 650.0,
                    hi: 4000.0,
                    step: 4.0,
                },
                peaks: vec![
                    p(1650.0, 20.0, 1.0),
                    p(1545.0, 18.0, 0.6),
                    p(1240.0, 20.0, 0.3),
                    p(1080.0, 20.0, 0.35),
                    p(1740.0, 12.0, 0.15),
                    p(2925.0, 20.0, 0.4),
                    p(2855.0, 15.0, 0.25),
                    p(3300.0, 80.0, 0.5),
                ],
                disease_peaks: vec![3, 4, 5],
                baseline_poly: vec![0.1, 0.05, 0.02],
                ramp_amplitude: 0.0,
                ramp_decay: 1000.0,
            },
            raman: Spectrum1DSpec {
                axis: AxisSpec {
                    lo: 30.0,
                    hi: 3358.0,
                    step: 4.0,
                },
                peaks: vec![
                    p(1004.0, 5.0, 1.0),
                    p(1450.0, 12.0, 0.8),
                    p(1655.0, 15.0, 0.7),
                    p(1250.0, 12.0, 0.4),
                    p(855.0, 8.0, 0.3),
                    p(1130.0, 8.0, 0.3),
                ],
                disease_peaks: vec![0, 4],
                baseline_poly: vec![0.2, 0.1],
                ramp_amplitude: 5.0,
                ramp_decay: 600.0,
            },
            eem: EemSpec {
                ex: AxisSpec {
                    lo: 250.0,
                    hi: 520.0,
                    step: 5.0,
                },
                em: AxisSpec {
                    lo: 270.0,
                    hi: 750.0,
                    step: 5.0,
                },
                fluorophores: vec![
                    f(280.0, 350.0, 15.0, 25.0, 1.0),
                    f(340.0, 460.0, 20.0, 35.0, 0.5),
                    f(450.0, 525.0, 20.0, 30.0, 0.3),
                    f(405.0, 630.0, 10.0, 15.0, 0.2),
                ],
                disease_fluorophores: vec![1, 3],
                rayleigh_amplitude: 3.0,
                rayleigh_support: 15.0,
                blank_level: 0.05,
            },
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.noise_sigma >= 0.0) {
            return bad(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            ));
        }
        if !(self.effect_size >= 0.0) {
            return bad(format!(
                "effect size must be >= 0, got {}",
                self.effect_size
            ));
        }
        for (name, v) in [
            ("patient_sd", self.patient_sd),
            ("replicate_jitter", self.replicate_jitter),
            ("baseline_jitter", self.baseline_jitter),
        ] {
            if !(v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.replicate_count < 1 {
            return bad("replicate_count must be >= 1".into());
        }
        if self.availability == Availability::Table1
            && (self.n_breast, self.n_colon, self.n_control) != (100, 100, 100)
        {
            return bad("table1 availability requires 100 patients per group".into());
        }
        for (name, s) in [("FTIR", &self.ftir), ("Raman", &self.raman)] {
            s.axis.build(AxisUnit::Wavenumber)?;
            if s.peaks.iter().any(|p| !(p.width > 0.0)) {
                return bad(format!("{name} peak widths must be > 0"));
            }
            if s.disease_peaks.iter().any(|&i| i >= s.peaks.len()) {
                return bad(format!("{name} disease peak index out of range"));
            }
            if !(s.ramp_decay > 0.0) {
                return bad(format!("{name} ramp decay must be > 0"));
            }
        }
        self.eem.ex.build(AxisUnit::Wavelength)?;
        self.eem.em.build(AxisUnit::Wavelength)?;
        if self
            .eem
            .fluorophores
            .iter()
            .any(|f| !(f.width_ex > 0.0 && f.width_em > 0.0))
        {
            return bad("fluorophore widths must be > 0".into());
        }
        if self
            .eem
            .disease_fluorophores
            .iter()
            .any(|&i| i >= self.eem.fluorophores.len())
        {
            return bad("disease fluorophore index out of range".into());
        }
        if !(self.eem.rayleigh_support >= 0.0) {
            return bad("rayleigh support must be >= 0".into());
        }
        Ok(())
    }
}

/// One synthetic donor and the modalities measured for them.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPatient {
    pub id: String,
    pub group: Group,
    pub index: usize,
    pub modalities: Vec<Modality>,
}

const TABLE1_CONTROLS: [(usize, &[Modality]); 5] = [
    (69, &[Modality::Ftir, Modality::Raman, Modality::Eem]),
    (8, &[Modality::Ftir, Modality::Eem]),
    (23, &[Modality::Ftir]),
    (3, &[Modality::Raman, Modality::Eem]),
    (5, &[Modality::Raman]),
];

fn cancer_layout(group: Group) -> [(usize, &'static [Modality]); 4] {
    let (re, r_only, e_only) = match group {
        Group::Breast => (97, 1, 1),
        _ => (96, 1, 2),
    };
    [
        (re, &[Modality::Ftir, Modality::Raman, Modality::Eem]),
        (r_only, &[Modality::Ftir, Modality::Raman]),
        (e_only, &[Modality::Ftir, Modality::Eem]),
        (100 - re - r_only - e_only, &[Modality::Ftir]),
    ]
}

/// Donor list in id order.
pub fn patients(spec: &SynthSpec) -> Vec<SynthPatient> {
    let mut out = Vec::new();
    let mut push = |group: Group, prefix: &str, layout: &[(usize, &[Modality])]| {
        let mut k = 0;
        for (count, mods) in layout {
            for _ in 0..*count {
                k += 1;
                out.push(SynthPatient {
                    id: format!("{prefix}{k:03}"),
                    group,
                    index: 0,
                    modalities: mods.to_vec(),
                });
            }
        }
    };
    match spec.availability {
        Availability::Complete => {
            let all: &[Modality] = &Modality::ALL;
            push(Group::Breast, "B", &[(spec.n_breast, all)]);
            push(Group::Colon, "C", &[(spec.n_colon, all)]);
            push(Group::Control, "H", &[(spec.n_control, all)]);
        }
        Availability::Table1 => {
            push(Group::Breast, "B", &cancer_layout(Group::Breast));
            push(Group::Colon, "C", &cancer_layout(Group::Colon));
            push(Group::Control, "H", &TABLE1_CONTROLS);
        }
    }
    for (i, p) in out.iter_mut().enumerate() {
        p.index = i;
    }
    out
}

fn rng_for(seed: u64, patient: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((patient as u64) << 8) | stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Modality that carries the class effect for this donor.
fn effect_in(spec: &SynthSpec, p: &SynthPatient, modality: Modality) -> bool {
    if p.group == Group::Control {
        return false;
    }
    match spec.effect_mode {
        EffectMode::Shared => true,
        EffectMode::Complementary => {
            let ftir_carrier = rng_for(spec.seed, p.index, 0).random_bool(0.5);
            match modality {
                Modality::Ftir => ftir_carrier,
                Modality::Eem => !ftir_carrier,
                Modality::Raman => false,
            }
        }
    }
}

fn stream_of(m: Modality) -> u64 {
    match m {
        Modality::Ftir => 1,
        Modality::Raman => 2,
        Modality::Eem => 3,
    }
}

fn gauss(x: f64, c: f64, w: f64) -> f64 {
    (-0.5 * ((x - c) / w).powi(2)).exp()
}

/// FTIR or Raman table for every donor measured in that modality.
pub fn gen_1d(spec: &SynthSpec, modality: Modality) -> Result<SampleTable> {
    spec.validate()?;
    let s = match modality {
        Modality::Ftir => &spec.ftir,
        Modality::Raman => &spec.raman,
        Modality::Eem => {
            return Err(Error::InvalidParameter(
                "gen_1d handles FTIR and Raman only".into(),
            ));
        }
    };
    let axis = s.axis.build(AxisUnit::Wavenumber)?;
    let x = axis.values().to_vec();
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let t: Vec<f64> = x.iter().map(|v| (2.0 * v - lo - hi) / (hi - lo)).collect();
    let replicates = if modality == Modality::Ftir {
        spec.replicate_count
    } else {
        1
    };

    let mut records = Vec::new();
    for p in patients(spec)
        .iter()
        .filter(|p| p.modalities.contains(&modality))
    {
        let mut rng = rng_for(spec.seed, p.index, stream_of(modality));
        let effect = effect_in(spec, p, modality);
        let amps: Vec<f64> = s
            .peaks
            .iter()
            .enumerate()
            .map(|(i, pk)| {
                let shift = if effect && s.disease_peaks.contains(&i) {
                    1.0 + spec.effect_size
                } else {
                    1.0
                };
                pk.amplitude * shift * (1.0 + spec.patient_sd * normal(&mut rng))
            })
            .collect();
        let base_scale = 1.0 + spec.baseline_jitter * normal(&mut rng);
        let ramp_scale = 1.0 + spec.baseline_jitter * normal(&mut rng);
        for rep in 1..=replicates {
            let rep_amps: Vec<f64> = amps
                .iter()
                .map(|a| a * (1.0 + spec.replicate_jitter * normal(&mut rng)))
                .collect();
            let y: Vec<f64> = x
                .iter()
                .zip(&t)
                .map(|(&xv, &tv)| {
                    let bands: f64 = s
                        .peaks
                        .iter()
                        .zip(&rep_amps)
                        .map(|(pk, a)| a * gauss(xv, pk.center, pk.width))
                        .sum();
                    let poly: f64 = s
                        .baseline_poly
                        .iter()
                        .rev()
                        .fold(0.0, |acc, c| acc * tv + c);
                    let ramp = s.ramp_amplitude * (-(xv - lo) / s.ramp_decay).exp();
                    bands + base_scale * poly + ramp_scale * ramp
                })
                .collect::<Vec<_>>()
                .into_iter()
                .map(|v| v + spec.noise_sigma * normal(&mut rng))
                .collect();
            records.push(SampleRecord {
                patient_id: p.id.clone(),
                group: p.group,
                replicate: rep,
                payload: Payload::Spectrum(Spectrum1D::new(axis.clone(), y)?),
            });
        }
    }
    SampleTable::finalize(modality, records)
}

fn in_ridge(ex: f64, em: f64, support: f64) -> bool {
    (em - ex).abs() <= support || (em - 2.0 * ex).abs() <= support
}

/// Grid cells `(ex index, em index)` where Rayleigh ridges are planted.
pub fn ridge_cells(spec: &SynthSpec) -> Result<Vec<(usize, usize)>> {
    let ex = spec.eem.ex.build(AxisUnit::Wavelength)?;
    let em = spec.eem.em.build(AxisUnit::Wavelength)?;
    let mut out = Vec::new();
    for (i, &a) in ex.values().iter().enumerate() {
        for (j, &b) in em.values().iter().enumerate() {
            if in_ridge(a, b, spec.eem.rayleigh_support) {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}

/// EEM table with one blank per sample.
pub fn gen_eem(spec: &SynthSpec) -> Result<SampleTable> {
    spec.validate()?;
    let e = &spec.eem;
    let ex = e.ex.build(AxisUnit::Wavelength)?;
    let em = e.em.build(AxisUnit::Wavelength)?;
    let mut records = Vec::new();
    for p in patients(spec)
        .iter()
        .filter(|p| p.modalities.contains(&Modality::Eem))
    {
        let mut rng = rng_for(spec.seed, p.index, stream_of(Modality::Eem));
        let effect = effect_in(spec, p, Modality::Eem);
        let amps: Vec<f64> = e
            .fluorophores
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let shift = if effect && e.disease_fluorophores.contains(&i) {
                    1.0 + spec.effect_size
                } else {
                    1.0
                };
                f.amplitude * shift * (1.0 + spec.patient_sd * normal(&mut rng))
            })
            .collect();
        let ridge_scale = 1.0 + spec.baseline_jitter * normal(&mut rng);
        let mut sample = Vec::with_capacity(ex.len() * em.len());
        let mut blank = Vec::with_capacity(ex.len() * em.len());
        for &a in ex.values() {
            for &b in em.values() {
                let fluor: f64 = e
                    .fluorophores
                    .iter()
                    .zip(&amps)
                    .map(|(f, amp)| amp * gauss(a, f.ex, f.width_ex) * gauss(b, f.em, f.width_em))
                    .sum();
                let ridge = if in_ridge(a, b, e.rayleigh_support) {
                    let w = e.rayleigh_support.max(1.0) / 2.0;
                    e.rayleigh_amplitude
                        * ridge_scale
                        * (gauss(b, a, w) + 0.5 * gauss(b, 2.0 * a, w))
                } else {
                    0.0
                };
                sample.push(fluor + ridge + e.blank_level + spec.noise_sigma * normal(&mut rng));
                blank.push(e.blank_level + spec.noise_sigma * normal(&mut rng));
            }
        }
        records.push(SampleRecord {
            patient_id: p.id.clone(),
            group: p.group,
            replicate: 1,
            payload: Payload::Eem {
                sample: EEMatrix::new(ex.clone(), em.clone(), sample)?,
                blank: EEMatrix::new(ex.clone(), em.clone(), blank)?,
            },
        });
    }
    SampleTable::finalize(Modality::Eem, records)
}

/// All three tables.
pub fn generate(spec: &SynthSpec) -> Result<BTreeMap<Modality, SampleTable>> {
    Ok(BTreeMap::from([
        (Modality::Ftir, gen_1d(spec, Modality::Ftir)?),
        (Modality::Raman, gen_1d(spec, Modality::Raman)?),
        (Modality::Eem, gen_eem(spec)?),
    ]))
}

/// Generates a dataset and writes it under `dir`; returns the manifest path.
pub fn write_synthetic(spec: &SynthSpec, dir: &Path) -> Result<PathBuf> {
    write_dataset(dir, &generate(spec)?)
}
