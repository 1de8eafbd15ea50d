//! Domain data model: spectral axes, 1-D spectra, excitation-emission
//! matrices and per-modality sample tables.

mod io;
mod resample;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use io::{
    load_dataset, read_eem_csv, read_spectrum_csv, write_dataset, write_eem_csv,
    write_spectrum_csv, Manifest, ManifestEntry,
};
pub use resample::{common_grid, resample_to_grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisUnit {
    Wavenumber,
    Wavelength,
}

/// Strictly increasing, finite sample positions with at least two points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralAxis {
    values: Vec<f64>,
    unit: AxisUnit,
}

impl SpectralAxis {
    pub fn new(values: Vec<f64>, unit: AxisUnit) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidAxis(format!(
                "axis needs at least 2 points, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("axis value {v}")));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::AxisNotMonotonic);
        }
        Ok(Self { values, unit })
    }

    /// Evenly spaced axis `lo, lo + step, ...` holding `n` points.
    pub fn uniform(lo: f64, step: f64, n: usize, unit: AxisUnit) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidAxis(format!(
                "step must be positive, got {step}"
            )));
        }
        Self::new((0..n).map(|i| lo + i as f64 * step).collect(), unit)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> AxisUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Mean spacing between consecutive points.
    pub fn mean_step(&self) -> f64 {
        (self.last() - self.first()) / (self.len() - 1) as f64
    }

    /// Mean step if the axis is uniform within a relative deviation of `rel_tol`.
    pub fn uniform_step(&self, rel_tol: f64) -> Result<f64> {
        let step = self.mean_step();
        let worst = self
            .values
            .windows(2)
            .map(|w| ((w[1] - w[0]) - step).abs() / step)
            .fold(0.0_f64, f64::max);
        if worst > rel_tol {
            return Err(Error::NonUniformAxis(worst));
        }
        Ok(step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum1D {
    axis: SpectralAxis,
    intensity: Vec<f64>,
}

impl Spectrum1D {
    pub fn new(axis: SpectralAxis, intensity: Vec<f64>) -> Result<Self> {
        if intensity.len() != axis.len() {
            return Err(Error::DimensionMismatch {
                expected: axis.len(),
                got: intensity.len(),
            });
        }
        if let Some(v) = intensity.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("intensity {v}")));
        }
        Ok(Self { axis, intensity })
    }

    pub fn axis(&self) -> &SpectralAxis {
        &self.axis
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    /// Same axis, new intensities. Length and finiteness are re-checked.
    pub fn with_intensity(&self, intensity: Vec<f64>) -> Result<Self> {
        Self::new(self.axis.clone(), intensity)
    }

    pub fn into_parts(self) -> (SpectralAxis, Vec<f64>) {
        (self.axis, self.intensity)
    }
}

/// Fluorescence intensity grid, excitation rows by emission columns,
/// stored row-major. `mask[i]` marks cells removed by preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EEMatrix {
    ex_axis: SpectralAxis,
    em_axis: SpectralAxis,
    grid: Vec<f64>,
    mask: Vec<bool>,
}

impl EEMatrix {
    pub fn new(ex_axis: SpectralAxis, em_axis: SpectralAxis, grid: Vec<f64>) -> Result<Self> {
        let n = ex_axis.len() * em_axis.len();
        if grid.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: grid.len(),
            });
        }
        if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("eem cell {v}")));
        }
        Ok(Self {
            ex_axis,
            em_axis,
            grid,
            mask: vec![false; n],
        })
    }

    pub(crate) fn from_parts(
        ex_axis: SpectralAxis,
        em_axis: SpectralAxis,
        grid: Vec<f64>,
        mask: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(grid.len(), ex_axis.len() * em_axis.len());
        debug_assert_eq!(grid.len(), mask.len());
        Self {
            ex_axis,
            em_axis,
            grid,
            mask,
        }
    }

    pub fn ex_axis(&self) -> &SpectralAxis {
        &self.ex_axis
    }

    pub fn em_axis(&self) -> &SpectralAxis {
        &self.em_axis
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ex_axis.len(), self.em_axis.len())
    }

    pub fn get(&self, ex: usize, em: usize) -> f64 {
        self.grid[ex * self.em_axis.len() + em]
    }

    pub fn is_masked(&self, ex: usize, em: usize) -> bool {
        self.mask[ex * self.em_axis.len() + em]
    }

    pub fn same_axes(&self, other: &EEMatrix) -> bool {
        self.ex_axis.values() == other.ex_axis.values()
            && self.em_axis.values() == other.em_axis.values()
    }

    pub fn into_parts(self) -> (SpectralAxis, SpectralAxis, Vec<f64>, Vec<bool>) {
        (self.ex_axis, self.em_axis, self.grid, self.mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "FTIR")]
    Ftir,
    #[serde(rename = "Raman")]
    Raman,
    #[serde(rename = "EEM")]
    Eem,
}

impl Modality {
    /// Canonical fusion order.
    pub const ALL: [Modality; 3] = [Modality::Ftir, Modality::Raman, Modality::Eem];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Ftir => "FTIR",
            Modality::Raman => "Raman",
            Modality::Eem => "EEM",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ftir" => Ok(Modality::Ftir),
            "raman" => Ok(Modality::Raman),
            "eem" => Ok(Modality::Eem),
            other => Err(Error::InvalidParameter(format!(
                "unknown modality {other:?}"
            ))),
        }
    }

    pub fn unit(self) -> AxisUnit {
        match self {
            Modality::Eem => AxisUnit::Wavelength,
            _ => AxisUnit::Wavenumber,
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Clinical group of the donor. The binary label is derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Breast,
    Colon,
    Control,
}

impl Group {
    pub fn label(self) -> Label {
        match self {
            Group::Control => Label::Control,
            Group::Breast | Group::Colon => Label::Cancer,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::Breast => "breast",
            Group::Colon => "colon",
            Group::Control => "control",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Cancer,
    Control,
}

impl Label {
    /// 1 for cancer, 0 for control.
    pub fn as_binary(self) -> u8 {
        match self {
            Label::Cancer => 1,
            Label::Control => 0,
        }
    }
}

/// Binary cancer-vs-control experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Breast,
    Colon,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::Breast, Scenario::Colon];

    pub fn includes(self, group: Group) -> bool {
        matches!(
            (self, group),
            (_, Group::Control)
                | (Scenario::Breast, Group::Breast)
                | (Scenario::Colon, Group::Colon)
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Breast => "breast",
            Scenario::Colon => "colon",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Spectrum(Spectrum1D),
    Eem { sample: EEMatrix, blank: EEMatrix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub patient_id: String,
    pub group: Group,
    pub replicate: u32,
    pub payload: Payload,
}

impl SampleRecord {
    pub fn label(&self) -> Label {
        self.group.label()
    }

    pub fn spectrum(&self) -> Option<&Spectrum1D> {
        match &self.payload {
            Payload::Spectrum(s) => Some(s),
            Payload::Eem { .. } => None,
        }
    }

    pub fn eem(&self) -> Option<(&EEMatrix, &EEMatrix)> {
        match &self.payload {
            Payload::Eem { sample, blank } => Some((sample, blank)),
            Payload::Spectrum(_) => None,
        }
    }
}

/// All records of one modality, finalized onto a shared axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    modality: Modality,
    records: Vec<SampleRecord>,
}

impl SampleTable {
    /// Validates record uniqueness and payload kind, then puts every 1-D
    /// spectrum on the common grid. EEM tables must already share axes.
    pub fn finalize(modality: Modality, records: Vec<SampleRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if r.replicate < 1 {
                return Err(Error::InvalidParameter(format!(
                    "replicate must be >= 1 for patient {}",
                    r.patient_id
                )));
            }
            if !seen.insert((r.patient_id.as_str(), r.replicate)) {
                return Err(Error::DuplicateRecord {
                    patient_id: r.patient_id.clone(),
                    replicate: r.replicate,
                });
            }
            let kind_ok = matches!(
                (&r.payload, modality),
                (Payload::Eem { .. }, Modality::Eem)
                    | (Payload::Spectrum(_), Modality::Ftir | Modality::Raman)
            );
            if !kind_ok {
                return Err(Error::InvalidParameter(format!(
                    "payload of patient {} does not match modality {modality}",
                    r.patient_id
                )));
            }
        }
        if modality != Modality::Ftir {
            if let Some(r) = records.iter().find(|r| r.replicate != 1) {
                return Err(Error::InvalidParameter(format!(
                    "{modality} allows a single acquisition per patient, {} has replicate {}",
                    r.patient_id, r.replicate
                )));
            }
        }

        let records = match modality {
            Modality::Eem => {
                if let Some(first) = records.first() {
                    let (reference, _) = first.eem().expect("checked above");
                    for r in &records {
                        let (s, b) = r.eem().expect("checked above");
                        if !s.same_axes(reference) || !b.same_axes(reference) {
                            return Err(Error::AxisMismatch(format!(
                                "EEM axes of patient {} differ from the table axes",
                                r.patient_id
                            )));
                        }
                    }
                }
                records
            }
            _ => align_spectra(records)?,
        };
        Ok(Self { modality, records })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn patient_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.patient_id.as_str()).collect()
    }

    /// Records grouped by patient, replicates in ascending order.
    pub fn by_patient(&self) -> BTreeMap<&str, Vec<&SampleRecord>> {
        let mut out: BTreeMap<&str, Vec<&SampleRecord>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.patient_id.as_str()).or_default().push(r);
        }
        for v in out.values_mut() {
            v.sort_by_key(|r| r.replicate);
        }
        out
    }

    /// Shared 1-D axis of a finalized FTIR/Raman table.
    pub fn axis(&self) -> Option<&SpectralAxis> {
        self.records
            .first()
            .and_then(|r| r.spectrum())
            .map(|s| s.axis())
    }
}

fn align_spectra(records: Vec<SampleRecord>) -> Result<Vec<SampleRecord>> {
    let axes: Vec<&SpectralAxis> = records
        .iter()
        .filter_map(|r| r.spectrum())
        .map(|s| s.axis())
        .collect();
    let Some(first) = axes.first() else {
        return Ok(records);
    };
    if axes.iter().all(|a| a.values() == first.values()) {
        return Ok(records);
    }
    let target = common_grid(&axes)?;
    records
        .into_iter()
        .map(|r| {
            let payload = match r.payload {
                Payload::Spectrum(s) if s.axis().values() == target.values() => {
                    Payload::Spectrum(s)
                }
                Payload::Spectrum(s) => Payload::Spectrum(resample_to_grid(&s, &target)?),
                other => other,
            };
            Ok(SampleRecord { payload, ..r })
        })
        .collect()
}

/// Content hash over every table, used to key cached search results.
pub fn dataset_hash(tables: &BTreeMap<Modality, SampleTable>) -> String {
    fn put_f64s(h: &mut Sha256, xs: &[f64]) {
        for x in xs {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    let mut h = Sha256::new();
    for (m, t) in tables {
        h.update(m.name().as_bytes());
        for r in t.records() {
            h.update(r.patient_id.as_bytes());
            h.update([0u8]);
            h.update(r.group.name().as_bytes());
            h.update(r.replicate.to_le_bytes());
            match &r.payload {
                Payload::Spectrum(s) => {
                    put_f64s(&mut h, s.axis().values());
                    put_f64s(&mut h, s.intensity());
                }
                Payload::Eem { sample, blank } => {
                    for e in [sample, blank] {
                        put_f64s(&mut h, e.ex_axis().values());
                        put_f64s(&mut h, e.em_axis().values());
                        put_f64s(&mut h, e.grid());
                    }
                }
            }
        }
    }
    hex::encode(h.finalize())
}
