//! Turns loaded tables into cross-validation inputs for one scenario and
//! modality subset.
//!
//! A single modality yields one row per preprocessed vector, so FTIR with
//! `keep_all` is evaluated at replicate level. Several modalities are fused
//! at patient level, FTIR replicates collapsed to their mean.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::data::{Group, Modality, SampleTable, Scenario};
use crate::error::{Error, Result};
use crate::eval::CvInput;
use crate::fusion::{align_patients, collapse_replicates_for_fusion, ModalityBlock};
use crate::prep1d::{apply_pipeline_with, raman_pipeline, OperatorParams, PipelineConfig};
use crate::prepeem::{eem_pipeline, feature_names};

pub type Tables = BTreeMap<Modality, SampleTable>;

/// Preprocessed vectors of every patient in one modality table.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientFeatures {
    pub modality: Modality,
    pub groups: BTreeMap<String, Group>,
    /// One vector per replicate, or a single vector.
    pub vectors: BTreeMap<String, Vec<Vec<f64>>>,
    pub feature_names: Vec<String>,
}

impl PatientFeatures {
    fn from_parts(
        modality: Modality,
        table: &SampleTable,
        mut rows: Vec<(String, Vec<Vec<f64>>)>,
        names: Option<Vec<String>>,
    ) -> Result<Self> {
        let groups = table
            .records()
            .iter()
            .map(|r| (r.patient_id.clone(), r.group))
            .collect::<BTreeMap<_, _>>();
        for r in table.records() {
            if groups[&r.patient_id] != r.group {
                return Err(Error::MixedGroupLabel(r.patient_id.clone()));
            }
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let width = rows
            .first()
            .and_then(|(_, v)| v.first())
            .map(Vec::len)
            .ok_or_else(|| Error::Empty(format!("{modality} table has no records")))?;
        if let Some((pid, _)) = rows
            .iter()
            .find(|(_, v)| v.iter().any(|x| x.len() != width))
        {
            return Err(Error::InvalidParameter(format!(
                "{modality} features of patient {pid} differ in length"
            )));
        }
        let feature_names = names.unwrap_or_else(|| (0..width).map(|j| j.to_string()).collect());
        Ok(Self {
            modality,
            groups,
            vectors: rows.into_iter().collect(),
            feature_names,
        })
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }
}

pub fn ftir_features(
    table: &SampleTable,
    cfg: &PipelineConfig,
    ops: &OperatorParams,
) -> Result<PatientFeatures> {
    let rows = table
        .by_patient()
        .into_par_iter()
        .map(|(pid, recs)| {
            let spectra: Vec<_> = recs.iter().filter_map(|r| r.spectrum()).collect();
            Ok((pid.to_string(), apply_pipeline_with(cfg, ops, &spectra)?))
        })
        .collect::<Result<Vec<_>>>()?;
    PatientFeatures::from_parts(Modality::Ftir, table, rows, None)
}

pub fn raman_features(table: &SampleTable) -> Result<PatientFeatures> {
    let rows = table
        .records()
        .par_iter()
        .map(|r| {
            let s = r
                .spectrum()
                .ok_or_else(|| Error::InvalidParameter("Raman record without spectrum".into()))?;
            Ok((r.patient_id.clone(), vec![raman_pipeline(s)?]))
        })
        .collect::<Result<Vec<_>>>()?;
    PatientFeatures::from_parts(Modality::Raman, table, rows, None)
}

pub fn eem_features(table: &SampleTable) -> Result<PatientFeatures> {
    let rows = table
        .records()
        .par_iter()
        .map(|r| {
            let (s, b) = r
                .eem()
                .ok_or_else(|| Error::InvalidParameter("EEM record without matrix".into()))?;
            Ok((r.patient_id.clone(), vec![eem_pipeline(s, b)?]))
        })
        .collect::<Result<Vec<_>>>()?;
    let names = table
        .records()
        .first()
        .and_then(|r| r.eem())
        .map(|(s, _)| feature_names(s));
    PatientFeatures::from_parts(Modality::Eem, table, rows, names)
}

/// Preprocesses every requested modality present in `tables`.
pub fn preprocess(
    tables: &Tables,
    modalities: &[Modality],
    ftir: &PipelineConfig,
    ops: &OperatorParams,
) -> Result<BTreeMap<Modality, PatientFeatures>> {
    modalities
        .iter()
        .map(|&m| {
            let table = tables
                .get(&m)
                .ok_or_else(|| Error::Empty(format!("dataset has no {m} table")))?;
            let f = match m {
                Modality::Ftir => ftir_features(table, ftir, ops)?,
                Modality::Raman => raman_features(table)?,
                Modality::Eem => eem_features(table)?,
            };
            Ok((m, f))
        })
        .collect()
}

/// Rows for `scenario` from the modalities in `subset`.
pub fn build_input(
    features: &BTreeMap<Modality, PatientFeatures>,
    scenario: Scenario,
    subset: &[Modality],
) -> Result<CvInput> {
    let mut subset = subset.to_vec();
    subset.sort();
    subset.dedup();
    let mut per_modality: BTreeMap<Modality, BTreeMap<String, &Vec<Vec<f64>>>> = BTreeMap::new();
    for &m in &subset {
        let f = features
            .get(&m)
            .ok_or_else(|| Error::Empty(format!("{m} features were not computed")))?;
        let in_scenario = f
            .vectors
            .iter()
            .filter(|(pid, _)| scenario.includes(f.groups[*pid]))
            .map(|(pid, v)| (pid.clone(), v))
            .collect();
        per_modality.insert(m, in_scenario);
    }
    let patients = align_patients(&per_modality, &subset)?;

    let mut groups_of: BTreeMap<&str, Group> = BTreeMap::new();
    for &m in &subset {
        for pid in &patients {
            let g = features[&m].groups[pid];
            if *groups_of.entry(pid).or_insert(g) != g {
                return Err(Error::MixedGroupLabel(pid.clone()));
            }
        }
    }

    let mut row_ids = Vec::new();
    let mut blocks = Vec::with_capacity(subset.len());
    if let [m] = subset[..] {
        let mut rows = Vec::new();
        for pid in &patients {
            for v in per_modality[&m][pid] {
                row_ids.push(pid.clone());
                rows.push(v.clone());
            }
        }
        blocks.push(ModalityBlock::from_rows(
            m,
            row_ids.clone(),
            rows,
            features[&m].feature_names.clone(),
        )?);
    } else {
        row_ids = patients.clone();
        for &m in &subset {
            let rows = patients
                .iter()
                .map(|pid| collapse_replicates_for_fusion(per_modality[&m][pid]))
                .collect::<Result<Vec<_>>>()?;
            blocks.push(ModalityBlock::from_rows(
                m,
                row_ids.clone(),
                rows,
                features[&m].feature_names.clone(),
            )?);
        }
    }
    let labels = row_ids
        .iter()
        .map(|pid| groups_of[pid.as_str()].label().as_binary())
        .collect();
    CvInput::new(blocks, labels, row_ids)
}
