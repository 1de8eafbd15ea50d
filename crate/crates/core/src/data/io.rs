//! Dataset manifests and the CSV layouts for 1-D spectra and EEMs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{
    EEMatrix, Group, Modality, Payload, SampleRecord, SampleTable, SpectralAxis, Spectrum1D,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub patient_id: String,
    pub group: Group,
    pub replicate: u32,
    pub file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blank: Option<PathBuf>,
}

/// `dataset.json`: file references per modality, relative to the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub modalities: BTreeMap<Modality, Vec<ManifestEntry>>,
}

pub fn load_dataset(manifest_path: &Path) -> Result<BTreeMap<Modality, SampleTable>> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::json(manifest_path, e))?;
    let root = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut tables = BTreeMap::new();
    for (&modality, entries) in &manifest.modalities {
        let records = entries
            .par_iter()
            .map(|e| load_record(root, modality, e))
            .collect::<Result<Vec<_>>>()?;
        tables.insert(modality, SampleTable::finalize(modality, records)?);
    }
    Ok(tables)
}

fn load_record(root: &Path, modality: Modality, e: &ManifestEntry) -> Result<SampleRecord> {
    let payload = match modality {
        Modality::Ftir | Modality::Raman => {
            Payload::Spectrum(read_spectrum_csv(&root.join(&e.file), modality)?)
        }
        Modality::Eem => {
            let blank = e.blank.as_ref().ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "EEM entry for {} lacks a blank file",
                    e.patient_id
                ))
            })?;
            Payload::Eem {
                sample: read_eem_csv(&root.join(&e.file))?,
                blank: read_eem_csv(&root.join(blank))?,
            }
        }
    };
    Ok(SampleRecord {
        patient_id: e.patient_id.clone(),
        group: e.group,
        replicate: e.replicate,
        payload,
    })
}

fn parse_f64(path: &Path, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::csv(path, format!("not a number: {field:?}")))
}

/// Two-column `axis,intensity` file with a header row.
pub fn read_spectrum_csv(path: &Path, modality: Modality) -> Result<Spectrum1D> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(fs::File::open(path).map_err(|e| Error::io(path, e))?);
    let mut axis = Vec::new();
    let mut intensity = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        if row.len() != 2 {
            return Err(Error::csv(
                path,
                format!("expected 2 columns, got {}", row.len()),
            ));
        }
        axis.push(parse_f64(path, &row[0])?);
        intensity.push(parse_f64(path, &row[1])?);
    }
    Spectrum1D::new(SpectralAxis::new(axis, modality.unit())?, intensity)
}

pub fn write_spectrum_csv(path: &Path, s: &Spectrum1D) -> Result<()> {
    let mut out = String::with_capacity(s.len() * 24 + 16);
    out.push_str("axis,intensity\n");
    for (x, y) in s.axis().values().iter().zip(s.intensity()) {
        out.push_str(&format!("{x},{y}\n"));
    }
    write_file(path, out.as_bytes())
}

/// First row holds emission wavelengths, first column excitation wavelengths.
pub fn read_eem_csv(path: &Path) -> Result<EEMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(fs::File::open(path).map_err(|e| Error::io(path, e))?);
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| Error::csv(path, "empty file"))?
        .map_err(|e| Error::csv(path, e))?;
    let em = header
        .iter()
        .skip(1)
        .map(|f| parse_f64(path, f))
        .collect::<Result<Vec<_>>>()?;
    let mut ex = Vec::new();
    let mut grid = Vec::new();
    for row in rows {
        let row = row.map_err(|e| Error::csv(path, e))?;
        if row.len() != em.len() + 1 {
            return Err(Error::csv(
                path,
                format!("row has {} cells, expected {}", row.len(), em.len() + 1),
            ));
        }
        ex.push(parse_f64(path, &row[0])?);
        for f in row.iter().skip(1) {
            grid.push(parse_f64(path, f)?);
        }
    }
    EEMatrix::new(
        SpectralAxis::new(ex, Modality::Eem.unit())?,
        SpectralAxis::new(em, Modality::Eem.unit())?,
        grid,
    )
}

pub fn write_eem_csv(path: &Path, m: &EEMatrix) -> Result<()> {
    let (_, n_em) = m.shape();
    let mut out = String::new();
    out.push_str("ex/em");
    for v in m.em_axis().values() {
        out.push_str(&format!(",{v}"));
    }
    out.push('\n');
    for (i, ex) in m.ex_axis().values().iter().enumerate() {
        out.push_str(&format!("{ex}"));
        for v in &m.grid()[i * n_em..(i + 1) * n_em] {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `dataset.json` plus one CSV per payload under `dir`.
pub fn write_dataset(dir: &Path, tables: &BTreeMap<Modality, SampleTable>) -> Result<PathBuf> {
    let mut manifest = Manifest::default();
    for (&modality, table) in tables {
        let sub = modality.name().to_ascii_lowercase();
        let entries = table
            .records()
            .par_iter()
            .map(|r| {
                let stem = format!("{}_{}", r.patient_id, r.replicate);
                match &r.payload {
                    Payload::Spectrum(s) => {
                        let file = PathBuf::from(&sub).join(format!("{stem}.csv"));
                        write_spectrum_csv(&dir.join(&file), s)?;
                        Ok(ManifestEntry {
                            patient_id: r.patient_id.clone(),
                            group: r.group,
                            replicate: r.replicate,
                            file,
                            blank: None,
                        })
                    }
                    Payload::Eem { sample, blank } => {
                        let file = PathBuf::from(&sub).join(format!("{stem}.csv"));
                        let blank_file = PathBuf::from(&sub).join(format!("{stem}_blank.csv"));
                        write_eem_csv(&dir.join(&file), sample)?;
                        write_eem_csv(&dir.join(&blank_file), blank)?;
                        Ok(ManifestEntry {
                            patient_id: r.patient_id.clone(),
                            group: r.group,
                            replicate: r.replicate,
                            file,
                            blank: Some(blank_file),
                        })
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        manifest.modalities.insert(modality, entries);
    }
    let path = dir.join("dataset.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    write_file(&path, text.as_bytes())?;
    Ok(path)
}
