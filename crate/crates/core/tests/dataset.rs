//! Dataset ingestion: manifests on disk, round trips and error cases.

use std::fs;

use spectrafuse::data::{load_dataset, write_dataset, Modality};
use spectrafuse::synth::{generate, Availability, SynthSpec};
use spectrafuse::Error;

fn coarse(mut s: SynthSpec) -> SynthSpec {
    s.ftir.axis.step = 25.0;
    s.raman.axis.step = 25.0;
    s.eem.ex.step = 15.0;
    s.eem.em.step = 15.0;
    s
}

#[test]
fn table1_cohort_loads_with_published_counts() {
    let spec = coarse(SynthSpec {
        replicate_count: 1,
        ..Default::default()
    });
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(dir.path(), &generate(&spec).unwrap()).unwrap();
    let tables = load_dataset(&manifest).unwrap();
    let count = |m: Modality| tables[&m].len();
    assert_eq!(
        (
            count(Modality::Ftir),
            count(Modality::Raman),
            count(Modality::Eem)
        ),
        (300, 272, 276)
    );
}

#[test]
fn three_replicates_give_nine_hundred_ftir_records() {
    let spec = coarse(SynthSpec::default());
    let tables = generate(&spec).unwrap();
    let ftir = &tables[&Modality::Ftir];
    assert_eq!(ftir.len(), 900);
    assert_eq!(ftir.patient_ids().len(), 300);
    let by = ftir.by_patient();
    let reps: Vec<u32> = by["B001"].iter().map(|r| r.replicate).collect();
    assert_eq!(reps, vec![1, 2, 3]);
}

#[test]
fn write_then_load_is_bit_exact() {
    let spec = coarse(SynthSpec {
        n_breast: 3,
        n_colon: 3,
        n_control: 3,
        availability: Availability::Complete,
        ..Default::default()
    });
    let tables = generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(dir.path(), &tables).unwrap();
    let loaded = load_dataset(&manifest).unwrap();
    assert_eq!(loaded, tables);

    // A second serialization of the loaded tables reproduces the same files.
    let again = tempfile::tempdir().unwrap();
    write_dataset(again.path(), &loaded).unwrap();
    let a = fs::read(dir.path().join("ftir/B001_1.csv")).unwrap();
    let b = fs::read(again.path().join("ftir/B001_1.csv")).unwrap();
    assert_eq!(a, b);
}

fn one_file_manifest(dir: &std::path::Path, csv: &str) -> std::path::PathBuf {
    fs::write(dir.join("s.csv"), csv).unwrap();
    let manifest = dir.join("dataset.json");
    fs::write(
        &manifest,
        r#"{"modalities": {"FTIR": [
            {"patient_id": "P1", "group": "breast", "replicate": 1, "file": "s.csv"}
        ]}}"#,
    )
    .unwrap();
    manifest
}

#[test]
fn non_monotonic_axis_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = one_file_manifest(dir.path(), "axis,intensity\n650,1\n700,2\n690,3\n");
    let err = load_dataset(&manifest).unwrap_err();
    assert!(matches!(err, Error::AxisNotMonotonic), "{err}");
    assert!(err.to_string().contains("axis not strictly increasing"));
}

#[test]
fn malformed_and_missing_files_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = one_file_manifest(dir.path(), "axis,intensity\n650,abc\n700,2\n");
    assert!(matches!(load_dataset(&manifest), Err(Error::Csv { .. })));
    fs::remove_file(dir.path().join("s.csv")).unwrap();
    assert!(matches!(load_dataset(&manifest), Err(Error::Io { .. })));
}

#[test]
fn duplicate_patient_replicate_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), "axis,intensity\n650,1\n700,2\n").unwrap();
    let manifest = dir.path().join("dataset.json");
    fs::write(
        &manifest,
        r#"{"modalities": {"FTIR": [
            {"patient_id": "P1", "group": "breast", "replicate": 1, "file": "s.csv"},
            {"patient_id": "P1", "group": "breast", "replicate": 1, "file": "s.csv"}
        ]}}"#,
    )
    .unwrap();
    assert!(matches!(
        load_dataset(&manifest),
        Err(Error::DuplicateRecord { .. })
    ));
}

#[test]
fn differing_axes_are_put_on_a_common_grid() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("a.csv"),
        "axis,intensity\n600,0\n700,1\n800,2\n900,3\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("b.csv"),
        "axis,intensity\n650,0\n750,1\n850,2\n950,3\n",
    )
    .unwrap();
    let manifest = dir.path().join("dataset.json");
    fs::write(
        &manifest,
        r#"{"modalities": {"Raman": [
            {"patient_id": "P1", "group": "control", "replicate": 1, "file": "a.csv"},
            {"patient_id": "P2", "group": "colon", "replicate": 1, "file": "b.csv"}
        ]}}"#,
    )
    .unwrap();
    let tables = load_dataset(&manifest).unwrap();
    let t = &tables[&Modality::Raman];
    let axes: Vec<&[f64]> = t
        .records()
        .iter()
        .map(|r| r.spectrum().unwrap().axis().values())
        .collect();
    assert_eq!(axes[0], axes[1]);
    assert_eq!(axes[0].first(), Some(&650.0));
    assert_eq!(axes[0].last(), Some(&850.0));
}
