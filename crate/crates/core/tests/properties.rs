//! Randomised invariants of fold assignment, metrics, PCA, CV and search.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectrafuse::data::{Modality, Scenario};
use spectrafuse::eval::{
    cross_validate, learning_curve, pca_project, roc_auc, stratified_group_kfold,
    threshold_metrics, CvInput, CvSettings,
};
use spectrafuse::fusion::ModalityBlock;
use spectrafuse::gbdt::GbdtParams;
use spectrafuse::search::{enumerate_pipelines, select_minmax, SearchResult};

/// `(labels, groups)` with `reps[i]` rows for patient `i`.
fn grouped(labels_per_group: &[u8], reps: &[usize]) -> (Vec<u8>, Vec<String>) {
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for (i, (&y, &r)) in labels_per_group.iter().zip(reps).enumerate() {
        for _ in 0..r {
            labels.push(y);
            groups.push(format!("P{i:03}"));
        }
    }
    (labels, groups)
}

/// One block with `shift * label + N(0,1)`-like features and a patient effect.
fn cohort(n_per_class: usize, reps: usize, shift: f64, seed: u64) -> CvInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for p in 0..2 * n_per_class {
        let y = u8::from(p < n_per_class);
        let patient: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..reps {
            rows.push(
                patient
                    .iter()
                    .enumerate()
                    .map(|(j, b)| {
                        let signal = if j < 2 { shift * y as f64 } else { 0.0 };
                        b + signal + rng.random_range(-0.1..0.1)
                    })
                    .collect(),
            );
            labels.push(y);
            groups.push(format!("P{p:03}"));
        }
    }
    let names = (0..4).map(|j| format!("f{j}")).collect();
    let block = ModalityBlock::from_rows(Modality::Ftir, groups.clone(), rows, names).unwrap();
    CvInput::new(vec![block], labels, groups).unwrap()
}

fn small_gbdt() -> GbdtParams {
    GbdtParams {
        n_rounds: 20,
        max_depth: 3,
        ..GbdtParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_rows_and_never_split_groups(
        spec in proptest::collection::vec((0u8..2, 1usize..5), 6..40),
        k in 2usize..6,
        seed in any::<u64>(),
    ) {
        let ys: Vec<u8> = spec.iter().map(|s| s.0).collect();
        let reps: Vec<usize> = spec.iter().map(|s| s.1).collect();
        let (labels, groups) = grouped(&ys, &reps);
        let a = match stratified_group_kfold(&labels, &groups, k, seed) {
            Ok(a) => a,
            Err(_) => { prop_assume!(false); unreachable!() }
        };
        let mut seen = vec![0usize; labels.len()];
        for f in 0..k {
            let (train, test) = a.split(f);
            prop_assert_eq!(train.len() + test.len(), labels.len());
            let test_groups: BTreeSet<&String> = test.iter().map(|&r| &groups[r]).collect();
            prop_assert!(train.iter().all(|&r| !test_groups.contains(&groups[r])));
            for r in test { seen[r] += 1; }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let mut fold_of_group = BTreeMap::new();
        for (g, &f) in groups.iter().zip(&a.fold_of_row) {
            prop_assert_eq!(*fold_of_group.entry(g).or_insert(f), f);
        }
    }

    #[test]
    fn auc_invariant_under_monotone_maps(
        data in proptest::collection::vec((-5.0f64..5.0, 0u8..2), 4..60),
        a in 0.01f64..20.0,
        b in -10.0f64..10.0,
    ) {
        let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
        let labels: Vec<u8> = data.iter().map(|d| d.1).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let base = roc_auc(&scores, &labels).unwrap();
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
        prop_assert!((roc_auc(&affine, &labels).unwrap() - base).abs() <= 1e-12);
        prop_assert!((roc_auc(&cubed, &labels).unwrap() - base).abs() <= 1e-12);
        let flipped: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
        prop_assert!((roc_auc(&scores, &flipped).unwrap() + base - 1.0).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn balanced_accuracy_is_mean_of_rates(
        data in proptest::collection::vec((0.0f64..1.0, 0u8..2), 4..60),
        threshold in 0.0f64..1.0,
    ) {
        let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
        let labels: Vec<u8> = data.iter().map(|d| d.1).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let m = threshold_metrics(&scores, &labels, threshold).unwrap();
        let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
        let tp = data.iter().filter(|d| d.1 == 1 && d.0 >= threshold).count() as f64;
        let tn = data.iter().filter(|d| d.1 == 0 && d.0 < threshold).count() as f64;
        prop_assert!((m.sensitivity - tp / pos).abs() <= 1e-15);
        prop_assert!((m.specificity - tn / (labels.len() as f64 - pos)).abs() <= 1e-15);
        prop_assert!((m.balanced_accuracy - (m.sensitivity + m.specificity) / 2.0).abs() <= 1e-15);
    }

    #[test]
    fn pca_matches_covariance_eigenvectors(values in proptest::collection::vec(-10.0f64..10.0, 15)) {
        let rows: Vec<Vec<f64>> = values.chunks(3).map(|c| c.to_vec()).collect();
        let x = DMatrix::from_row_slice(5, 3, &values);
        let mean = x.row_mean();
        let centred = DMatrix::from_fn(5, 3, |i, j| x[(i, j)] - mean[j]);
        let cov = centred.transpose() * &centred / 4.0;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let ev: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let total: f64 = ev.iter().sum();
        prop_assume!(total > 1e-6);
        // well separated leading eigenvalues keep eigenvectors well defined
        prop_assume!((ev[0] - ev[1]) > 1e-3 * total && (ev[1] - ev[2]) > 1e-3 * total);

        let p = pca_project(&rows, 2).unwrap();
        for (c, &i) in order.iter().take(2).enumerate() {
            let v = eig.eigenvectors.column(i);
            let dot: f64 = (0..3).map(|j| v[j] * p.loadings[c][j]).sum();
            let sign = dot.signum();
            for j in 0..3 {
                prop_assert!((p.loadings[c][j] - sign * v[j]).abs() <= 1e-8);
            }
            prop_assert!((p.explained_variance_ratio[c] - ev[c] / total).abs() <= 1e-8);
            for r in 0..5 {
                let s: f64 = (0..3).map(|j| centred[(r, j)] * p.loadings[c][j]).sum();
                prop_assert!((p.scores[r][c] - s).abs() <= 1e-8);
            }
        }
        prop_assert!(p.explained_variance_ratio.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn minmax_winner_ignores_order_and_affine_rescaling(
        aucs in proptest::collection::vec((0.3f64..1.0, 0.3f64..1.0, any::<bool>()), 2..40),
        scale in 0.1f64..1.0,
        offset in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let configs = enumerate_pipelines();
        let build = |f: &dyn Fn(f64) -> f64| -> Vec<SearchResult> {
            aucs.iter()
                .enumerate()
                .map(|(i, &(b, c, failed))| {
                    let mut m = BTreeMap::new();
                    m.insert(Scenario::Breast, Some(f(b)));
                    m.insert(Scenario::Colon, if failed && i % 3 == 0 { None } else { Some(f(c)) });
                    SearchResult::new(i, configs[i], m, None)
                })
                .collect()
        };
        let base = build(&|v| v);
        let winner = select_minmax(&base).unwrap().index;

        let oracle = base
            .iter()
            .map(|r| (r.worst_case, r.mean_auc, std::cmp::Reverse(r.index)))
            .max_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)))
            .unwrap();
        prop_assert_eq!(winner, oracle.2 .0);

        let mut shuffled = base.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(select_minmax(&shuffled).unwrap().index, winner);

        let rescaled = build(&|v| scale * v + offset);
        prop_assert_eq!(select_minmax(&rescaled).unwrap().index, winner);
    }
}

#[test]
fn separable_cohort_is_recovered() {
    let input = cohort(30, 3, 3.0, 11);
    let report = cross_validate(
        &input,
        &small_gbdt(),
        &CvSettings {
            k: 5,
            seed: 2,
            threshold: 0.5,
        },
    )
    .unwrap();
    assert!(
        report.summary.auc.mean >= 0.99,
        "{}",
        report.summary.auc.mean
    );
    assert_eq!(report.summary.n, 60);
    assert_eq!(report.summary.n_rows, 180);
}

#[test]
fn signal_free_cohort_gives_chance_auc() {
    let mut means = Vec::new();
    for seed in 0..4 {
        let input = cohort(30, 1, 0.0, 100 + seed);
        let report = cross_validate(
            &input,
            &small_gbdt(),
            &CvSettings {
                k: 5,
                seed,
                threshold: 0.5,
            },
        )
        .unwrap();
        means.push(report.summary.auc.mean);
    }
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    assert!((0.35..=0.65).contains(&mean), "{means:?}");
}

#[test]
fn learning_curve_grows_with_data() {
    let input = cohort(30, 2, 1.0, 21);
    let settings = CvSettings {
        k: 5,
        seed: 3,
        threshold: 0.5,
    };
    let fractions = [0.2, 0.6, 1.0];
    let curve = learning_curve(&input, &fractions, &small_gbdt(), &settings).unwrap();
    assert_eq!(curve.len(), 3);
    for (p, f) in curve.iter().zip(fractions) {
        assert_eq!(p.fraction, f);
    }
    assert!(curve[0].mean_train_rows < curve[2].mean_train_rows);
    assert!(curve[0].auc_mean <= curve[2].auc_mean + 0.02, "{curve:?}");
    let full = cross_validate(&input, &small_gbdt(), &settings).unwrap();
    assert_eq!(curve[2].auc_mean, full.summary.auc.mean);
}
