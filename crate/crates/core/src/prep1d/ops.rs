use crate::data::Spectrum1D;
use crate::error::{Error, Result};

use super::filters::{savitzky_golay_values, SavGolParams};

const EPS: f64 = 1e-12;

/// Pointwise mean of replicate spectra sharing one axis.
pub fn average_replicates(records: &[&Spectrum1D]) -> Result<Spectrum1D> {
    let first = records
        .first()
        .ok_or_else(|| Error::Empty("no replicates to average".into()))?;
    if records.len() == 1 {
        return Ok((*first).clone());
    }
    let mut acc = vec![0.0; first.len()];
    for r in records {
        if r.axis().values() != first.axis().values() {
            return Err(Error::AxisMismatch(
                "replicates do not share an axis".into(),
            ));
        }
        for (a, v) in acc.iter_mut().zip(r.intensity()) {
            *a += v;
        }
    }
    let n = records.len() as f64;
    first.with_intensity(acc.into_iter().map(|a| a / n).collect())
}

/// Keeps samples with `lo <= axis <= hi`.
pub fn select_region(s: &Spectrum1D, lo: f64, hi: f64) -> Result<Spectrum1D> {
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "region bounds must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let x = s.axis().values();
    let start = x.partition_point(|&v| v < lo);
    let end = x.partition_point(|&v| v <= hi);
    if end <= start {
        return Err(Error::Empty(format!(
            "region [{lo}, {hi}] selects no samples"
        )));
    }
    if start == 0 && end == x.len() {
        return Ok(s.clone());
    }
    let axis = crate::data::SpectralAxis::new(x[start..end].to_vec(), s.axis().unit())?;
    Spectrum1D::new(axis, s.intensity()[start..end].to_vec())
}

/// Standard normal variate with the population standard deviation.
pub fn snv(s: &Spectrum1D) -> Result<Spectrum1D> {
    let y = s.intensity();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(std > EPS) {
        return Err(Error::ZeroVariance("SNV input is constant".into()));
    }
    s.with_intensity(y.iter().map(|v| (v - mean) / std).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    First,
    Second,
    FirstAndSecond,
}

/// Savitzky-Golay derivative features; `FirstAndSecond` concatenates
/// `[d1 | d2]`.
pub fn derivative_block(
    s: &Spectrum1D,
    mode: DerivativeMode,
    sg: SavGolParams,
) -> Result<Vec<f64>> {
    let SavGolParams { window, polyorder } = sg;
    match mode {
        DerivativeMode::First => savitzky_golay_values(s, window, polyorder, 1),
        DerivativeMode::Second => savitzky_golay_values(s, window, polyorder, 2),
        DerivativeMode::FirstAndSecond => {
            let mut d = savitzky_golay_values(s, window, polyorder, 1)?;
            d.extend(savitzky_golay_values(s, window, polyorder, 2)?);
            Ok(d)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    Area,
    L2,
    Max,
}

/// Divides by the area (`sum |v| * dx`), Euclidean norm or max magnitude.
pub fn normalize(v: &[f64], mode: NormMode, dx: f64) -> Result<Vec<f64>> {
    let (denom, name) = match mode {
        NormMode::Area => (v.iter().map(|x| x.abs()).sum::<f64>() * dx, "area"),
        NormMode::L2 => (v.iter().map(|x| x * x).sum::<f64>().sqrt(), "l2"),
        NormMode::Max => (v.iter().map(|x| x.abs()).fold(0.0, f64::max), "max"),
    };
    if !(denom > EPS) {
        return Err(Error::ZeroDenominator(name));
    }
    Ok(v.iter().map(|x| x / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AxisUnit, SpectralAxis};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(y: Vec<f64>) -> Spectrum1D {
        let axis = SpectralAxis::uniform(0.0, 1.0, y.len(), AxisUnit::Wavenumber).unwrap();
        Spectrum1D::new(axis, y).unwrap()
    }

    #[test]
    fn averages_pointwise() {
        let a = spec(vec![1.0, 2.0]);
        let b = spec(vec![3.0, 4.0]);
        assert_eq!(
            average_replicates(&[&a, &b]).unwrap().intensity(),
            &[2.0, 3.0]
        );
        assert_eq!(average_replicates(&[&a]).unwrap(), a);
        assert!(average_replicates(&[]).is_err());
        let other = Spectrum1D::new(
            SpectralAxis::uniform(5.0, 1.0, 2, AxisUnit::Wavenumber).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        assert!(matches!(
            average_replicates(&[&a, &other]),
            Err(Error::AxisMismatch(_))
        ));
    }

    #[test]
    fn average_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reps: Vec<Spectrum1D> = (0..3)
            .map(|_| spec((0..40).map(|_| rng.random_range(-3.0..3.0)).collect()))
            .collect();
        let refs: Vec<&Spectrum1D> = reps.iter().collect();
        let avg = average_replicates(&refs).unwrap();
        for i in 0..40 {
            let mut s = 0.0;
            for r in &reps {
                s += r.intensity()[i];
            }
            assert!((avg.intensity()[i] - s / 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn region_window_is_inclusive() {
        let axis = SpectralAxis::uniform(650.0, 1.0, 3351, AxisUnit::Wavenumber).unwrap();
        let s = Spectrum1D::new(axis, vec![0.0; 3351]).unwrap();
        let r = select_region(&s, 1000.0, 1250.0).unwrap();
        assert_eq!(r.len(), 251);
        assert_eq!(r.axis().first(), 1000.0);
        assert_eq!(r.axis().last(), 1250.0);
        assert_eq!(select_region(&s, 0.0, 5000.0).unwrap(), s);
        assert!(select_region(&s, 5000.0, 6000.0).is_err());
        assert!(select_region(&s, 10.0, 10.0).is_err());
    }

    #[test]
    fn snv_known_values_and_constant_error() {
        let out = snv(&spec(vec![1.0, 2.0, 3.0])).unwrap();
        let k = (1.5f64).sqrt();
        for (o, e) in out.intensity().iter().zip([-k, 0.0, k]) {
            assert!((o - e).abs() < 1e-12);
        }
        assert!(matches!(
            snv(&spec(vec![2.0; 5])),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn normalization_modes() {
        let l2 = normalize(&[3.0, 4.0], NormMode::L2, 1.0).unwrap();
        assert!((l2[0] - 0.6).abs() < 1e-15 && (l2[1] - 0.8).abs() < 1e-15);
        assert_eq!(
            normalize(&[2.0, -2.0], NormMode::Max, 1.0).unwrap(),
            vec![1.0, -1.0]
        );
        let area = normalize(&[1.0, -3.0, 2.5], NormMode::Area, 4.0).unwrap();
        assert!((area.iter().map(|v| v.abs()).sum::<f64>() * 4.0 - 1.0).abs() <= 1e-12);
        assert!(matches!(
            normalize(&[0.0, 0.0], NormMode::L2, 1.0),
            Err(Error::ZeroDenominator("l2"))
        ));
    }

    #[test]
    fn derivative_modes() {
        let s = spec((0..30).map(|i| 3.0 * i as f64 + 1.0).collect());
        let d1 = derivative_block(&s, DerivativeMode::First, SavGolParams::default()).unwrap();
        assert!(d1[5..25].iter().all(|v| (v - 3.0).abs() <= 1e-8));
        let both =
            derivative_block(&s, DerivativeMode::FirstAndSecond, SavGolParams::default()).unwrap();
        assert_eq!(both.len(), 60);
        let d2 = derivative_block(&s, DerivativeMode::Second, SavGolParams::default()).unwrap();
        let direct = savitzky_golay_values(&s, 11, 3, 2).unwrap();
        assert_eq!(d2, direct);
    }

    proptest! {
        #[test]
        fn snv_moments(y in proptest::collection::vec(-100.0f64..100.0, 3..200)) {
            let n = y.len() as f64;
            let m = y.iter().sum::<f64>() / n;
            let sd = (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            prop_assume!(sd > 1e-6);
            let out = snv(&spec(y)).unwrap();
            let om = out.intensity().iter().sum::<f64>() / n;
            let osd = (out.intensity().iter().map(|v| (v - om).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(om.abs() <= 1e-12);
            prop_assert!((osd - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn snv_affine_invariance(
            y in proptest::collection::vec(-10.0f64..10.0, 5..50),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let base = snv(&spec(y.clone()));
            prop_assume!(base.is_ok());
            let moved = snv(&spec(y.iter().map(|v| a * v + b).collect())).unwrap();
            for (p, q) in base.unwrap().intensity().iter().zip(moved.intensity()) {
                prop_assert!((p - q).abs() <= 1e-9);
            }
        }
    }
}
