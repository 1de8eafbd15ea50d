//! Baseline estimation: iterative polynomial clipping (ModPoly) and
//! asymmetric least squares with a second-difference penalty.

use nalgebra::{DMatrix, DVector};

use crate::data::Spectrum1D;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyBaselineParams {
    pub degree: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PolyBaselineParams {
    fn default() -> Self {
        Self {
            degree: 3,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsParams {
    pub lambda: f64,
    pub p: f64,
    pub n_iter: usize,
}

impl Default for AlsParams {
    fn default() -> Self {
        Self {
            lambda: 1e5,
            p: 0.01,
            n_iter: 10,
        }
    }
}

/// Subtracts an iteratively clipped least-squares polynomial.
pub fn baseline_polynomial(s: &Spectrum1D, params: PolyBaselineParams) -> Result<Spectrum1D> {
    let base = modpoly_baseline(s.axis().values(), s.intensity(), params)?;
    if is_flat(s.intensity()) {
        return s.with_intensity(vec![0.0; s.len()]);
    }
    let out = s
        .intensity()
        .iter()
        .zip(&base)
        .map(|(y, b)| y - b)
        .collect();
    s.with_intensity(out)
}

/// The fitted ModPoly baseline itself.
pub fn modpoly_baseline(x: &[f64], y: &[f64], params: PolyBaselineParams) -> Result<Vec<f64>> {
    let PolyBaselineParams {
        degree,
        max_iter,
        tol,
    } = params;
    if degree < 1 {
        return Err(Error::InvalidParameter(
            "polynomial degree must be >= 1".into(),
        ));
    }
    let n = y.len();
    if n <= degree + 1 {
        return Err(Error::InvalidParameter(format!(
            "polynomial baseline of degree {degree} needs more than {} points, got {n}",
            degree + 1
        )));
    }
    let q = orthonormal_poly_basis(x, degree)?;
    let project = |v: &[f64]| -> Vec<f64> {
        let v = DVector::from_column_slice(v);
        let coef = q.tr_mul(&v);
        (&q * coef).as_slice().to_vec()
    };

    let mut work = y.to_vec();
    let mut fit = project(&work);
    for _ in 1..max_iter.max(1) {
        for (w, f) in work.iter_mut().zip(&fit) {
            *w = w.min(*f);
        }
        let next = project(&work);
        let change = next
            .iter()
            .zip(&fit)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        fit = next;
        if change < tol {
            break;
        }
    }
    Ok(fit)
}

/// Both baselines reproduce a constant exactly, so a flat input has an
/// identically zero residual. Checking up front keeps rounding noise from
/// leaking into later steps.
fn is_flat(y: &[f64]) -> bool {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0)
}

/// Thin Q factor of the Vandermonde matrix on the axis mapped to [-1, 1].
fn orthonormal_poly_basis(x: &[f64], degree: usize) -> Result<DMatrix<f64>> {
    let n = x.len();
    let (lo, hi) = (x[0], x[n - 1]);
    let half = (hi - lo) / 2.0;
    if !(half > 0.0) {
        return Err(Error::IllConditioned("axis has zero extent".into()));
    }
    let mid = (hi + lo) / 2.0;
    let vander = DMatrix::from_fn(n, degree + 1, |i, k| ((x[i] - mid) / half).powi(k as i32));
    let qr = vander.qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    for k in 0..=degree {
        if r[(k, k)].abs() <= 1e-10 * r00 {
            return Err(Error::IllConditioned(format!(
                "vandermonde column {k} is numerically dependent"
            )));
        }
    }
    Ok(qr.q())
}

/// Result of an asymmetric least squares fit: the baseline and the weights
/// that produced it in the last solve.
#[derive(Debug, Clone, PartialEq)]
pub struct AlsFit {
    pub baseline: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Subtracts the ALS baseline.
pub fn baseline_als(s: &Spectrum1D, params: AlsParams) -> Result<Spectrum1D> {
    let fit = als_fit(s.intensity(), params)?;
    if is_flat(s.intensity()) {
        return s.with_intensity(vec![0.0; s.len()]);
    }
    let out = s
        .intensity()
        .iter()
        .zip(&fit.baseline)
        .map(|(y, z)| y - z)
        .collect();
    s.with_intensity(out)
}

pub fn als_fit(y: &[f64], params: AlsParams) -> Result<AlsFit> {
    let AlsParams { lambda, p, n_iter } = params;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ALS lambda must be > 0, got {lambda}"
        )));
    }
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "ALS asymmetry p must lie in (0, 0.5), got {p}"
        )));
    }
    if n_iter < 1 {
        return Err(Error::InvalidParameter(
            "ALS needs at least one iteration".into(),
        ));
    }
    if y.len() < 3 {
        return Err(Error::InvalidParameter(
            "ALS needs at least 3 points".into(),
        ));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("ALS input {v}")));
    }

    let n = y.len();
    let mut w = vec![1.0; n];
    let mut z = Vec::new();
    for it in 0..n_iter {
        let rhs: Vec<f64> = w.iter().zip(y).map(|(w, y)| w * y).collect();
        let system = Pentadiagonal::penalized(&w, lambda);
        z = system.solve(&rhs)?;
        if it + 1 < n_iter {
            for i in 0..n {
                w[i] = if y[i] > z[i] { p } else { 1.0 - p };
            }
        }
    }
    Ok(AlsFit {
        baseline: z,
        weights: w,
    })
}

/// Symmetric pentadiagonal matrix stored as its main diagonal and the two
/// upper bands.
#[derive(Debug, Clone, PartialEq)]
pub struct Pentadiagonal {
    pub diag: Vec<f64>,
    pub off1: Vec<f64>,
    pub off2: Vec<f64>,
}

impl Pentadiagonal {
    /// `diag(w) + lambda * D'D` with `D` the second-difference operator.
    pub fn penalized(w: &[f64], lambda: f64) -> Self {
        let n = w.len();
        let mut diag = vec![0.0; n];
        let mut off1 = vec![0.0; n.saturating_sub(1)];
        let mut off2 = vec![0.0; n.saturating_sub(2)];
        // accumulate each difference row [1, -2, 1] at columns (r, r+1, r+2)
        for r in 0..n.saturating_sub(2) {
            diag[r] += 1.0;
            diag[r + 1] += 4.0;
            diag[r + 2] += 1.0;
            off1[r] -= 2.0;
            off1[r + 1] -= 2.0;
            off2[r] += 1.0;
        }
        for i in 0..n {
            diag[i] = w[i] + lambda * diag[i];
        }
        for v in off1.iter_mut().chain(off2.iter_mut()) {
            *v *= lambda;
        }
        Self { diag, off1, off2 }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i + 1 < n {
                acc += self.off1[i] * v[i + 1];
            }
            if i + 2 < n {
                acc += self.off2[i] * v[i + 2];
            }
            if i >= 1 {
                acc += self.off1[i - 1] * v[i - 1];
            }
            if i >= 2 {
                acc += self.off2[i - 2] * v[i - 2];
            }
            out[i] = acc;
        }
        out
    }

    /// Banded LDL' factorization followed by forward and back substitution.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut d = vec![0.0; n];
        let mut l1 = vec![0.0; n];
        let mut l2 = vec![0.0; n];
        for i in 0..n {
            let mut di = self.diag[i];
            if i >= 1 {
                di -= l1[i - 1] * l1[i - 1] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i - 2] * l2[i - 2] * d[i - 2];
            }
            if !(di > 0.0) {
                return Err(Error::IllConditioned(format!(
                    "penalized system not positive definite at row {i}"
                )));
            }
            d[i] = di;
            if i + 1 < n {
                let mut a = self.off1[i];
                if i >= 1 {
                    a -= l2[i - 1] * l1[i - 1] * d[i - 1];
                }
                l1[i] = a / di;
            }
            if i + 2 < n {
                l2[i] = self.off2[i] / di;
            }
        }

        let mut u = b.to_vec();
        for i in 0..n {
            if i >= 1 {
                u[i] -= l1[i - 1] * u[i - 1];
            }
            if i >= 2 {
                u[i] -= l2[i - 2] * u[i - 2];
            }
        }
        for i in 0..n {
            u[i] /= d[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                u[i] -= l1[i] * u[i + 1];
            }
            if i + 2 < n {
                u[i] -= l2[i] * u[i + 2];
            }
        }
        Ok(u)
    }
}
