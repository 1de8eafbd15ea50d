//! Savitzky-Golay smoothing/differentiation and moving-average smoothing.

use nalgebra::DMatrix;

use crate::data::Spectrum1D;
use crate::error::{Error, Result};

/// Relative step deviation above which an axis counts as non-uniform.
pub const UNIFORM_STEP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SavGolParams {
    pub window: usize,
    pub polyorder: usize,
}

impl Default for SavGolParams {
    fn default() -> Self {
        Self {
            window: 11,
            polyorder: 3,
        }
    }
}

/// Filter weights for every evaluation position inside one window.
///
/// `rows[k]` estimates the `deriv`-th derivative (per sample, unscaled) at
/// offset `k - half` from the window centre.
#[derive(Debug, Clone)]
struct SavGolKernel {
    half: usize,
    rows: Vec<Vec<f64>>,
}

impl SavGolKernel {
    fn new(window: usize, polyorder: usize, deriv: usize) -> Result<Self> {
        if window.is_multiple_of(2) || window < 1 {
            return Err(Error::InvalidParameter(format!(
                "window must be odd, got {window}"
            )));
        }
        if window <= polyorder {
            return Err(Error::InvalidParameter(format!(
                "window {window} must exceed polyorder {polyorder}"
            )));
        }
        if deriv > polyorder {
            return Err(Error::InvalidParameter(format!(
                "derivative order {deriv} exceeds polyorder {polyorder}"
            )));
        }
        let half = window / 2;
        let cols = polyorder + 1;
        let a = DMatrix::from_fn(window, cols, |j, k| (j as f64 - half as f64).powi(k as i32));
        let gram = a.tr_mul(&a);
        let inv = gram.try_inverse().ok_or_else(|| {
            Error::IllConditioned("Savitzky-Golay normal matrix is singular".into())
        })?;
        // pinv[k][j]: coefficient k of the fitted polynomial per sample j
        let pinv = inv * a.transpose();

        let rows = (0..window)
            .map(|pos| {
                let t = pos as f64 - half as f64;
                (0..window)
                    .map(|j| {
                        (deriv..cols)
                            .map(|k| {
                                pinv[(k, j)]
                                    * falling_factorial(k, deriv)
                                    * t.powi((k - deriv) as i32)
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { half, rows })
    }

    fn apply(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let w = 2 * self.half + 1;
        let dot = |coef: &[f64], start: usize| -> f64 {
            coef.iter()
                .zip(&y[start..start + w])
                .map(|(c, v)| c * v)
                .sum()
        };
        (0..n)
            .map(|i| {
                if i < self.half {
                    dot(&self.rows[i], 0)
                } else if i + self.half >= n {
                    let start = n - w;
                    dot(&self.rows[i - start], start)
                } else {
                    dot(&self.rows[self.half], i - self.half)
                }
            })
            .collect()
    }
}

fn falling_factorial(k: usize, d: usize) -> f64 {
    ((k - d + 1)..=k).map(|v| v as f64).product()
}

/// Local polynomial smoothing (`deriv = 0`) or differentiation. Boundary
/// samples are evaluated from the polynomial fitted to the first and last
/// full window, so the output keeps the input length.
pub fn savitzky_golay(
    s: &Spectrum1D,
    window: usize,
    polyorder: usize,
    deriv: usize,
) -> Result<Spectrum1D> {
    let out = savitzky_golay_values(s, window, polyorder, deriv)?;
    s.with_intensity(out)
}

pub(crate) fn savitzky_golay_values(
    s: &Spectrum1D,
    window: usize,
    polyorder: usize,
    deriv: usize,
) -> Result<Vec<f64>> {
    if deriv > 2 {
        return Err(Error::InvalidParameter(format!(
            "derivative order must be 0, 1 or 2, got {deriv}"
        )));
    }
    let kernel = SavGolKernel::new(window, polyorder, deriv)?;
    if window > s.len() {
        return Err(Error::InvalidParameter(format!(
            "window {window} longer than signal ({} points)",
            s.len()
        )));
    }
    let step = s.axis().uniform_step(UNIFORM_STEP_TOL)?;
    let mut out = kernel.apply(s.intensity());
    if deriv > 0 {
        let scale = step.powi(deriv as i32);
        for v in &mut out {
            *v /= scale;
        }
    }
    Ok(out)
}

/// Centred running mean. Near the edges the window is truncated to the
/// samples that exist.
pub fn moving_average(s: &Spectrum1D, window: usize) -> Result<Spectrum1D> {
    let y = s.intensity();
    if window.is_multiple_of(2) || window == 0 {
        return Err(Error::InvalidParameter(format!(
            "moving-average window must be odd, got {window}"
        )));
    }
    if window > y.len() {
        return Err(Error::InvalidParameter(format!(
            "moving-average window {window} longer than signal ({} points)",
            y.len()
        )));
    }
    let half = window / 2;
    let mut prefix = Vec::with_capacity(y.len() + 1);
    prefix.push(0.0);
    for v in y {
        prefix.push(prefix.last().unwrap() + v);
    }
    let n = y.len();
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64
        })
        .collect();
    s.with_intensity(out)
}
