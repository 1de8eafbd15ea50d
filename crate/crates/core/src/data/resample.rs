use crate::error::{Error, Result};

use super::{SpectralAxis, Spectrum1D};

// Relative slack for grid endpoints produced by accumulated floating error.
const EDGE_TOL: f64 = 1e-9;

/// Linear interpolation of `s` onto `target`. The target must lie inside
/// the source range; no extrapolation is performed.
pub fn resample_to_grid(s: &Spectrum1D, target: &SpectralAxis) -> Result<Spectrum1D> {
    let src = s.axis().values();
    let y = s.intensity();
    let (src_lo, src_hi) = (src[0], src[src.len() - 1]);
    let slack = EDGE_TOL * (src_hi - src_lo).abs().max(1.0);
    if target.first() < src_lo - slack || target.last() > src_hi + slack {
        return Err(Error::OutOfRange {
            lo: target.first(),
            hi: target.last(),
            src_lo,
            src_hi,
        });
    }

    let mut out = Vec::with_capacity(target.len());
    let mut j = 0;
    for &x in target.values() {
        let x = x.clamp(src_lo, src_hi);
        while j + 2 < src.len() && src[j + 1] < x {
            j += 1;
        }
        // src[j] <= x <= src[j+1] (or x beyond the last node handled by clamp)
        let (x0, x1) = (src[j], src[j + 1]);
        let v = if x == x0 {
            y[j]
        } else if x == x1 {
            y[j + 1]
        } else {
            y[j] + (y[j + 1] - y[j]) * (x - x0) / (x1 - x0)
        };
        out.push(v);
    }
    Spectrum1D::new(target.clone(), out)
}

/// Grid covering the intersection of all ranges, spaced at the coarsest
/// mean step observed.
pub fn common_grid(axes: &[&SpectralAxis]) -> Result<SpectralAxis> {
    let first = axes
        .first()
        .ok_or_else(|| Error::Empty("no axes to intersect".into()))?;
    let lo = axes
        .iter()
        .map(|a| a.first())
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = axes.iter().map(|a| a.last()).fold(f64::INFINITY, f64::min);
    let step = axes.iter().map(|a| a.mean_step()).fold(0.0_f64, f64::max);
    if !(hi > lo) {
        return Err(Error::InvalidAxis(format!(
            "axes do not overlap: intersection [{lo}, {hi}]"
        )));
    }
    let n = ((hi - lo) / step + EDGE_TOL).floor() as usize + 1;
    let values: Vec<f64> = (0..n).map(|i| (lo + i as f64 * step).min(hi)).collect();
    SpectralAxis::new(values, first.unit())
}
