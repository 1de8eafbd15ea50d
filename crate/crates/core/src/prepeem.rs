//! EEM fluorescence preprocessing: blank subtraction, physical-validity
//! masking, Rayleigh scatter removal and row-major flattening.

use crate::data::EEMatrix;
use crate::error::{Error, Result};

/// Half width (nm) of the window masked around each Rayleigh diagonal.
pub const RAYLEIGH_HALF_WINDOW: f64 = 25.0;

pub fn subtract_blank(sample: &EEMatrix, blank: &EEMatrix) -> Result<EEMatrix> {
    if !sample.same_axes(blank) {
        return Err(Error::AxisMismatch(
            "blank axes differ from sample axes".into(),
        ));
    }
    let grid = sample
        .grid()
        .iter()
        .zip(blank.grid())
        .map(|(s, b)| s - b)
        .collect();
    Ok(EEMatrix::from_parts(
        sample.ex_axis().clone(),
        sample.em_axis().clone(),
        grid,
        sample.mask().to_vec(),
    ))
}

/// Zeroes and flags every cell selected by `rule(ex, em)`.
fn mask_where(m: &EEMatrix, rule: impl Fn(f64, f64) -> bool) -> EEMatrix {
    let (_, n_em) = m.shape();
    let mut grid = m.grid().to_vec();
    let mut mask = m.mask().to_vec();
    for (i, &ex) in m.ex_axis().values().iter().enumerate() {
        for (j, &em) in m.em_axis().values().iter().enumerate() {
            if rule(ex, em) {
                let k = i * n_em + j;
                grid[k] = 0.0;
                mask[k] = true;
            }
        }
    }
    EEMatrix::from_parts(m.ex_axis().clone(), m.em_axis().clone(), grid, mask)
}

/// Emission shorter than excitation is unphysical: `em < ex` is zeroed.
pub fn mask_physical(m: &EEMatrix) -> EEMatrix {
    mask_where(m, |ex, em| em < ex)
}

/// Removes first- and second-order Rayleigh scatter: cells within
/// `half_window` nm (inclusive) of `em = ex` or `em = 2 ex`.
pub fn remove_rayleigh(m: &EEMatrix, half_window: f64) -> Result<EEMatrix> {
    if !(half_window > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Rayleigh half window must be > 0, got {half_window}"
        )));
    }
    Ok(mask_where(m, |ex, em| {
        in_rayleigh_band(ex, em, half_window)
    }))
}

pub fn in_rayleigh_band(ex: f64, em: f64, half_window: f64) -> bool {
    (em - ex).abs() <= half_window || (em - 2.0 * ex).abs() <= half_window
}

/// Row-major (excitation-major) features; masked cells are emitted as 0.
pub fn flatten(m: &EEMatrix) -> Vec<f64> {
    m.grid()
        .iter()
        .zip(m.mask())
        .map(|(&v, &masked)| if masked { 0.0 } else { v })
        .collect()
}

/// `"(ex,em)"` labels in the same order as [`flatten`].
pub fn feature_names(m: &EEMatrix) -> Vec<String> {
    let mut names = Vec::with_capacity(m.grid().len());
    for ex in m.ex_axis().values() {
        for em in m.em_axis().values() {
            names.push(format!("({ex},{em})"));
        }
    }
    names
}

/// Inverse of [`flatten`] for unmasked data on the given axes.
pub fn reshape(features: &[f64], template: &EEMatrix) -> Result<EEMatrix> {
    EEMatrix::new(
        template.ex_axis().clone(),
        template.em_axis().clone(),
        features.to_vec(),
    )
}

/// Blank subtraction, physical mask, Rayleigh removal, flatten.
pub fn eem_pipeline(sample: &EEMatrix, blank: &EEMatrix) -> Result<Vec<f64>> {
    eem_pipeline_with(sample, blank, RAYLEIGH_HALF_WINDOW)
}

pub fn eem_pipeline_with(
    sample: &EEMatrix,
    blank: &EEMatrix,
    half_window: f64,
) -> Result<Vec<f64>> {
    let m = subtract_blank(sample, blank)?;
    let m = mask_physical(&m);
    let m = remove_rayleigh(&m, half_window)?;
    Ok(flatten(&m))
}
