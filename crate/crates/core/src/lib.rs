//! Multimodal spectroscopic classification pipeline: FTIR/Raman/EEM
//! preprocessing, low-level data fusion, gradient-boosted trees and
//! grouped cross-validated evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fusion;
pub mod gbdt;
pub mod prep1d;
pub mod prepeem;
pub mod search;
pub mod synth;

pub use error::{Error, Result};
