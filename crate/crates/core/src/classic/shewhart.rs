//! Memoryless Shewhart chart: alarm when `|X| > k`.

use crate::chain::{MarkovModel, SparseMatrix};
use crate::error::{Error, Result};
use crate::gauss;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShewhartSpec {
    pub k: f64,
}

impl ShewhartSpec {
    pub fn new(k: f64) -> Self {
        Self { k }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(Error::InvalidParameter(format!("Shewhart limit k = {} must be positive", self.k)));
        }
        Ok(())
    }
}

/// `1 / P(|X| > k)`; zero-state, steady-state and every CED coincide.
pub fn shewhart_arl(spec: &ShewhartSpec, delta: f64) -> Result<f64> {
    spec.validate()?;
    Ok(1.0 / gauss::signal_prob(spec.k, delta))
}

/// One-state chain with survival probability `1 - p`.
pub fn shewhart_model(spec: &ShewhartSpec, delta: f64) -> Result<MarkovModel> {
    spec.validate()?;
    let stay = 1.0 - gauss::signal_prob(spec.k, delta);
    MarkovModel::new(SparseMatrix::from_triplets(1, 1, vec![(0, 0, stay)]), vec!["in".into()], vec![1.0], 0, 0)
}
