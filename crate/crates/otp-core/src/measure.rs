//! Discrete probability measures used as transport marginals.

use crate::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// A probability vector: nonnegative weights summing to 1 (within 1e-12).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig("measure must be non-empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(
                "measure weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidConfig(format!(
                "measure weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    /// The uniform measure on `n` atoms.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform measure needs at least one atom");
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
