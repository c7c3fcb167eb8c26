//! Datasets: a feature matrix with optional per-row class labels.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::{Error, Result};

/// An in-memory tabular dataset.
///
/// Rows are points in feature space, columns are features. Each row may carry
/// a class id referring into `class_names`; a missing label marks the row as
/// unlabeled ground truth (or simply unknown).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<Option<usize>>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Build a dataset, checking shape and label invariants.
    ///
    /// Requires at least 2 points, 1 feature, and 2 classes; every feature
    /// entry must be finite and every present label id must be below the
    /// class count.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n < 2 || d < 1 {
            return Err(Error::InvalidConfig(format!(
                "dataset must have N >= 2 and d >= 1, got {n}x{d}"
            )));
        }
        if class_names.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {}",
                class_names.len()
            )));
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch(labels.len(), n));
        }
        for (row, x) in features.outer_iter().enumerate() {
            for (column, v) in x.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteFeature { row, column });
                }
            }
        }
        for label in labels.iter().flatten() {
            if *label >= class_names.len() {
                return Err(Error::LabelOutOfRange {
                    label: *label,
                    classes: class_names.len(),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            class_names,
        })
    }

    /// Number of points (rows).
    pub fn n_points(&self) -> usize {
        self.features.nrows()
    }

    /// Feature-space dimension (columns).
    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Number of classes.
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn feature_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Ground-truth label of row `i`, if present.
    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// True when every row carries a label.
    pub fn fully_labeled(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_name(&self, k: usize) -> &str {
        &self.class_names[k]
    }

    /// Replace the feature matrix, keeping labels and class names.
    /// Used by standardization; the new matrix must keep the shape.
    pub(crate) fn with_features(&self, features: Array2<f64>) -> Self {
        assert_eq!(features.dim(), self.features.dim());
        Self {
            features,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        }
    }
}
