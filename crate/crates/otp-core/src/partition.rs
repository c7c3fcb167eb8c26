//! The evolving labeled/unlabeled split of a dataset.

use serde::Serialize;

use crate::{Dataset, Error, Result};

/// Whether a labeled point was given as input or pseudo-labeled by the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelOrigin {
    Seed,
    Pseudo,
}

impl std::fmt::Display for LabelOrigin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelOrigin::Seed => write!(f, "seed"),
            LabelOrigin::Pseudo => write!(f, "pseudo"),
        }
    }
}

/// Ordered index lists partitioning a dataset into labeled and unlabeled
/// halves, with a class id per labeled index.
///
/// Index lists are ordered (not sets) so that matrix row/column positions are
/// reproducible across runs. A state is immutable once built; the propagation
/// loop advances by constructing a successor with [`PartitionState::with_pseudo_labels`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionState {
    labeled_idx: Vec<usize>,
    labels: Vec<usize>,
    origins: Vec<LabelOrigin>,
    unlabeled_idx: Vec<usize>,
}

impl PartitionState {
    /// Build a seed state; every labeled point gets [`LabelOrigin::Seed`].
    pub fn new(labeled_idx: Vec<usize>, labels: Vec<usize>, unlabeled_idx: Vec<usize>) -> Self {
        let origins = vec![LabelOrigin::Seed; labeled_idx.len()];
        Self {
            labeled_idx,
            labels,
            origins,
            unlabeled_idx,
        }
    }

    pub fn labeled_idx(&self) -> &[usize] {
        &self.labeled_idx
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn origins(&self) -> &[LabelOrigin] {
        &self.origins
    }

    pub fn unlabeled_idx(&self) -> &[usize] {
        &self.unlabeled_idx
    }

    pub fn n_labeled(&self) -> usize {
        self.labeled_idx.len()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled_idx.len()
    }

    /// The label assigned to dataset row `index`, if the row is labeled.
    pub fn label_of(&self, index: usize) -> Option<usize> {
        self.labeled_idx
            .iter()
            .position(|&i| i == index)
            .map(|p| self.labels[p])
    }

    /// Successor state: the unlabeled points at `positions` (positions into
    /// `unlabeled_idx`, strictly increasing) move to the labeled side with
    /// the given classes and [`LabelOrigin::Pseudo`].
    pub fn with_pseudo_labels(&self, assignments: &[(usize, usize)]) -> PartitionState {
        debug_assert!(assignments.windows(2).all(|w| w[0].0 < w[1].0));
        let mut labeled_idx = self.labeled_idx.clone();
        let mut labels = self.labels.clone();
        let mut origins = self.origins.clone();
        let mut take = vec![false; self.unlabeled_idx.len()];
        for &(pos, class) in assignments {
            labeled_idx.push(self.unlabeled_idx[pos]);
            labels.push(class);
            origins.push(LabelOrigin::Pseudo);
            take[pos] = true;
        }
        let unlabeled_idx = self
            .unlabeled_idx
            .iter()
            .zip(&take)
            .filter(|(_, taken)| !**taken)
            .map(|(&i, _)| i)
            .collect();
        PartitionState {
            labeled_idx,
            labels,
            origins,
            unlabeled_idx,
        }
    }
}

/// Check every partition invariant against a dataset, returning the state
/// unchanged when all hold.
///
/// Checks: labeled/unlabeled disjointness, full cover of `0..N`, index and
/// label ranges, one label per labeled index, and the representative
/// requirement: every class needs at least one labeled instance, since a
/// class with no representative can never receive probability mass.
pub fn validate_partition(dataset: &Dataset, state: PartitionState) -> Result<PartitionState> {
    let n = dataset.n_points();
    let k = dataset.n_classes();
    if state.labels.len() != state.labeled_idx.len() {
        return Err(Error::LengthMismatch(
            state.labels.len(),
            state.labeled_idx.len(),
        ));
    }
    let mut seen = vec![false; n];
    for &i in state.labeled_idx.iter().chain(state.unlabeled_idx.iter()) {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        if seen[i] {
            return Err(Error::IndexOverlap(i));
        }
        seen[i] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::IncompleteCover(missing, n));
    }
    let mut represented = vec![false; k];
    for &label in &state.labels {
        if label >= k {
            return Err(Error::LabelOutOfRange { label, classes: k });
        }
        represented[label] = true;
    }
    if let Some(class) = represented.iter().position(|r| !r) {
        return Err(Error::MissingRepresentative(class));
    }
    Ok(state)
}
