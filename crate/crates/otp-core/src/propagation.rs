//! The incremental propagation loop.
//!
//! One iteration: solve transport between the current labeled and unlabeled
//! point clouds, column-normalize the plan into bipartite affinities, sum
//! affinities per class into a row-stochastic label matrix, score each
//! unlabeled point by one minus its normalized Shannon entropy, and move
//! every point whose score clears the threshold to the labeled side with its
//! argmax class. When no point clears the threshold, the rescue rule lowers
//! it to the maximal score for exactly one iteration, admitting the most
//! certain point(s); the configured threshold applies again afterwards. Each
//! iteration labels at least one point, so the loop ends in at most `u`
//! iterations.
//!
//! Labels given as input are never revisited: transport only connects
//! labeled to unlabeled points, so mass (and hence labels) flows strictly
//! across the partition.

use ndarray::Array2;
use serde::Serialize;

use crate::sinkhorn::{sinkhorn_with_start, squared_euclidean_cost, SinkhornConfig, TransportPlan};
use crate::trace::{IterationRecord, PropagationTrace};
use crate::{validate_partition, Dataset, DiscreteMeasure, Error, PartitionState, Result};

/// Column sums below this signal a numerically dead column upstream.
const COLUMN_FLOOR: f64 = 1e-300;

/// Propagation knobs: the certainty threshold and the solver configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OtpConfig {
    /// Certainty threshold in [0, 1]. Higher values admit fewer, more
    /// certain pseudo-labels per iteration.
    pub alpha: f64,
    pub sinkhorn: SinkhornConfig,
}

impl Default for OtpConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

impl OtpConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Column-stochastic bipartite edge weights: column `j` is a probability
/// distribution over labeled points for unlabeled point `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    weights: Array2<f64>,
}

impl AffinityMatrix {
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }
}

/// Row-stochastic class probabilities: row `j` is the distribution of
/// unlabeled point `j` over the classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    probs: Array2<f64>,
}

impl LabelMatrix {
    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    /// Class with the highest probability in row `j`; ties break toward the
    /// lowest class id.
    pub fn argmax_row(&self, j: usize) -> usize {
        let row = self.probs.row(j);
        let mut best = 0;
        let mut best_p = row[0];
        for (k, p) in row.iter().enumerate().skip(1) {
            if *p > best_p {
                best = k;
                best_p = *p;
            }
        }
        best
    }
}

/// Certainty per unlabeled point, each in [0, 1]: 1 for a one-hot class
/// distribution, 0 for the uniform one.
#[derive(Debug, Clone, PartialEq)]
pub struct CertaintyScores {
    scores: Vec<f64>,
}

impl CertaintyScores {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Column-normalize a transport plan into bipartite affinities.
///
/// `w[i][j] = plan[i][j] / sum_i plan[i][j]`. Fails with
/// [`Error::DegenerateColumn`] if a column carries (near-)zero mass, which a
/// converged log-domain solve cannot produce.
pub fn affinity_from_plan(plan: &TransportPlan) -> Result<AffinityMatrix> {
    let p = plan.plan();
    let (l, u) = p.dim();
    let mut col_sums = vec![0.0; u];
    for row in p.outer_iter() {
        for (j, v) in row.iter().enumerate() {
            col_sums[j] += v;
        }
    }
    if let Some(j) = col_sums.iter().position(|s| *s < COLUMN_FLOOR) {
        return Err(Error::DegenerateColumn(j));
    }
    let mut weights = p.clone();
    for i in 0..l {
        for j in 0..u {
            weights[(i, j)] /= col_sums[j];
        }
    }
    Ok(AffinityMatrix { weights })
}

/// Sum each unlabeled point's affinities per class.
///
/// `u[j][k] = sum over labeled points i of class k of w[i][j]`. Rows sum to
/// 1 because the affinity columns do and the labeled points partition into
/// classes. The affinity rows must follow `state.labeled_idx` order.
pub fn label_matrix(affinity: &AffinityMatrix, state: &PartitionState, k: usize) -> LabelMatrix {
    let w = affinity.weights();
    let (l, u) = w.dim();
    assert_eq!(l, state.n_labeled(), "affinity rows must match labeled set");
    let mut probs = Array2::zeros((u, k));
    for (i, &class) in state.labels().iter().enumerate() {
        for j in 0..u {
            probs[(j, class)] += w[(i, j)];
        }
    }
    LabelMatrix { probs }
}

/// Certainty of each class distribution: `1 - H(row) / log2(K)` with the
/// Shannon entropy in bits and `0 log 0 = 0`. Clamped to [0, 1] against
/// floating-point drift.
pub fn certainty_scores(labels: &LabelMatrix) -> CertaintyScores {
    let k = labels.probs().ncols();
    assert!(k >= 2, "certainty needs at least two classes");
    let log2_k = (k as f64).log2();
    let scores = labels
        .probs()
        .outer_iter()
        .map(|row| {
            let h: f64 = row
                .iter()
                .filter(|p| **p > 0.0)
                .map(|p| -p * p.log2())
                .sum();
            (1.0 - h / log2_k).clamp(0.0, 1.0)
        })
        .collect();
    CertaintyScores { scores }
}

/// Positions (into the unlabeled list) whose score strictly exceeds `alpha`,
/// paired with their argmax class. An empty result is valid and triggers the
/// rescue rule in the loop.
pub fn assign_pseudo_labels(
    labels: &LabelMatrix,
    scores: &CertaintyScores,
    alpha: f64,
) -> Vec<(usize, usize)> {
    assert_eq!(labels.probs().nrows(), scores.scores().len());
    scores
        .scores()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > alpha)
        .map(|(j, _)| (j, labels.argmax_row(j)))
        .collect()
}

/// The rescue rule: lower the threshold by the smallest slack,
/// `alpha - max(scores)`, so it lands exactly on the maximal score, and
/// return every position attaining it. The caller labels exactly these
/// points and then applies the configured threshold again.
pub fn alpha_rescue(scores: &CertaintyScores, alpha: f64) -> Vec<usize> {
    assert!(!scores.scores().is_empty(), "rescue needs at least one score");
    debug_assert!(
        scores.scores().iter().all(|s| *s <= alpha),
        "rescue invoked although some score exceeds alpha"
    );
    let max = scores
        .scores()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    scores
        .scores()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s >= max)
        .map(|(j, _)| j)
        .collect()
}

/// One pseudo-label decision, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    /// Dataset row that received the label.
    pub index: usize,
    pub class_id: usize,
    /// Certainty score at the moment of assignment.
    pub certainty: f64,
    /// Outer iteration (1-based) that assigned it.
    pub iteration: usize,
}

/// Everything a finished run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct OtpOutcome {
    /// Final state: every point labeled, input labels untouched.
    pub state: PartitionState,
    pub trace: PropagationTrace,
    /// Pseudo-label decisions in assignment order.
    pub assignments: Vec<Assignment>,
}

/// Run the full propagation loop until every point is labeled.
///
/// The seed state is validated first; the returned trace satisfies the
/// invariants of [`PropagationTrace::check`] by construction.
pub fn run_otp(dataset: &Dataset, seed_state: PartitionState, cfg: &OtpConfig) -> Result<OtpOutcome> {
    cfg.validate()?;
    let mut state = validate_partition(dataset, seed_state)?;
    let k = dataset.n_classes();
    let mut trace = PropagationTrace::default();
    let mut assignments = Vec::with_capacity(state.n_unlabeled());

    // the column duals of the surviving unlabeled points warm-start the next
    // solve (rescaled when the cost normalization changes); the endgame
    // problems differ by a few moved points, so each re-solve is cheap
    let mut warm: Option<(Vec<f64>, f64)> = None;

    let mut t = 0;
    while state.n_unlabeled() > 0 {
        t += 1;
        let cost = squared_euclidean_cost(dataset, &state)?;
        let a = DiscreteMeasure::uniform(state.n_labeled());
        let b = DiscreteMeasure::uniform(state.n_unlabeled());
        let start: Option<Vec<f64>> = warm.as_ref().map(|(psi, prev_scale)| {
            let ratio = prev_scale / cost.scale();
            psi.iter().map(|p| p * ratio).collect()
        });
        let plan = sinkhorn_with_start(&cost, &a, &b, &cfg.sinkhorn, start.as_deref())?;
        let affinity = affinity_from_plan(&plan)?;
        let labels = label_matrix(&affinity, &state, k);
        let scores = certainty_scores(&labels);

        let mut picked = assign_pseudo_labels(&labels, &scores, cfg.alpha);
        let (alpha_effective, rescue_applied) = if picked.is_empty() {
            let positions = alpha_rescue(&scores, cfg.alpha);
            let max = scores.scores()[positions[0]];
            picked = positions
                .into_iter()
                .map(|j| (j, labels.argmax_row(j)))
                .collect();
            (max, true)
        } else {
            (cfg.alpha, false)
        };

        for &(j, class_id) in &picked {
            assignments.push(Assignment {
                index: state.unlabeled_idx()[j],
                class_id,
                certainty: scores.scores()[j],
                iteration: t,
            });
        }
        let mut taken = vec![false; state.n_unlabeled()];
        for &(j, _) in &picked {
            taken[j] = true;
        }
        warm = Some((
            plan.col_potential()
                .iter()
                .zip(&taken)
                .filter(|(_, t)| !**t)
                .map(|(p, _)| *p)
                .collect(),
            cost.scale(),
        ));
        state = state.with_pseudo_labels(&picked);
        trace.iterations.push(IterationRecord {
            t,
            labeled: state.n_labeled(),
            unlabeled: state.n_unlabeled(),
            newly_labeled: picked.len(),
            alpha_effective,
            rescue_applied,
        });
    }

    Ok(OtpOutcome {
        state,
        trace,
        assignments,
    })
}
