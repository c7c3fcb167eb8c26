//! Partition-agreement metrics: normalized mutual information and the
//! adjusted Rand index, both computed from a contingency table.
//!
//! Conventions for degenerate inputs: when both partitions are a single
//! cluster they are identical, so NMI and ARI are 1; when exactly one is a
//! single cluster the mutual information vanishes, so NMI is 0 and ARI is
//! evaluated normally (its denominator is nonzero there).

use crate::{Error, Result};

/// Cross-tabulation of two labelings: `counts[i][j]` is the number of points
/// with predicted class `i` and true class `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Tabulate two equal-length class-id vectors.
pub fn contingency(pred: &[usize], truth: &[usize]) -> Result<ContingencyTable> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rows = pred.iter().max().unwrap() + 1;
    let cols = truth.iter().max().unwrap() + 1;
    let mut counts = vec![vec![0u64; cols]; rows];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[p][t] += 1;
    }
    let row_sums: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..cols).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
    Ok(ContingencyTable {
        counts,
        row_sums,
        col_sums,
        total: pred.len() as u64,
    })
}

/// Normalized mutual information in [0, 1].
///
/// `2 * sum_ij n_ij ln(n_ij N / (b_i d_j))` over the sum of the two marginal
/// entropies (in counts). The log base cancels between numerator and
/// denominator; natural log is used. Terms with `n_ij = 0` contribute
/// nothing.
pub fn nmi(table: &ContingencyTable) -> f64 {
    let n = table.total as f64;
    // marginal entropy terms share the ln(N / count) form with the mutual
    // information terms so that identical partitions cancel exactly to 1
    let h_rows: f64 = table
        .row_sums
        .iter()
        .filter(|b| **b > 0)
        .map(|&b| b as f64 * (n / b as f64).ln())
        .sum();
    let h_cols: f64 = table
        .col_sums
        .iter()
        .filter(|d| **d > 0)
        .map(|&d| d as f64 * (n / d as f64).ln())
        .sum();
    let denominator = h_rows + h_cols;
    if denominator == 0.0 {
        // both partitions are a single cluster: identical
        return 1.0;
    }
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        let b = table.row_sums[i] as f64;
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let d = table.col_sums[j] as f64;
                mi += nij as f64 * (nij as f64 * n / (b * d)).ln();
            }
        }
    }
    2.0 * mi / denominator
}

/// Number of unordered pairs within a group of `n`.
fn comb2(n: u64) -> u128 {
    if n < 2 {
        return 0;
    }
    let n = n as u128;
    n * (n - 1) / 2
}

/// Adjusted Rand index in (-1, 1]; 1 for identical partitions, about 0 for
/// independent ones.
///
/// All binomial terms are accumulated in exact integer arithmetic; floating
/// point enters only in the final ratio.
pub fn ari(table: &ContingencyTable) -> f64 {
    let sum_ij: u128 = table
        .counts
        .iter()
        .flat_map(|r| r.iter())
        .map(|&nij| comb2(nij))
        .sum();
    let sum_rows: u128 = table.row_sums.iter().map(|&b| comb2(b)).sum();
    let sum_cols: u128 = table.col_sums.iter().map(|&d| comb2(d)).sum();
    let pairs = comb2(table.total);

    // degenerate: max index equals expected index exactly when
    // 2 * sum_rows * sum_cols == pairs * (sum_rows + sum_cols)
    if pairs == 0 || 2 * sum_rows * sum_cols == pairs * (sum_rows + sum_cols) {
        return 1.0;
    }
    let expected = (sum_rows as f64) * (sum_cols as f64) / (pairs as f64);
    let max_index = (sum_rows as f64 + sum_cols as f64) / 2.0;
    (sum_ij as f64 - expected) / (max_index - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn contingency_tallies() {
        let t = contingency(&[0, 0, 1], &[0, 0, 1]).unwrap();
        assert_eq!(t.counts(), &[vec![2, 0], vec![0, 1]]);

        let t = contingency(&[0, 1], &[1, 0]).unwrap();
        assert_eq!(t.counts(), &[vec![0, 1], vec![1, 0]]);

        let t = contingency(&[0, 0, 1, 1, 2], &[0, 1, 1, 1, 0]).unwrap();
        assert_eq!(t.counts(), &[vec![1, 1], vec![0, 2], vec![1, 0]]);
        assert_eq!(t.row_sums(), &[2, 2, 1]);
        assert_eq!(t.col_sums(), &[2, 3]);
        assert_eq!(t.total(), 5);
    }

    #[test]
    fn contingency_rejects_mismatched_lengths() {
        assert!(contingency(&[0, 1], &[0]).is_err());
        assert!(contingency(&[], &[]).is_err());
    }

    #[test]
    fn nmi_identical_is_exactly_one() {
        for (pred, truth) in [
            (vec![0, 0, 1], vec![0, 0, 1]),
            (vec![0, 1, 2, 2, 1, 0], vec![0, 1, 2, 2, 1, 0]),
            (vec![0usize; 4], vec![0usize; 4]),
        ] {
            let t = contingency(&pred, &truth).unwrap();
            assert_eq!(nmi(&t), 1.0);
        }
    }

    #[test]
    fn nmi_independent_is_zero() {
        let t = contingency(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert_abs_diff_eq!(nmi(&t), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn nmi_matches_direct_evaluation() {
        // contingency [[2, 0], [1, 2]]: mi-sum = 2 ln(10/6) + ln(5/9) + 2 ln(10/6),
        // entropy sum = 2 (2 ln(5/2) + 3 ln(5/3))
        let t = contingency(&[0, 0, 1, 1, 1], &[0, 0, 0, 1, 1]).unwrap();
        let mi = 2.0 * (10.0f64 / 6.0).ln() + (5.0f64 / 9.0).ln() + 2.0 * (10.0f64 / 6.0).ln();
        let den = 2.0 * (2.0 * (5.0f64 / 2.0).ln() + 3.0 * (5.0f64 / 3.0).ln());
        assert_abs_diff_eq!(nmi(&t), 2.0 * mi / den, epsilon = 1e-12);
    }

    #[test]
    fn ari_identical_is_exactly_one() {
        let t = contingency(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(ari(&t), 1.0);
        let t = contingency(&[0, 1], &[0, 1]).unwrap();
        assert_eq!(ari(&t), 1.0);
    }

    #[test]
    fn ari_crossed_partitions_are_negative_or_zero() {
        // all four pair categories balanced: expected = 2*2/6, index = 0
        let t = contingency(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap();
        assert_abs_diff_eq!(ari(&t), -0.5, epsilon = 1e-12);
        assert!(ari(&t) <= 0.0);
    }

    #[test]
    fn degenerate_single_cluster_conventions() {
        // both partitions one cluster: identical, so both metrics are 1
        let t = contingency(&[0, 0, 0], &[0, 0, 0]).unwrap();
        assert_eq!(nmi(&t), 1.0);
        assert_eq!(ari(&t), 1.0);

        // exactly one partition single-cluster: no mutual information
        let t = contingency(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap();
        assert_eq!(nmi(&t), 0.0);
        assert_abs_diff_eq!(ari(&t), 0.0, epsilon = 1e-15);
        let t = contingency(&[0, 1, 0, 1], &[0, 0, 0, 0]).unwrap();
        assert_eq!(nmi(&t), 0.0);
        assert_abs_diff_eq!(ari(&t), 0.0, epsilon = 1e-15);

        // all-singletons vs all-singletons is identical as well
        let t = contingency(&[0, 1, 2], &[0, 1, 2]).unwrap();
        assert_eq!(ari(&t), 1.0);
    }

    #[test]
    fn metrics_are_symmetric_and_permutation_invariant() {
        let pred = [0, 0, 1, 2, 2, 1, 0, 2];
        let truth = [1, 1, 0, 0, 2, 2, 1, 0];
        let t1 = contingency(&pred, &truth).unwrap();
        let t2 = contingency(&truth, &pred).unwrap();
        assert_abs_diff_eq!(nmi(&t1), nmi(&t2), epsilon = 1e-15);
        assert_abs_diff_eq!(ari(&t1), ari(&t2), epsilon = 1e-15);

        // relabel predicted classes 0 -> 2, 1 -> 0, 2 -> 1
        let relabeled: Vec<usize> = pred.iter().map(|&p| [2, 0, 1][p]).collect();
        let t3 = contingency(&relabeled, &truth).unwrap();
        assert_abs_diff_eq!(nmi(&t1), nmi(&t3), epsilon = 1e-15);
        assert_abs_diff_eq!(ari(&t1), ari(&t3), epsilon = 1e-15);
    }
}
