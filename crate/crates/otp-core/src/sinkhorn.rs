//! Entropic-regularized discrete optimal transport.
//!
//! [`sinkhorn`] solves `min <P, C> - eps H(P)` over couplings of two discrete
//! measures with a log-domain Sinkhorn-Knopp iteration: dual potentials are
//! updated through log-sum-exp instead of the textbook `u = a / (K v)`,
//! `v = b / (K^T u)` scalings, whose kernel `K = exp(-C / eps)` underflows
//! once `eps` is small relative to the costs. An epsilon-scaling warm start
//! (anneal from a large regularization down to the target) keeps the
//! iteration count manageable for sharp plans; the fixed point is the same.
//!
//! [`exact_ot_bruteforce`] enumerates permutation plans for small square
//! uniform instances, where the unregularized optimum is attained at a
//! permutation matrix. It exists as an oracle for the solver.

use ndarray::Array2;

use crate::{Dataset, DiscreteMeasure, Error, PartitionState, Result};

/// Exponents this far below the row maximum contribute less than one ulp to
/// a log-sum-exp accumulator and are skipped.
const LSE_CUTOFF: f64 = -60.0;

/// Epsilon-scaling warm start: anneal stages start here (on max-normalized
/// costs) and shrink by `STAGE_SHRINK` until the target is reached.
const STAGE_START: f64 = 0.25;
const STAGE_SHRINK: f64 = 4.0;
const STAGE_TOL: f64 = 1e-3;
const STAGE_MAX_ITERS: usize = 100;

/// Iterations between feasibility checks.
const CHECK_EVERY: usize = 10;

/// A nonnegative cost matrix normalized so its largest entry is 1.
///
/// Normalizing by the maximum makes one regularization value meaningful
/// across datasets of different scales, and makes the whole pipeline
/// invariant to rescaling the raw costs. `scale` records the divisor.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    costs: Array2<f64>,
    scale: f64,
}

impl CostMatrix {
    /// Validate and normalize a raw cost matrix.
    ///
    /// Entries must be finite and nonnegative. An all-zero matrix is kept
    /// as-is with `scale = 1`.
    pub fn from_raw(mut costs: Array2<f64>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::InvalidConfig("empty cost matrix".into()));
        }
        let mut max = 0.0f64;
        for (idx, c) in costs.iter().enumerate() {
            if !c.is_finite() || *c < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "cost entry {idx} is {c}, expected finite and nonnegative"
                )));
            }
            max = max.max(*c);
        }
        let scale = if max > 0.0 { max } else { 1.0 };
        if max > 0.0 {
            costs.mapv_inplace(|c| c / max);
        }
        Ok(Self { costs, scale })
    }

    /// The normalized costs (maximum entry 1 unless all-zero).
    pub fn costs(&self) -> &Array2<f64> {
        &self.costs
    }

    /// The maximum raw entry the matrix was divided by (1 for all-zero).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn n_rows(&self) -> usize {
        self.costs.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.costs.ncols()
    }
}

/// Solver knobs. `epsilon` applies to the normalized cost matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// L1 marginal violation below which a plan counts as converged.
    pub feasibility_tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 3e-4,
            max_iterations: 200_000,
            feasibility_tol: 1e-5,
        }
    }
}

impl SinkhornConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.feasibility_tol > 0.0 && self.feasibility_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "feasibility_tol must be positive, got {}",
                self.feasibility_tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// A coupling of two discrete measures: nonnegative matrix whose row sums
/// match the row marginal and column sums match the column marginal (within
/// the solver's feasibility tolerance). Entries of a converged Sinkhorn plan
/// are strictly positive at the default regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    plan: Array2<f64>,
    row_marginal: DiscreteMeasure,
    col_marginal: DiscreteMeasure,
    transport_cost: f64,
    iterations_used: usize,
    col_potential: Vec<f64>,
}

impl TransportPlan {
    pub fn plan(&self) -> &Array2<f64> {
        &self.plan
    }

    pub fn row_marginal(&self) -> &DiscreteMeasure {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &DiscreteMeasure {
        &self.col_marginal
    }

    /// Frobenius inner product of the plan with the normalized costs.
    pub fn transport_cost(&self) -> f64 {
        self.transport_cost
    }

    pub fn iterations_used(&self) -> usize {
        self.iterations_used
    }

    /// Column dual potential divided by epsilon, on the normalized costs.
    /// Feeding it to [`sinkhorn_with_start`] warm-starts a related solve.
    pub fn col_potential(&self) -> &[f64] {
        &self.col_potential
    }

    #[cfg(test)]
    pub(crate) fn from_parts(
        plan: Array2<f64>,
        row_marginal: DiscreteMeasure,
        col_marginal: DiscreteMeasure,
    ) -> Self {
        let col_potential = vec![0.0; plan.ncols()];
        Self {
            plan,
            row_marginal,
            col_marginal,
            transport_cost: 0.0,
            iterations_used: 0,
            col_potential,
        }
    }

    /// L1 violations of the (row, column) marginal constraints.
    pub fn marginal_violations(&self) -> (f64, f64) {
        let a = self.row_marginal.weights();
        let b = self.col_marginal.weights();
        let row: f64 = self
            .plan
            .outer_iter()
            .zip(a)
            .map(|(r, ai)| (r.sum() - ai).abs())
            .sum();
        let mut col_sums = vec![0.0; b.len()];
        for r in self.plan.outer_iter() {
            for (j, v) in r.iter().enumerate() {
                col_sums[j] += v;
            }
        }
        let col: f64 = col_sums.iter().zip(b).map(|(s, bj)| (s - bj).abs()).sum();
        (row, col)
    }
}

/// Squared-Euclidean costs between the labeled and unlabeled points of a
/// partition, normalized by the maximum entry.
///
/// `costs[i][j] = ||x_labeled[i] - x_unlabeled[j]||^2 / max`.
pub fn squared_euclidean_cost(dataset: &Dataset, state: &PartitionState) -> Result<CostMatrix> {
    let l = state.n_labeled();
    let u = state.n_unlabeled();
    let mut raw = Array2::zeros((l, u));
    for (i, &li) in state.labeled_idx().iter().enumerate() {
        let xi = dataset.feature_row(li);
        for (j, &uj) in state.unlabeled_idx().iter().enumerate() {
            let xj = dataset.feature_row(uj);
            let mut d2 = 0.0;
            for (p, q) in xi.iter().zip(xj.iter()) {
                let diff = p - q;
                d2 += diff * diff;
            }
            raw[(i, j)] = d2;
        }
    }
    CostMatrix::from_raw(raw)
}

/// Log-sum-exp over `values` given their precomputed maximum.
///
/// Terms more than `LSE_CUTOFF` below the maximum are skipped: they are
/// smaller than one ulp of the leading term even summed over millions of
/// entries.
#[inline]
fn lse_given_max(max: f64, values: impl Iterator<Item = f64>) -> f64 {
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for v in values {
        let d = v - max;
        if d >= LSE_CUTOFF {
            sum += d.exp();
        }
    }
    max + sum.ln()
}

struct LogSolver<'a> {
    chat: Vec<f64>, // costs / eps_stage, row-major l x u
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    phi: Vec<f64>, // row potential / eps_stage
    psi: Vec<f64>, // col potential / eps_stage
    l: usize,
    u: usize,
    a: &'a [f64],
    b: &'a [f64],
}

impl<'a> LogSolver<'a> {
    fn new(cost: &CostMatrix, a: &'a [f64], b: &'a [f64], eps: f64) -> Self {
        let (l, u) = cost.costs().dim();
        let chat = cost.costs().iter().map(|c| c / eps).collect();
        let ln0 = |w: &f64| if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
        Self {
            chat,
            log_a: a.iter().map(ln0).collect(),
            log_b: b.iter().map(ln0).collect(),
            phi: vec![0.0; l],
            psi: vec![0.0; u],
            l,
            u,
            a,
            b,
        }
    }

    /// Move to a sharper stage epsilon: scaled potentials and scaled costs
    /// grow by the same ratio.
    fn rescale(&mut self, ratio: f64) {
        for v in self.chat.iter_mut() {
            *v *= ratio;
        }
        for v in self.phi.iter_mut() {
            *v *= ratio;
        }
        for v in self.psi.iter_mut() {
            *v *= ratio;
        }
    }

    /// Row update: make every row sum exact given the current `psi`.
    fn update_rows(&mut self) {
        for i in 0..self.l {
            if self.log_a[i] == f64::NEG_INFINITY {
                self.phi[i] = f64::NEG_INFINITY;
                continue;
            }
            let row = &self.chat[i * self.u..(i + 1) * self.u];
            let mut max = f64::NEG_INFINITY;
            for (j, c) in row.iter().enumerate() {
                let v = self.psi[j] - c;
                if v > max {
                    max = v;
                }
            }
            let psi = &self.psi;
            self.phi[i] = self.log_a[i]
                - lse_given_max(max, row.iter().enumerate().map(|(j, c)| psi[j] - c));
        }
    }

    /// Column log-sum-exps of `phi - chat` (two cache-friendly row-major
    /// sweeps: maxima, then shifted exponential sums).
    fn column_lse(&self, out: &mut [f64]) {
        let mut maxes = vec![f64::NEG_INFINITY; self.u];
        for i in 0..self.l {
            let phi = self.phi[i];
            if phi == f64::NEG_INFINITY {
                continue;
            }
            let row = &self.chat[i * self.u..(i + 1) * self.u];
            for (j, c) in row.iter().enumerate() {
                let v = phi - c;
                if v > maxes[j] {
                    maxes[j] = v;
                }
            }
        }
        let mut sums = vec![0.0; self.u];
        for i in 0..self.l {
            let phi = self.phi[i];
            if phi == f64::NEG_INFINITY {
                continue;
            }
            let row = &self.chat[i * self.u..(i + 1) * self.u];
            for (j, c) in row.iter().enumerate() {
                let d = phi - c - maxes[j];
                if d >= LSE_CUTOFF {
                    sums[j] += d.exp();
                }
            }
        }
        for j in 0..self.u {
            out[j] = if maxes[j] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                maxes[j] + sums[j].ln()
            };
        }
    }

    /// L1 distance between the current plan's column sums and `b`.
    fn column_violation(&self, col_lse: &[f64]) -> f64 {
        (0..self.u)
            .map(|j| {
                let s = if self.psi[j] == f64::NEG_INFINITY || col_lse[j] == f64::NEG_INFINITY {
                    0.0
                } else {
                    (self.psi[j] + col_lse[j]).exp()
                };
                (s - self.b[j]).abs()
            })
            .sum()
    }

    fn update_cols(&mut self, col_lse: &[f64]) {
        for (j, lse) in col_lse.iter().enumerate() {
            self.psi[j] = if self.log_b[j] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                self.log_b[j] - lse
            };
        }
    }

    fn build_plan(&self) -> Array2<f64> {
        let mut plan = Array2::zeros((self.l, self.u));
        for i in 0..self.l {
            let phi = self.phi[i];
            let row = &self.chat[i * self.u..(i + 1) * self.u];
            for (j, c) in row.iter().enumerate() {
                let e = phi + self.psi[j] - c;
                plan[(i, j)] = if e == f64::NEG_INFINITY { 0.0 } else { e.exp() };
            }
        }
        plan
    }

    fn plan_violation(&self, plan: &Array2<f64>) -> (f64, f64) {
        let row: f64 = plan
            .outer_iter()
            .zip(self.a)
            .map(|(r, ai)| (r.sum() - ai).abs())
            .sum();
        let mut col_sums = vec![0.0; self.u];
        for r in plan.outer_iter() {
            for (j, v) in r.iter().enumerate() {
                col_sums[j] += v;
            }
        }
        let col: f64 = col_sums
            .iter()
            .zip(self.b)
            .map(|(s, bj)| (s - bj).abs())
            .sum();
        (row, col)
    }
}

/// Solve entropic optimal transport between `a` and `b` under `cost`.
///
/// Returns a plan whose L1 marginal violations are both at most
/// `cfg.feasibility_tol`, together with its transport cost on the normalized
/// costs and the number of iterations spent (warm-start stages included).
/// The all-zero cost matrix short-circuits to the product coupling, which is
/// its exact fixed point.
pub fn sinkhorn(
    cost: &CostMatrix,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    cfg: &SinkhornConfig,
) -> Result<TransportPlan> {
    sinkhorn_with_start(cost, a, b, cfg, None)
}

/// [`sinkhorn`] warm-started from the column potential of a related solve
/// (see [`TransportPlan::col_potential`]). The epsilon-scaling stages are
/// skipped since the start already encodes the sharp structure; the fixed
/// point and the feasibility contract are unchanged.
pub fn sinkhorn_with_start(
    cost: &CostMatrix,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    cfg: &SinkhornConfig,
    initial_col_potential: Option<&[f64]>,
) -> Result<TransportPlan> {
    cfg.validate()?;
    let (l, u) = cost.costs().dim();
    if a.len() != l || b.len() != u {
        return Err(Error::DimensionMismatch {
            rows: l,
            cols: u,
            a_len: a.len(),
            b_len: b.len(),
        });
    }
    if let Some(start) = initial_col_potential {
        if start.len() != u {
            return Err(Error::LengthMismatch(start.len(), u));
        }
        if start.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "initial column potential must be finite".into(),
            ));
        }
    }

    if cost.costs().iter().all(|c| *c == 0.0) {
        let mut plan = Array2::zeros((l, u));
        for (i, ai) in a.weights().iter().enumerate() {
            for (j, bj) in b.weights().iter().enumerate() {
                plan[(i, j)] = ai * bj;
            }
        }
        return Ok(TransportPlan {
            plan,
            row_marginal: a.clone(),
            col_marginal: b.clone(),
            transport_cost: 0.0,
            iterations_used: 0,
            col_potential: b.weights().iter().map(|w| w.ln()).collect(),
        });
    }

    let eps = cfg.epsilon;
    let mut stage_eps = match initial_col_potential {
        Some(_) => eps,
        None if eps >= STAGE_START => eps,
        None => STAGE_START,
    };
    let mut solver = LogSolver::new(cost, a.weights(), b.weights(), stage_eps);
    if let Some(start) = initial_col_potential {
        solver.psi.copy_from_slice(start);
    }
    let mut col_lse = vec![0.0; u];
    let mut iterations = 0usize;
    let mut last_violation = f64::INFINITY;

    loop {
        let final_stage = stage_eps == eps;
        let (stage_tol, stage_budget) = if final_stage {
            (cfg.feasibility_tol, cfg.max_iterations)
        } else {
            (STAGE_TOL, STAGE_MAX_ITERS)
        };

        let mut stage_iter = 0;
        while stage_iter < stage_budget && iterations < cfg.max_iterations {
            stage_iter += 1;
            iterations += 1;
            solver.update_rows();
            solver.column_lse(&mut col_lse);
            let check = stage_iter % CHECK_EVERY == 0
                || stage_iter == stage_budget
                || iterations == cfg.max_iterations;
            if check {
                let viol = solver.column_violation(&col_lse);
                last_violation = viol;
                if viol <= stage_tol {
                    if final_stage {
                        // rows are exact after update_rows; confirm on the
                        // assembled plan before returning
                        let plan = solver.build_plan();
                        let (rv, cv) = solver.plan_violation(&plan);
                        if rv <= cfg.feasibility_tol && cv <= cfg.feasibility_tol {
                            let transport_cost = plan
                                .iter()
                                .zip(cost.costs().iter())
                                .map(|(p, c)| p * c)
                                .sum();
                            return Ok(TransportPlan {
                                plan,
                                row_marginal: a.clone(),
                                col_marginal: b.clone(),
                                transport_cost,
                                iterations_used: iterations,
                                col_potential: solver.psi.clone(),
                            });
                        }
                        last_violation = rv.max(cv);
                    } else {
                        break;
                    }
                }
            }
            solver.update_cols(&col_lse);
        }

        if final_stage || iterations >= cfg.max_iterations {
            break;
        }
        let next_eps = (stage_eps / STAGE_SHRINK).max(eps);
        solver.rescale(stage_eps / next_eps);
        stage_eps = next_eps;
    }

    Err(Error::NotConverged {
        iterations,
        violation: last_violation,
    })
}

/// Exact optimal transport for an `n x n` cost matrix with uniform marginals,
/// by enumerating all `n!` permutation plans (each scaled by `1/n`).
///
/// Returns the minimal transport cost (on the normalized costs) and the
/// minimizing plan; ties resolve to the lexicographically smallest
/// permutation. Enumeration is capped at `n = 8`.
pub fn exact_ot_bruteforce(cost: &CostMatrix, n: usize) -> Result<(f64, TransportPlan)> {
    const MAX_N: usize = 8;
    if n > MAX_N {
        return Err(Error::TooLarge { size: n, max: MAX_N });
    }
    if n == 0 {
        return Err(Error::InvalidConfig("empty instance".into()));
    }
    if cost.n_rows() != n || cost.n_cols() != n {
        return Err(Error::DimensionMismatch {
            rows: cost.n_rows(),
            cols: cost.n_cols(),
            a_len: n,
            b_len: n,
        });
    }

    let c = cost.costs();
    let mass = 1.0 / n as f64;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best_perm = perm.clone();
    let mut best_cost = f64::INFINITY;
    loop {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum();
        if total < best_cost {
            best_cost = total;
            best_perm.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }

    let mut plan = Array2::zeros((n, n));
    for (i, &j) in best_perm.iter().enumerate() {
        plan[(i, j)] = mass;
    }
    let optimal = best_cost * mass;
    Ok((
        optimal,
        TransportPlan {
            plan,
            row_marginal: DiscreteMeasure::uniform(n),
            col_marginal: DiscreteMeasure::uniform(n),
            transport_cost: optimal,
            iterations_used: 0,
            col_potential: vec![0.0; n],
        },
    ))
}

/// Advance to the next permutation in lexicographic order; false at the last.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn cfg(eps: f64) -> SinkhornConfig {
        SinkhornConfig {
            epsilon: eps,
            max_iterations: 100_000,
            feasibility_tol: 1e-9,
        }
    }

    #[test]
    fn one_by_one_is_forced() {
        let cost = CostMatrix::from_raw(array![[3.5]]).unwrap();
        let plan = sinkhorn(
            &cost,
            &DiscreteMeasure::uniform(1),
            &DiscreteMeasure::uniform(1),
            &cfg(0.05),
        )
        .unwrap();
        assert_abs_diff_eq!(plan.plan()[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn all_zero_cost_gives_product_coupling() {
        let cost = CostMatrix::from_raw(Array2::zeros((2, 2))).unwrap();
        let a = DiscreteMeasure::new(vec![0.5, 0.5]).unwrap();
        let b = DiscreteMeasure::new(vec![0.5, 0.5]).unwrap();
        let plan = sinkhorn(&cost, &a, &b, &cfg(0.05)).unwrap();
        for v in plan.plan().iter() {
            assert_eq!(*v, 0.25);
        }
        assert_eq!(plan.transport_cost(), 0.0);
        assert_eq!(plan.iterations_used(), 0);
    }

    /// Oracle: the textbook scaling recursion `u = a/(Kv)`, `v = b/(K^T u)`
    /// run directly in the linear domain. Valid while `exp(-C/eps)` stays
    /// representable, which holds for this instance.
    fn plain_sinkhorn_oracle(
        c: &Array2<f64>,
        a: &[f64],
        b: &[f64],
        eps: f64,
        sweeps: usize,
    ) -> Array2<f64> {
        let (l, u) = c.dim();
        let k = c.mapv(|x| (-x / eps).exp());
        let mut uvec = vec![1.0; l];
        let mut vvec = vec![1.0; u];
        for _ in 0..sweeps {
            for i in 0..l {
                let kv: f64 = (0..u).map(|j| k[(i, j)] * vvec[j]).sum();
                uvec[i] = a[i] / kv;
            }
            for j in 0..u {
                let ktu: f64 = (0..l).map(|i| k[(i, j)] * uvec[i]).sum();
                vvec[j] = b[j] / ktu;
            }
        }
        Array2::from_shape_fn((l, u), |(i, j)| uvec[i] * k[(i, j)] * vvec[j])
    }

    #[test]
    fn matches_plain_recursion_on_cross_cost() {
        let raw = array![[0.0, 1.0], [1.0, 0.0]];
        let cost = CostMatrix::from_raw(raw.clone()).unwrap();
        let a = DiscreteMeasure::new(vec![0.5, 0.5]).unwrap();
        let b = DiscreteMeasure::new(vec![0.5, 0.5]).unwrap();
        let plan = sinkhorn(&cost, &a, &b, &cfg(0.05)).unwrap();

        let oracle = plain_sinkhorn_oracle(&raw, &[0.5, 0.5], &[0.5, 0.5], 0.05, 2000);
        for (p, o) in plan.plan().iter().zip(oracle.iter()) {
            assert_abs_diff_eq!(p, o, epsilon = 1e-8);
        }
        // mass concentrates on the zero-cost diagonal
        assert!(plan.plan()[(0, 0)] > plan.plan()[(0, 1)]);
        assert!(plan.plan()[(1, 1)] > plan.plan()[(1, 0)]);
    }

    #[test]
    fn converged_plan_is_feasible_and_positive() {
        let raw = array![
            [0.3, 1.7, 0.9, 2.2],
            [1.1, 0.2, 2.0, 0.4],
            [0.8, 0.8, 0.1, 1.5]
        ];
        let cost = CostMatrix::from_raw(raw).unwrap();
        let a = DiscreteMeasure::new(vec![0.2, 0.5, 0.3]).unwrap();
        let b = DiscreteMeasure::new(vec![0.1, 0.4, 0.25, 0.25]).unwrap();
        let plan = sinkhorn(&cost, &a, &b, &cfg(0.05)).unwrap();
        let (rv, cv) = plan.marginal_violations();
        assert!(rv <= 1e-9, "row violation {rv}");
        assert!(cv <= 1e-9, "col violation {cv}");
        assert!(plan.plan().iter().all(|p| *p > 0.0));
    }

    #[test]
    fn deterministic_across_runs() {
        let raw = array![[0.3, 1.7, 0.9], [1.1, 0.2, 2.0]];
        let cost = CostMatrix::from_raw(raw).unwrap();
        let a = DiscreteMeasure::new(vec![0.6, 0.4]).unwrap();
        let b = DiscreteMeasure::uniform(3);
        let p1 = sinkhorn(&cost, &a, &b, &cfg(0.01)).unwrap();
        let p2 = sinkhorn(&cost, &a, &b, &cfg(0.01)).unwrap();
        assert_eq!(p1.plan(), p2.plan());
        assert_eq!(p1.iterations_used(), p2.iterations_used());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cost = CostMatrix::from_raw(array![[1.0]]).unwrap();
        let m = DiscreteMeasure::uniform(1);
        for bad in [
            SinkhornConfig { epsilon: 0.0, ..SinkhornConfig::default() },
            SinkhornConfig { feasibility_tol: 0.0, ..SinkhornConfig::default() },
            SinkhornConfig { max_iterations: 0, ..SinkhornConfig::default() },
        ] {
            assert!(matches!(
                sinkhorn(&cost, &m, &m, &bad),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn exhausted_budget_reports_final_violation() {
        let raw = array![[0.3, 1.7, 0.9], [1.1, 0.2, 2.0]];
        let cost = CostMatrix::from_raw(raw).unwrap();
        let a = DiscreteMeasure::uniform(2);
        let b = DiscreteMeasure::uniform(3);
        let bad = SinkhornConfig {
            epsilon: 0.05,
            max_iterations: 2,
            feasibility_tol: 1e-12,
        };
        match sinkhorn(&cost, &a, &b, &bad) {
            Err(Error::NotConverged { iterations, violation }) => {
                assert_eq!(iterations, 2);
                assert!(violation.is_finite() && violation > 1e-12);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cost = CostMatrix::from_raw(array![[1.0, 2.0]]).unwrap();
        let err = sinkhorn(
            &cost,
            &DiscreteMeasure::uniform(2),
            &DiscreteMeasure::uniform(2),
            &cfg(0.05),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn scale_invariance_of_normalization() {
        // power-of-two scaling is exact in binary floating point, so the
        // normalized matrices and the resulting plans are bit-identical
        let raw = array![[0.3, 1.7, 0.9], [1.1, 0.2, 2.0]];
        let scaled = raw.mapv(|c| c * 4.0);
        let c1 = CostMatrix::from_raw(raw).unwrap();
        let c2 = CostMatrix::from_raw(scaled).unwrap();
        assert_eq!(c1.costs(), c2.costs());
        assert_eq!(c2.scale(), 4.0 * c1.scale());
        let a = DiscreteMeasure::uniform(2);
        let b = DiscreteMeasure::uniform(3);
        let p1 = sinkhorn(&c1, &a, &b, &cfg(0.05)).unwrap();
        let p2 = sinkhorn(&c2, &a, &b, &cfg(0.05)).unwrap();
        assert_eq!(p1.plan(), p2.plan());
    }

    #[test]
    fn squared_euclidean_matches_hand_computation() {
        // labeled (0,0), (1,0); unlabeled (0,1), (2,2), (3,0)
        let ds = Dataset::new(
            array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 2.0], [3.0, 0.0]],
            vec![Some(0), Some(1), None, None, None],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let state = PartitionState::new(vec![0, 1], vec![0, 1], vec![2, 3, 4]);
        let cost = squared_euclidean_cost(&ds, &state).unwrap();
        assert_eq!(cost.scale(), 9.0);
        let expect = [
            [1.0 / 9.0, 8.0 / 9.0, 1.0],
            [2.0 / 9.0, 5.0 / 9.0, 4.0 / 9.0],
        ];
        for i in 0..2 {
            for j in 0..3 {
                assert_abs_diff_eq!(cost.costs()[(i, j)], expect[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn single_pair_cost_is_squared_distance() {
        let ds = Dataset::new(
            array![[0.0, 0.0], [3.0, 4.0]],
            vec![Some(0), None],
            vec!["a".into(), "b".into()],
        );
        // a second class never appears; build with two names anyway
        let ds = ds.unwrap();
        let state = PartitionState::new(vec![0], vec![0], vec![1]);
        let cost = squared_euclidean_cost(&ds, &state).unwrap();
        assert_eq!(cost.scale(), 25.0);
        assert_eq!(cost.costs()[(0, 0)], 1.0);
    }

    #[test]
    fn identical_points_cost_zero() {
        let ds = Dataset::new(
            array![[1.5, -2.0], [1.5, -2.0], [0.0, 0.0]],
            vec![Some(0), None, Some(1)],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let state = PartitionState::new(vec![0, 2], vec![0, 1], vec![1]);
        let cost = squared_euclidean_cost(&ds, &state).unwrap();
        assert_eq!(cost.costs()[(0, 0)], 0.0);
    }

    #[test]
    fn bruteforce_trivial_cases() {
        let c1 = CostMatrix::from_raw(array![[2.5]]).unwrap();
        let (opt, plan) = exact_ot_bruteforce(&c1, 1).unwrap();
        assert_eq!(opt, 1.0); // normalized single entry is 1
        assert_eq!(plan.plan()[(0, 0)], 1.0);

        let c2 = CostMatrix::from_raw(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let (opt, plan) = exact_ot_bruteforce(&c2, 2).unwrap();
        assert_eq!(opt, 0.0);
        assert_eq!(plan.plan()[(0, 0)], 0.5);
        assert_eq!(plan.plan()[(1, 1)], 0.5);
        assert_eq!(plan.plan()[(0, 1)], 0.0);
    }

    #[test]
    fn bruteforce_matches_exhaustive_min_on_4x4() {
        let raw = array![
            [7.0, 2.0, 9.0, 4.0],
            [3.0, 8.0, 1.0, 6.0],
            [5.0, 5.0, 2.0, 7.0],
            [9.0, 1.0, 4.0, 3.0]
        ];
        let cost = CostMatrix::from_raw(raw.clone()).unwrap();
        let (opt, _) = exact_ot_bruteforce(&cost, 4).unwrap();
        // independent check: direct recursion over all assignments
        fn rec(c: &Array2<f64>, i: usize, used: &mut [bool]) -> f64 {
            if i == c.nrows() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..c.ncols() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(c[(i, j)] + rec(c, i + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        let norm = cost.costs();
        let expect = rec(norm, 0, &mut [false; 4]) / 4.0;
        assert_abs_diff_eq!(opt, expect, epsilon = 1e-15);
    }

    #[test]
    fn bruteforce_rejects_large_instances() {
        let cost = CostMatrix::from_raw(Array2::ones((9, 9))).unwrap();
        assert!(matches!(
            exact_ot_bruteforce(&cost, 9),
            Err(Error::TooLarge { size: 9, max: 8 })
        ));
    }

    #[test]
    fn entropic_cost_approaches_bruteforce_optimum() {
        let raw = array![
            [0.61, 0.24, 0.83],
            [0.12, 0.55, 0.47],
            [0.95, 0.33, 0.18]
        ];
        let cost = CostMatrix::from_raw(raw).unwrap();
        let (opt, _) = exact_ot_bruteforce(&cost, 3).unwrap();
        let plan = sinkhorn(
            &cost,
            &DiscreteMeasure::uniform(3),
            &DiscreteMeasure::uniform(3),
            &cfg(1e-3),
        )
        .unwrap();
        let gap = plan.transport_cost() - opt;
        assert!(gap >= -1e-12, "entropic cost below exact optimum: {gap}");
        assert!(
            gap <= 0.02 * opt + 1e-6,
            "entropic bias too large: {} vs {}",
            plan.transport_cost(),
            opt
        );
    }
}
