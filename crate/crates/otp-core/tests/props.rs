//! Property tests: solver feasibility and determinism, metric oracle
//! agreement, split reproducibility, and propagation trace invariants.

use std::collections::BTreeMap;

use ndarray::Array2;
use proptest::prelude::*;

use otp_core::data_io::{make_split, SplitSpec};
use otp_core::metrics::{ari, contingency, nmi};
use otp_core::propagation::{run_otp, OtpConfig};
use otp_core::sinkhorn::{sinkhorn, CostMatrix, SinkhornConfig};
use otp_core::{Dataset, DiscreteMeasure};

fn measure_from(weights: Vec<f64>) -> DiscreteMeasure {
    let sum: f64 = weights.iter().sum();
    DiscreteMeasure::new(weights.iter().map(|w| w / sum).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Converged plans satisfy both marginals, keep every entry positive at
    /// this regularization, and are bit-reproducible.
    #[test]
    fn sinkhorn_feasible_positive_deterministic(
        rows in 1usize..7,
        cols in 1usize..7,
        raw in proptest::collection::vec(0.0f64..10.0, 49),
        wa in proptest::collection::vec(0.1f64..1.0, 7),
        wb in proptest::collection::vec(0.1f64..1.0, 7),
    ) {
        let cost = CostMatrix::from_raw(
            Array2::from_shape_fn((rows, cols), |(i, j)| raw[i * 7 + j]),
        ).unwrap();
        let a = measure_from(wa[..rows].to_vec());
        let b = measure_from(wb[..cols].to_vec());
        let cfg = SinkhornConfig { epsilon: 0.05, max_iterations: 20_000, feasibility_tol: 1e-9 };
        let plan = sinkhorn(&cost, &a, &b, &cfg).unwrap();
        let (rv, cv) = plan.marginal_violations();
        prop_assert!(rv <= 1e-9 && cv <= 1e-9, "violations {rv} {cv}");
        prop_assert!(plan.plan().iter().all(|p| *p > 0.0));

        let again = sinkhorn(&cost, &a, &b, &cfg).unwrap();
        prop_assert_eq!(plan.plan(), again.plan());
    }

    /// Scaling all raw costs by a positive constant leaves the normalized
    /// matrix (and hence the plan) unchanged up to rounding in the scaling.
    #[test]
    fn cost_normalization_absorbs_scale(
        raw in proptest::collection::vec(0.01f64..5.0, 12),
        scale in prop_oneof![Just(0.25f64), Just(2.0), Just(1024.0)],
    ) {
        let base = Array2::from_shape_fn((3, 4), |(i, j)| raw[i * 4 + j]);
        let scaled = base.mapv(|c| c * scale);
        let c1 = CostMatrix::from_raw(base).unwrap();
        let c2 = CostMatrix::from_raw(scaled).unwrap();
        // powers of two scale exactly
        prop_assert_eq!(c1.costs(), c2.costs());
        prop_assert!((c2.scale() / c1.scale() - scale).abs() <= 1e-12 * scale);
    }

    /// NMI and ARI agree with independent oracles: a probability-space
    /// mutual-information evaluation and an all-pairs Rand count.
    #[test]
    fn metrics_match_bruteforce_oracles(
        labels in proptest::collection::vec((0usize..5, 0usize..5), 2..50),
    ) {
        let pred: Vec<usize> = labels.iter().map(|(p, _)| *p).collect();
        let truth: Vec<usize> = labels.iter().map(|(_, t)| *t).collect();
        let table = contingency(&pred, &truth).unwrap();
        prop_assert!((nmi(&table) - nmi_oracle(&pred, &truth)).abs() <= 1e-12);
        prop_assert!((ari(&table) - ari_pair_oracle(&pred, &truth)).abs() <= 1e-12);
    }

    /// Both metrics are symmetric and invariant to relabeling class ids.
    #[test]
    fn metrics_symmetry_and_relabeling(
        labels in proptest::collection::vec((0usize..4, 0usize..4), 2..40),
        perm_pick in 0usize..24,
    ) {
        let pred: Vec<usize> = labels.iter().map(|(p, _)| *p).collect();
        let truth: Vec<usize> = labels.iter().map(|(_, t)| *t).collect();
        let t1 = contingency(&pred, &truth).unwrap();
        let t2 = contingency(&truth, &pred).unwrap();
        prop_assert!((nmi(&t1) - nmi(&t2)).abs() <= 1e-12);
        prop_assert!((ari(&t1) - ari(&t2)).abs() <= 1e-12);

        let perms: Vec<[usize; 4]> = all_permutations_4();
        let p = perms[perm_pick % perms.len()];
        let relabeled: Vec<usize> = pred.iter().map(|&c| p[c]).collect();
        let t3 = contingency(&relabeled, &truth).unwrap();
        prop_assert!((nmi(&t1) - nmi(&t3)).abs() <= 1e-12);
        prop_assert!((ari(&t1) - ari(&t3)).abs() <= 1e-12);
    }

    /// Splits are pure functions of (dataset, spec); stratified splits
    /// represent every class; the partition covers all rows exactly once.
    #[test]
    fn split_properties(
        seed in 0u64..1000,
        fraction in 0.05f64..0.9,
        stratified in proptest::bool::ANY,
        n_per_class in 4usize..20,
        k in 2usize..5,
    ) {
        let n_total = n_per_class * k;
        // uniform mode needs headroom for the representative requirement
        prop_assume!(stratified || (fraction * n_total as f64).ceil() as usize >= 2 * k);
        let ds = grid_dataset(n_total, k);
        let spec = SplitSpec { labeled_fraction: fraction, seed, stratified };
        let s1 = make_split(&ds, &spec).unwrap();
        let s2 = make_split(&ds, &spec).unwrap();
        prop_assert_eq!(&s1, &s2);

        let n = ds.n_points();
        let mut seen = vec![0u8; n];
        for &i in s1.labeled_idx().iter().chain(s1.unlabeled_idx()) {
            seen[i] += 1;
        }
        prop_assert!(seen.iter().all(|c| *c == 1));

        let mut have = vec![false; k];
        for &l in s1.labels() {
            have[l] = true;
        }
        prop_assert!(have.iter().all(|h| *h));

        if stratified {
            // ceiling rule per class
            let expect = ((fraction * n_per_class as f64).ceil() as usize).min(n_per_class);
            for class in 0..k {
                let got = s1.labels().iter().filter(|l| **l == class).count();
                prop_assert_eq!(got, expect);
            }
        }
    }
}

proptest! {
    // full propagation runs are slower; keep the case count small
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Every run terminates with a valid trace, labels every point, and
    /// leaves the seed labels untouched.
    #[test]
    fn propagation_trace_invariants(
        seed in 0u64..50,
        alpha in 0.0f64..1.0,
        n_per_class in 4usize..10,
    ) {
        let ds = grid_dataset(n_per_class * 2, 2);
        let spec = SplitSpec { labeled_fraction: 0.3, seed, stratified: true };
        let state = make_split(&ds, &spec).unwrap();
        let (l0, u0) = (state.n_labeled(), state.n_unlabeled());
        let seed_pairs: Vec<(usize, usize)> = state
            .labeled_idx()
            .iter()
            .copied()
            .zip(state.labels().iter().copied())
            .collect();

        let cfg = OtpConfig { alpha, ..OtpConfig::default() };
        let out = run_otp(&ds, state, &cfg).unwrap();
        out.trace.check(l0, u0).unwrap();
        prop_assert_eq!(out.state.n_unlabeled(), 0);
        prop_assert_eq!(out.state.n_labeled(), l0 + u0);
        for (idx, label) in seed_pairs {
            prop_assert_eq!(out.state.label_of(idx), Some(label));
        }
        // scores recorded with the assignments stay in range
        prop_assert!(out.assignments.iter().all(|a| (0.0..=1.0).contains(&a.certainty)));
    }
}

/// Small deterministic dataset: `k` interleaved classes on a line, separated
/// enough to be learnable but with boundary contact.
fn grid_dataset(n: usize, k: usize) -> Dataset {
    let features = Array2::from_shape_fn((n, 2), |(i, j)| {
        let class = i % k;
        let within = (i / k) as f64;
        if j == 0 {
            class as f64 * 10.0 + within * 0.5
        } else {
            within * 0.25
        }
    });
    let labels = (0..n).map(|i| Some(i % k)).collect();
    let names = (0..k).map(|c| format!("c{c}")).collect();
    Dataset::new(features, labels, names).unwrap()
}

fn all_permutations_4() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut seen = [false; 4];
                    p.iter().for_each(|&x| seen[x] = true);
                    if seen.iter().all(|s| *s) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Probability-space NMI: mutual information over joint frequencies divided
/// by the mean of the marginal entropies. Independent of the count-based
/// route in the library.
fn nmi_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut px: BTreeMap<usize, f64> = BTreeMap::new();
    let mut py: BTreeMap<usize, f64> = BTreeMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        *joint.entry((p, t)).or_insert(0.0) += 1.0;
        *px.entry(p).or_insert(0.0) += 1.0;
        *py.entry(t).or_insert(0.0) += 1.0;
    }
    let hx: f64 = px.values().map(|c| -(c / n) * (c / n).ln()).sum();
    let hy: f64 = py.values().map(|c| -(c / n) * (c / n).ln()).sum();
    if hx + hy == 0.0 {
        return 1.0;
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(p, t), &c)| {
            let pxy = c / n;
            pxy * (pxy / ((px[&p] / n) * (py[&t] / n))).ln()
        })
        .sum();
    2.0 * mi / (hx + hy)
}

/// All-pairs Rand counting. `a` same-same, `b` same in pred only, `c` same
/// in truth only, `d` different in both.
fn ari_pair_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len();
    let (mut a, mut b, mut c, mut d) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            match (pred[i] == pred[j], truth[i] == truth[j]) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    let denom = (a + b) * (b + d) + (a + c) * (c + d);
    if denom == 0.0 {
        // identical partitions (including the all-one-cluster case)
        return 1.0;
    }
    2.0 * (a * d - b * c) / denom
}
