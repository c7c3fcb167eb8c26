//! Per-iteration accounting of the propagation loop.
//!
//! The labeled count grows and the unlabeled count shrinks by the same
//! amount each iteration, so `labeled + unlabeled` is conserved and the loop
//! finishes once `unlabeled` reaches zero. The trace records this evolution
//! and is the evidence for finite convergence.

use serde::Serialize;

use crate::{Error, Result};

/// What one outer iteration did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub t: usize,
    /// Labeled-set size after this iteration (m_t).
    pub labeled: usize,
    /// Unlabeled-set size after this iteration (n_t).
    pub unlabeled: usize,
    /// Points labeled during this iteration (zeta_t).
    pub newly_labeled: usize,
    /// The threshold actually used: the configured alpha, or the maximal
    /// certainty score when the rescue rule lowered it.
    pub alpha_effective: f64,
    /// Whether the rescue rule fired this iteration.
    pub rescue_applied: bool,
}

/// The full per-iteration record of one propagation run.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PropagationTrace {
    pub iterations: Vec<IterationRecord>,
}

impl PropagationTrace {
    /// Verify every trace invariant for a run that started with `l0` labeled
    /// and `u0` unlabeled points.
    ///
    /// Checks conservation (`labeled + unlabeled` constant), the recurrences
    /// `m_t = m_{t-1} + zeta_t` and `n_t = n_{t-1} - zeta_t`, progress
    /// (`zeta_t >= 1`), threshold range, and termination (`n_tau = 0`).
    pub fn check(&self, l0: usize, u0: usize) -> Result<()> {
        let total = l0 + u0;
        let fail = |msg: String| Err(Error::TraceInvariant(msg));
        if u0 > 0 && self.iterations.is_empty() {
            return fail(format!("empty trace for a run with u0 = {u0}"));
        }
        let mut prev_labeled = l0;
        let mut prev_unlabeled = u0;
        for (k, rec) in self.iterations.iter().enumerate() {
            if rec.t != k + 1 {
                return fail(format!("iteration {} recorded as t = {}", k + 1, rec.t));
            }
            if rec.labeled + rec.unlabeled != total {
                return fail(format!(
                    "t = {}: {} + {} != {total}",
                    rec.t, rec.labeled, rec.unlabeled
                ));
            }
            if rec.newly_labeled == 0 {
                return fail(format!("t = {}: no progress", rec.t));
            }
            if rec.labeled != prev_labeled + rec.newly_labeled {
                return fail(format!(
                    "t = {}: labeled {} != {} + {}",
                    rec.t, rec.labeled, prev_labeled, rec.newly_labeled
                ));
            }
            if rec.unlabeled != prev_unlabeled - rec.newly_labeled {
                return fail(format!(
                    "t = {}: unlabeled {} != {} - {}",
                    rec.t, rec.unlabeled, prev_unlabeled, rec.newly_labeled
                ));
            }
            if !(0.0..=1.0).contains(&rec.alpha_effective) {
                return fail(format!(
                    "t = {}: alpha_effective {} outside [0, 1]",
                    rec.t, rec.alpha_effective
                ));
            }
            prev_labeled = rec.labeled;
            prev_unlabeled = rec.unlabeled;
        }
        if prev_unlabeled != 0 {
            return fail(format!("final unlabeled count {prev_unlabeled} != 0"));
        }
        Ok(())
    }
}
