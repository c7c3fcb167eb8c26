//! Transductive label propagation through entropic optimal transport.
//!
//! A small labeled set spreads its labels to the remaining points of the same
//! dataset. Each round solves an entropic-regularized optimal transport
//! problem between the labeled and unlabeled point clouds; the transport plan
//! becomes the affinity matrix of a complete bipartite graph, affinities
//! aggregate into per-class probabilities, and a Shannon-entropy certainty
//! score gates which points receive a pseudo-label this round. Newly labeled
//! points join the labeled side and the process repeats until no unlabeled
//! point remains.
//!
//! # Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`dataset`] | Feature matrix plus optional ground-truth labels |
//! | [`partition`] | The evolving labeled/unlabeled split |
//! | [`measure`] | Discrete probability measures (marginals) |
//! | [`mod@sinkhorn`] | Log-domain Sinkhorn solver and a brute-force oracle |
//! | [`propagation`] | The incremental propagation loop |
//! | [`trace`] | Per-iteration accounting of the loop |
//! | [`metrics`] | NMI and ARI partition-agreement metrics |
//! | [`data_io`] | CSV ingestion, standardization, seeded splits, outputs |
//!
//! # Quick start
//!
//! ```rust
//! use otp_core::data_io::{load_csv, standardize, make_split, SplitSpec};
//! use otp_core::propagation::{run_otp, OtpConfig};
//!
//! # fn main() -> otp_core::Result<()> {
//! # let dir = std::env::temp_dir().join("otp_core_doc");
//! # std::fs::create_dir_all(&dir)?;
//! # let path = dir.join("tiny.csv");
//! # std::fs::write(&path, "x,y,label\n0,0,a\n0,1,a\n9,9,b\n9,8,b\n0.5,0.5,a\n8.5,8.5,b\n")?;
//! let dataset = standardize(&load_csv(&path, "label")?);
//! let spec = SplitSpec { labeled_fraction: 0.5, seed: 7, stratified: true };
//! let seed_state = make_split(&dataset, &spec)?;
//! let outcome = run_otp(&dataset, seed_state, &OtpConfig::default())?;
//! assert_eq!(outcome.state.n_unlabeled(), 0);
//! # Ok(())
//! # }
//! ```

use thiserror::Error;

pub mod data_io;
pub mod dataset;
pub mod measure;
pub mod metrics;
pub mod partition;
pub mod propagation;
pub mod sinkhorn;
pub mod trace;

pub use data_io::{load_csv, make_split, standardize, SplitSpec};
pub use dataset::Dataset;
pub use measure::DiscreteMeasure;
pub use metrics::{ari, contingency, nmi, ContingencyTable};
pub use partition::{validate_partition, LabelOrigin, PartitionState};
pub use propagation::{run_otp, OtpConfig, OtpOutcome};
pub use sinkhorn::{
    exact_ot_bruteforce, sinkhorn, sinkhorn_with_start, squared_euclidean_cost, CostMatrix,
    SinkhornConfig, TransportPlan,
};
pub use trace::{IterationRecord, PropagationTrace};

/// Errors across dataset construction, solving, propagation, and IO.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("cost matrix is {rows}x{cols} but marginals have {a_len} and {b_len} entries")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        a_len: usize,
        b_len: usize,
    },

    #[error("index {0} appears in both the labeled and unlabeled sets")]
    IndexOverlap(usize),

    #[error("index {0} is missing from the partition (expected full cover of 0..{1})")]
    IncompleteCover(usize, usize),

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("label id {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("class {0} has no labeled representative")]
    MissingRepresentative(usize),

    #[error("feature ({row}, {column}) is not finite")]
    NonFiniteFeature { row: usize, column: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Sinkhorn did not converge in {iterations} iterations (L1 marginal violation {violation:.3e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("brute-force enumeration limited to n <= {max}, got {size}")]
    TooLarge { size: usize, max: usize },

    #[error("transport plan column {0} has (near-)zero mass")]
    DegenerateColumn(usize),

    #[error("trace invariant violated: {0}")]
    TraceInvariant(String),

    #[error("cannot parse cell (row {row}, column {column})")]
    ParseError { row: usize, column: String },

    #[error("column {0:?} not found in header")]
    MissingColumn(String),

    #[error("no data rows")]
    EmptyDataset,

    #[error("split infeasible: {0}")]
    InfeasibleSplit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Result type for all fallible operations in this crate.
pub type Result<T> = std::result::Result<T, Error>;
