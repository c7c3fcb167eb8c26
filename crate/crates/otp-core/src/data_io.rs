//! Dataset ingestion, feature standardization, reproducible splits, and the
//! run output formats.
//!
//! CSV dialect: comma separator, `.` decimal point, UTF-8, first row is the
//! header. An empty cell in the label column means the row is unlabeled.
//!
//! Split generation uses ChaCha8 seeded with the spec's 64-bit seed and an
//! explicit Fisher-Yates shuffle (`j = next_u64() mod (i + 1)`), so the same
//! seed yields the same split on every platform.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::propagation::OtpOutcome;
use crate::trace::PropagationTrace;
use crate::{Dataset, Error, LabelOrigin, PartitionState, Result, validate_partition};

/// How much prior information a split carries and how it is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitSpec {
    /// Fraction of points whose true labels are revealed, in (0, 1).
    pub labeled_fraction: f64,
    pub seed: u64,
    /// Draw per class (guaranteeing every class a representative) instead of
    /// uniformly over all rows.
    pub stratified: bool,
}

/// Load a dataset from CSV. The named column carries the class labels;
/// every other column must parse as a finite real. Class ids are assigned
/// by first appearance, top to bottom.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_pos = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();

    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let mut features = Vec::with_capacity(headers.len() - 1);
        for (col_idx, cell) in record.iter().enumerate() {
            if col_idx == label_pos {
                if cell.is_empty() {
                    labels.push(None);
                } else {
                    let next_id = class_names.len();
                    let id = *class_ids.entry(cell.to_string()).or_insert_with(|| {
                        class_names.push(cell.to_string());
                        next_id
                    });
                    labels.push(Some(id));
                }
            } else {
                let value: f64 = cell.parse().map_err(|_| Error::ParseError {
                    row: row_idx,
                    column: headers[col_idx].to_string(),
                })?;
                features.push(value);
            }
        }
        rows.push(features);
    }

    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = rows[0].len();
    let mut features = Array2::zeros((rows.len(), d));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            features[(i, j)] = *v;
        }
    }
    Dataset::new(features, labels, class_names)
}

/// Serialize a dataset back to the input CSV dialect. Feature columns are
/// named `f0..f{d-1}`; unlabeled rows get an empty label cell.
pub fn write_dataset_csv(path: &Path, dataset: &Dataset, label_column: &str) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..dataset.n_features()).map(|j| format!("f{j}")).collect();
    header.push(label_column.to_string());
    writer.write_record(&header)?;
    for i in 0..dataset.n_points() {
        let mut record: Vec<String> = dataset
            .feature_row(i)
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        record.push(match dataset.label(i) {
            Some(k) => dataset.class_name(k).to_string(),
            None => String::new(),
        });
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shift and scale every feature column to mean 0 and population standard
/// deviation 1. Constant columns become all-zero.
pub fn standardize(dataset: &Dataset) -> Dataset {
    let x = dataset.features();
    let n = x.nrows() as f64;
    let mut out = x.to_owned();
    for mut col in out.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std > 0.0 {
            col.mapv_inplace(|v| (v - mean) / std);
        } else {
            col.fill(0.0);
        }
    }
    dataset.with_features(out)
}

/// Fisher-Yates with an explicit modulo draw; part of the split contract.
fn shuffle(items: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Draw a seed partition from a fully labeled dataset.
///
/// Stratified mode takes `ceil(fraction * class_size)` rows per class, which
/// always satisfies the representative requirement. Uniform mode takes
/// `ceil(fraction * N)` rows and redraws (up to 100 times, continuing the
/// same stream) until every class is represented. The result is a pure
/// function of `(dataset, spec)`.
pub fn make_split(dataset: &Dataset, spec: &SplitSpec) -> Result<PartitionState> {
    if !(spec.labeled_fraction > 0.0 && spec.labeled_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "labeled_fraction must lie in (0, 1), got {}",
            spec.labeled_fraction
        )));
    }
    if !dataset.fully_labeled() {
        return Err(Error::InfeasibleSplit(
            "dataset must be fully labeled to draw a split from it".into(),
        ));
    }
    let n = dataset.n_points();
    let k = dataset.n_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let labeled: Vec<usize> = if spec.stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
        for i in 0..n {
            by_class[dataset.label(i).unwrap()].push(i);
        }
        if let Some(empty) = by_class.iter().position(Vec::is_empty) {
            return Err(Error::InfeasibleSplit(format!(
                "class {empty} has no instances"
            )));
        }
        let mut picked = Vec::new();
        for class_rows in by_class.iter_mut() {
            let take = (spec.labeled_fraction * class_rows.len() as f64).ceil() as usize;
            let take = take.min(class_rows.len());
            shuffle(class_rows, &mut rng);
            picked.extend_from_slice(&class_rows[..take]);
        }
        picked
    } else {
        let take = (spec.labeled_fraction * n as f64).ceil() as usize;
        if take < k {
            return Err(Error::InfeasibleSplit(format!(
                "labeled count {take} cannot represent {k} classes"
            )));
        }
        let mut indices: Vec<usize> = (0..n).collect();
        let mut found = None;
        for _ in 0..100 {
            shuffle(&mut indices, &mut rng);
            let candidate = &indices[..take];
            let mut seen = vec![false; k];
            for &i in candidate {
                seen[dataset.label(i).unwrap()] = true;
            }
            if seen.iter().all(|s| *s) {
                found = Some(candidate.to_vec());
                break;
            }
        }
        found.ok_or_else(|| {
            Error::InfeasibleSplit(format!(
                "no draw of {take} rows covered all {k} classes in 100 attempts"
            ))
        })?
    };

    let mut is_labeled = vec![false; n];
    for &i in &labeled {
        is_labeled[i] = true;
    }
    let mut labeled: Vec<usize> = labeled;
    labeled.sort_unstable();
    let unlabeled: Vec<usize> = (0..n).filter(|i| !is_labeled[*i]).collect();
    let labels: Vec<usize> = labeled.iter().map(|&i| dataset.label(i).unwrap()).collect();
    validate_partition(dataset, PartitionState::new(labeled, labels, unlabeled))
}

/// The fully resolved configuration of one run, embedded in the trace file.
/// Every configurable value appears explicitly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub max_iterations: usize,
    pub feasibility_tol: f64,
    pub labeled_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
    pub standardize: bool,
}

/// Write the trace JSON: the resolved config plus one record per iteration.
pub fn write_trace(path: &Path, config: &RunConfig, trace: &PropagationTrace) -> Result<()> {
    #[derive(Serialize)]
    struct TraceFile<'a> {
        config: &'a RunConfig,
        iterations: &'a [crate::trace::IterationRecord],
    }
    let file = TraceFile {
        config,
        iterations: &trace.iterations,
    };
    let mut out = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut out, &file)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Write the predictions CSV:
/// `row_index,predicted_label,certainty_at_assignment,iteration_assigned,origin`.
///
/// Seed rows carry certainty 1 and iteration 0; pseudo rows carry the score
/// and iteration at which they were labeled.
pub fn write_predictions(path: &Path, dataset: &Dataset, outcome: &OtpOutcome) -> Result<()> {
    let n = dataset.n_points();
    let mut label = vec![usize::MAX; n];
    let mut origin = vec![LabelOrigin::Seed; n];
    for (pos, &i) in outcome.state.labeled_idx().iter().enumerate() {
        label[i] = outcome.state.labels()[pos];
        origin[i] = outcome.state.origins()[pos];
    }
    let mut certainty = vec![1.0f64; n];
    let mut iteration = vec![0usize; n];
    for a in &outcome.assignments {
        certainty[a.index] = a.certainty;
        iteration[a.index] = a.iteration;
    }

    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "row_index",
        "predicted_label",
        "certainty_at_assignment",
        "iteration_assigned",
        "origin",
    ])?;
    for i in 0..n {
        writer.write_record([
            i.to_string(),
            dataset.class_name(label[i]).to_string(),
            format!("{}", certainty[i]),
            iteration[i].to_string(),
            origin[i].to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// One parsed predictions row; extra columns are ignored on read.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub row_index: usize,
    pub predicted_label: String,
}

/// Read a predictions-format CSV back. Only `row_index` and
/// `predicted_label` are required, so hand-written truth files work too.
pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let idx_pos = headers
        .iter()
        .position(|h| h == "row_index")
        .ok_or_else(|| Error::MissingColumn("row_index".into()))?;
    let label_pos = headers
        .iter()
        .position(|h| h == "predicted_label")
        .ok_or_else(|| Error::MissingColumn("predicted_label".into()))?;
    let mut rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row_index: usize = record[idx_pos].parse().map_err(|_| Error::ParseError {
            row: row_idx,
            column: "row_index".into(),
        })?;
        rows.push(PredictionRow {
            row_index,
            predicted_label: record[label_pos].to_string(),
        });
    }
    Ok(rows)
}
