//! Labeled datasets: svmlight and CSV ingestion, the synthetic generator with
//! a controlled number of relevant features, and cross-validation folds.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::matrix::{FeatureMatrix, SparseMatrix};

/// Feature matrix plus one ±1 label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: FeatureMatrix,
    y: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(x: FeatureMatrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                context: "label count",
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if let Some((i, l)) = y
            .iter()
            .enumerate()
            .find(|(_, l)| **l != 1.0 && **l != -1.0)
        {
            return Err(invalid(format!("label {l} at row {i} is not ±1")));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &FeatureMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn has_both_labels(&self) -> bool {
        self.y.contains(&1.0) && self.y.contains(&-1.0)
    }

    /// Errors with the single label present when one class is missing.
    pub fn require_both_labels(&self) -> Result<()> {
        if self.has_both_labels() {
            Ok(())
        } else {
            Err(Error::SingleClass(self.y.first().map_or(1, |&l| l as i8)))
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Same points with every label negated.
    pub fn flipped(&self) -> LabeledDataset {
        LabeledDataset {
            x: self.x.clone(),
            y: self.y.iter().map(|l| -l).collect(),
        }
    }

    /// Drops all-zero columns; returns the kept original indices.
    pub fn remove_zero_columns(&self) -> (LabeledDataset, Vec<usize>) {
        let keep = self.x.nonzero_columns();
        let x = match &self.x {
            FeatureMatrix::Dense(m) => FeatureMatrix::Dense(m.select_columns(&keep)),
            FeatureMatrix::Sparse(s) => {
                let mut remap = vec![usize::MAX; s.ncols()];
                for (new, &old) in keep.iter().enumerate() {
                    remap[old] = new;
                }
                let rows = (0..s.nrows())
                    .map(|i| s.row(i).map(|(j, v)| (remap[j], v)).collect())
                    .collect();
                FeatureMatrix::Sparse(
                    SparseMatrix::from_rows(keep.len(), rows).expect("remapped rows stay ordered"),
                )
            }
        };
        (
            LabeledDataset {
                x,
                y: self.y.clone(),
            },
            keep,
        )
    }
}

fn parse_label(token: &str) -> Option<f64> {
    match token {
        "+1" | "1" => Some(1.0),
        "-1" => Some(-1.0),
        _ => None,
    }
}

/// Parses `<label> <idx>:<val> …` lines with 1-based, strictly increasing indices.
pub fn parse_svmlight(text: &str) -> Result<LabeledDataset> {
    parse_svmlight_with_dim(text, None)
}

/// As [`parse_svmlight`], with the feature count fixed to `dim` when given.
pub fn parse_svmlight_with_dim(text: &str, dim: Option<usize>) -> Result<LabeledDataset> {
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let label = parse_label(label_tok)
            .ok_or_else(|| err(format!("label must be one of +1, -1, 1; got {label_tok:?}")))?;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected <index>:<value>, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("bad feature index {idx:?}")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("bad feature value {val:?}")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value for feature {idx}")));
            }
            if let Some(&(prev, _)) = row.last() {
                if idx - 1 <= prev {
                    return Err(err(format!(
                        "feature indices must be strictly increasing ({} then {idx})",
                        prev + 1
                    )));
                }
            }
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        labels.push(label);
        rows.push(row);
    }
    let d = match dim {
        Some(d) if d < max_index => {
            return Err(invalid(format!(
                "feature index {max_index} exceeds the declared dimension {d}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    LabeledDataset::new(SparseMatrix::from_rows(d, rows)?.into(), labels)
}

/// svmlight text for a dataset; zero entries are omitted.
pub fn write_svmlight(data: &LabeledDataset) -> String {
    let mut out = String::new();
    for i in 0..data.n() {
        out.push_str(if data.y[i] > 0.0 { "+1" } else { "-1" });
        for (j, v) in data.x.row_entries(i) {
            let _ = write!(out, " {}:{}", j + 1, v);
        }
        out.push('\n');
    }
    out
}

/// Where the label sits in a CSV record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelColumn {
    First,
    #[default]
    Last,
}

/// Comma-separated numbers, one point per record. A first record that does
/// not parse as numbers is taken as a header.
pub fn parse_csv(text: &str, label_column: LabelColumn) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 1;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if k == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    message: e.to_string(),
                })
            }
        };
        if values.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "need at least one feature and a label".into(),
            });
        }
        let (label, features) = match label_column {
            LabelColumn::Last => (values[values.len() - 1], &values[..values.len() - 1]),
            LabelColumn::First => (values[0], &values[1..]),
        };
        let label = if label == 1.0 || label == -1.0 {
            label
        } else {
            return Err(Error::Parse {
                line,
                message: format!("label {label} is not ±1"),
            });
        };
        if let Some(first) = rows.first() {
            if first.len() != features.len() {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "expected {} features, found {}",
                        first.len(),
                        features.len()
                    ),
                });
            }
        }
        rows.push(features.to_vec());
        labels.push(label);
    }
    LabeledDataset::new(FeatureMatrix::from_rows(&rows)?, labels)
}

/// Synthetic data with `k` relevant features.
///
/// Labels are ±1 with equal probability. Feature `j ∈ 1..=k` of point `i` is
/// `yᵢ · z` with `z ~ N(−j, 1)`, so the class means are `∓j` and feature `k`
/// separates best. The remaining `d − k` features are standard normal noise.
pub fn gen_synthetic(n: usize, d: usize, k: usize, seed: u64) -> Result<LabeledDataset> {
    if k > d {
        return Err(invalid(format!("relevant features k = {k} exceed d = {d}")));
    }
    if n < 2 {
        return Err(invalid("synthetic data needs n ≥ 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        labels.push(y);
        for j in 1..=d {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(if j <= k { y * (z - j as f64) } else { z });
        }
    }
    LabeledDataset::new(
        FeatureMatrix::Dense(DMatrix::from_row_slice(n, d, &values)),
        labels,
    )
}

/// Repeated k-fold assignment: one row permutation per repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub n: usize,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub assignments: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Positions `[start, end)` of fold `fold` within a permutation; the first
    /// `n mod folds` folds get one extra row.
    pub fn fold_bounds(&self, fold: usize) -> (usize, usize) {
        let base = self.n / self.folds;
        let extra = self.n % self.folds;
        let start = fold * base + fold.min(extra);
        let len = base + usize::from(fold < extra);
        (start, start + len)
    }

    /// Sorted test rows of one fold.
    pub fn test_rows(&self, repeat: usize, fold: usize) -> Vec<usize> {
        let (a, b) = self.fold_bounds(fold);
        let mut rows = self.assignments[repeat][a..b].to_vec();
        rows.sort_unstable();
        rows
    }

    /// Sorted training rows of one fold.
    pub fn train_rows(&self, repeat: usize, fold: usize) -> Vec<usize> {
        let test = self.test_rows(repeat, fold);
        (0..self.n)
            .filter(|i| test.binary_search(i).is_err())
            .collect()
    }
}

pub fn make_folds(n: usize, folds: usize, repeats: usize, seed: u64) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(invalid("need at least 2 folds"));
    }
    if folds > n {
        return Err(invalid(format!("{folds} folds requested for {n} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignments = (0..repeats)
        .map(|_| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect();
    Ok(FoldPlan {
        n,
        folds,
        repeats,
        seed,
        assignments,
    })
}

/// `(train, test)` split for one fold of one repeat.
pub fn apply_fold(
    data: &LabeledDataset,
    plan: &FoldPlan,
    repeat: usize,
    fold: usize,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if plan.n != data.n() {
        return Err(Error::DimensionMismatch {
            context: "fold plan rows",
            expected: data.n(),
            found: plan.n,
        });
    }
    if repeat >= plan.repeats || fold >= plan.folds {
        return Err(invalid(format!(
            "fold ({repeat}, {fold}) outside a {}×{} plan",
            plan.repeats, plan.folds
        )));
    }
    Ok((
        data.select_rows(&plan.train_rows(repeat, fold)),
        data.select_rows(&plan.test_rows(repeat, fold)),
    ))
}
