//! Repeated k-fold cross-validation over a (method × r) grid, and feature
//! selection frequencies across training folds.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{apply_fold, make_folds, LabeledDataset};
use crate::error::{invalid, Result};
use crate::pipeline::{
    select, supervised_with_model, Method, Mode, SelectionParams, DEFAULT_CHUNK_FRACTION,
};
use crate::svm::{error_rate, solve_dense, SolverConfig};

pub const DEFAULT_DRAWS: usize = 5;

#[derive(Debug, Clone)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub mode: Mode,
    pub methods: Vec<Method>,
    pub rs: Vec<usize>,
    pub solver: SolverConfig,
    /// Selections drawn per fold for randomized methods.
    pub draws: usize,
    pub sketch_rows: Option<usize>,
    pub chunk_fraction: f64,
    /// Add a row for the classifier trained on all features.
    pub include_full: bool,
}

impl CvConfig {
    pub fn new(methods: Vec<Method>, rs: Vec<usize>) -> Self {
        Self {
            folds: 10,
            repeats: 10,
            seed: 0,
            mode: Mode::Supervised,
            methods,
            rs,
            solver: SolverConfig::default(),
            draws: DEFAULT_DRAWS,
            sketch_rows: None,
            chunk_fraction: DEFAULT_CHUNK_FRACTION,
            include_full: true,
        }
    }

    fn draws_for(&self, method: Method) -> usize {
        if method.is_randomized() {
            self.draws.max(1)
        } else {
            1
        }
    }
}

/// One row of the grid: a (method, r) pair, or the all-features baseline.
#[derive(Debug, Clone, Serialize)]
pub struct CvCell {
    /// `None` for the all-features baseline.
    pub method: Option<Method>,
    pub r: Option<usize>,
    pub mean: f64,
    pub std: f64,
    pub errors: Vec<f64>,
    pub margins: Vec<f64>,
    pub evaluations: usize,
    pub skipped: usize,
    pub failures: Vec<String>,
    /// Ranked selections, one per evaluation.
    #[serde(skip)]
    pub selections: Vec<Vec<usize>>,
}

impl CvCell {
    fn new(method: Option<Method>, r: Option<usize>) -> Self {
        Self {
            method,
            r,
            mean: f64::NAN,
            std: f64::NAN,
            errors: Vec::new(),
            margins: Vec::new(),
            evaluations: 0,
            skipped: 0,
            failures: Vec::new(),
            selections: Vec::new(),
        }
    }

    pub fn label(&self) -> String {
        match (self.method, self.r) {
            (Some(m), Some(r)) => format!("{m} r={r}"),
            _ => "full".to_string(),
        }
    }

    fn finish(&mut self) {
        self.evaluations = self.errors.len();
        let (mean, std) = mean_std(&self.errors);
        self.mean = mean;
        self.std = std;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CvStats {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub mode: Mode,
    pub c: f64,
    /// Folds whose training split held a single class.
    pub skipped_folds: usize,
    pub cells: Vec<CvCell>,
}

impl CvStats {
    pub fn cell(&self, method: Method, r: usize) -> Option<&CvCell> {
        self.cells
            .iter()
            .find(|c| c.method == Some(method) && c.r == Some(r))
    }

    pub fn full(&self) -> Option<&CvCell> {
        self.cells.iter().find(|c| c.method.is_none())
    }
}

/// Sample mean and standard deviation (n − 1 denominator); NaN when empty.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Independent seed per (repeat, fold, draw), via splitmix64 finalization.
pub fn derive_seed(base: u64, repeat: usize, fold: usize, draw: usize) -> u64 {
    let mut z = base;
    for part in [repeat as u64, fold as u64, draw as u64] {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(part);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Test error, training time and ranked selection, or why the fit failed.
type Evaluation = std::result::Result<(f64, f64, Vec<usize>), String>;

enum Outcome {
    Skipped,
    Done(Vec<(usize, Evaluation)>),
}

pub fn cross_validate(data: &LabeledDataset, cfg: &CvConfig) -> Result<CvStats> {
    if cfg.methods.is_empty() && !cfg.include_full {
        return Err(invalid("empty cross-validation grid"));
    }
    if cfg.rs.is_empty() && !cfg.methods.is_empty() {
        return Err(invalid("no feature counts given"));
    }
    if cfg.mode == Mode::Unsupervised && cfg.methods.contains(&Method::Rfe) {
        return Err(invalid("rfe requires supervised mode"));
    }
    data.require_both_labels()?;
    let plan = make_folds(data.n(), cfg.folds, cfg.repeats, cfg.seed)?;

    let mut cells = Vec::new();
    if cfg.include_full {
        cells.push(CvCell::new(None, None));
    }
    let offset = cells.len();
    let mut grid = Vec::new();
    for &m in &cfg.methods {
        for &r in &cfg.rs {
            cells.push(CvCell::new(Some(m), Some(r)));
            grid.push((m, r));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..cfg.repeats)
        .flat_map(|rep| (0..cfg.folds).map(move |f| (rep, f)))
        .collect();
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(rep, fold)| run_fold(data, &plan, cfg, &grid, offset, rep, fold))
        .collect::<Result<_>>()?;

    let mut skipped_folds = 0;
    for outcome in outcomes {
        match outcome {
            Outcome::Skipped => {
                skipped_folds += 1;
                for cell in cells.iter_mut() {
                    cell.skipped += 1;
                }
            }
            Outcome::Done(results) => {
                for (idx, res) in results {
                    match res {
                        Ok((err, margin, ranked)) => {
                            cells[idx].errors.push(err);
                            cells[idx].margins.push(margin);
                            cells[idx].selections.push(ranked);
                        }
                        Err(msg) => cells[idx].failures.push(msg),
                    }
                }
            }
        }
    }
    for cell in cells.iter_mut() {
        cell.finish();
    }
    Ok(CvStats {
        folds: cfg.folds,
        repeats: cfg.repeats,
        seed: cfg.seed,
        mode: cfg.mode,
        c: cfg.solver.c,
        skipped_folds,
        cells,
    })
}

fn run_fold(
    data: &LabeledDataset,
    plan: &crate::data::FoldPlan,
    cfg: &CvConfig,
    grid: &[(Method, usize)],
    offset: usize,
    rep: usize,
    fold: usize,
) -> Result<Outcome> {
    let (train, test) = apply_fold(data, plan, rep, fold)?;
    if !train.has_both_labels() {
        return Ok(Outcome::Skipped);
    }
    let x = train.x().to_dense();
    let mut results = Vec::new();
    let full = match solve_dense(&x, train.y(), &cfg.solver) {
        Ok(model) => model,
        Err(e) => {
            let msg = format!("repeat {rep} fold {fold}: {e}");
            let n_cells = offset + grid.len();
            return Ok(Outcome::Done(
                (0..n_cells).map(|i| (i, Err(msg.clone()))).collect(),
            ));
        }
    };
    if cfg.include_full {
        let res = error_rate(&full, &test)
            .map(|err| (err, full.margin, Vec::new()))
            .map_err(|e| format!("repeat {rep} fold {fold}: {e}"));
        results.push((0, res));
    }
    for (g, &(method, r)) in grid.iter().enumerate() {
        for draw in 0..cfg.draws_for(method) {
            let params = SelectionParams {
                solver: cfg.solver,
                seed: derive_seed(cfg.seed, rep, fold, draw),
                sketch_rows: cfg.sketch_rows,
                chunk_fraction: cfg.chunk_fraction,
                diagnostics: false,
                ..SelectionParams::new(method, r)
            };
            let run = match cfg.mode {
                Mode::Supervised => supervised_with_model(&train, &x, &full, &params),
                Mode::Unsupervised => select(&train, Mode::Unsupervised, &params),
            };
            let res = run
                .and_then(|run| {
                    let err = run.error_rate(&test)?;
                    Ok((err, run.report.margin_sampled, run.report.ranked))
                })
                .map_err(|e| format!("repeat {rep} fold {fold} draw {draw}: {e}"));
            results.push((offset + g, res));
        }
    }
    Ok(Outcome::Done(results))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureCount {
    /// 0-based column index.
    pub index: usize,
    /// 1-based feature number, as in svmlight files.
    pub feature: usize,
    pub count: usize,
    /// Mean position in the ranked selections that contain the feature.
    pub mean_rank: f64,
}

/// Selection counts over the given ranked selections, most frequent first;
/// ties broken by mean rank, then index.
pub fn feature_frequency(selections: &[Vec<usize>]) -> Vec<FeatureCount> {
    let mut acc: HashMap<usize, (usize, usize)> = HashMap::new();
    for ranked in selections {
        for (pos, &idx) in ranked.iter().enumerate() {
            let e = acc.entry(idx).or_default();
            e.0 += 1;
            e.1 += pos;
        }
    }
    let mut out: Vec<FeatureCount> = acc
        .into_iter()
        .map(|(index, (count, pos_sum))| FeatureCount {
            index,
            feature: index + 1,
            count,
            mean_rank: pos_sum as f64 / count as f64,
        })
        .collect();
    out.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(a.mean_rank.total_cmp(&b.mean_rank))
            .then(a.index.cmp(&b.index))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::FeatureMatrix;

    fn toy() -> LabeledDataset {
        let x = FeatureMatrix::from_rows(&[
            vec![2.0, 0.1],
            vec![1.5, -0.2],
            vec![-2.0, 0.0],
            vec![-1.0, 0.3],
        ])
        .unwrap();
        LabeledDataset::new(x, vec![1.0, 1.0, -1.0, -1.0]).unwrap()
    }

    #[test]
    fn moments() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.3]), (0.3, 0.0));
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn seeds_differ_per_coordinate() {
        let s = derive_seed(1, 0, 0, 0);
        assert_ne!(s, derive_seed(1, 1, 0, 0));
        assert_ne!(s, derive_seed(1, 0, 1, 0));
        assert_ne!(s, derive_seed(1, 0, 0, 1));
        assert_ne!(derive_seed(1, 1, 0, 0), derive_seed(1, 0, 1, 0));
        assert_eq!(s, derive_seed(1, 0, 0, 0));
    }

    #[test]
    fn frequency_ordering() {
        let freq = feature_frequency(&[vec![3, 1], vec![1, 3], vec![1, 0]]);
        assert_eq!(freq[0].index, 1);
        assert_eq!(freq[0].count, 3);
        assert_eq!(freq[1].index, 3);
        assert_eq!(freq[2].feature, 1);
    }

    #[test]
    fn unsupervised_rfe_rejected() {
        let mut cfg = CvConfig::new(vec![Method::Rfe], vec![1]);
        cfg.mode = Mode::Unsupervised;
        assert!(cross_validate(&toy(), &cfg).is_err());
    }

    #[test]
    fn uniform_draws_are_aggregated() {
        let mut cfg = CvConfig::new(vec![Method::Uniform], vec![1]);
        cfg.folds = 2;
        cfg.repeats = 1;
        cfg.mode = Mode::Unsupervised;
        let stats = cross_validate(&toy(), &cfg).unwrap();
        let cell = stats.cell(Method::Uniform, 1).unwrap();
        assert_eq!(
            cell.evaluations + cell.failures.len(),
            (2 - stats.skipped_folds) * DEFAULT_DRAWS
        );
        assert_eq!(cell.skipped, stats.skipped_folds);
    }
}
