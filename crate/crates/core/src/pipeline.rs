//! Supervised (select on the support vectors) and unsupervised (select on all
//! training points) feature selection, with margins and radii measured before
//! and after sampling.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{rfe_select, rrqr_select, uniform_select};
use crate::bss::bss_select;
use crate::data::LabeledDataset;
use crate::error::{invalid, Error, Result};
use crate::geometry::{radius_bound_check, DEFAULT_MEB_DELTA};
use crate::leverage::{leverage_scores, sample_from};
use crate::matrix::{thin_svd_dense, FeatureMatrix, DEFAULT_RANK_THRESHOLD};
use crate::sampling::SamplingOperator;
use crate::sketch::approx_bss_select;
use crate::svm::{solve_dense, SolverConfig, SvmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bss,
    Leverage,
    ApproxBss,
    Uniform,
    Rrqr,
    Rfe,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Bss,
        Method::Leverage,
        Method::ApproxBss,
        Method::Uniform,
        Method::Rrqr,
        Method::Rfe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bss => "bss",
            Method::Leverage => "leverage",
            Method::ApproxBss => "approx-bss",
            Method::Uniform => "uniform",
            Method::Rrqr => "rrqr",
            Method::Rfe => "rfe",
        }
    }

    /// Whether the output depends on the seed.
    pub fn is_randomized(self) -> bool {
        matches!(self, Method::Leverage | Method::ApproxBss | Method::Uniform)
    }

    /// Whether the selection carries rescaling weights.
    pub fn is_weighted(self) -> bool {
        matches!(self, Method::Bss | Method::Leverage | Method::ApproxBss)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Supervised,
    Unsupervised,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Supervised => "supervised",
            Mode::Unsupervised => "unsupervised",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supervised" => Ok(Mode::Supervised),
            "unsupervised" => Ok(Mode::Unsupervised),
            _ => Err(invalid(format!("unknown mode {s:?}"))),
        }
    }
}

pub const DEFAULT_CHUNK_FRACTION: f64 = 0.1;

/// Everything besides the data that determines a selection run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionParams {
    pub method: Method,
    pub r: usize,
    pub solver: SolverConfig,
    pub seed: u64,
    /// Sketch rows for approximate BSS; `None` means `max(1, r/8)`.
    pub sketch_rows: Option<usize>,
    pub chunk_fraction: f64,
    pub meb_delta: f64,
    /// Compute radii and the full-data sampled margin. Off for CV grids.
    pub diagnostics: bool,
}

impl SelectionParams {
    pub fn new(method: Method, r: usize) -> Self {
        Self {
            method,
            r,
            solver: SolverConfig::default(),
            seed: 0,
            sketch_rows: None,
            chunk_fraction: DEFAULT_CHUNK_FRACTION,
            meb_delta: DEFAULT_MEB_DELTA,
            diagnostics: true,
        }
    }

    pub fn c(mut self, c: f64) -> Self {
        self.solver.c = c;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sketch_rows(mut self, t: usize) -> Self {
        self.sketch_rows = Some(t);
        self
    }

    pub fn diagnostics(mut self, on: bool) -> Self {
        self.diagnostics = on;
        self
    }

    fn sketch_t(&self) -> usize {
        self.sketch_rows.unwrap_or((self.r / 8).max(1))
    }
}

/// Selected features: weighted for the sparsifiers, unit-weight otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Selected {
    Weighted(SamplingOperator),
    Unweighted {
        source_dim: usize,
        indices: Vec<usize>,
    },
}

impl Selected {
    pub fn operator(&self) -> SamplingOperator {
        match self {
            Selected::Weighted(op) => op.clone(),
            Selected::Unweighted {
                source_dim,
                indices,
            } => SamplingOperator::unweighted(*source_dim, indices).expect("indices within range"),
        }
    }

    /// Column index of each selection, repeats included.
    pub fn indices(&self) -> Vec<usize> {
        match self {
            Selected::Weighted(op) => op.columns(),
            Selected::Unweighted { indices, .. } => indices.clone(),
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        match self {
            Selected::Weighted(op) => op.weights(),
            Selected::Unweighted { indices, .. } => vec![1.0; indices.len()],
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Selected::Weighted(op) => op.target_dim(),
            Selected::Unweighted { indices, .. } => indices.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Margins, radii and spectral error of one selection run.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub method: Method,
    pub mode: Mode,
    pub r: usize,
    pub seed: Option<u64>,
    pub c: f64,
    pub selected: Selected,
    /// Distinct selected columns, most important first.
    pub ranked: Vec<usize>,
    /// Rank ℓ of the matrix features were selected from.
    pub rank: usize,
    pub n_support_vectors: Option<usize>,
    /// γ* on the selection matrix (support vectors or all training points).
    pub margin_full: f64,
    /// γ̃* on the same points after sampling.
    pub margin_sampled: f64,
    /// Margin of all training points after sampling (supervised mode only).
    pub margin_all_sampled: Option<f64>,
    pub radius_full: Option<f64>,
    pub radius_sampled: Option<f64>,
    /// `‖VᵀV − VᵀRRᵀV‖₂` for the right singular basis V of the selection matrix.
    pub spectral_error: Option<f64>,
    /// The same error for the basis of the points stacked with their ball center.
    pub radius_spectral_error: Option<f64>,
    pub meb_delta: f64,
    pub converged: bool,
}

/// A report together with the classifier trained in the sampled space.
#[derive(Debug, Clone)]
pub struct SelectionRun {
    pub report: SelectionReport,
    pub operator: SamplingOperator,
    pub model: SvmModel,
}

impl SelectionRun {
    /// Out-of-sample error of the sampled-space classifier.
    pub fn error_rate(&self, test: &LabeledDataset) -> Result<f64> {
        if test.n() == 0 {
            return Ok(0.0);
        }
        let sampled = FeatureMatrix::Dense(self.operator.apply(test.x())?);
        crate::svm::error_rate(
            &self.model,
            &LabeledDataset::new(sampled, test.y().to_vec())?,
        )
    }
}

/// Select on the support vectors of the full-data solution, then retrain on
/// the sampled support vectors.
pub fn supervised_select(data: &LabeledDataset, params: &SelectionParams) -> Result<SelectionRun> {
    data.require_both_labels()?;
    let x = data.x().to_dense();
    let full = solve_dense(&x, data.y(), &params.solver)?;
    supervised_with_model(data, &x, &full, params)
}

/// As [`supervised_select`] with the full-data model already solved.
pub fn supervised_with_model(
    data: &LabeledDataset,
    x: &DMatrix<f64>,
    full: &SvmModel,
    params: &SelectionParams,
) -> Result<SelectionRun> {
    let sv = &full.support_indices;
    let y_sv: Vec<f64> = sv.iter().map(|&i| data.y()[i]).collect();
    if sv.len() < 2 || !(y_sv.contains(&1.0) && y_sv.contains(&-1.0)) {
        return Err(Error::TooFewSupportVectors(sv.len()));
    }
    let x_sv = x.select_rows(sv);
    let sv_data = data.select_rows(sv);
    let mut run = run_selection(&x_sv, &y_sv, Some(&sv_data), Mode::Supervised, params)?;
    run.report.n_support_vectors = Some(sv.len());
    if params.diagnostics {
        let sampled_all = run.operator.apply_dense(x)?;
        run.report.margin_all_sampled =
            Some(solve_dense(&sampled_all, data.y(), &params.solver)?.margin);
    }
    Ok(run)
}

/// Select on all training points without looking at the labels.
pub fn unsupervised_select(
    data: &LabeledDataset,
    params: &SelectionParams,
) -> Result<SelectionRun> {
    if params.method == Method::Rfe {
        return Err(invalid("rfe requires supervised mode"));
    }
    data.require_both_labels()?;
    let x = data.x().to_dense();
    run_selection(&x, data.y(), None, Mode::Unsupervised, params)
}

pub fn select(data: &LabeledDataset, mode: Mode, params: &SelectionParams) -> Result<SelectionRun> {
    match mode {
        Mode::Supervised => supervised_select(data, params),
        Mode::Unsupervised => unsupervised_select(data, params),
    }
}

fn run_selection(
    x: &DMatrix<f64>,
    y: &[f64],
    labeled: Option<&LabeledDataset>,
    mode: Mode,
    params: &SelectionParams,
) -> Result<SelectionRun> {
    let d = x.ncols();
    let r = params.r;
    if r == 0 {
        return Err(invalid("number of features r must be positive"));
    }
    let svd = thin_svd_dense(x, DEFAULT_RANK_THRESHOLD)?;
    let basis = &svd.v;

    let (selected, ranked) = match params.method {
        Method::Bss => {
            let op = bss_select(basis, r)?;
            let ranked = first_occurrence(&op.columns());
            (Selected::Weighted(op), ranked)
        }
        Method::ApproxBss => {
            let op = approx_bss_select(x, params.sketch_t(), r, params.seed)?;
            let ranked = first_occurrence(&op.columns());
            (Selected::Weighted(op), ranked)
        }
        Method::Leverage => {
            let dist = leverage_scores(basis)?;
            let op = sample_from(&dist, r, params.seed)?;
            let ranked = by_multiplicity(&op.columns(), dist.probabilities());
            (Selected::Weighted(op), ranked)
        }
        Method::Uniform => {
            let idx = uniform_select(d, r, params.seed)?;
            (
                Selected::Unweighted {
                    source_dim: d,
                    indices: idx.clone(),
                },
                idx,
            )
        }
        Method::Rrqr => {
            let idx = rrqr_select(x, r)?;
            (
                Selected::Unweighted {
                    source_dim: d,
                    indices: idx.clone(),
                },
                idx,
            )
        }
        Method::Rfe => {
            let data = labeled.ok_or_else(|| invalid("rfe requires supervised mode"))?;
            let out = rfe_select(data, r, &params.solver, params.chunk_fraction)?;
            (
                Selected::Unweighted {
                    source_dim: d,
                    indices: out.selected.clone(),
                },
                out.selected,
            )
        }
    };
    if selected.is_empty() {
        return Err(Error::Numerical(format!(
            "{} selected no features (matrix rank {})",
            params.method,
            svd.rank()
        )));
    }

    let operator = selected.operator();
    let full = solve_dense(x, y, &params.solver)?;
    let sampled_x = operator.apply_dense(x)?;
    let model = solve_dense(&sampled_x, y, &params.solver)?;

    let spectral_error = if params.method.is_weighted() {
        Some(operator.spectral_error(basis)?)
    } else {
        None
    };
    let (radius_full, radius_sampled, radius_spectral_error) = if params.diagnostics {
        let check = radius_bound_check(
            &FeatureMatrix::Dense(x.clone()),
            &operator,
            params.meb_delta,
        )?;
        (
            Some(check.radius_full),
            Some(check.radius_sampled),
            Some(check.spectral_error),
        )
    } else {
        (None, None, None)
    };

    let report = SelectionReport {
        method: params.method,
        mode,
        r,
        seed: params.method.is_randomized().then_some(params.seed),
        c: params.solver.c,
        selected,
        ranked,
        rank: svd.rank(),
        n_support_vectors: None,
        margin_full: full.margin,
        margin_sampled: model.margin,
        margin_all_sampled: None,
        radius_full,
        radius_sampled,
        spectral_error,
        radius_spectral_error,
        meb_delta: params.meb_delta,
        converged: full.converged && model.converged,
    };
    Ok(SelectionRun {
        report,
        operator,
        model,
    })
}

fn first_occurrence(columns: &[usize]) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    columns
        .iter()
        .copied()
        .filter(|c| seen.insert(*c))
        .collect()
}

/// Distinct columns by draw count, then sampling probability, then index.
fn by_multiplicity(columns: &[usize], probabilities: &[f64]) -> Vec<usize> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &c in columns {
        *counts.entry(c).or_default() += 1;
    }
    let mut distinct: Vec<usize> = counts.keys().copied().collect();
    distinct.sort_by(|a, b| {
        counts[b]
            .cmp(&counts[a])
            .then(probabilities[*b].total_cmp(&probabilities[*a]))
            .then(a.cmp(b))
    });
    distinct
}

/// `r = ⌈36·ℓ/ε²⌉`, the budget at which the sparsifier's error reaches ε/2.
pub fn guaranteed_budget(ell: usize, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("ε must lie in (0, 1), got {epsilon}")));
    }
    Ok((36.0 * ell as f64 / (epsilon * epsilon)).ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("lpsvm".parse::<Method>().is_err());
        assert_eq!("supervised".parse::<Mode>().unwrap(), Mode::Supervised);
    }

    #[test]
    fn two_point_supervised_bss_keeps_margin() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]]).unwrap();
        let data = LabeledDataset::new(x, vec![1.0, -1.0]).unwrap();
        let params = SelectionParams {
            solver: SolverConfig {
                c: 1.0,
                kkt_tol: 1e-10,
                max_passes: None,
            },
            ..SelectionParams::new(Method::Bss, 2)
        };
        let run = supervised_select(&data, &params).unwrap();
        assert_eq!(run.report.rank, 1);
        assert!(run.report.selected.indices().iter().all(|&c| c == 0));
        // Both points map to ±(w₁, w₂), so the sampled margin is ‖w‖·γ.
        let scale: f64 = run.report.selected.weights().iter().map(|w| w * w).sum();
        assert!((run.report.margin_full - 1.0).abs() < 1e-9);
        assert!((run.report.margin_sampled - scale.sqrt()).abs() < 1e-9);
        assert!((run.report.spectral_error.unwrap() - (1.0 - scale).abs()).abs() < 1e-12);
        let q = 0.5f64.sqrt();
        assert!(scale >= (1.0 - q).powi(2) && scale <= (1.0 + q).powi(2));
    }

    #[test]
    fn rfe_is_rejected_in_unsupervised_mode() {
        let data = gen_synthetic(20, 10, 2, 1).unwrap();
        let err = unsupervised_select(&data, &SelectionParams::new(Method::Rfe, 3)).unwrap_err();
        assert!(err.to_string().contains("rfe requires supervised mode"));
    }

    #[test]
    fn uniform_run_is_reproducible() {
        let data = gen_synthetic(30, 20, 3, 2).unwrap();
        let params = SelectionParams::new(Method::Uniform, 5).seed(9);
        let a = supervised_select(&data, &params).unwrap();
        let b = supervised_select(&data, &params).unwrap();
        assert_eq!(a.report.selected, b.report.selected);
        assert_eq!(
            a.report.margin_sampled.to_bits(),
            b.report.margin_sampled.to_bits()
        );
        assert_eq!(a.report.seed, Some(9));
    }

    #[test]
    fn identity_selection_reproduces_margin() {
        let data = gen_synthetic(24, 6, 2, 5).unwrap();
        let mut params = SelectionParams::new(Method::Uniform, 6).seed(1);
        params.solver.kkt_tol = 1e-10;
        let run = unsupervised_select(&data, &params).unwrap();
        assert!(
            (run.report.margin_sampled - run.report.margin_full).abs()
                < 1e-8 * run.report.margin_full
        );
    }

    #[test]
    fn multiplicity_ranking() {
        let ranked = by_multiplicity(&[3, 1, 3, 2, 1, 3], &[0.1, 0.2, 0.4, 0.3]);
        assert_eq!(ranked, vec![3, 1, 2]);
        assert_eq!(first_occurrence(&[4, 2, 4, 1]), vec![4, 2, 1]);
    }

    #[test]
    fn budget_formula() {
        assert_eq!(guaranteed_budget(2, 0.5).unwrap(), 288);
        assert!(guaranteed_budget(2, 1.0).is_err());
    }
}
