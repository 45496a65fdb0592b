//! Deterministic single-set spectral sparsification.
//!
//! Given `V ∈ ℝ^{d×ℓ}` with orthonormal columns and a budget `r > ℓ`, the
//! selector greedily picks `r` rows `vᵢ` of `V` with weights `t` so that
//! `A = Σ t·vᵢvᵢᵀ` keeps its spectrum strictly between a lower barrier `L_τ`
//! and an upper barrier `U_τ` that both advance every step. After the final
//! rescaling every singular value of `RᵀV` lies in `[1 − √(ℓ/r), 1 + √(ℓ/r)]`
//! and `‖VᵀV − VᵀRRᵀV‖₂ ≤ 3√(ℓ/r)`.
//!
//! Among admissible rows the one not yet selected with the largest norm wins;
//! a previously selected row is reused only when no fresh row qualifies.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::matrix::orthonormality_deviation;
use crate::sampling::{SamplingOperator, Selection};

/// Largest accepted `‖VᵀV − I‖₂` for the input basis.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Relative slack when testing `𝓤 ≤ 𝓛`.
pub const SCORE_SLACK: f64 = 1e-12;

/// Rows with norm at or below this are never selected.
pub const ZERO_ROW_NORM: f64 = 1e-12;

/// Barrier schedule for a given `(ℓ, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSchedule {
    pub ell: usize,
    pub r: usize,
    pub delta_lower: f64,
    pub delta_upper: f64,
}

impl BarrierSchedule {
    pub fn new(ell: usize, r: usize) -> Result<Self> {
        if ell == 0 {
            return Err(invalid(
                "spectral sparsification needs at least one column in V",
            ));
        }
        if r <= ell {
            return Err(invalid(format!(
                "number of selections r = {r} must exceed the rank ℓ = {ell}"
            )));
        }
        let q = (ell as f64 / r as f64).sqrt();
        Ok(Self {
            ell,
            r,
            delta_lower: 1.0,
            delta_upper: (1.0 + q) / (1.0 - q),
        })
    }

    fn root(&self) -> f64 {
        (self.ell as f64 * self.r as f64).sqrt()
    }

    pub fn lower(&self, tau: usize) -> f64 {
        tau as f64 - self.root()
    }

    pub fn upper(&self, tau: usize) -> f64 {
        self.delta_upper * (tau as f64 + self.root())
    }

    /// Factor applied to every `√t` weight at the end.
    pub fn final_scale(&self) -> f64 {
        let q = (self.ell as f64 / self.r as f64).sqrt();
        ((1.0 - q) / self.r as f64).sqrt()
    }
}

/// `Φ(L, A) = Σ 1/(λᵢ − L)`; requires `L` strictly below the spectrum.
pub fn lower_potential(lower: f64, eigenvalues: &[f64]) -> Result<f64> {
    if let Some(&bad) = eigenvalues.iter().find(|&&l| l <= lower) {
        return Err(Error::BarrierCrossed {
            barrier: "L",
            value: lower,
            min_eig: bad,
            max_eig: eigenvalues.iter().copied().fold(f64::MIN, f64::max),
        });
    }
    Ok(eigenvalues.iter().map(|l| 1.0 / (l - lower)).sum())
}

/// `Φ̂(U, A) = Σ 1/(U − λᵢ)`; requires `U` strictly above the spectrum.
pub fn upper_potential(upper: f64, eigenvalues: &[f64]) -> Result<f64> {
    if let Some(&bad) = eigenvalues.iter().find(|&&l| l >= upper) {
        return Err(Error::BarrierCrossed {
            barrier: "U",
            value: upper,
            min_eig: eigenvalues.iter().copied().fold(f64::MAX, f64::min),
            max_eig: bad,
        });
    }
    Ok(eigenvalues.iter().map(|l| 1.0 / (upper - l)).sum())
}

/// The accumulated matrix `A_τ` with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct BarrierState {
    a: DMatrix<f64>,
    tau: usize,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl BarrierState {
    /// `A₀ = 0`.
    pub fn zero(ell: usize) -> Self {
        Self::from_matrix(DMatrix::zeros(ell, ell), 0)
    }

    pub fn from_matrix(a: DMatrix<f64>, tau: usize) -> Self {
        let eig = SymmetricEigen::new(a.clone());
        Self {
            a,
            tau,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.as_slice()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.max()
    }

    /// `A ← A + t·v vᵀ`, symmetrized, with a fresh eigendecomposition.
    fn add_rank_one(&mut self, v: &DVector<f64>, t: f64) {
        self.a += v * v.transpose() * t;
        let sym = (&self.a + self.a.transpose()) * 0.5;
        self.a = sym;
        let eig = SymmetricEigen::new(self.a.clone());
        self.eigenvalues = eig.eigenvalues;
        self.eigenvectors = eig.eigenvectors;
        self.tau += 1;
    }

    /// Per-eigendirection coefficients such that `𝓛(v) = Σ zₖ² lowerₖ` and
    /// `𝓤(v) = Σ zₖ² upperₖ` with `z = Qᵀv`.
    fn score_weights(&self, lower: f64, upper: f64, dl: f64, du: f64) -> Result<ScoreWeights> {
        let eigs = self.eigenvalues.as_slice();
        let shifted_l = lower + dl;
        let shifted_u = upper + du;
        if let Some(l) = eigs.iter().find(|&&l| l == shifted_l) {
            return Err(Error::SingularShift(format!(
                "A − (L + δ_L)I has eigenvalue {l} at L + δ_L = {shifted_l}"
            )));
        }
        if let Some(l) = eigs.iter().find(|&&l| l == shifted_u) {
            return Err(Error::SingularShift(format!(
                "(U + δ_U)I − A has eigenvalue {l} at U + δ_U = {shifted_u}"
            )));
        }
        let phi: f64 = eigs.iter().map(|l| 1.0 / (l - lower)).sum();
        let phi_shift: f64 = eigs.iter().map(|l| 1.0 / (l - shifted_l)).sum();
        let phi_hat: f64 = eigs.iter().map(|l| 1.0 / (upper - l)).sum();
        let phi_hat_shift: f64 = eigs.iter().map(|l| 1.0 / (shifted_u - l)).sum();
        let lower_gap = phi_shift - phi;
        let upper_gap = phi_hat - phi_hat_shift;
        if lower_gap == 0.0 || !lower_gap.is_finite() {
            return Err(Error::SingularShift(format!(
                "lower potential difference is {lower_gap}"
            )));
        }
        if upper_gap == 0.0 || !upper_gap.is_finite() {
            return Err(Error::SingularShift(format!(
                "upper potential difference is {upper_gap}"
            )));
        }
        let lower_w = eigs
            .iter()
            .map(|l| {
                let g = l - shifted_l;
                1.0 / (g * g * lower_gap) - 1.0 / g
            })
            .collect();
        let upper_w = eigs
            .iter()
            .map(|l| {
                let g = shifted_u - l;
                1.0 / (g * g * upper_gap) + 1.0 / g
            })
            .collect();
        Ok(ScoreWeights {
            lower: lower_w,
            upper: upper_w,
        })
    }
}

struct ScoreWeights {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ScoreWeights {
    fn scores(&self, z: impl Iterator<Item = f64>) -> CandidateScores {
        let mut lower = 0.0;
        let mut upper = 0.0;
        for (k, zk) in z.enumerate() {
            let z2 = zk * zk;
            lower += z2 * self.lower[k];
            upper += z2 * self.upper[k];
        }
        CandidateScores { lower, upper }
    }
}

/// The pair `(𝓛(v), 𝓤(v))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateScores {
    pub lower: f64,
    pub upper: f64,
}

impl CandidateScores {
    /// `𝓤 ≤ 𝓛` up to [`SCORE_SLACK`].
    pub fn admissible(&self) -> bool {
        self.upper <= self.lower + SCORE_SLACK * self.lower.abs().max(self.upper.abs())
    }

    /// `1/t = (𝓤 + 𝓛)/2`.
    pub fn inverse_weight(&self) -> f64 {
        0.5 * (self.upper + self.lower)
    }
}

/// Lower and upper scores of a single vector against the current state.
pub fn candidate_scores(
    v: &DVector<f64>,
    state: &BarrierState,
    lower: f64,
    upper: f64,
    delta_lower: f64,
    delta_upper: f64,
) -> Result<CandidateScores> {
    if v.len() != state.a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "candidate vector",
            expected: state.a.nrows(),
            found: v.len(),
        });
    }
    let w = state.score_weights(lower, upper, delta_lower, delta_upper)?;
    let z = state.eigenvectors.transpose() * v;
    Ok(w.scores(z.iter().copied()))
}

/// One accepted step of the greedy loop.
#[derive(Debug, Clone, Serialize)]
pub struct BssStep {
    pub column: usize,
    pub scores: CandidateScores,
    pub inverse_weight: f64,
    pub fresh: bool,
    pub candidates: usize,
}

/// Instrumentation gathered while selecting.
#[derive(Debug, Clone, Default, Serialize)]
pub struct BssTrace {
    pub steps: Vec<BssStep>,
    /// ℓ×ℓ eigendecompositions of A, one per iteration plus the initial one.
    pub eigendecompositions: usize,
    /// Number of `(𝓛, 𝓤)` pairs evaluated.
    pub score_evaluations: usize,
    /// Rows whose projected length `Qᵀv` was formed; one per row per iteration.
    pub projections: usize,
    pub reselections: usize,
}

/// Selects `r` weighted rows of `V`; see the module docs for the guarantee.
pub fn bss_select(v: &DMatrix<f64>, r: usize) -> Result<SamplingOperator> {
    bss_select_traced(v, r).map(|(op, _)| op)
}

pub fn bss_select_traced(v: &DMatrix<f64>, r: usize) -> Result<(SamplingOperator, BssTrace)> {
    let (d, ell) = v.shape();
    let schedule = BarrierSchedule::new(ell, r)?;
    let deviation = orthonormality_deviation(v);
    if !(deviation <= ORTHONORMAL_TOL) {
        return Err(Error::NotOrthonormal { deviation });
    }

    let norms: Vec<f64> = v.row_iter().map(|row| row.norm()).collect();
    let mut chosen = vec![false; d];
    let mut state = BarrierState::zero(ell);
    let mut trace = BssTrace {
        eigendecompositions: 1,
        ..BssTrace::default()
    };
    let mut inverse_weights = Vec::with_capacity(r);
    let mut columns = Vec::with_capacity(r);

    for tau in 0..r {
        let lower = schedule.lower(tau);
        let upper = schedule.upper(tau);
        let weights =
            state.score_weights(lower, upper, schedule.delta_lower, schedule.delta_upper)?;
        let projected = v * &state.eigenvectors;
        trace.projections += d;

        let mut best_fresh: Option<(usize, CandidateScores)> = None;
        let mut best_any: Option<(usize, CandidateScores)> = None;
        let mut candidates = 0;
        for i in 0..d {
            if norms[i] <= ZERO_ROW_NORM {
                continue;
            }
            let scores = weights.scores(projected.row(i).iter().copied());
            trace.score_evaluations += 1;
            if !scores.admissible() || !(scores.inverse_weight() > 0.0) {
                continue;
            }
            candidates += 1;
            let better = |cur: &Option<(usize, CandidateScores)>| {
                cur.is_none_or(|(j, _)| norms[i] > norms[j])
            };
            if !chosen[i] && better(&best_fresh) {
                best_fresh = Some((i, scores));
            }
            if better(&best_any) {
                best_any = Some((i, scores));
            }
        }

        let (column, scores, fresh) = match (best_fresh, best_any) {
            (Some((i, s)), _) => (i, s, true),
            (None, Some((i, s))) => (i, s, false),
            (None, None) => {
                return Err(Error::NoCandidate {
                    iteration: tau,
                    state: dump_state(&state, &schedule, tau, v, &weights),
                })
            }
        };
        if !fresh {
            trace.reselections += 1;
        }

        let inv_t = scores.inverse_weight();
        let row = v.row(column).transpose();
        state.add_rank_one(&row, 1.0 / inv_t);
        trace.eigendecompositions += 1;

        let (next_lower, next_upper) = (schedule.lower(tau + 1), schedule.upper(tau + 1));
        if !(state.min_eigenvalue() > next_lower && state.max_eigenvalue() < next_upper) {
            return Err(Error::BarrierCrossed {
                barrier: if state.min_eigenvalue() <= next_lower {
                    "L"
                } else {
                    "U"
                },
                value: if state.min_eigenvalue() <= next_lower {
                    next_lower
                } else {
                    next_upper
                },
                min_eig: state.min_eigenvalue(),
                max_eig: state.max_eigenvalue(),
            });
        }

        chosen[column] = true;
        columns.push(column);
        inverse_weights.push(inv_t);
        trace.steps.push(BssStep {
            column,
            scores,
            inverse_weight: inv_t,
            fresh,
            candidates,
        });
    }

    let scale = schedule.final_scale();
    let selections = columns
        .into_iter()
        .zip(inverse_weights)
        .map(|(column, inv_t)| Selection {
            column,
            weight: scale / inv_t.sqrt(),
        })
        .collect();
    Ok((SamplingOperator::new(d, selections)?, trace))
}

fn dump_state(
    state: &BarrierState,
    schedule: &BarrierSchedule,
    tau: usize,
    v: &DMatrix<f64>,
    weights: &ScoreWeights,
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "ℓ = {}, r = {}, τ = {tau}, L = {}, U = {}, δ_L = {}, δ_U = {}",
        schedule.ell,
        schedule.r,
        schedule.lower(tau),
        schedule.upper(tau),
        schedule.delta_lower,
        schedule.delta_upper
    );
    let _ = writeln!(out, "eigenvalues of A: {:?}", state.eigenvalues.as_slice());
    let projected = v * &state.eigenvectors;
    let mut closest: Vec<(usize, CandidateScores)> = (0..v.nrows())
        .map(|i| (i, weights.scores(projected.row(i).iter().copied())))
        .collect();
    closest.sort_by(|a, b| (a.1.upper - a.1.lower).total_cmp(&(b.1.upper - b.1.lower)));
    for (i, s) in closest.iter().take(5) {
        let _ = writeln!(out, "row {i}: 𝓛 = {:.6e}, 𝓤 = {:.6e}", s.lower, s.upper);
    }
    out
}
