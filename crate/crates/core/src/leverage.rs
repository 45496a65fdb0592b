//! Randomized column selection by leverage scores of the right singular basis.

use nalgebra::DMatrix;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bss::ORTHONORMAL_TOL;
use crate::error::{invalid, Error, Result};
use crate::matrix::{orthonormality_deviation, row_norms_sq};
use crate::sampling::{SamplingOperator, Selection};

/// Sampling distribution `pᵢ = ‖Vᵢ‖² / ℓ` over the d rows of V.
#[derive(Debug, Clone, PartialEq)]
pub struct LeverageDistribution {
    probabilities: Vec<f64>,
    ell: usize,
}

impl LeverageDistribution {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn ell(&self) -> usize {
        self.ell
    }
}

pub fn leverage_scores(v: &DMatrix<f64>) -> Result<LeverageDistribution> {
    let deviation = orthonormality_deviation(v);
    if !(deviation <= ORTHONORMAL_TOL) {
        return Err(Error::NotOrthonormal { deviation });
    }
    let ell = v.ncols();
    if ell == 0 {
        return Err(invalid("leverage scores of an empty basis are undefined"));
    }
    let norms = row_norms_sq(v);
    // Σ‖Vᵢ‖² = ℓ exactly for orthonormal V; dividing by the realized sum keeps
    // the distribution normalized under rounding.
    let total: f64 = norms.iter().sum();
    Ok(LeverageDistribution {
        probabilities: norms.into_iter().map(|n| n / total).collect(),
        ell,
    })
}

/// `r` i.i.d. draws from the leverage distribution; a row drawn with
/// probability `pᵢ` gets weight `1/√(r·pᵢ)`.
pub fn leverage_select(v: &DMatrix<f64>, r: usize, seed: u64) -> Result<SamplingOperator> {
    if r == 0 {
        return Err(invalid("leverage sampling needs r ≥ 1"));
    }
    let dist = leverage_scores(v)?;
    sample_from(&dist, r, seed)
}

pub fn sample_from(dist: &LeverageDistribution, r: usize, seed: u64) -> Result<SamplingOperator> {
    let p = dist.probabilities();
    let index = WeightedIndex::new(p)
        .map_err(|e| invalid(format!("leverage distribution is unusable: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let selections = (0..r)
        .map(|_| {
            let column = index.sample(&mut rng);
            Selection {
                column,
                weight: 1.0 / (r as f64 * p[column]).sqrt(),
            }
        })
        .collect();
    SamplingOperator::new(p.len(), selections)
}
