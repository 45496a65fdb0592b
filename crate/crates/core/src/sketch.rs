//! Gaussian sketching of the support-vector matrix ahead of spectral
//! sparsification, for when the number of support vectors is large.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bss::bss_select;
use crate::error::{invalid, Result};
use crate::matrix::{check_finite, thin_svd_dense, DEFAULT_RANK_THRESHOLD};
use crate::sampling::SamplingOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchConfig {
    /// Rows of the sketch.
    pub t: usize,
    pub seed: u64,
}

impl SketchConfig {
    pub fn new(t: usize, seed: u64) -> Result<Self> {
        if t == 0 {
            return Err(invalid("sketch size t must be at least 1"));
        }
        Ok(Self { t, seed })
    }
}

/// t×p matrix of i.i.d. standard normals, filled row by row from the seeded stream.
pub fn gaussian_matrix(t: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<f64> = (0..t * p)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    DMatrix::from_row_slice(t, p, &entries)
}

/// `G·X` with unscaled standard normal `G`.
pub fn gaussian_sketch(x: &DMatrix<f64>, cfg: SketchConfig) -> Result<DMatrix<f64>> {
    check_finite(x)?;
    Ok(gaussian_matrix(cfg.t, x.nrows(), cfg.seed) * x)
}

/// Spectral sparsification on the right singular basis of `G·X`.
pub fn approx_bss_select(
    x: &DMatrix<f64>,
    t: usize,
    r: usize,
    seed: u64,
) -> Result<SamplingOperator> {
    let sketch = gaussian_sketch(x, SketchConfig::new(t, seed)?)?;
    let svd = thin_svd_dense(&sketch, DEFAULT_RANK_THRESHOLD)?;
    bss_select(&svd.v, r)
}
