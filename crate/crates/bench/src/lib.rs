//! Fixtures shared by the benchmarks.

use margin_sparse::{gen_synthetic, thin_svd, LabeledDataset};
use nalgebra::DMatrix;

/// Synthetic classification data of the given shape with 10 relevant features.
pub fn synthetic(n: usize, d: usize, seed: u64) -> LabeledDataset {
    gen_synthetic(n, d, 10.min(d), seed).expect("valid synthetic shape")
}

/// Right singular basis (d × rank) of a synthetic data matrix.
pub fn basis(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    thin_svd(synthetic(n, d, seed).x(), 1e-10).expect("svd").v
}
