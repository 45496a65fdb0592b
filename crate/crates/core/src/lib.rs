//! Feature selection for linear SVMs that provably preserves the margin and
//! the radius of the minimum enclosing ball.
//!
//! Features are chosen by sampling and rescaling columns of the data matrix
//! so that the right singular subspace is approximately preserved:
//! deterministically with spectral sparsification ([`bss_select`]),
//! randomly by leverage scores ([`leverage_select`]), or on a Gaussian
//! sketch ([`approx_bss_select`]). [`supervised_select`] and
//! [`unsupervised_select`] run a selector and retrain, and
//! [`verify_margin_bound`] checks the resulting margins and radii against
//! the measured spectral error.

// `!(x > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bss;
pub mod cv;
pub mod data;
pub mod error;
pub mod geometry;
pub mod leverage;
pub mod matrix;
pub mod pipeline;
pub mod sampling;
pub mod sketch;
pub mod svm;
pub mod verify;

pub use baselines::{pivoted_qr, rfe_select, rrqr_select, uniform_select, RfeOutcome};
pub use bss::{bss_select, bss_select_traced, BarrierSchedule, BssTrace};
pub use cv::{cross_validate, feature_frequency, CvCell, CvConfig, CvStats, FeatureCount};
pub use data::{
    apply_fold, gen_synthetic, make_folds, parse_csv, parse_svmlight, parse_svmlight_with_dim,
    write_svmlight, FoldPlan, LabelColumn, LabeledDataset,
};
pub use error::{Error, ErrorClass, Result};
pub use geometry::{meb_radius, radius_bound_check, EnclosingBall, RadiusCheck};
pub use leverage::{leverage_scores, leverage_select, LeverageDistribution};
pub use matrix::{
    random_orthonormal, spectral_norm, thin_svd, FeatureMatrix, SparseMatrix, ThinSvd,
};
pub use pipeline::{
    select, supervised_select, unsupervised_select, Method, Mode, Selected, SelectionParams,
    SelectionReport, SelectionRun,
};
pub use sampling::{SamplingOperator, Selection};
pub use sketch::{approx_bss_select, gaussian_sketch, SketchConfig};
pub use svm::{predict, solve_dense, solve_dual, SolverConfig, SvmModel};
pub use verify::{verify_margin_bound, BoundReport, CheckStatus};
