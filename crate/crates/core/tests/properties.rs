mod common;

use margin_sparse::geometry::meb_dense;
use margin_sparse::matrix::{spectral_norm_dense, thin_svd_dense, DEFAULT_RANK_THRESHOLD};
use margin_sparse::svm::solve_dense;
use margin_sparse::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

/// Random matrix, optionally a product of thin factors so that it is rank deficient.
fn random_matrix(rows: usize, cols: usize, rank: Option<usize>, seed: u64) -> DMatrix<f64> {
    let mut rng = common::rng(seed);
    match rank {
        Some(k) => common::gaussian(rows, k, &mut rng) * common::gaussian(k, cols, &mut rng),
        None => common::gaussian(rows, cols, &mut rng),
    }
}

fn two_norm(m: &DMatrix<f64>) -> f64 {
    let gram = if m.nrows() < m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    common::symmetric_norm(&gram).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn svd_reconstructs(rows in 1usize..=50, cols in 1usize..=80, low in prop::option::of(1usize..6), seed in any::<u64>()) {
        let m = random_matrix(rows, cols, low, seed);
        let svd = thin_svd_dense(&m, DEFAULT_RANK_THRESHOLD).unwrap();
        let sigma1 = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        prop_assert!(two_norm(&(&m - svd.reconstruct())) <= 1e-6 * sigma1);
        if let Some(k) = low {
            prop_assert_eq!(svd.rank(), k.min(rows).min(cols));
        }
        let vtv = svd.v.transpose() * &svd.v;
        prop_assert!((vtv - DMatrix::identity(svd.rank(), svd.rank())).norm() < 1e-10);
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn spectral_norm_matches_largest_singular_value(rows in 1usize..=30, cols in 1usize..=40, seed in any::<u64>()) {
        let m = random_matrix(rows, cols, None, seed);
        let exact = common::singular_values(&m).last().copied().unwrap();
        let power = spectral_norm_dense(&m, 1e-12);
        prop_assert!((power - exact).abs() <= 1e-6 * exact);
        prop_assert!((spectral_norm_dense(&m.transpose(), 1e-12) - power).abs() <= 1e-6 * exact);
    }

    #[test]
    fn bss_is_deterministic_and_sandwiched(d in 8usize..60, ell in 1usize..6, extra in 1usize..40, seed in any::<u64>()) {
        let ell = ell.min(d);
        let r = ell + extra;
        let v = common::orthonormal(d, ell, seed);
        let op = bss_select(&v, r).unwrap();
        prop_assert_eq!(&op, &bss_select(&v, r).unwrap());
        prop_assert_eq!(op.target_dim(), r);
        let q = (ell as f64 / r as f64).sqrt();
        for s in common::singular_values(&common::sampled_rows(&op, &v)) {
            prop_assert!(s >= 1.0 - q - 1e-9 && s <= 1.0 + q + 1e-9, "σ = {s}, q = {q}");
        }
        prop_assert!(common::spectral_error(&op, &v) <= 3.0 * q + 1e-9);
    }

    #[test]
    fn leverage_weights_depend_only_on_probability(d in 4usize..60, ell in 1usize..4, r in 1usize..50, seed in any::<u64>()) {
        let v = common::orthonormal(d, ell.min(d), seed);
        let op = leverage_select(&v, r, seed).unwrap();
        prop_assert_eq!(&op, &leverage_select(&v, r, seed).unwrap());
        let ell = v.ncols() as f64;
        for sel in op.selections() {
            let p = v.row(sel.column).norm_squared() / ell;
            prop_assert!((sel.weight - 1.0 / (r as f64 * p).sqrt()).abs() <= 1e-12 * sel.weight);
        }
    }

    #[test]
    fn approx_bss_is_deterministic(p in 2usize..12, d in 4usize..30, t in 1usize..16, seed in any::<u64>()) {
        let x = random_matrix(p, d, None, seed);
        let rank = thin_svd_dense(&(margin_sparse::sketch::gaussian_matrix(t, p, seed) * &x), DEFAULT_RANK_THRESHOLD).unwrap().rank();
        let r = rank + 3;
        prop_assert_eq!(approx_bss_select(&x, t, r, seed).unwrap(), approx_bss_select(&x, t, r, seed).unwrap());
    }

    #[test]
    fn solver_invariants(n in 2usize..30, d in 1usize..8, c in 0.1f64..10.0, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let x = common::gaussian(n, d, &mut rng);
        let y = common::both_labels(n, &mut rng);
        let cfg = SolverConfig { c, kkt_tol: 1e-6, max_passes: None };
        let model = solve_dense(&x, &y, &cfg).unwrap();
        prop_assert!(model.converged);
        prop_assert!(model.max_kkt_residual <= cfg.kkt_tol);
        let balance: f64 = model.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        prop_assert!(balance.abs() <= 1e-8);
        prop_assert!(model.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        for pair in model.objective_history.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-12 * pair[0].abs().max(1.0));
        }
        let direct = common::dual_objective(&x, &y, &model.alpha);
        prop_assert!((direct - model.objective).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn meb_translation_invariant(n in 1usize..20, d in 1usize..6, seed in any::<u64>(), shift in -100.0f64..100.0) {
        let x = random_matrix(n, d, None, seed);
        let moved = x.map(|v| v + shift);
        let a = meb_dense(&x, 1e-6).unwrap();
        let b = meb_dense(&moved, 1e-6).unwrap();
        prop_assert!((a.radius - b.radius).abs() <= 1e-6 * a.radius.max(1.0));
        // A ball of radius (1+δ)R* covering the points has its center within
        // √((1+δ)² − 1)·R* of the optimal one, so two such centers differ by twice that.
        let slack = 2.0 * ((1.0f64 + 1e-6).powi(2) - 1.0).sqrt() * a.radius + 1e-9 * shift.abs().max(1.0);
        let gap: f64 = a.center.iter().zip(&b.center).map(|(ca, cb)| (ca + shift - cb).powi(2)).sum::<f64>().sqrt();
        prop_assert!(gap <= slack, "center gap {gap}, allowed {slack}");
    }

    #[test]
    fn meb_within_delta_of_planar_oracle(n in 1usize..=10, seed in any::<u64>()) {
        let x = random_matrix(n, 2, None, seed);
        let pts: Vec<[f64; 2]> = (0..n).map(|i| [x[(i, 0)], x[(i, 1)]]).collect();
        let exact = common::planar_meb_oracle(&pts);
        let ball = meb_dense(&x, 1e-3).unwrap();
        prop_assert!(ball.radius >= exact * (1.0 - 1e-9) - 1e-12);
        prop_assert!(ball.radius <= exact * (1.0 + 1e-3) + 1e-12);
        prop_assert!(ball.lower_bound <= exact * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn svmlight_round_trip(n in 1usize..15, d in 1usize..12, density in 0.1f64..1.0, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| if rng.random_bool(density) { rng.random_range(-1e3..1e3) } else { 0.0 }).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let data = LabeledDataset::new(FeatureMatrix::from_rows(&rows).unwrap(), y).unwrap();
        let back = parse_svmlight_with_dim(&write_svmlight(&data), Some(d)).unwrap();
        prop_assert_eq!(back.y(), data.y());
        prop_assert_eq!(back.x().to_dense().into_owned(), data.x().to_dense().into_owned());
    }

    #[test]
    fn unsupervised_selection_ignores_labels(seed in 0u64..1000, method in prop::sample::select(vec![Method::Bss, Method::Leverage, Method::Rrqr, Method::Uniform])) {
        let data = gen_synthetic(12, 30, 3, seed).unwrap();
        let params = SelectionParams::new(method, 20).seed(seed).diagnostics(false);
        let a = unsupervised_select(&data, &params).unwrap();
        let b = unsupervised_select(&data.flipped(), &params).unwrap();
        prop_assert_eq!(a.report.selected.indices(), b.report.selected.indices());
        prop_assert_eq!(a.report.selected.weights(), b.report.selected.weights());
    }

    #[test]
    fn reports_are_pure(seed in 0u64..1000, method in prop::sample::select(Method::ALL.to_vec())) {
        let data = gen_synthetic(20, 40, 4, seed).unwrap();
        let params = SelectionParams::new(method, 15).seed(seed);
        let a = supervised_select(&data, &params);
        let b = supervised_select(&data, &params);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.report.selected.indices(), b.report.selected.indices());
                prop_assert_eq!(a.report.margin_sampled.to_bits(), b.report.margin_sampled.to_bits());
                prop_assert_eq!(a.report.radius_sampled.map(f64::to_bits), b.report.radius_sampled.map(f64::to_bits));
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "outcome differs between identical runs"),
        }
    }
}
