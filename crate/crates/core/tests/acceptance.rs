//! Acceptance suite. Every criterion runs, prints one PASS/FAIL line, and the
//! binary exits non-zero if any of them failed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use margin_sparse::geometry::{meb_dense, DEFAULT_MEB_DELTA};
use margin_sparse::matrix::{numerical_rank, thin_svd_dense, DEFAULT_RANK_THRESHOLD};
use margin_sparse::svm::solve_dense;
use margin_sparse::*;
use nalgebra::DMatrix;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed <= limit
}

fn precise_solver() -> SolverConfig {
    SolverConfig {
        c: 1.0,
        kkt_tol: 1e-8,
        max_passes: None,
    }
}

// 1. Singular values of RᵀV and the spectral error stay inside the BSS sandwich.
fn spectral_sandwich() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut runs = 0;
    for &(ell, r) in &[(2usize, 16usize), (4, 64), (8, 128)] {
        let q = (ell as f64 / r as f64).sqrt();
        for seed in 0..50u64 {
            runs += 1;
            let v = common::orthonormal(200, ell, 1000 * ell as u64 + seed);
            let op = bss_select(&v, r).expect("bss");
            let sv = common::singular_values(&common::sampled_rows(&op, &v));
            let e = common::spectral_error(&op, &v);
            let inside = sv
                .iter()
                .all(|&s| s >= 1.0 - q - 1e-9 && s <= 1.0 + q + 1e-9);
            if !inside || e > 3.0 * q + 1e-9 || op.target_dim() != r {
                failures.push(format!("(ℓ={ell}, r={r}, seed={seed}) σ={sv:?} ‖E‖={e:.4}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let fast = within(Duration::from_secs(60), elapsed);
    Outcome::new(
        failures.is_empty() && fast,
        format!(
            "{}/{runs} within bounds, {:.1?}{}",
            runs - failures.len(),
            elapsed,
            first(&failures)
        ),
    )
}

fn first(failures: &[String]) -> String {
    failures
        .first()
        .map(|f| format!("; first failure {f}"))
        .unwrap_or_default()
}

/// Supervised selection with r = 4·rank(X^sv) on the n = 60, d = 300, k = 10
/// datasets; returns the margin check of each seed.
fn supervised_margin_checks(method: Method) -> Vec<(u64, BoundReport)> {
    let solver = precise_solver();
    (0..20u64)
        .map(|seed| {
            let data = gen_synthetic(60, 300, 10, seed).expect("synthetic");
            let full = solve_dual(&data, &solver).expect("solve");
            let x_sv = data.x().to_dense().select_rows(&full.support_indices);
            let rank = numerical_rank(&x_sv).expect("rank");
            let params = SelectionParams {
                solver,
                seed,
                diagnostics: false,
                ..SelectionParams::new(method, 4 * rank)
            };
            let run = supervised_select(&data, &params).expect("selection");
            assert_eq!(run.report.rank, rank);
            (seed, verify_margin_bound(&run.report))
        })
        .collect()
}

fn describe_margins(checks: &[(u64, BoundReport)]) -> (usize, String) {
    let passed = checks.iter().filter(|(_, b)| b.margin.is_pass()).count();
    let not_pass: Vec<String> = checks
        .iter()
        .filter(|(_, b)| !b.margin.is_pass())
        .map(|(s, b)| {
            format!(
                "seed {s}: {} (‖E‖={:.3})",
                b.margin,
                b.spectral_error.unwrap_or(f64::NAN)
            )
        })
        .collect();
    let detail = if not_pass.is_empty() {
        String::new()
    } else {
        format!("; {}", not_pass.join(", "))
    };
    (passed, detail)
}

// 2. Margin inequality after supervised BSS.
fn bss_margin() -> Outcome {
    let start = Instant::now();
    let checks = supervised_margin_checks(Method::Bss);
    let (passed, detail) = describe_margins(&checks);
    let elapsed = start.elapsed();
    Outcome::new(
        passed == 20 && within(Duration::from_secs(120), elapsed),
        format!("{passed}/20 pass, {elapsed:.1?}{detail}"),
    )
}

// 3. Same protocol with leverage-score sampling.
fn leverage_margin() -> Outcome {
    let checks = supervised_margin_checks(Method::Leverage);
    let (passed, detail) = describe_margins(&checks);
    Outcome::new(passed >= 19, format!("{passed}/20 pass (need 19){detail}"))
}

/// Rank-10 datasets for the radius and ratio checks; r = 20·rank keeps the
/// guaranteed BSS error below ½, so the combined ratio bound is never vacuous.
const RANK10_R: usize = 200;

fn rank10(seed: u64) -> LabeledDataset {
    common::low_rank_dataset(60, 300, 10, seed)
}

// 4. Enclosing-ball radius after unsupervised BSS, center row included.
fn radius() -> Outcome {
    let start = Instant::now();
    let mut passed = 0;
    let mut notes = Vec::new();
    for seed in 0..20u64 {
        let data = rank10(seed);
        let x = data.x().to_dense().into_owned();
        let svd = thin_svd_dense(&x, DEFAULT_RANK_THRESHOLD).expect("svd");
        assert_eq!(svd.rank(), 10);
        let op = bss_select(&svd.v, RANK10_R).expect("bss");
        let check = radius_bound_check(data.x(), &op, 1e-8).expect("radius");
        if check.pass {
            passed += 1;
        } else {
            notes.push(format!(
                "seed {seed}: B̃²={:.4} (1+‖E_B‖)B²={:.4}",
                check.radius_sampled.powi(2),
                (1.0 + check.spectral_error) * check.radius_full.powi(2)
            ));
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        passed == 20 && within(Duration::from_secs(60), elapsed),
        format!("{passed}/20 pass, {elapsed:.1?}{}", first(&notes)),
    )
}

// 5. Radius-to-margin ratio on the rank-10 datasets.
fn ratio() -> Outcome {
    let count = |method: Method| -> (usize, Vec<String>) {
        let mut passed = 0;
        let mut notes = Vec::new();
        for seed in 0..20u64 {
            let params = SelectionParams {
                solver: precise_solver(),
                seed,
                meb_delta: 1e-8,
                ..SelectionParams::new(method, RANK10_R)
            };
            let run = unsupervised_select(&rank10(seed), &params).expect("selection");
            let b = verify_margin_bound(&run.report);
            if b.ratio.is_pass() {
                passed += 1;
            } else {
                notes.push(format!(
                    "{method} seed {seed}: {} (ε̂={:?})",
                    b.ratio, b.epsilon_hat
                ));
            }
        }
        (passed, notes)
    };
    let (bss, mut notes) = count(Method::Bss);
    let (lev, lev_notes) = count(Method::Leverage);
    notes.extend(lev_notes);
    Outcome::new(
        bss == 20 && lev >= 19,
        format!(
            "bss {bss}/20, leverage {lev}/20 (need 20 and 19){}",
            first(&notes)
        ),
    )
}

fn table_cv(k: usize, rs: Vec<usize>) -> CvStats {
    let data = gen_synthetic(200, 1000, k, 1).expect("synthetic");
    let mut cfg = CvConfig::new(
        vec![Method::Bss, Method::Leverage, Method::Rfe, Method::Rrqr],
        rs,
    );
    cfg.seed = 7;
    cfg.include_full = false;
    cross_validate(&data, &cfg).expect("cv")
}

// 6. Ten-fold CV repeated ten times on the k = 40 synthetic data, r = 30.
fn synthetic_cv() -> Outcome {
    let start = Instant::now();
    let stats = table_cv(40, vec![30]);
    let mut ok = true;
    let mut parts = Vec::new();
    for cell in &stats.cells {
        ok &= cell.mean <= 0.02 && cell.failures.is_empty() && cell.evaluations > 0;
        parts.push(format!("{} {:.4}", cell.label(), cell.mean));
    }
    let elapsed = start.elapsed();
    Outcome::new(
        ok && stats.cells.len() == 4 && within(Duration::from_secs(900), elapsed),
        format!("mean error {}, {elapsed:.1?}", parts.join(", ")),
    )
}

// 7. The five most frequently selected features are relevant and include feature k.
fn top_five() -> Outcome {
    let mut passed = 0;
    let mut notes = Vec::new();
    for k in [40usize, 50] {
        let stats = table_cv(k, vec![30, 40]);
        for r in [30usize, 40] {
            for method in [Method::Bss, Method::Leverage, Method::Rfe, Method::Rrqr] {
                let cell = stats.cell(method, r).expect("cell");
                let top: Vec<usize> = feature_frequency(&cell.selections)
                    .iter()
                    .take(5)
                    .map(|f| f.feature)
                    .collect();
                if top.len() == 5 && top.iter().all(|&f| f <= k) && top.contains(&k) {
                    passed += 1;
                } else {
                    notes.push(format!("{method} k={k} r={r} top5={top:?}"));
                }
            }
        }
    }
    let detail = if notes.is_empty() {
        String::new()
    } else {
        format!("; {}", notes.join(", "))
    };
    Outcome::new(passed == 16, format!("{passed}/16 cells{detail}"))
}

// 8. SMO against a projected-gradient QP oracle.
fn svm_oracle() -> Outcome {
    let mut worst = 0.0_f64;
    for seed in 0..20u64 {
        let mut rng = common::rng(500 + seed);
        let n = rng.random_range(2..=8);
        let d = rng.random_range(1..=3);
        let x = common::gaussian(n, d, &mut rng);
        let y = common::both_labels(n, &mut rng);
        let model = solve_dense(&x, &y, &SolverConfig::default()).expect("solve");
        let (_, oracle) = common::qp_oracle(&x, &y, 1.0, 200_000);
        let rel = (model.objective - oracle).abs() / oracle.abs().max(1e-12);
        worst = worst.max(rel);
    }
    let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
    let two = solve_dense(&x, &[1.0, -1.0], &SolverConfig::default()).expect("solve");
    let analytic = (two.alpha[0] - 0.5).abs() < 1e-6
        && (two.alpha[1] - 0.5).abs() < 1e-6
        && (two.margin - 1.0).abs() < 1e-6;
    Outcome::new(
        worst <= 1e-4 && analytic,
        format!(
            "worst relative objective gap {worst:.2e}; two-point α={:?} γ={:.8}",
            two.alpha, two.margin
        ),
    )
}

// 9. Approximate BSS tracks exact BSS and improves with the sketch size.
fn approx_bss() -> Outcome {
    // n = 160, d = 220, k = 4 gives p = 60 support vectors on seed 0.
    let data = gen_synthetic(160, 220, 4, 0).expect("synthetic");
    let full = solve_dual(&data, &SolverConfig::default()).expect("solve");
    let x_sv = data.x().to_dense().select_rows(&full.support_indices);
    let ell = numerical_rank(&x_sv).expect("rank");
    let r = 2 * ell;
    let run = |method: Method, t: Option<usize>| -> f64 {
        let mut cfg = CvConfig::new(vec![method], vec![r]);
        cfg.include_full = false;
        cfg.sketch_rows = t;
        let stats = cross_validate(&data, &cfg).expect("cv");
        let cell = stats.cell(method, r).expect("cell");
        assert!(cell.failures.is_empty(), "{:?}", cell.failures);
        cell.mean
    };
    let exact = run(Method::Bss, None);
    let t4 = run(Method::ApproxBss, Some(4 * ell));
    let t8 = run(Method::ApproxBss, Some(8 * ell));
    Outcome::new(
        (t8 - exact).abs() <= 0.05 && t8 <= t4 + 0.02,
        format!(
            "p={} ℓ={ell} r={r}: exact {exact:.4}, t=4ℓ {t4:.4}, t=8ℓ {t8:.4}",
            full.support_indices.len()
        ),
    )
}

// 10. Enclosing-ball radius against the exhaustive planar oracle.
fn meb_oracle() -> Outcome {
    let mut worst = 0.0_f64;
    let mut below = false;
    for seed in 0..50u64 {
        let mut rng = common::rng(900 + seed);
        let pts: Vec<[f64; 2]> = (0..10)
            .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect();
        let x = DMatrix::from_fn(10, 2, |i, j| pts[i][j]);
        let ball = meb_dense(&x, DEFAULT_MEB_DELTA).expect("meb");
        let exact = common::planar_meb_oracle(&pts);
        below |= ball.radius < exact * (1.0 - 1e-9);
        worst = worst.max(ball.radius / exact);
    }
    Outcome::new(
        worst <= 1.0 + 1e-3 && !below,
        format!(
            "worst radius ratio {worst:.8}{}",
            if below {
                ", radius below the oracle"
            } else {
                ""
            }
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("spectral sandwich of BSS", spectral_sandwich),
        ("margin bound, supervised BSS", bss_margin),
        ("margin bound, supervised leverage", leverage_margin),
        ("radius bound, BSS", radius),
        ("radius-to-margin ratio", ratio),
        ("synthetic CV error", synthetic_cv),
        ("top-5 feature frequency", top_five),
        ("SVM solver vs QP oracle", svm_oracle),
        ("approximate BSS trend", approx_bss),
        ("enclosing ball vs planar oracle", meb_oracle),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Outcome::new(false, "panicked"));
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name} [{:.1?}]: {}",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            start.elapsed(),
            outcome.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
