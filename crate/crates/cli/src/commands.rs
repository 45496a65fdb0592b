use std::fs;
use std::path::Path;
use std::time::Instant;

use margin_sparse::{
    bss_select, cross_validate, feature_frequency, gen_synthetic, leverage_select, parse_csv,
    parse_svmlight_with_dim, random_orthonormal, select, verify_margin_bound, write_svmlight,
    CheckStatus, CvCell, CvConfig, CvStats, LabelColumn, LabeledDataset, Method, Mode,
    SamplingOperator, SelectionParams, SelectionRun, SolverConfig,
};
use serde::Serialize;

use crate::args::{
    Bound, CvArgs, DataArgs, FeatureFreqArgs, Format, GridArgs, SelectArgs, SolverArgs, SynthArgs,
    VerifyArgs,
};
use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "margin-sparse/1";

/// A dataset with the map from its columns back to the input columns.
struct Loaded {
    data: LabeledDataset,
    columns: Option<Vec<usize>>,
}

impl Loaded {
    fn original(&self, j: usize) -> usize {
        self.columns.as_ref().map_or(j, |c| c[j])
    }
}

fn load(
    path: &Path,
    format: Option<Format>,
    label: LabelColumn,
    dim: Option<usize>,
) -> CliResult<LabeledDataset> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let format = format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Svmlight,
    });
    let parsed = match format {
        Format::Svmlight => parse_svmlight_with_dim(&text, dim),
        Format::Csv => parse_csv(&text, label),
    };
    parsed.map_err(|e| CliError::from(e).context(&path.display().to_string()))
}

fn load_data(args: &DataArgs) -> CliResult<Loaded> {
    let data = load(&args.data, args.format, args.label_column.into(), args.dim)?;
    if args.drop_zero_columns {
        let (data, keep) = data.remove_zero_columns();
        Ok(Loaded {
            data,
            columns: Some(keep),
        })
    } else {
        Ok(Loaded {
            data,
            columns: None,
        })
    }
}

fn solver(args: &SolverArgs) -> CliResult<SolverConfig> {
    positive("C", args.c)?;
    positive("kkt-tol", args.kkt_tol)?;
    Ok(SolverConfig {
        c: args.c,
        kkt_tol: args.kkt_tol,
        max_passes: None,
    })
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "--{name} must be positive and finite, got {v}"
        )))
    }
}

fn open_unit(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "--{name} must lie in (0, 1), got {v}"
        )))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> CliResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "--{name} must be at least {min}, got {v}"
        )))
    }
}

/// Pretty JSON to the output file or stdout.
pub fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::numerical(e.to_string()))?;
    text.push('\n');
    write_text(&text, out)
}

fn write_text(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct BoundChecks {
    margin_thm1_or_3: CheckStatus,
    radius_thm5: CheckStatus,
}

#[derive(Serialize)]
struct SelectOutput {
    schema: &'static str,
    method: Method,
    mode: Mode,
    r: usize,
    seed: Option<u64>,
    #[serde(rename = "C")]
    c: f64,
    /// 0-based input columns, one entry per selection (repeats included for weighted methods).
    selected_indices: Vec<usize>,
    weights: Option<Vec<f64>>,
    /// Distinct input columns, most important first.
    ranked_indices: Vec<usize>,
    rank: usize,
    n_support_vectors: Option<usize>,
    margin_full: f64,
    margin_sampled: f64,
    spectral_error: Option<f64>,
    radius_full: Option<f64>,
    radius_sampled: Option<f64>,
    radius_spectral_error: Option<f64>,
    bound_checks: BoundChecks,
    converged: bool,
    wall_time_s: f64,
}

fn params(
    method: Method,
    r: usize,
    solver: SolverConfig,
    seed: u64,
    t: Option<usize>,
    chunk_fraction: f64,
) -> CliResult<SelectionParams> {
    at_least("features", r, 1)?;
    open_unit("chunk-fraction", chunk_fraction)?;
    if let Some(t) = t {
        at_least("t", t, 1)?;
    }
    let mut p = SelectionParams::new(method, r).seed(seed);
    p.solver = solver;
    p.sketch_rows = t;
    p.chunk_fraction = chunk_fraction;
    Ok(p)
}

fn select_output(loaded: &Loaded, run: &SelectionRun, started: Instant) -> SelectOutput {
    let report = &run.report;
    let bounds = verify_margin_bound(report);
    SelectOutput {
        schema: SCHEMA,
        method: report.method,
        mode: report.mode,
        r: report.r,
        seed: report.seed,
        c: report.c,
        selected_indices: report
            .selected
            .indices()
            .into_iter()
            .map(|j| loaded.original(j))
            .collect(),
        weights: report
            .method
            .is_weighted()
            .then(|| report.selected.weights()),
        ranked_indices: report.ranked.iter().map(|&j| loaded.original(j)).collect(),
        rank: report.rank,
        n_support_vectors: report.n_support_vectors,
        margin_full: report.margin_full,
        margin_sampled: report.margin_sampled,
        spectral_error: report.spectral_error,
        radius_full: report.radius_full,
        radius_sampled: report.radius_sampled,
        radius_spectral_error: report.radius_spectral_error,
        bound_checks: BoundChecks {
            margin_thm1_or_3: bounds.margin,
            radius_thm5: bounds.radius,
        },
        converged: report.converged,
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

pub fn cmd_select(args: &SelectArgs) -> CliResult<()> {
    let started = Instant::now();
    let solver = solver(&args.solver)?;
    open_unit("meb-delta", args.meb_delta)?;
    let mut p = params(
        args.method,
        args.features,
        solver,
        args.seed,
        args.t,
        args.chunk_fraction,
    )?;
    p.meb_delta = args.meb_delta;
    let loaded = load_data(&args.data)?;
    let run = select(&loaded.data, args.mode, &p)?;
    emit(&select_output(&loaded, &run, started), args.out.as_deref())
}

#[derive(Serialize)]
struct CvOutput<'a> {
    schema: &'static str,
    command: &'static str,
    mode: Mode,
    folds: usize,
    repeats: usize,
    draws: usize,
    seed: u64,
    #[serde(rename = "C")]
    c: f64,
    skipped_folds: usize,
    cells: &'a [CvCell],
    wall_time_s: f64,
}

fn cv_config(methods: Vec<Method>, rs: Vec<usize>, grid: &GridArgs) -> CliResult<CvConfig> {
    let solver = solver(&grid.solver)?;
    at_least("folds", grid.folds, 2)?;
    at_least("repeats", grid.repeats, 1)?;
    at_least("draws", grid.draws, 1)?;
    open_unit("chunk-fraction", grid.chunk_fraction)?;
    if methods.is_empty() {
        return Err(CliError::usage("--methods must name at least one method"));
    }
    for &r in &rs {
        at_least("features", r, 1)?;
    }
    if let Some(t) = grid.t {
        at_least("t", t, 1)?;
    }
    if grid.mode == Mode::Unsupervised && methods.contains(&Method::Rfe) {
        return Err(CliError::usage("rfe requires supervised mode"));
    }
    let mut cfg = CvConfig::new(methods, rs);
    cfg.mode = grid.mode;
    cfg.folds = grid.folds;
    cfg.repeats = grid.repeats;
    cfg.draws = grid.draws;
    cfg.seed = grid.seed;
    cfg.solver = solver;
    cfg.sketch_rows = grid.t;
    cfg.chunk_fraction = grid.chunk_fraction;
    Ok(cfg)
}

fn run_cv(loaded: &Loaded, cfg: &CvConfig) -> CliResult<CvStats> {
    if loaded.data.n() < cfg.folds {
        return Err(CliError::data(format!(
            "{} points cannot be split into {} folds",
            loaded.data.n(),
            cfg.folds
        )));
    }
    Ok(cross_validate(&loaded.data, cfg)?)
}

pub fn cmd_cv(args: &CvArgs) -> CliResult<()> {
    let started = Instant::now();
    let mut cfg = cv_config(args.methods.clone(), args.features.clone(), &args.grid)?;
    cfg.include_full = !args.no_full;
    let loaded = load_data(&args.data)?;
    let stats = run_cv(&loaded, &cfg)?;
    let out = CvOutput {
        schema: SCHEMA,
        command: "cv",
        mode: stats.mode,
        folds: stats.folds,
        repeats: stats.repeats,
        draws: cfg.draws,
        seed: stats.seed,
        c: stats.c,
        skipped_folds: stats.skipped_folds,
        cells: &stats.cells,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    emit(&out, args.out.as_deref())
}

#[derive(Serialize)]
struct SynthOutput<'a> {
    schema: &'static str,
    command: &'static str,
    n: usize,
    d: usize,
    k: usize,
    seed: u64,
    out: &'a str,
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    at_least("n", args.n, 2)?;
    at_least("d", args.d, 1)?;
    if args.k > args.d {
        return Err(CliError::usage(format!(
            "--k = {} exceeds --d = {}",
            args.k, args.d
        )));
    }
    let data = gen_synthetic(args.n, args.d, args.k, args.seed)?;
    let text = write_svmlight(&data);
    match &args.out {
        Some(path) => {
            write_text(&text, Some(path))?;
            let out = SynthOutput {
                schema: SCHEMA,
                command: "synth",
                n: args.n,
                d: args.d,
                k: args.k,
                seed: args.seed,
                out: &path.display().to_string(),
            };
            emit(&out, None)
        }
        None => write_text(&text, None),
    }
}

#[derive(Serialize)]
struct SpectralTrial {
    seed: u64,
    spectral_error: f64,
    sigma_min: f64,
    sigma_max: f64,
    status: CheckStatus,
}

#[derive(Serialize)]
struct SpectralOutput {
    schema: &'static str,
    command: &'static str,
    bound: &'static str,
    method: Method,
    l: usize,
    r: usize,
    d: usize,
    trials: usize,
    /// `3√(ℓ/r)` for BSS; leverage sampling has no deterministic bound.
    error_bound: Option<f64>,
    /// `[1 − √(ℓ/r), 1 + √(ℓ/r)]` for the singular values of RᵀV under BSS.
    sigma_bounds: Option<[f64; 2]>,
    max_spectral_error: f64,
    passed: usize,
    failed: usize,
    results: Vec<SpectralTrial>,
    wall_time_s: f64,
}

fn spectral(args: &VerifyArgs, started: Instant) -> CliResult<()> {
    let ell = args
        .ell
        .ok_or_else(|| CliError::usage("--bound spectral needs --l"))?;
    let r = args
        .r
        .ok_or_else(|| CliError::usage("--bound spectral needs --r"))?;
    at_least("l", ell, 1)?;
    at_least("trials", args.trials, 1)?;
    let d = args.d.unwrap_or((4 * r).max(10 * ell));
    if d < ell {
        return Err(CliError::usage(format!(
            "--dim-v = {d} is smaller than --l = {ell}"
        )));
    }
    let q = (ell as f64 / r as f64).sqrt();
    let (error_bound, sigma_bounds) = match args.method {
        Method::Bss => {
            if r <= ell {
                return Err(CliError::usage(format!(
                    "bss needs --r > --l, got r = {r}, l = {ell}"
                )));
            }
            (Some(3.0 * q), Some([1.0 - q, 1.0 + q]))
        }
        Method::Leverage => {
            at_least("r", r, 1)?;
            (None, None)
        }
        other => {
            return Err(CliError::usage(format!(
                "--bound spectral supports bss and leverage, not {other}"
            )))
        }
    };

    let mut results = Vec::with_capacity(args.trials);
    for trial in 0..args.trials as u64 {
        let seed = args.seed.wrapping_add(trial);
        let v = random_orthonormal(d, ell, seed)?;
        let op: SamplingOperator = match args.method {
            Method::Bss => bss_select(&v, r)?,
            _ => leverage_select(&v, r, seed)?,
        };
        let e = op.spectral_error(&v)?;
        let sandwich = op.sandwich(&v)?;
        let eig = sandwich.symmetric_eigenvalues();
        let sigma_min = eig.min().max(0.0).sqrt();
        let sigma_max = eig.max().max(0.0).sqrt();
        let status = match (error_bound, sigma_bounds) {
            (Some(bound), Some([lo, hi])) => {
                let ok = e <= bound + 1e-9 && sigma_min >= lo - 1e-9 && sigma_max <= hi + 1e-9;
                if ok {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail
                }
            }
            _ => CheckStatus::NotApplicable,
        };
        results.push(SpectralTrial {
            seed,
            spectral_error: e,
            sigma_min,
            sigma_max,
            status,
        });
    }
    let out = SpectralOutput {
        schema: SCHEMA,
        command: "verify",
        bound: "spectral",
        method: args.method,
        l: ell,
        r,
        d,
        trials: args.trials,
        error_bound,
        sigma_bounds,
        max_spectral_error: results.iter().map(|t| t.spectral_error).fold(0.0, f64::max),
        passed: results
            .iter()
            .filter(|t| t.status == CheckStatus::Pass)
            .count(),
        failed: results
            .iter()
            .filter(|t| t.status == CheckStatus::Fail)
            .count(),
        results,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    emit(&out, args.out.as_deref())
}

#[derive(Serialize)]
struct BoundOutput {
    schema: &'static str,
    command: &'static str,
    bound: &'static str,
    status: CheckStatus,
    method: Method,
    mode: Mode,
    r: usize,
    seed: Option<u64>,
    #[serde(rename = "C")]
    c: f64,
    report: margin_sparse::BoundReport,
    wall_time_s: f64,
}

pub fn cmd_verify(args: &VerifyArgs) -> CliResult<()> {
    let started = Instant::now();
    if args.bound == Bound::Spectral {
        return spectral(args, started);
    }
    let path = args
        .data
        .as_deref()
        .ok_or_else(|| CliError::usage("this bound needs --data"))?;
    let r = args
        .r
        .ok_or_else(|| CliError::usage("this bound needs --r"))?;
    let solver = solver(&args.solver)?;
    open_unit("meb-delta", args.meb_delta)?;
    let mode = args.mode.unwrap_or(match args.bound {
        Bound::Margin => Mode::Supervised,
        _ => Mode::Unsupervised,
    });
    if !args.method.is_weighted() {
        return Err(CliError::usage(format!(
            "bound checks need a weighted selector (bss, leverage, approx-bss), not {}",
            args.method
        )));
    }
    let mut p = params(
        args.method,
        r,
        solver,
        args.seed,
        args.t,
        margin_sparse::pipeline::DEFAULT_CHUNK_FRACTION,
    )?;
    p.meb_delta = args.meb_delta;
    let data = load(path, args.format, args.label_column.into(), None)?;
    let run = select(&data, mode, &p)?;
    let report = verify_margin_bound(&run.report);
    let (name, status) = match args.bound {
        Bound::Margin => ("margin", report.margin),
        Bound::Radius => ("radius", report.radius),
        _ => ("ratio", report.ratio),
    };
    let out = BoundOutput {
        schema: SCHEMA,
        command: "verify",
        bound: name,
        status,
        method: run.report.method,
        mode,
        r,
        seed: run.report.seed,
        c: run.report.c,
        report,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    emit(&out, args.out.as_deref())
}

#[derive(Serialize)]
struct FreqEntry {
    /// 0-based input column.
    index: usize,
    /// 1-based feature number, as in svmlight files.
    feature: usize,
    count: usize,
    mean_rank: f64,
}

#[derive(Serialize)]
struct FreqOutput {
    schema: &'static str,
    command: &'static str,
    method: Method,
    mode: Mode,
    r: usize,
    folds: usize,
    repeats: usize,
    seed: u64,
    selections: usize,
    skipped_folds: usize,
    failures: Vec<String>,
    top: Vec<FreqEntry>,
    wall_time_s: f64,
}

pub fn cmd_feature_freq(args: &FeatureFreqArgs) -> CliResult<()> {
    let started = Instant::now();
    at_least("top", args.top, 1)?;
    let mut cfg = cv_config(vec![args.method], vec![args.features], &args.grid)?;
    cfg.include_full = false;
    let loaded = load_data(&args.data)?;
    let stats = run_cv(&loaded, &cfg)?;
    let cell = stats
        .cell(args.method, args.features)
        .ok_or_else(|| CliError::numerical("cross-validation produced no cell"))?;
    let top = feature_frequency(&cell.selections)
        .into_iter()
        .take(args.top)
        .map(|f| {
            let index = loaded.original(f.index);
            FreqEntry {
                index,
                feature: index + 1,
                count: f.count,
                mean_rank: f.mean_rank,
            }
        })
        .collect();
    let out = FreqOutput {
        schema: SCHEMA,
        command: "feature-freq",
        method: args.method,
        mode: args.grid.mode,
        r: args.features,
        folds: stats.folds,
        repeats: stats.repeats,
        seed: stats.seed,
        selections: cell.selections.len(),
        skipped_folds: stats.skipped_folds,
        failures: cell.failures.clone(),
        top,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    emit(&out, args.out.as_deref())
}
