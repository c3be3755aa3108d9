//! `passfpca`: simulate curves, fit robust FPCA, estimate eigenratios and
//! run simulation benchmarks.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 parse, 5 estimation,
//! 6 benchmark failure under `--strict`.

mod config;
mod csvio;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use passfpca::eigenratio::{
    convergence_condition, eigenratio_elliptical, pair_scores, ConvergenceDiagnostic,
    EigenratioEstimate, FixedPointOptions, DEFAULT_MAX_ITER, DEFAULT_TOL, DEFAULT_TRIM_FRACTION,
};
use passfpca::metrics::{align_sign, run_benchmark, BenchTable};
use passfpca::pipeline::{Estimator, RatioSolver, Smoothing};
use passfpca::simgen::{
    fourier_truth, generate_replicate, OutlierScheme, ScoreLaw, SimulationConfig, DEFAULT_N_POINTS,
    DEFAULT_OUTLIER_FRACTION,
};
use passfpca::smoothing::{presmooth, Penalty, SmoothingScheme, SmoothingSpec, DEFAULT_BASIS_SIZE};
use passfpca::{FitContext, FitOptions, FunctionalSample, Grid, MethodSpec};

use config::BenchConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "passfpca",
    version,
    about = "Robust functional PCA with the pairwise spatial sign covariance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw curves from the simulation model and write them as CSV.
    Simulate(SimulateArgs),
    /// Estimate eigenfunctions, eigenvalues and eigenratios from a curve CSV.
    Fit(FitArgs),
    /// Estimate eigenratios, from curves or from a PASS spectrum.
    Ratio(RatioArgs),
    /// Run a benchmark described by a TOML file.
    Bench(BenchArgs),
}

fn parse_with<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

fn parse_penalty(s: &str) -> Result<Penalty, String> {
    if s == "auto" {
        return Ok(Penalty::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(Penalty::Fixed(v)),
        _ => Err(format!(
            "penalty must be `auto` or a nonnegative number, got `{s}`"
        )),
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of curves.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Grid size N; points are t_j = j/N.
    #[arg(long, default_value_t = DEFAULT_N_POINTS)]
    n_points: usize,
    /// Score law: gaussian, frechet, lognormal, chisquare, multivariate-t.
    #[arg(long, default_value = "gaussian", value_parser = parse_with::<ScoreLaw>)]
    law: ScoreLaw,
    /// Outlier scheme: none, ol1 (mean shift), ol2 (score and shape).
    #[arg(long, default_value = "none", value_parser = parse_with::<OutlierScheme>)]
    outliers: OutlierScheme,
    /// Share of contaminated curves, rounded up.
    #[arg(long, default_value_t = DEFAULT_OUTLIER_FRACTION)]
    outlier_fraction: f64,
    /// Standard deviation of pointwise Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replicate index; each replicate has its own random streams.
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    /// Curves CSV to write.
    #[arg(long, short)]
    out: PathBuf,
    /// Truth CSV to write (mean, eigenfunctions, eigenvalues, outlier mask).
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    /// Number of components.
    #[arg(long, default_value_t = 4)]
    q: usize,
    /// Share of largest pair projections trimmed per component.
    #[arg(long, default_value_t = DEFAULT_TRIM_FRACTION)]
    trim: f64,
    /// Fixed-point tolerance on the max-norm step.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// B-spline basis size per axis for surface smoothing.
    #[arg(long, default_value_t = DEFAULT_BASIS_SIZE)]
    basis_size: usize,
    /// Smoothing penalty: `auto` (GCV) or a fixed value.
    #[arg(long, default_value = "auto", value_parser = parse_penalty)]
    penalty: Penalty,
}

impl SolverArgs {
    fn options(&self) -> FitOptions {
        FitOptions {
            q: self.q,
            trim_fraction: self.trim,
            tol: self.tol,
            max_iter: self.max_iter,
            basis_size: self.basis_size,
            penalty: self.penalty,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Curves CSV.
    #[arg(long, short)]
    input: PathBuf,
    /// Method, `estimator[/smoothing[/ratio]]`, e.g. `pass`, `classical/smooth-cf`.
    #[arg(long, default_value = "pass", value_parser = parse_with::<MethodSpec>)]
    method: MethodSpec,
    /// Overrides the smoothing part of --method: none, pre-smooth, smooth-cf.
    #[arg(long, value_parser = parse_with::<Smoothing>)]
    smoothing: Option<Smoothing>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Directory for eigenfunctions.csv and result.json.
    #[arg(long, short, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["input", "eigenvalues"])))]
struct RatioArgs {
    /// Curves CSV.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// PASS eigenvalues, comma separated (elliptical solver only).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    eigenvalues: Option<Vec<f64>>,
    /// Initial ratios for --eigenvalues, comma separated (default all ones).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    init: Option<Vec<f64>>,
    /// Solver: mc or elliptical.
    #[arg(long, default_value = "mc", value_parser = parse_with::<RatioSolver>)]
    solver: RatioSolver,
    /// Smoothing scheme for curve input.
    #[arg(long, default_value = "none", value_parser = parse_with::<Smoothing>)]
    smoothing: Smoothing,
    #[command(flatten)]
    opts: SolverArgs,
    /// Result JSON; printed to stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark TOML file.
    config: PathBuf,
    /// Results CSV (overrides the file's output.results; stdout if neither).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Summary JSON (overrides output.summary).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Per-replicate CSV (overrides output.replicates).
    #[arg(long)]
    replicates: Option<PathBuf>,
    /// Overrides the replication count.
    #[arg(long)]
    replications: Option<usize>,
    /// Exit with code 6 if any replicate failed.
    #[arg(long)]
    strict: bool,
    /// Validate the file and list the settings without running.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Ratio(a) => ratio(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let config = SimulationConfig {
        n: a.n,
        n_points: a.n_points,
        score_law: a.law,
        outlier_scheme: a.outliers,
        outlier_fraction: a.outlier_fraction,
        noise_sd: a.noise_sd,
        seed: a.seed,
    };
    config.validate()?;
    let (sample, truth) = generate_replicate(&config, a.replicate)?;
    csvio::write_curves(&a.out, &sample)?;
    if let Some(path) = &a.truth {
        csvio::write_truth(path, &truth)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SolverDoc {
    method: String,
    iterations: usize,
    converged: bool,
    final_delta: Option<f64>,
    initial_ratios: Option<Vec<f64>>,
}

impl SolverDoc {
    fn new(est: &EigenratioEstimate, init: Option<Vec<f64>>) -> Self {
        Self {
            method: serde_json::to_value(est.method)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            iterations: est.iterations,
            converged: est.converged,
            final_delta: est.final_delta.is_finite().then_some(est.final_delta),
            initial_ratios: init,
        }
    }
}

#[derive(Serialize)]
struct FitDoc {
    input: String,
    method: String,
    n_curves: usize,
    n_points: usize,
    q_requested: usize,
    q: usize,
    eigenvalues: Vec<f64>,
    ratios: Option<Vec<f64>>,
    pve1: Option<f64>,
    solver: Option<SolverDoc>,
    eigenfunctions_file: String,
    options: FitOptions,
}

fn fit(a: FitArgs) -> Result<(), CliError> {
    let mut method = a.method;
    if let Some(s) = a.smoothing {
        method = MethodSpec::new(method.estimator, s, method.ratio)?;
    }
    let opts = a.solver.options();
    let sample = csvio::read_curves(&a.input)?;
    let result = FitContext::new(&sample, opts).fit(method)?;
    let eig_path = a.out_dir.join("eigenfunctions.csv");
    csvio::write_eigenfunctions(&eig_path, &result.eigensystem)?;
    let doc = FitDoc {
        input: a.input.display().to_string(),
        method: method.to_string(),
        n_curves: sample.n_curves(),
        n_points: sample.n_points(),
        q_requested: opts.q,
        q: result.eigensystem.q(),
        eigenvalues: result.eigensystem.eigenvalues.clone(),
        ratios: result.ratios.as_ref().map(|r| r.ratios.clone()),
        pve1: result.pve1(),
        solver: result
            .ratios
            .as_ref()
            .map(|r| SolverDoc::new(r, result.init.clone())),
        eigenfunctions_file: eig_path.display().to_string(),
        options: opts,
    };
    csvio::write_json(Some(&a.out_dir.join("result.json")), &doc)?;
    if let Some(r) = result.ratios.as_ref().filter(|r| !r.converged) {
        eprintln!(
            "warning: ratio solver stopped after {} iterations without converging",
            r.iterations
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceDoc {
    lhs: Vec<f64>,
    bound: Vec<f64>,
    margins: Vec<f64>,
    holds: bool,
}

impl From<ConvergenceDiagnostic> for ConvergenceDoc {
    fn from(d: ConvergenceDiagnostic) -> Self {
        Self {
            holds: d.holds(),
            lhs: d.lhs,
            bound: d.bound,
            margins: d.margins,
        }
    }
}

#[derive(Serialize)]
struct RatioDoc {
    solver: String,
    pass_eigenvalues: Vec<f64>,
    ratios: Vec<f64>,
    pve1: f64,
    details: SolverDoc,
    /// Contraction check at the estimate (Monte Carlo solver only).
    convergence: Option<ConvergenceDoc>,
}

fn ratio(a: RatioArgs) -> Result<(), CliError> {
    let opts = a.opts.options();
    if !matches!(a.solver, RatioSolver::Mc | RatioSolver::Elliptical) {
        return Err(CliError::Usage(
            "--solver must be `mc` or `elliptical`".into(),
        ));
    }
    let doc = if let Some(mu) = a.eigenvalues {
        if a.solver != RatioSolver::Elliptical {
            return Err(CliError::Usage(
                "--eigenvalues needs --solver elliptical; the mc solver needs curves".into(),
            ));
        }
        let init = a.init.unwrap_or_else(|| vec![1.0; mu.len()]);
        let fp = FixedPointOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
        };
        let est = eigenratio_elliptical(&mu, &init, fp)?;
        RatioDoc {
            solver: a.solver.name().into(),
            pass_eigenvalues: mu,
            pve1: est.pve1(),
            ratios: est.ratios.clone(),
            details: SolverDoc::new(&est, Some(init)),
            convergence: None,
        }
    } else {
        let path = a.input.expect("clap enforces one source");
        if a.init.is_some() {
            return Err(CliError::Usage(
                "--init applies only with --eigenvalues".into(),
            ));
        }
        let sample = csvio::read_curves(&path)?;
        let method = MethodSpec::new(Estimator::Pass, a.smoothing, a.solver)?;
        let result = FitContext::new(&sample, opts).fit(method)?;
        let est = result.ratios.clone().expect("ratio solver requested");
        let convergence = if a.solver == RatioSolver::Mc && est.ratios.len() > 1 {
            let curves = pair_curves(&sample, a.smoothing, &opts)?;
            let ps = pair_scores(
                &curves,
                &result.eigensystem,
                est.ratios.len(),
                opts.trim_fraction,
            )?;
            Some(convergence_condition(&ps, &est.ratios[1..])?.into())
        } else {
            None
        };
        RatioDoc {
            solver: a.solver.name().into(),
            pass_eigenvalues: result.eigensystem.eigenvalues.clone(),
            pve1: est.pve1(),
            ratios: est.ratios.clone(),
            details: SolverDoc::new(&est, result.init.clone()),
            convergence,
        }
    };
    csvio::write_json(a.out.as_deref(), &doc)?;
    if !doc.details.converged {
        eprintln!("warning: ratio solver did not converge");
    }
    Ok(())
}

/// The curves whose pairwise differences feed the Monte Carlo solver.
fn pair_curves(
    sample: &FunctionalSample,
    smoothing: Smoothing,
    opts: &FitOptions,
) -> Result<FunctionalSample, CliError> {
    if smoothing != Smoothing::PreSmooth {
        return Ok(sample.clone());
    }
    let spec = SmoothingSpec {
        scheme: SmoothingScheme::PreSmooth,
        penalty: opts.penalty,
        basis_size: opts.basis_size,
    };
    Ok(presmooth(sample, &spec)?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_results(path: Option<&Path>, table: &BenchTable) -> Result<(), CliError> {
    let header = [
        "score_law",
        "outlier_scheme",
        "n",
        "n_points",
        "noise_sd",
        "outlier_fraction",
        "method",
        "replications",
        "successes",
        "failures",
        "mse",
        "bias",
        "pve_mse",
        "median_pve1",
        "failed",
    ];
    let mut buf = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::Usage(format!("writing results: {e}"));
    buf.write_record(header).map_err(io_err)?;
    for r in &table.rows {
        let c = &r.config;
        buf.write_record([
            c.score_law.name().to_string(),
            c.outlier_scheme.name().to_string(),
            c.n.to_string(),
            c.n_points.to_string(),
            c.noise_sd.to_string(),
            c.outlier_fraction.to_string(),
            r.method.to_string(),
            r.replications.to_string(),
            r.successes.to_string(),
            r.failures.to_string(),
            opt(r.mse),
            opt(r.bias),
            opt(r.pve_mse),
            opt(r.median_pve1),
            r.failed.to_string(),
        ])
        .map_err(io_err)?;
    }
    let bytes = buf
        .into_inner()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    write_bytes(path, &bytes)
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::io("<stdout>", e))
        }
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            std::fs::write(p, bytes).map_err(|e| CliError::io(p, e))
        }
    }
}

/// One row per (setting, method, replicate): PVE₁ and the squared L2 error
/// of the sign-aligned first eigenfunction.
fn write_replicates(path: &Path, table: &BenchTable) -> Result<(), CliError> {
    let mut buf = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Usage(format!("writing replicates: {e}"));
    buf.write_record([
        "score_law",
        "outlier_scheme",
        "n",
        "noise_sd",
        "method",
        "replicate",
        "status",
        "pve1",
        "squared_error",
    ])
    .map_err(err)?;
    for r in &table.rows {
        let c = &r.config;
        let grid = Grid::new(c.n_points)?;
        let phi1 = fourier_truth(&grid).eigenfunction(0);
        let d = &r.detail;
        let mut ok = d.eigenfunctions.iter().zip(&d.ratios);
        for rep in 0..d.replications {
            let mut row = vec![
                c.score_law.name().to_string(),
                c.outlier_scheme.name().to_string(),
                c.n.to_string(),
                c.noise_sd.to_string(),
                r.method.to_string(),
                rep.to_string(),
            ];
            if d.failed.contains(&rep) {
                row.extend(["failed".into(), String::new(), String::new()]);
            } else {
                let (ef, ratios) = ok.next().expect("one stored estimate per success");
                let aligned = align_sign(ef, &phi1, &grid)?;
                let diff: Vec<f64> = aligned.iter().zip(&phi1).map(|(a, b)| a - b).collect();
                let se = grid.inner_product(&diff, &diff)?;
                let pve = ratios.as_ref().map(|v| 1.0 / v.iter().sum::<f64>());
                row.extend(["ok".into(), opt(pve), se.to_string()]);
            }
            buf.write_record(&row).map_err(err)?;
        }
    }
    let bytes = buf
        .into_inner()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    write_bytes(Some(path), &bytes)
}

#[derive(Serialize)]
struct BenchSummary<'a> {
    config: String,
    seed: u64,
    replications: usize,
    methods: Vec<String>,
    settings: usize,
    fit: FitOptions,
    rows_with_failures: usize,
    failed_rows: usize,
    warnings: Vec<String>,
    table: &'a BenchTable,
}

fn bench(a: BenchArgs) -> Result<(), CliError> {
    let cfg = BenchConfig::load(&a.config)?;
    let methods = cfg.methods()?;
    let settings = cfg.settings()?;
    let replications = a.replications.unwrap_or(cfg.replications);
    if replications == 0 {
        return Err(CliError::Usage("replications must be at least 1".into()));
    }
    if a.check {
        println!(
            "{}: {} settings x {} methods, {} replications, seed {}",
            a.config.display(),
            settings.len(),
            methods.len(),
            replications,
            cfg.seed
        );
        return Ok(());
    }
    let table = run_benchmark(&settings, &methods, replications, cfg.seed, cfg.fit)?;

    let mut warnings = Vec::new();
    for r in table.rows.iter().filter(|r| r.failures > 0) {
        let w = format!(
            "{} {} n={} noise={} {}: {} of {} replicates failed{}",
            r.config.score_law.name(),
            r.config.outlier_scheme.name(),
            r.config.n,
            r.config.noise_sd,
            r.method,
            r.failures,
            r.replications,
            if r.failed { " (cell failed)" } else { "" }
        );
        eprintln!("warning: {w}");
        warnings.push(w);
    }

    let results = a.out.or(cfg.output.results.clone());
    write_results(results.as_deref(), &table)?;
    if let Some(path) = a.replicates.or(cfg.output.replicates.clone()) {
        write_replicates(&path, &table)?;
    }
    if let Some(path) = a.summary.or(cfg.output.summary.clone()) {
        let summary = BenchSummary {
            config: a.config.display().to_string(),
            seed: cfg.seed,
            replications,
            methods: methods.iter().map(|m| m.to_string()).collect(),
            settings: settings.len(),
            fit: cfg.fit,
            rows_with_failures: warnings.len(),
            failed_rows: table.rows.iter().filter(|r| r.failed).count(),
            warnings: warnings.clone(),
            table: &table,
        };
        csvio::write_json(Some(&path), &summary)?;
    }
    if a.strict && !warnings.is_empty() {
        return Err(CliError::Strict(format!(
            "{} benchmark rows had failed replicates",
            warnings.len()
        )));
    }
    Ok(())
}
