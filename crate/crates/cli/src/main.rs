//! Command-line front end for the `mixsde` library.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::json;

use mixsde::experiments::apriori::{apriori_inequality_check, AprioriConfig};
use mixsde::experiments::l2diff::{l2_difference_experiment, L2Config};
use mixsde::experiments::limit::{limit_theorem_experiment, LimitConfig};
use mixsde::experiments::moments::{moment_experiment, MomentConfig};
use mixsde::experiments::{Artifacts, EnsembleResult, PlotData, Tabular};
use mixsde::fracint::pathwise_bound;
use mixsde::holder::{evaluate, NormKind};
use mixsde::io::{path_table, read_path_csv, to_json, Table};
use mixsde::mollify::{mollify, mollify_rate};
use mixsde::solver::{euler_solve_mixed, solve_smooth_driver, validate_coefficients};
use mixsde::{exec, selftest, CoefficientSet, Error, GenConfig, HolderParams, Result, SolveConfig};

#[derive(Parser)]
#[command(name = "mixsde", version, about = "Pathwise tools for SDEs driven by a Wiener process and fractional Brownian motion")]
struct Cli {
    /// Worker threads for ensemble and kernel loops.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Wiener or fBm path.
    Paths(PathsArgs),
    /// Evaluate one of the Hölder-type norms of a path.
    Norms(NormsArgs),
    /// Generalized Stieltjes integral of two paths.
    Integrate(IntegrateArgs),
    /// Smooth a path or fit the smoothing rate.
    Mollify(MollifyArgs),
    /// Solve the mixed equation for one pair of drivers.
    Solve(SolveArgs),
    /// Convergence in probability of smoothed-driver solutions.
    Converge(ExperimentArgs),
    /// Mean-square gap regression on the truncation event.
    L2diff(ExperimentArgs),
    /// Moment bounds under grid doubling.
    Moments(ExperimentArgs),
    /// Spot check of the a priori estimate.
    Apriori(ExperimentArgs),
    /// Run the analytic example suite.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Wiener,
    Fbm,
}

#[derive(Args)]
struct PathsArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long = "H", default_value_t = 0.7)]
    hurst: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NormsArgs {
    /// Path CSV with columns `t,value`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Defaults to the midpoint of `(1 - gamma, 1/2)`.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Evaluation time; defaults to the end of the grid.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, value_parser = ["alpha", "0alpha", "2alpha", "infalpha"])]
    which: String,
}

#[derive(Args)]
struct IntegrateArgs {
    /// Integrand path CSV.
    #[arg(long)]
    f: PathBuf,
    /// Integrator path CSV on the same grid.
    #[arg(long)]
    g: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Also report whether the bound dominates the integral.
    #[arg(long)]
    check_bound: bool,
}

#[derive(Args)]
struct MollifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Window width; repeat for a rate fit.
    #[arg(long, required = true)]
    eps: Vec<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Fit the log-log rate of the seminorm gap over all widths.
    #[arg(long)]
    fit: bool,
    /// Output CSV: the smoothed path, or `eps,error` with `--fit`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Coefficient JSON file.
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    #[arg(long)]
    n: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long = "H", default_value_t = 0.7)]
    hurst: f64,
    #[arg(long, default_value_t = 0)]
    seed_w: u64,
    #[arg(long, default_value_t = 1)]
    seed_z: u64,
    /// Replace Z by its moving average of this width.
    #[arg(long)]
    mollify_eps: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON configuration; the built-in headline run when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn emit(table: &Table, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => table.write(p),
        None => {
            std::io::stdout().write_all(&table.to_csv()?)?;
            Ok(())
        }
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    print!("{}", to_json(value)?);
    Ok(())
}

fn resolve_alpha(alpha: Option<f64>, gamma: Option<f64>) -> Result<f64> {
    match (alpha, gamma) {
        (Some(a), Some(g)) => Ok(HolderParams::new(a, g)?.alpha),
        (None, Some(g)) => Ok(HolderParams::with_default_alpha(g)?.alpha),
        (Some(a), None) => Ok(a),
        (None, None) => Err(config_error("give --alpha or --gamma")),
    }
}

fn paths(a: PathsArgs) -> Result<()> {
    let cfg = GenConfig::new(a.n, a.horizon, a.hurst, a.seed);
    let p = match a.kind {
        Kind::Wiener => mixsde::gen_wiener(&cfg)?,
        Kind::Fbm => mixsde::gen_fbm(&cfg)?,
    };
    emit(&path_table(&p, "value"), a.out.as_deref())
}

fn norms(a: NormsArgs) -> Result<()> {
    let f = read_path_csv(&a.input)?;
    let alpha = resolve_alpha(a.alpha, a.gamma)?;
    let kind: NormKind = a.which.parse()?;
    let value = evaluate(kind, &f, alpha, a.t.unwrap_or_else(|| f.end_time()))?;
    print_json(&json!({ "value": value }))
}

fn integrate(a: IntegrateArgs) -> Result<()> {
    let f = read_path_csv(&a.f)?;
    let g = read_path_csv(&a.g)?;
    let lo = a.a.unwrap_or_else(|| f.t0());
    let hi = a.b.unwrap_or_else(|| f.end_time());
    let r = pathwise_bound(&f, &g, a.alpha, lo, hi)?;
    let mut out = json!({ "integral": r.integral, "bound": r.bound, "alpha": a.alpha });
    if a.check_bound {
        out["dominated"] = json!(r.integral.abs() <= r.bound);
    }
    print_json(&out)
}

fn mollify_cmd(a: MollifyArgs) -> Result<()> {
    let g = read_path_csv(&a.input)?;
    if !a.fit {
        let [eps] = a.eps[..] else {
            return Err(config_error("without --fit give exactly one --eps"));
        };
        return emit(&path_table(&mollify(&g, eps)?, "value"), a.out.as_deref());
    }
    let alpha = resolve_alpha(a.alpha, a.gamma)?;
    let fit = mollify_rate(&g, alpha, &a.eps)?;
    if let Some(out) = &a.out {
        let mut t = Table::new(&["eps", "error"]);
        for (e, err) in fit.eps.iter().zip(&fit.errors) {
            t.push(vec![(*e).into(), (*err).into()]);
        }
        t.write(out)?;
    }
    print_json(&json!({ "alpha": alpha, "eps": fit.eps, "errors": fit.errors, "slope": fit.slope }))
}

fn solve(a: SolveArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.coeffs)?;
    let cs = CoefficientSet::from_json(&text)?;
    let cfg = SolveConfig {
        hurst: a.hurst,
        seed_w: a.seed_w,
        seed_z: a.seed_z,
        ..SolveConfig::new(a.x0, a.n, a.horizon)
    };
    cfg.validate()?;
    let w = mixsde::gen_wiener(&GenConfig::new(a.n, a.horizon, 0.5, a.seed_w))?;
    let z = mixsde::gen_fbm(&GenConfig::new(a.n, a.horizon, a.hurst, a.seed_z))?;
    let ts: Vec<f64> = w.times().collect();
    let x = match a.mollify_eps {
        Some(eps) => solve_smooth_driver(&cs, &cfg, &w, &mollify(&z, eps)?)?,
        None => euler_solve_mixed(&cs, &cfg, &w, &z)?,
    };
    let report = validate_coefficients(&cs, &ts, x.values())?;
    for c in report.checks.iter().filter(|c| !c.holds) {
        log::warn!(
            "coefficient condition '{}' violated at {} sampled points (observed {:e}, declared {:e})",
            c.condition,
            c.violations,
            c.observed,
            c.declared
        );
    }
    emit(&path_table(&x, "x"), a.out.as_deref())
}

fn load<C: DeserializeOwned>(path: Option<&Path>, headline: fn() -> C) -> Result<C> {
    match path {
        Some(p) => Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => Ok(headline()),
    }
}

fn report<C, R, S>(res: &EnsembleResult<C, R, S>, dir: &Path) -> Result<()>
where
    C: serde::Serialize,
    R: Tabular,
    S: serde::Serialize + PlotData,
{
    let Artifacts {
        records,
        summary,
        plotdata,
    } = res.write(dir)?;
    log::info!(
        "wrote {}, {} and {}",
        records.display(),
        summary.display(),
        plotdata.display()
    );
    print!("{}", res.summary_json()?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Paths(a) => paths(a),
        Command::Norms(a) => norms(a),
        Command::Integrate(a) => integrate(a),
        Command::Mollify(a) => mollify_cmd(a),
        Command::Solve(a) => solve(a),
        Command::Converge(a) => {
            let cfg = load(a.config.as_deref(), LimitConfig::headline)?;
            report(&limit_theorem_experiment(&cfg)?, &a.out_dir)
        }
        Command::L2diff(a) => {
            let cfg = load(a.config.as_deref(), L2Config::headline)?;
            report(&l2_difference_experiment(&cfg)?, &a.out_dir)
        }
        Command::Moments(a) => {
            let cfg = load(a.config.as_deref(), MomentConfig::headline)?;
            report(&moment_experiment(&cfg)?, &a.out_dir)
        }
        Command::Apriori(a) => {
            let cfg = load(a.config.as_deref(), AprioriConfig::headline)?;
            report(&apriori_inequality_check(&cfg)?, &a.out_dir)
        }
        Command::Selftest => {
            let results = selftest::run_all();
            let width = results.iter().map(|r| r.module.len() + r.name.len() + 2).max().unwrap_or(0);
            for r in &results {
                let label = format!("{}: {}", r.module, r.name);
                let verdict = if r.passed { "pass" } else { "FAIL" };
                println!("{verdict}  {label:<width$}  {}", r.detail);
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} of {} checks passed", results.len() - failed, results.len());
            if failed > 0 {
                return Err(Error::Degenerate(format!("{failed} self-test checks failed")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(2);
    }
    match exec::with_jobs(cli.jobs, || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
