use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use covlab::backtest::{
    benchmark_report, render_text, run_backtest, write_tables, CellStatus, Metric, MetricTable,
    ObjectiveKind, ReportHeader,
};
use covlab::data::{
    align, generate_synthetic, load_factors, load_returns, load_riskfree, to_excess,
    write_factors_csv, write_matrix_csv, write_returns_csv, FactorPanel, ReturnsPanel,
    SyntheticMarketSpec,
};
use covlab::{estimate_precision, Method};

mod config;

use config::{error_structure, RunConfig};

const METHOD_HELP: &str = "Methods: nw, rnw, poet, oft, lslw, nls, sfnl";

#[derive(Parser)]
#[command(
    name = "covlab",
    version,
    about = "Precision-matrix estimators and portfolio backtests"
)]
#[command(after_help = METHOD_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a precision matrix on the full panel
    Estimate(Common),
    /// Rolling out-of-sample backtest and metric tables
    Backtest(Common),
    /// Draw a synthetic factor market with its true covariance and precision
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Nw,
    Rnw,
    Poet,
    Oft,
    Lslw,
    Nls,
    Sfnl,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Nw => Method::Nw,
            MethodArg::Rnw => Method::Rnw,
            MethodArg::Poet => Method::Poet,
            MethodArg::Oft => Method::Oft,
            MethodArg::Lslw => Method::Lslw,
            MethodArg::Nls => Method::Nls,
            MethodArg::Sfnl => Method::Sfnl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Gmv,
    Mv,
    Msr,
}

impl From<ObjectiveArg> for ObjectiveKind {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Gmv => ObjectiveKind::Gmv,
            ObjectiveArg::Mv => ObjectiveKind::Mv,
            ObjectiveArg::Msr => ObjectiveKind::Msr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ErrorsArg {
    Diagonal,
    Banded,
    Sparse,
}

#[derive(Args)]
#[command(after_help = METHOD_HELP)]
struct Common {
    /// key = value config file with [section] headers
    #[arg(long)]
    config: Option<PathBuf>,
    /// Estimators to run
    #[arg(long, value_enum, value_delimiter = ',')]
    method: Vec<MethodArg>,
    /// Portfolio objectives
    #[arg(long, value_enum, value_delimiter = ',')]
    objective: Vec<ObjectiveArg>,
    /// Training window length in periods
    #[arg(long = "t-i")]
    t_i: Option<usize>,
    /// Proportional transaction cost in basis points
    #[arg(long)]
    cost: Option<f64>,
    /// Target return of the mean-variance portfolio
    #[arg(long)]
    rho1: Option<f64>,
    /// Target risk of the maximum-Sharpe portfolio
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Returns CSV (date column then one column per asset)
    #[arg(long)]
    returns: Option<PathBuf>,
    /// Observed factors CSV
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Risk-free rate CSV; returns are converted to excess returns
    #[arg(long)]
    riskfree: Option<PathBuf>,
    /// One-column benchmark return series
    #[arg(long)]
    benchmark: Option<PathBuf>,
    #[arg(long)]
    run_id: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    /// Number of factors
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    loading_scale: Option<f64>,
    #[arg(long, value_enum)]
    errors: Option<ErrorsArg>,
    /// Idiosyncratic standard deviation for diagonal errors
    #[arg(long, default_value_t = 1.0)]
    error_sd: f64,
    #[arg(long, default_value_t = 1)]
    band_width: usize,
    #[arg(long, default_value_t = 0.3)]
    band_value: f64,
    #[arg(long, default_value_t = 0.05)]
    density: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn resolve(args: &Common) -> Result<RunConfig> {
    let mut cfg = load_config(args.config.as_ref())?;
    let b = &mut cfg.backtest;
    if !args.method.is_empty() {
        b.methods = args.method.iter().map(|&m| m.into()).collect();
    }
    if !args.objective.is_empty() {
        b.objectives = args.objective.iter().map(|&o| o.into()).collect();
    }
    if let Some(v) = args.t_i {
        b.window_len = v;
    }
    if let Some(v) = args.cost {
        b.cost = v / 1e4;
    }
    if let Some(v) = args.rho1 {
        b.rho1 = v;
    }
    if let Some(v) = args.sigma {
        b.sigma = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    for (slot, flag) in [
        (&mut cfg.returns, &args.returns),
        (&mut cfg.factors, &args.factors),
        (&mut cfg.riskfree, &args.riskfree),
        (&mut cfg.benchmark, &args.benchmark),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    if let Some(v) = &args.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &args.run_id {
        cfg.run_id = v.clone();
    }
    cfg.check_paths()?;
    cfg.backtest.validate()?;
    Ok(cfg)
}

/// Returns (as excess returns when a risk-free file is given) and factors on
/// common dates.
fn load_inputs(cfg: &RunConfig) -> Result<(ReturnsPanel, Option<FactorPanel>)> {
    let path = cfg
        .returns
        .as_ref()
        .context("no returns file: pass --returns or set [data] returns")?;
    let mut returns = load_returns(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(rf) = &cfg.riskfree {
        let rf = load_riskfree(rf).with_context(|| format!("loading {}", rf.display()))?;
        returns = to_excess(&returns, &rf)?;
    }
    match &cfg.factors {
        Some(fp) => {
            let factors = load_factors(fp).with_context(|| format!("loading {}", fp.display()))?;
            let (r, f) = align(&returns, &factors)?;
            Ok((r, Some(f)))
        }
        None => Ok((returns, None)),
    }
}

fn cmd_estimate(args: &Common) -> Result<bool> {
    let cfg = resolve(args)?;
    let (returns, factors) = load_inputs(&cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    for &method in &cfg.backtest.methods {
        let est = estimate_precision(
            method,
            &returns.values,
            factors.as_ref().map(|f| &f.values),
            &cfg.backtest.params,
        )
        .with_context(|| format!("estimator {method}"))?;
        let path = cfg
            .out
            .join(format!("{}_{}_precision.csv", cfg.run_id, method.tag()));
        write_matrix_csv(&path, &returns.assets, &est.precision)?;
        let tuning: Vec<String> = est.tuning.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "{} p={} T={} {}",
            method.tag(),
            est.dim(),
            returns.n_periods(),
            tuning.join(" ")
        );
        println!("wrote {}", path.display());
    }
    Ok(true)
}

fn cmd_backtest(args: &Common) -> Result<bool> {
    let cfg = resolve(args)?;
    let (returns, factors) = load_inputs(&cfg)?;
    let t_i = cfg.backtest.window_len;
    if t_i >= returns.n_periods() {
        bail!(
            "training window T_I={t_i} needs a panel longer than {t_i} periods, got T={}",
            returns.n_periods()
        );
    }
    let benchmark = match &cfg.benchmark {
        Some(path) => {
            let series =
                load_returns(path).with_context(|| format!("loading {}", path.display()))?;
            if series.dates != returns.dates {
                bail!("benchmark dates do not match the returns panel");
            }
            Some(benchmark_report(&series, t_i, &cfg.benchmark_label)?)
        }
        None => None,
    };
    let reports = run_backtest(&returns, factors.as_ref(), &cfg.backtest)?;
    let header = ReportHeader {
        run_id: cfg.run_id.clone(),
        window_len: t_i,
        cost: cfg.backtest.cost,
        rho1: cfg.backtest.rho1,
        sigma: cfg.backtest.sigma,
    };
    write_tables(&cfg.out, &header, &reports, benchmark.as_ref())?;
    for metric in Metric::ALL {
        let table = MetricTable::from_reports(metric, &reports, benchmark.as_ref());
        println!("{}", render_text(&table, &header));
    }
    let mut ok = true;
    for r in &reports {
        if let CellStatus::Failed { window, message } = &r.status {
            ok = false;
            let objective = r.objective.map(|o| o.label()).unwrap_or("-");
            eprintln!(
                "failed: {} {objective} at window {window}: {message}",
                r.label
            );
        }
    }
    println!(
        "windows={} tables in {}",
        returns.n_periods() - t_i,
        cfg.out.display()
    );
    Ok(ok)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<bool> {
    let cfg = load_config(args.config.as_ref())?;
    let mut sim = cfg.sim.clone();
    sim.p = args.p.unwrap_or(sim.p);
    sim.t = args.t.unwrap_or(sim.t);
    sim.k = args.k.unwrap_or(sim.k);
    sim.loading_scale = args.loading_scale.unwrap_or(sim.loading_scale);
    if let Some(e) = args.errors {
        let kind = match e {
            ErrorsArg::Diagonal => "diagonal",
            ErrorsArg::Banded => "banded",
            ErrorsArg::Sparse => "sparse",
        };
        sim.errors = error_structure(
            kind,
            args.error_sd,
            args.band_width,
            args.band_value,
            args.density,
        )?;
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    let out = args.out.clone().unwrap_or(cfg.out);
    let spec = SyntheticMarketSpec::new(sim.p, sim.t, sim.k, sim.loading_scale, sim.errors, seed);
    let market = generate_synthetic(&spec)?;
    std::fs::create_dir_all(&out)?;
    write_returns_csv(out.join("returns.csv"), &market.returns)?;
    write_factors_csv(out.join("factors.csv"), &market.factors)?;
    write_matrix_csv(
        out.join("true_cov.csv"),
        &market.returns.assets,
        &market.true_cov,
    )?;
    write_matrix_csv(
        out.join("true_precision.csv"),
        &market.returns.assets,
        &market.true_precision,
    )?;
    println!(
        "seed={seed} p={} T={} K={} out={}",
        sim.p,
        sim.t,
        sim.k,
        out.display()
    );
    Ok(true)
}

fn init_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("COVLAB_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .with_context(|| format!("COVLAB_THREADS='{raw}'"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|_| match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Backtest(a) => cmd_backtest(a),
        Command::Simulate(a) => cmd_simulate(a),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
