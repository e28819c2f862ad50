//! Run configuration: a flat `key = value` file with `[section]` headers,
//! overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use covlab::backtest::{BacktestConfig, InitialAllocation, ObjectiveKind};
use covlab::data::ErrorStructure;
use covlab::nodewise::LambdaGrid;
use covlab::Method;

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub p: usize,
    pub t: usize,
    pub k: usize,
    pub loading_scale: f64,
    pub errors: ErrorStructure,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            p: 100,
            t: 300,
            k: 3,
            loading_scale: 1.0,
            errors: ErrorStructure::Diagonal { sd: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub returns: Option<PathBuf>,
    pub factors: Option<PathBuf>,
    pub riskfree: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    pub benchmark_label: String,
    pub backtest: BacktestConfig,
    pub out: PathBuf,
    pub run_id: String,
    pub seed: u64,
    pub sim: SimSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            returns: None,
            factors: None,
            riskfree: None,
            benchmark: None,
            benchmark_label: "Benchmark".into(),
            backtest: BacktestConfig::default(),
            out: PathBuf::from("out"),
            run_id: "run".into(),
            seed: 42,
            sim: SimSettings::default(),
        }
    }
}

pub fn parse_list<T: std::str::FromStr<Err = covlab::Error>>(raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow!(e)))
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow!("{key}: cannot parse '{value}': {e}"))
}

fn grid_parts(grid: &LambdaGrid) -> (usize, f64) {
    match grid {
        LambdaGrid::Auto { points, ratio } => (*points, *ratio),
        LambdaGrid::Explicit(_) => (50, 0.01),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    /// Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        let mut errors = "diagonal".to_string();
        let mut error_sd = 1.0;
        let mut band_width = 1usize;
        let mut band_value = 0.3;
        let mut density = 0.05;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let path = || Some(base.join(value));
            let full = format!("{section}.{key}");
            let b = &mut cfg.backtest;
            match full.as_str() {
                "data.returns" => cfg.returns = path(),
                "data.factors" => cfg.factors = path(),
                "data.riskfree" => cfg.riskfree = path(),
                "data.benchmark" => cfg.benchmark = path(),
                "data.benchmark_label" => cfg.benchmark_label = value.to_string(),
                "run.out" => cfg.out = base.join(value),
                "run.run_id" => cfg.run_id = value.to_string(),
                "run.seed" => cfg.seed = num(&full, value)?,
                "backtest.t_i" => b.window_len = num(&full, value)?,
                "backtest.cost_bps" => b.cost = num::<f64>(&full, value)? / 1e4,
                "backtest.rho1" => b.rho1 = num(&full, value)?,
                "backtest.sigma" => b.sigma = num(&full, value)?,
                "backtest.methods" => b.methods = parse_list::<Method>(value)?,
                "backtest.objectives" => b.objectives = parse_list::<ObjectiveKind>(value)?,
                "backtest.initial_allocation" => {
                    b.initial = match value {
                        "cash" => InitialAllocation::FromCash,
                        "free" => InitialAllocation::Free,
                        _ => bail!("{full}: expected cash or free, got '{value}'"),
                    }
                }
                "estimators.lambda_points" | "estimators.lambda_ratio" => {
                    let (mut points, mut ratio) = grid_parts(&b.params.nw_grid);
                    if key == "lambda_points" {
                        points = num(&full, value)?;
                    } else {
                        ratio = num(&full, value)?;
                    }
                    b.params.nw_grid = LambdaGrid::Auto { points, ratio };
                    b.params.rnw_grid = b.params.nw_grid.clone();
                }
                "estimators.poet_max_factors" => b.params.poet.max_factors = num(&full, value)?,
                "estimators.poet_threshold" => b.params.poet.threshold = num(&full, value)?,
                "estimators.oft_omega" => b.params.oft.omega_const = num(&full, value)?,
                "estimators.oft_threshold" => b.params.oft.threshold = num(&full, value)?,
                "simulate.p" => cfg.sim.p = num(&full, value)?,
                "simulate.t" => cfg.sim.t = num(&full, value)?,
                "simulate.k" => cfg.sim.k = num(&full, value)?,
                "simulate.loading_scale" => cfg.sim.loading_scale = num(&full, value)?,
                "simulate.errors" => errors = value.to_string(),
                "simulate.error_sd" => error_sd = num(&full, value)?,
                "simulate.band_width" => band_width = num(&full, value)?,
                "simulate.band_value" => band_value = num(&full, value)?,
                "simulate.density" => density = num(&full, value)?,
                _ => bail!(
                    "line {}: unknown key '{key}' in section [{section}]",
                    lineno + 1
                ),
            }
        }
        cfg.sim.errors = error_structure(&errors, error_sd, band_width, band_value, density)?;
        Ok(cfg)
    }

    /// Input files named by the config must exist.
    pub fn check_paths(&self) -> Result<()> {
        for p in [
            &self.returns,
            &self.factors,
            &self.riskfree,
            &self.benchmark,
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                bail!("file not found: {}", p.display());
            }
        }
        Ok(())
    }
}

pub fn error_structure(
    kind: &str,
    sd: f64,
    band_width: usize,
    band_value: f64,
    density: f64,
) -> Result<ErrorStructure> {
    Ok(match kind {
        "diagonal" => ErrorStructure::Diagonal { sd },
        "banded" => ErrorStructure::BandedPrecision {
            bandwidth: band_width,
            value: band_value,
        },
        "sparse" => ErrorStructure::SparseCov { density },
        other => bail!("unknown error structure '{other}' (valid: diagonal, banded, sparse)"),
    })
}
