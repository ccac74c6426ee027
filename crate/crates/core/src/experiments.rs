//! Ensemble drivers: finite-size circuits and eigenstate statistics compared
//! against the thermodynamic-limit closed forms.
//!
//! Realizations run on a rayon pool and are merged in realization order, so
//! outputs are bit-identical for any thread count.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::channel::{analytic_cumulants, channel_from_gate, channel_spectrum, AnalyticCumulants, ChannelError};
use crate::circuit::{build_floquet_with_limit, otoc_series, CircuitError, CircuitSpec, SweepMode, DEFAULT_FLOP_BUDGET, DEFAULT_MAX_DIM};
use crate::eth::{diagonalize, eth_cumulants_freq, eth_cumulants_time, omega_grid, EthError, Method, MAX_FREQ_K4_DIM};
use crate::gates::{paper_boundary_gate, Gate};
use crate::spectral::{analytic_freq_cumulants, SpectralError};

/// Reference values below this magnitude are excluded from ratio statistics.
pub const MASK_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown experiment '{0}' (expected fig1c, fig2a, fig2b, stability, concentration)")]
    UnknownExperiment(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Eth(#[from] EthError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// `C₂`, `2k₂²`, `k₄` against time, direct simulation over the closed forms.
    Fig1c,
    /// Eigenstate cumulants `k₂(t)`, `k₄(t)` against the closed forms.
    Fig2a,
    /// Smoothed frequency cumulants against the `J` kernels.
    Fig2b,
    /// Relative deviation and variance of `C₂` over a Trotter-step sweep.
    Stability,
    /// Relative deviation and variance of `C₂` over a bath-size sweep.
    Concentration,
}

impl FromStr for Experiment {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fig1c" => Ok(Self::Fig1c),
            "fig2a" => Ok(Self::Fig2a),
            "fig2b" => Ok(Self::Fig2b),
            "stability" => Ok(Self::Stability),
            "concentration" => Ok(Self::Concentration),
            other => Err(ExperimentError::UnknownExperiment(other.into())),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Fig1c => "fig1c",
            Self::Fig2a => "fig2a",
            Self::Fig2b => "fig2b",
            Self::Stability => "stability",
            Self::Concentration => "concentration",
        };
        f.write_str(s)
    }
}

/// Run parameters. Parsed from `key = value` lines; see [`ExperimentConfig::parse`].
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub experiment: Experiment,
    /// Bath size for single-size experiments.
    pub l: usize,
    pub sweep: SweepMode,
    /// Bath Trotter step outside the stability sweep.
    pub tau: f64,
    pub realizations: usize,
    pub seed: u64,
    pub t_max: usize,
    pub omega_bins: usize,
    pub nu: f64,
    pub taus: Vec<f64>,
    pub ls: Vec<usize>,
    /// Inclusive time window for averaged deviations.
    pub window: (usize, usize),
    pub flop_budget: f64,
    pub max_dim: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            name: experiment.to_string(),
            experiment,
            l: 8,
            sweep: SweepMode::Shared,
            tau: PI / 4.0,
            realizations: 50,
            seed: 1,
            t_max: 30,
            omega_bins: 1024,
            nu: 20.0,
            taus: vec![PI / 4.0, PI / 5.0, PI / 6.0, PI / 8.0, PI / 10.0],
            ls: vec![4, 5, 6, 7, 8],
            window: (5, 30),
            flop_budget: DEFAULT_FLOP_BUDGET,
            max_dim: DEFAULT_MAX_DIM,
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys: `experiment`,
    /// `name`, `l`, `sweep` (`shared`|`independent`), `tau`, `realizations`,
    /// `seed`, `t_max`, `omega_bins`, `nu`, `taus` and `ls` (comma lists),
    /// `window` (`t0, t1`), `flop_budget`, `max_dim`. Angles accept `pi`,
    /// `pi/n` and `m*pi/n`. `experiment` may be omitted when `fallback` is
    /// given; an explicit fallback wins over the file.
    pub fn parse(text: &str, fallback: Option<Experiment>) -> Result<Self, ExperimentError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ExperimentError::Config { line: i + 1, msg: format!("expected 'key = value', got '{line}'") })?;
            pairs.push((i + 1, k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let from_file = pairs.iter().find(|(_, k, _)| k == "experiment").map(|(_, _, v)| v.parse()).transpose()?;
        let experiment = fallback
            .or(from_file)
            .ok_or_else(|| ExperimentError::Invalid("no experiment given".into()))?;
        let mut cfg = Self::new(experiment);
        let mut named = false;
        for (line, key, val) in pairs {
            let bad = |msg: String| ExperimentError::Config { line, msg };
            match key.as_str() {
                "experiment" => {}
                "name" => {
                    if val.is_empty() || val.contains(['/', '\\']) {
                        return Err(bad(format!("name '{val}' must be a non-empty file stem")));
                    }
                    cfg.name = val;
                    named = true;
                }
                "l" => cfg.l = parse_num(&val).map_err(bad)?,
                "sweep" => cfg.sweep = val.parse().map_err(bad)?,
                "tau" => cfg.tau = parse_angle(&val).map_err(bad)?,
                "realizations" => cfg.realizations = parse_num(&val).map_err(bad)?,
                "seed" => cfg.seed = parse_num(&val).map_err(bad)?,
                "t_max" => cfg.t_max = parse_num(&val).map_err(bad)?,
                "omega_bins" => cfg.omega_bins = parse_num(&val).map_err(bad)?,
                "nu" => cfg.nu = parse_num(&val).map_err(bad)?,
                "taus" => cfg.taus = split_list(&val).map(parse_angle).collect::<Result<_, _>>().map_err(bad)?,
                "ls" => cfg.ls = split_list(&val).map(parse_num).collect::<Result<_, _>>().map_err(bad)?,
                "window" => {
                    let w: Vec<usize> = split_list(&val).map(parse_num).collect::<Result<_, _>>().map_err(bad)?;
                    match w[..] {
                        [a, b] => cfg.window = (a, b),
                        _ => return Err(bad("window needs two integers".into())),
                    }
                }
                "flop_budget" => cfg.flop_budget = parse_num(&val).map_err(bad)?,
                "max_dim" => cfg.max_dim = parse_num(&val).map_err(bad)?,
                _ => return Err(bad(format!("unknown key '{key}'"))),
            }
        }
        if !named {
            cfg.name = experiment.to_string();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, fallback: Option<Experiment>) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.into(), source })?;
        Self::parse(&text, fallback)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |m: &str| Err(ExperimentError::Invalid(m.into()));
        if self.realizations == 0 {
            return fail("realizations must be at least 1");
        }
        if self.l < 2 || self.ls.iter().any(|&l| l < 2) {
            return fail("bath size must be at least 2");
        }
        if self.taus.is_empty() || self.ls.is_empty() {
            return fail("sweep lists must be non-empty");
        }
        if self.omega_bins == 0 {
            return fail("omega_bins must be positive");
        }
        if !(self.nu > 0.0) || !(self.flop_budget > 0.0) {
            return fail("nu and flop_budget must be positive");
        }
        if self.window.0 > self.window.1 {
            return fail("window start exceeds its end");
        }
        if self.taus.iter().chain([&self.tau]).any(|t| !t.is_finite()) {
            return fail("Trotter steps must be finite");
        }
        Ok(())
    }

    /// Seed of realization `r`.
    pub fn realization_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse '{s}'"))
}

/// `x`, `pi`, `pi/n`, `m*pi`, `m*pi/n`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.replace(' ', "").to_ascii_lowercase();
    if let Ok(x) = t.parse::<f64>() {
        return Ok(x);
    }
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.to_string(), parse_num::<f64>(b)?),
        None => (t.clone(), 1.0),
    };
    let factor = match num.as_str() {
        "pi" => 1.0,
        n => match n.strip_suffix("*pi").or_else(|| n.strip_suffix("pi")) {
            Some(m) => parse_num::<f64>(m)?,
            None => return Err(format!("cannot parse angle '{s}'")),
        },
    };
    Ok(factor * PI / den)
}

/// Row-major numeric table with named columns.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush().map_err(|source| ExperimentError::Io { path: path.into(), source })?;
        Ok(())
    }
}

/// A realization dropped because a capacity guard fired.
#[derive(Debug, Clone, Serialize)]
pub struct Skip {
    /// Swept parameter (`τ` or `L`) the realization belonged to.
    pub param: f64,
    pub realization: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultBundle {
    pub config: ExperimentConfig,
    /// Ensemble statistics next to the analytic reference.
    pub series: Table,
    /// Per-realization raw data; the ensemble columns are recomputable from it.
    pub realizations: Table,
    pub summary: BTreeMap<String, Value>,
    pub skipped: Vec<Skip>,
}

impl ResultBundle {
    pub fn exit_code(&self) -> i32 {
        if self.skipped.is_empty() {
            0
        } else {
            2
        }
    }

    pub fn series_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}_series.csv", self.config.name))
    }

    pub fn realizations_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}_realizations.csv", self.config.name))
    }

    pub fn meta_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}_meta.json", self.config.name))
    }

    pub fn meta(&self) -> Value {
        json!({
            "name": self.config.name,
            "experiment": self.config.experiment,
            "config": self.config,
            "sweep_mode": self.config.sweep,
            "window": [self.config.window.0, self.config.window.1],
            "mask_threshold": MASK_THRESHOLD,
            "statistics": {
                "relative_deviation": "mean over realizations of |c/C - 1|; NaN where |C| < mask_threshold",
                "relative_variance": "population variance over realizations of c/C",
                "merge_order": "realization index"
            },
            "series_columns": self.series.columns,
            "realization_columns": self.realizations.columns,
            "skipped_count": self.skipped.len(),
            "skipped": self.skipped,
            "summary": self.summary,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }

    /// Writes `<name>_series.csv`, `<name>_realizations.csv`, `<name>_meta.json`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io { path: dir.into(), source })?;
        self.series.write_csv(&self.series_path(dir))?;
        self.realizations.write_csv(&self.realizations_path(dir))?;
        let path = self.meta_path(dir);
        let text = serde_json::to_string_pretty(&self.meta())?;
        std::fs::write(&path, text + "\n").map_err(|source| ExperimentError::Io { path, source })
    }
}

/// Per-time ensemble statistics of `c/C`.
#[derive(Debug, Clone, Copy)]
pub struct RatioStats {
    pub mean: C64,
    pub deviation: f64,
    pub variance: f64,
    pub count: usize,
}

/// Ratio statistics at each time. `samples[r][t]`; masked times give NaN.
pub fn ratio_stats(reference: &[C64], samples: &[Vec<C64>]) -> Vec<RatioStats> {
    let nan = f64::NAN;
    reference
        .iter()
        .enumerate()
        .map(|(t, &c)| {
            let n = samples.len();
            let mean = if n == 0 { C64::new(nan, nan) } else { samples.iter().map(|s| s[t]).sum::<C64>() / n as f64 };
            if c.norm() < MASK_THRESHOLD || n == 0 {
                return RatioStats { mean, deviation: nan, variance: nan, count: n };
            }
            let ratios: Vec<C64> = samples.iter().map(|s| s[t] / c).collect();
            let rbar = ratios.iter().sum::<C64>() / n as f64;
            let deviation = ratios.iter().map(|r| (r - 1.0).norm()).sum::<f64>() / n as f64;
            let variance = ratios.iter().map(|r| (r - rbar).norm_sqr()).sum::<f64>() / n as f64;
            RatioStats { mean, deviation, variance, count: n }
        })
        .collect()
}

/// Mean over unmasked entries with `t ∈ [t0, t1]`.
pub fn window_mean(values: &[f64], window: (usize, usize)) -> f64 {
    let sel: Vec<f64> = values.iter().enumerate().filter(|(t, v)| *t >= window.0 && *t <= window.1 && v.is_finite()).map(|(_, v)| *v).collect();
    if sel.is_empty() {
        f64::NAN
    } else {
        sel.iter().sum::<f64>() / sel.len() as f64
    }
}

fn is_capacity(e: &ExperimentError) -> bool {
    matches!(e, ExperimentError::Circuit(CircuitError::Capacity { .. }) | ExperimentError::Eth(EthError::Capacity { .. }))
}

/// Runs `f` over realizations, merging in index order. Capacity failures
/// become [`Skip`]s; any other error aborts.
fn ensemble<T: Send>(
    cfg: &ExperimentConfig,
    param: f64,
    f: impl Fn(u64) -> Result<T, ExperimentError> + Sync,
) -> Result<(Vec<(usize, u64, T)>, Vec<Skip>), ExperimentError> {
    let results: Vec<(usize, u64, Result<T, ExperimentError>)> = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.realization_seed(r);
            (r, seed, f(seed))
        })
        .collect();
    let mut done = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for (r, seed, res) in results {
        match res {
            Ok(x) => done.push((r, seed, x)),
            Err(e) if is_capacity(&e) => skipped.push(Skip { param, realization: r, seed, reason: e.to_string() }),
            Err(e) => return Err(e),
        }
    }
    Ok((done, skipped))
}

/// The boundary gate and its leading channel eigenoperators.
pub struct Boundary {
    pub gate: Gate,
    pub a: Array2<C64>,
    pub b: Array2<C64>,
    pub analytic: AnalyticCumulants,
}

impl Boundary {
    pub fn paper(t_max: usize) -> Result<Self, ExperimentError> {
        let (gate, _) = paper_boundary_gate();
        let spec = channel_spectrum(&channel_from_gate(&gate))?;
        let analytic = analytic_cumulants(&gate, t_max)?;
        Ok(Self { gate, a: spec.leading.a, b: spec.leading.b, analytic })
    }

    fn c2(&self) -> Vec<C64> {
        self.analytic.series.iter().map(|p| p.c2).collect()
    }
}

/// Executes the configured experiment on a pool of `threads` workers
/// (`None`: rayon default).
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ResultBundle, ExperimentError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    pool.install(|| match cfg.experiment {
        Experiment::Fig1c => fig1c(cfg),
        Experiment::Fig2a => fig2a(cfg),
        Experiment::Fig2b => fig2b(cfg),
        Experiment::Stability => {
            let params: Vec<(f64, usize, f64)> = cfg.taus.iter().map(|&tau| (tau, cfg.l, tau)).collect();
            c2_sweep(cfg, "tau", &params)
        }
        Experiment::Concentration => {
            let params: Vec<(f64, usize, f64)> = cfg.ls.iter().map(|&l| (l as f64, l, cfg.tau)).collect();
            c2_sweep(cfg, "l", &params)
        }
    })
}

fn bath(cfg: &ExperimentConfig, bd: &Boundary, l: usize, tau: f64, seed: u64) -> Result<CircuitSpec, ExperimentError> {
    Ok(CircuitSpec::random_bath(l, bd.gate.clone(), tau, cfg.sweep, seed)?)
}

fn constants_json(bd: &Boundary) -> Value {
    json!({
        "lambda": [bd.analytic.constants.lambda.re, bd.analytic.constants.lambda.im],
        "k2_static": bd.analytic.constants.k2_static.re,
        "k4_static": bd.analytic.constants.k4_static.re,
        "complex_lambda": bd.analytic.constants.complex_lambda,
    })
}

fn max_imag<'a>(values: impl IntoIterator<Item = &'a C64>) -> f64 {
    values.into_iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

fn fig1c(cfg: &ExperimentConfig) -> Result<ResultBundle, ExperimentError> {
    let bd = Boundary::paper(cfg.t_max)?;
    let (runs, skipped) = ensemble(cfg, cfg.l as f64, |seed| {
        let spec = bath(cfg, &bd, cfg.l, cfg.tau, seed)?;
        Ok(otoc_series(&spec, &bd.a, &bd.b, &[1, 2], cfg.t_max, cfg.flop_budget)?)
    })?;
    let c2_runs: Vec<Vec<C64>> = runs.iter().map(|(_, _, s)| s[1].clone()).collect();
    let k2sq_runs: Vec<Vec<C64>> = runs.iter().map(|(_, _, s)| s[0].iter().map(|c| c * c * 2.0).collect()).collect();
    let k4_runs: Vec<Vec<C64>> = c2_runs.iter().zip(&k2sq_runs).map(|(c2, q)| c2.iter().zip(q).map(|(x, y)| x - y).collect()).collect();
    let stats = ratio_stats(&bd.c2(), &c2_runs);
    let mean_of = |runs: &[Vec<C64>], t: usize| -> f64 {
        if runs.is_empty() {
            f64::NAN
        } else {
            runs.iter().map(|s| s[t].re).sum::<f64>() / runs.len() as f64
        }
    };
    let mut series = Table::new(&[
        "t", "c2_analytic", "k2sq2_analytic", "k4_analytic", "c2_direct", "k2sq2_direct", "k4_direct", "rel_deviation", "rel_variance", "n",
    ]);
    for (t, p) in bd.analytic.series.iter().enumerate() {
        series.rows.push(vec![
            t as f64,
            p.c2.re,
            (p.k2 * p.k2 * 2.0).re,
            p.k4.re,
            mean_of(&c2_runs, t),
            mean_of(&k2sq_runs, t),
            mean_of(&k4_runs, t),
            stats[t].deviation,
            stats[t].variance,
            stats[t].count as f64,
        ]);
    }
    let mut realizations = Table::new(&["realization", "seed", "t", "c1", "c2"]);
    for (r, seed, s) in &runs {
        for t in 0..=cfg.t_max {
            realizations.rows.push(vec![*r as f64, *seed as f64, t as f64, s[0][t].re, s[1][t].re]);
        }
    }
    let devs: Vec<f64> = stats.iter().map(|s| s.deviation).collect();
    let mut summary = BTreeMap::new();
    summary.insert("analytic".into(), constants_json(&bd));
    summary.insert("window_mean_deviation".into(), json!(window_mean(&devs, cfg.window)));
    summary.insert("max_abs_imag".into(), json!(max_imag(runs.iter().flat_map(|(_, _, s)| s.iter().flatten()))));
    Ok(ResultBundle { config: cfg.clone(), series, realizations, summary, skipped })
}

fn spectral_data(cfg: &ExperimentConfig, bd: &Boundary, seed: u64) -> Result<crate::eth::SpectralData, ExperimentError> {
    let spec = bath(cfg, bd, cfg.l, cfg.tau, seed)?;
    let fl = build_floquet_with_limit(&spec, cfg.max_dim)?;
    Ok(diagonalize(&fl, &bd.a, &bd.b)?)
}

fn fig2a(cfg: &ExperimentConfig) -> Result<ResultBundle, ExperimentError> {
    let bd = Boundary::paper(cfg.t_max)?;
    let times: Vec<i64> = (0..=cfg.t_max as i64).collect();
    let (runs, skipped) = ensemble(cfg, cfg.l as f64, |seed| {
        let sd = spectral_data(cfg, &bd, seed)?;
        Ok(eth_cumulants_time(&sd, &times, Method::InclusionExclusion)?)
    })?;
    let k2_ref: Vec<C64> = bd.analytic.series.iter().map(|p| p.k2).collect();
    let k4_ref: Vec<C64> = bd.analytic.series.iter().map(|p| p.k4).collect();
    let k2_runs: Vec<Vec<C64>> = runs.iter().map(|(_, _, c)| c.k2.clone()).collect();
    let k4_runs: Vec<Vec<C64>> = runs.iter().map(|(_, _, c)| c.k4.clone()).collect();
    let s2 = ratio_stats(&k2_ref, &k2_runs);
    let s4 = ratio_stats(&k4_ref, &k4_runs);
    let mut series = Table::new(&["t", "k2_eth", "k4_eth", "k2_analytic", "k4_analytic", "k2_rel_deviation", "k4_rel_deviation", "n"]);
    for t in 0..=cfg.t_max {
        series.rows.push(vec![
            t as f64,
            s2[t].mean.re,
            s4[t].mean.re,
            k2_ref[t].re,
            k4_ref[t].re,
            s2[t].deviation,
            s4[t].deviation,
            s2[t].count as f64,
        ]);
    }
    let mut realizations = Table::new(&["realization", "seed", "t", "k2", "k4"]);
    for (r, seed, c) in &runs {
        for t in 0..=cfg.t_max {
            realizations.rows.push(vec![*r as f64, *seed as f64, t as f64, c.k2[t].re, c.k4[t].re]);
        }
    }
    let mut summary = BTreeMap::new();
    summary.insert("analytic".into(), constants_json(&bd));
    summary.insert("method".into(), json!(Method::InclusionExclusion));
    summary.insert("dimension".into(), json!(2usize.pow(cfg.l as u32 + 1)));
    summary.insert("max_abs_imag".into(), json!(max_imag(runs.iter().flat_map(|(_, _, c)| c.k2.iter().chain(&c.k4)))));
    Ok(ResultBundle { config: cfg.clone(), series, realizations, summary, skipped })
}

fn fig2b(cfg: &ExperimentConfig) -> Result<ResultBundle, ExperimentError> {
    let bd = Boundary::paper(0)?;
    let omegas = omega_grid(cfg.omega_bins);
    let analytic = analytic_freq_cumulants(&bd.gate, &omegas)?;
    let with_k4 = 2usize.pow(cfg.l as u32 + 1) <= MAX_FREQ_K4_DIM;
    let (runs, skipped) = ensemble(cfg, cfg.l as f64, |seed| {
        let sd = spectral_data(cfg, &bd, seed)?;
        Ok(eth_cumulants_freq(&sd, &omegas, cfg.nu, with_k4)?)
    })?;
    let n = runs.len();
    let mean_at = |pick: &dyn Fn(&crate::eth::CumulantSeries) -> &Vec<C64>, i: usize| -> f64 {
        if n == 0 || pick(&runs[0].2).is_empty() {
            f64::NAN
        } else {
            runs.iter().map(|(_, _, c)| pick(c)[i].re).sum::<f64>() / n as f64
        }
    };
    let mut series = Table::new(&["omega", "k2_eth", "k4_eth", "k2_analytic", "k4_analytic", "n"]);
    for (i, &w) in omegas.iter().enumerate() {
        series.rows.push(vec![w, mean_at(&|c| &c.k2, i), mean_at(&|c| &c.k4, i), analytic.k2[i], analytic.k4[i], n as f64]);
    }
    let mut realizations = Table::new(&["realization", "seed", "omega", "k2", "k4"]);
    for (r, seed, c) in &runs {
        for (i, &w) in omegas.iter().enumerate() {
            let k4 = c.k4.get(i).map_or(f64::NAN, |z| z.re);
            realizations.rows.push(vec![*r as f64, *seed as f64, w, c.k2[i].re, k4]);
        }
    }
    let mut summary = BTreeMap::new();
    summary.insert("analytic".into(), constants_json(&bd));
    summary.insert("gamma".into(), json!(analytic.gamma));
    summary.insert("nu".into(), json!(cfg.nu));
    summary.insert("k4_computed".into(), json!(with_k4));
    summary.insert("delta_convention".into(), json!("2*pi*delta replaced by a 2*pi-periodic Gaussian of variance 1/nu"));
    Ok(ResultBundle { config: cfg.clone(), series, realizations, summary, skipped })
}

/// Direct `C₂(t)` ensembles over a list of `(label, L, τ)`.
fn c2_sweep(cfg: &ExperimentConfig, label: &str, params: &[(f64, usize, f64)]) -> Result<ResultBundle, ExperimentError> {
    let bd = Boundary::paper(cfg.t_max)?;
    let reference = bd.c2();
    let mut series = Table::new(&[label, "t", "c2_analytic", "c2_mean", "rel_deviation", "rel_variance", "n"]);
    let mut realizations = Table::new(&[label, "realization", "seed", "t", "c2"]);
    let mut skipped = Vec::new();
    let mut per_param = Vec::new();
    for &(p, l, tau) in params {
        let (runs, skips) = ensemble(cfg, p, |seed| {
            let spec = bath(cfg, &bd, l, tau, seed)?;
            Ok(otoc_series(&spec, &bd.a, &bd.b, &[2], cfg.t_max, cfg.flop_budget)?.remove(0))
        })?;
        skipped.extend(skips);
        let samples: Vec<Vec<C64>> = runs.iter().map(|(_, _, s)| s.clone()).collect();
        let stats = ratio_stats(&reference, &samples);
        for (t, s) in stats.iter().enumerate() {
            series.rows.push(vec![p, t as f64, reference[t].re, s.mean.re, s.deviation, s.variance, s.count as f64]);
        }
        for (r, seed, s) in &runs {
            for (t, c) in s.iter().enumerate() {
                realizations.rows.push(vec![p, *r as f64, *seed as f64, t as f64, c.re]);
            }
        }
        let devs: Vec<f64> = stats.iter().map(|s| s.deviation).collect();
        let vars: Vec<f64> = stats.iter().map(|s| s.variance).collect();
        per_param.push(json!({
            label: p,
            "window_mean_deviation": window_mean(&devs, cfg.window),
            "window_mean_variance": window_mean(&vars, cfg.window),
            "completed": samples.len(),
            "max_abs_imag": max_imag(samples.iter().flatten()),
        }));
    }
    let mut summary = BTreeMap::new();
    summary.insert("analytic".into(), constants_json(&bd));
    summary.insert("per_parameter".into(), Value::Array(per_param));
    Ok(ResultBundle { config: cfg.clone(), series, realizations, summary, skipped })
}
