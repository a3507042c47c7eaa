//! Experiment configuration, seeding, sweeps and CSV emission.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! experiment = "katyusha_convergence"
//! seed = 42
//! repetitions = 3
//!
//! [params]
//! n = 16
//! ratio = 100.0
//!
//! [grid]            # sweeps only
//! d = [8, 64]
//! ```
//!
//! Every CSV starts with a `#` line holding the tool version, the config hash
//! and the seed; every data row repeats the config hash in its first column.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::hard::{HardCase, HardSpec};
use crate::lowerbound::mcp_bound_row;
use crate::qvrg::EstimatorMode;
use crate::reductions::Reduction;
use crate::suites;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    KatyushaConvergence,
    SpiderConvergence,
    QvrgStats,
    MlmcStats,
    HoodReduction,
    HardInstanceChecks,
    AdversaryTable,
    ScalingSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::KatyushaConvergence,
        ExperimentKind::SpiderConvergence,
        ExperimentKind::QvrgStats,
        ExperimentKind::MlmcStats,
        ExperimentKind::HoodReduction,
        ExperimentKind::HardInstanceChecks,
        ExperimentKind::AdversaryTable,
        ExperimentKind::ScalingSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::KatyushaConvergence => "katyusha_convergence",
            ExperimentKind::SpiderConvergence => "spider_convergence",
            ExperimentKind::QvrgStats => "qvrg_stats",
            ExperimentKind::MlmcStats => "mlmc_stats",
            ExperimentKind::HoodReduction => "hood_reduction",
            ExperimentKind::HardInstanceChecks => "hard_instance_checks",
            ExperimentKind::AdversaryTable => "adversary_table",
            ExperimentKind::ScalingSweep => "scaling_sweep",
        }
    }

    /// Parameter names with their defaults.
    pub fn defaults(self) -> Table {
        let src = match self {
            ExperimentKind::KatyushaConvergence => {
                "n = 16\nd = 8\nratio = 10.0\neps_rel = 1e-6\nestimator = \"minibatch\"\nj_clean = 6"
            }
            ExperimentKind::SpiderConvergence => "n = 16\nd = 8\neps = 0.05\nspread = 2.0",
            ExperimentKind::QvrgStats => "n = 8\nd = 8\ncalls = 10000\nsigma_fraction = 0.25",
            ExperimentKind::MlmcStats => "bias0 = 0.5\nj_clean = 6\nn0 = 1\nruns = 10000",
            ExperimentKind::HoodReduction => {
                "problem = \"lasso\"\nn = 16\nd = 8\nlambda = 0.05\nmu = 0.1\neps_rel = 1e-3\nreference_iterations = 1000000"
            }
            ExperimentKind::HardInstanceChecks => {
                "case = \"case4\"\nn = 4\neps = 0.01\nmu = 0.0025\ndelta = 1.0\npoints = 10000\nbudget = 1e6"
            }
            ExperimentKind::AdversaryTable => "pairs = [[1, 1], [2, 2], [2, 3], [3, 2], [2, 4]]",
            ExperimentKind::ScalingSweep => {
                "ns = [64, 128, 256, 512, 1024, 2048, 4096]\nd = 8\nratio = 10.0\neps_rel = 1e-6"
            }
        };
        src.parse().expect("built-in defaults parse")
    }

    /// Data columns after the leading `config_hash`.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::KatyushaConvergence => &["rep", "epoch", "F_err", "classical", "quantum_modeled"],
            ExperimentKind::SpiderConvergence => {
                &["rep", "iterations", "stopped_at", "grad_norm", "classical", "quantum_modeled"]
            }
            ExperimentKind::QvrgStats => &["rep", "calls", "sigma_hat", "bias_norm", "mse", "mse_ratio", "quantum_total"],
            ExperimentKind::MlmcStats => {
                &["rep", "runs", "debiased_bias", "standard_error", "naive_bias", "mean_draws"]
            }
            ExperimentKind::HoodReduction => &["rep", "stages", "F_err", "eps", "classical", "quantum_modeled"],
            ExperimentKind::HardInstanceChecks => &["rep", "k", "d", "points", "violations", "min_gap_ratio"],
            ExperimentKind::AdversaryTable => &["n", "k", "bound", "expected", "deviation"],
            ExperimentKind::ScalingSweep => {
                &["n", "d", "ratio", "classical_total", "quantum_total", "theory_value", "ratio_to_theory"]
            }
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown experiment {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Full parameter set, defaults filled in.
    pub params: Table,
    pub seed: u64,
    pub repetitions: u32,
    pub output: Option<String>,
    /// Sweep axes; empty for a single run.
    pub grid: BTreeMap<String, Vec<Value>>,
}

const TOP_LEVEL: [&str; 6] = ["experiment", "seed", "repetitions", "output", "params", "grid"];

fn same_type(a: &Value, b: &Value) -> bool {
    match (a, b) {
        // integers are accepted where floats are expected
        (Value::Float(_), Value::Integer(_)) => true,
        _ => std::mem::discriminant(a) == std::mem::discriminant(b),
    }
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            kind,
            params: kind.defaults(),
            seed,
            repetitions: 1,
            output: None,
            grid: BTreeMap::new(),
        }
    }

    /// Parses and validates a TOML document; every offending key is reported.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
        Self::from_table(table)
    }

    pub fn from_table(table: Table) -> Result<Self> {
        let mut problems = Vec::new();
        for key in table.keys() {
            if !TOP_LEVEL.contains(&key.as_str()) {
                problems.push(format!("unknown key `{key}`"));
            }
        }
        let kind = match table.get("experiment") {
            Some(Value::String(s)) => match s.parse::<ExperimentKind>() {
                Ok(k) => Some(k),
                Err(e) => {
                    problems.push(format!("`experiment`: {e}"));
                    None
                }
            },
            Some(v) => {
                problems.push(format!("`experiment` must be a string, got {}", type_name(v)));
                None
            }
            None => {
                problems.push("missing key `experiment`".into());
                None
            }
        };
        let seed = match table.get("seed") {
            None => 0,
            Some(Value::Integer(s)) if *s >= 0 => *s as u64,
            Some(v) => {
                problems.push(format!("`seed` must be a non-negative integer, got {v}"));
                0
            }
        };
        let repetitions = match table.get("repetitions") {
            None => 1,
            Some(Value::Integer(r)) if *r >= 1 && *r <= u32::MAX as i64 => *r as u32,
            Some(v) => {
                problems.push(format!("`repetitions` must be a positive integer, got {v}"));
                1
            }
        };
        let output = match table.get("output") {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                problems.push(format!("`output` must be a string, got {}", type_name(v)));
                None
            }
        };
        let mut params = kind.map(ExperimentKind::defaults).unwrap_or_default();
        let mut grid = BTreeMap::new();
        if let Some(kind) = kind {
            let defaults = kind.defaults();
            match table.get("params") {
                None => {}
                Some(Value::Table(given)) => {
                    for (k, v) in given {
                        match defaults.get(k) {
                            None => problems.push(format!("unknown parameter `params.{k}` for {}", kind.name())),
                            Some(d) if !same_type(d, v) => problems.push(format!(
                                "`params.{k}` must be {}, got {}",
                                type_name(d),
                                type_name(v)
                            )),
                            Some(_) => {
                                params.insert(k.clone(), v.clone());
                            }
                        }
                    }
                }
                Some(v) => problems.push(format!("`params` must be a table, got {}", type_name(v))),
            }
            match table.get("grid") {
                None => {}
                Some(Value::Table(axes)) => {
                    for (k, v) in axes {
                        match (defaults.get(k), v) {
                            (None, _) => problems.push(format!("unknown parameter `grid.{k}` for {}", kind.name())),
                            (Some(d), Value::Array(values)) if !values.is_empty() => {
                                if let Some(bad) = values.iter().find(|x| !same_type(d, x)) {
                                    problems.push(format!(
                                        "`grid.{k}` entries must be {}, got {}",
                                        type_name(d),
                                        type_name(bad)
                                    ));
                                } else {
                                    grid.insert(k.clone(), values.clone());
                                }
                            }
                            _ => problems.push(format!("`grid.{k}` must be a non-empty array")),
                        }
                    }
                }
                Some(v) => problems.push(format!("`grid` must be a table, got {}", type_name(v))),
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        Ok(Self {
            kind: kind.expect("checked above"),
            params,
            seed,
            repetitions,
            output,
            grid,
        })
    }

    /// Applies `FINSUM_SEED`, `FINSUM_REPETITIONS` and `FINSUM_PARAM_<NAME>`
    /// overrides; values are read as TOML literals, falling back to strings.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut problems = Vec::new();
        for (key, raw) in vars {
            let Some(rest) = key.strip_prefix("FINSUM_") else { continue };
            match rest {
                "SEED" => match raw.trim().parse() {
                    Ok(s) => self.seed = s,
                    Err(_) => problems.push(format!("FINSUM_SEED must be a u64, got {raw:?}")),
                },
                "REPETITIONS" => match raw.trim().parse() {
                    Ok(r) if r >= 1 => self.repetitions = r,
                    _ => problems.push(format!("FINSUM_REPETITIONS must be a positive integer, got {raw:?}")),
                },
                _ => {
                    if let Some(name) = rest.strip_prefix("PARAM_") {
                        let name = name.to_ascii_lowercase();
                        let value = parse_literal(&raw);
                        match self.params.get(&name) {
                            Some(d) if same_type(d, &value) => {
                                self.params.insert(name, value);
                            }
                            Some(d) => problems.push(format!(
                                "{key} must be {}, got {}",
                                type_name(d),
                                type_name(&value)
                            )),
                            None => problems.push(format!("{key} names unknown parameter `{name}`")),
                        }
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical configuration,
    /// excluding seed and output path.
    pub fn config_hash(&self) -> String {
        let mut canon = Table::new();
        canon.insert("experiment".into(), Value::String(self.kind.name().into()));
        canon.insert("repetitions".into(), Value::Integer(self.repetitions as i64));
        canon.insert("params".into(), Value::Table(self.params.clone()));
        let grid: Table = self.grid.iter().map(|(k, v)| (k.clone(), Value::Array(v.clone()))).collect();
        canon.insert("grid".into(), Value::Table(grid));
        let text = toml::to_string(&canon).expect("tables serialize");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }

    /// Number of sweep cells.
    pub fn cell_count(&self) -> usize {
        self.grid.values().map(Vec::len).product()
    }

    /// Parameters of sweep cell `index`; the last axis varies fastest.
    pub fn cell(&self, index: usize) -> (Table, Vec<(String, Value)>) {
        let mut params = self.params.clone();
        let mut coords = Vec::with_capacity(self.grid.len());
        let mut rest = index;
        for (k, values) in self.grid.iter().rev() {
            let v = values[rest % values.len()].clone();
            rest /= values.len();
            coords.push((k.clone(), v.clone()));
            params.insert(k.clone(), v);
        }
        coords.reverse();
        (params, coords)
    }
}

fn parse_literal(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

fn get_f64(p: &Table, key: &str) -> Result<f64> {
    match p.get(key) {
        Some(Value::Float(v)) => Ok(*v),
        Some(Value::Integer(v)) => Ok(*v as f64),
        other => Err(Error::Config(format!("`{key}` must be a number, got {other:?}"))),
    }
}

fn get_usize(p: &Table, key: &str) -> Result<usize> {
    match p.get(key) {
        Some(Value::Integer(v)) if *v >= 0 => Ok(*v as usize),
        other => Err(Error::Config(format!("`{key}` must be a non-negative integer, got {other:?}"))),
    }
}

fn get_str<'a>(p: &'a Table, key: &str) -> Result<&'a str> {
    match p.get(key) {
        Some(Value::String(s)) => Ok(s),
        other => Err(Error::Config(format!("`{key}` must be a string, got {other:?}"))),
    }
}

fn get_usize_list(p: &Table, key: &str) -> Result<Vec<usize>> {
    match p.get(key) {
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| match v {
                Value::Integer(i) if *i > 0 => Ok(*i as usize),
                _ => Err(Error::Config(format!("`{key}` entries must be positive integers"))),
            })
            .collect(),
        other => Err(Error::Config(format!("`{key}` must be an array, got {other:?}"))),
    }
}

fn get_pairs(p: &Table, key: &str) -> Result<Vec<(usize, usize)>> {
    let err = || Error::Config(format!("`{key}` must be an array of [n, k] pairs of positive integers"));
    match p.get(key) {
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| match v.as_array().map(Vec::as_slice) {
                Some([Value::Integer(n), Value::Integer(k)]) if *n > 0 && *k > 0 => Ok((*n as usize, *k as usize)),
                _ => Err(err()),
            })
            .collect(),
        _ => Err(err()),
    }
}

fn estimator(p: &Table) -> Result<EstimatorMode> {
    match get_str(p, "estimator")? {
        "minibatch" => Ok(EstimatorMode::Minibatch),
        "exact" => Ok(EstimatorMode::Exact),
        "multilevel" => Ok(EstimatorMode::Multilevel {
            j_clean: get_usize(p, "j_clean")? as u32,
        }),
        other => Err(Error::Config(format!(
            "`estimator` must be minibatch, multilevel or exact, got {other:?}"
        ))),
    }
}

fn hard_case(s: &str) -> Result<HardCase> {
    match s {
        "case1" => Ok(HardCase::Case1),
        "case2" => Ok(HardCase::Case2),
        "case3" => Ok(HardCase::Case3),
        "case4" => Ok(HardCase::Case4),
        other => Err(Error::Config(format!("`case` must be case1..case4, got {other:?}"))),
    }
}

/// Per-repetition seed.
pub fn repetition_seed(seed: u64, rep: u32) -> u64 {
    seed ^ ((rep as u64 + 1) << 32)
}

fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

/// Runs one experiment; rows hold the data columns of [`ExperimentKind::columns`].
pub fn run_rows(kind: ExperimentKind, p: &Table, seed: u64, repetitions: u32) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    match kind {
        ExperimentKind::KatyushaConvergence => {
            let inst = suites::ridge_instance(get_usize(p, "n")?, get_usize(p, "d")?, get_f64(p, "ratio")?, seed)?;
            let mode = estimator(p)?;
            let eps_rel = get_f64(p, "eps_rel")?;
            for rep in 0..repetitions {
                let (_, traj, _) = suites::katyusha_run(&inst, eps_rel, mode, repetition_seed(seed, rep))?;
                for r in &traj.epochs {
                    let err = r.error.unwrap_or(r.value);
                    rows.push(vec![
                        rep.to_string(),
                        r.epoch.to_string(),
                        fmt_f(err),
                        r.classical.to_string(),
                        r.quantum.to_string(),
                    ]);
                }
            }
        }
        ExperimentKind::SpiderConvergence => {
            let (inst, _) =
                suites::indefinite_instance(get_usize(p, "n")?, get_usize(p, "d")?, get_f64(p, "spread")?, seed)?;
            let eps = get_f64(p, "eps")?;
            for rep in 0..repetitions {
                let (out, grad, ledger) = suites::spider_run(&inst, eps, repetition_seed(seed, rep))?;
                rows.push(vec![
                    rep.to_string(),
                    out.steps.len().to_string(),
                    out.stopped_at.map_or_else(String::new, |t| t.to_string()),
                    fmt_f(grad),
                    ledger.classical().to_string(),
                    ledger.quantum().to_string(),
                ]);
            }
        }
        ExperimentKind::QvrgStats => {
            for rep in 0..repetitions {
                let s = suites::qvrg_stats(
                    get_usize(p, "n")?,
                    get_usize(p, "d")?,
                    get_usize(p, "calls")? as u64,
                    get_f64(p, "sigma_fraction")?,
                    repetition_seed(seed, rep),
                )?;
                rows.push(vec![
                    rep.to_string(),
                    s.calls.to_string(),
                    fmt_f(s.sigma_hat),
                    fmt_f(s.bias_norm),
                    fmt_f(s.mse),
                    fmt_f(s.mse / s.sigma_hat.powi(2)),
                    s.quantum_total.to_string(),
                ]);
            }
        }
        ExperimentKind::MlmcStats => {
            for rep in 0..repetitions {
                let s = suites::mlmc_stats(
                    get_f64(p, "bias0")?,
                    get_usize(p, "j_clean")? as u32,
                    get_usize(p, "n0")? as u64,
                    get_usize(p, "runs")? as u64,
                    repetition_seed(seed, rep),
                )?;
                rows.push(vec![
                    rep.to_string(),
                    s.runs.to_string(),
                    fmt_f(s.debiased_bias),
                    fmt_f(s.standard_error),
                    fmt_f(s.naive_bias),
                    fmt_f(s.mean_draws),
                ]);
            }
        }
        ExperimentKind::HoodReduction => {
            let (n, d) = (get_usize(p, "n")?, get_usize(p, "d")?);
            let iters = get_usize(p, "reference_iterations")?;
            let (setup, kind) = match get_str(p, "problem")? {
                "lasso" => (suites::lasso_setup(n, d, get_f64(p, "lambda")?, seed, iters)?, Reduction::Regularize),
                "svm" => (suites::svm_setup(n, d, get_f64(p, "mu")?, seed, iters)?, Reduction::Smooth),
                other => return Err(Error::Config(format!("`problem` must be lasso or svm, got {other:?}"))),
            };
            let eps_rel = get_f64(p, "eps_rel")?;
            for rep in 0..repetitions {
                let (out, err, ledger) = suites::reduction_run(kind, &setup, eps_rel, repetition_seed(seed, rep))?;
                rows.push(vec![
                    rep.to_string(),
                    out.stages.len().to_string(),
                    fmt_f(err),
                    fmt_f(eps_rel * setup.instance.delta),
                    ledger.classical().to_string(),
                    ledger.quantum().to_string(),
                ]);
            }
        }
        ExperimentKind::HardInstanceChecks => {
            let case = hard_case(get_str(p, "case")?)?;
            let mut spec = HardSpec::new(case, get_usize(p, "n")?, get_f64(p, "eps")?).with_budget(get_f64(p, "budget")?);
            if case == HardCase::Case1 {
                spec = spec.with_strong_convexity(get_f64(p, "mu")?, get_f64(p, "delta")?);
            }
            for rep in 0..repetitions {
                let s = repetition_seed(seed, rep);
                let stats = suites::hard_instance_checks(&spec.clone().with_seed(s), get_usize(p, "points")?, s)?;
                if stats.violations > 0 {
                    return Err(Error::Invariant(format!(
                        "{} of {} hypothesis points violate the value-gap bound",
                        stats.violations, stats.points
                    )));
                }
                rows.push(vec![
                    rep.to_string(),
                    stats.k.to_string(),
                    stats.dim.to_string(),
                    stats.points.to_string(),
                    stats.violations.to_string(),
                    fmt_f(stats.min_gap_ratio),
                ]);
            }
        }
        ExperimentKind::AdversaryTable => {
            for (n, k) in get_pairs(p, "pairs")? {
                let r = mcp_bound_row(n, k)?;
                if r.deviation > 1e-12 {
                    return Err(Error::Invariant(format!("bound {} deviates from n sqrt(k) = {}", r.bound, r.expected)));
                }
                rows.push(vec![n.to_string(), k.to_string(), fmt_f(r.bound), fmt_f(r.expected), fmt_f(r.deviation)]);
            }
        }
        ExperimentKind::ScalingSweep => {
            let d = get_usize(p, "d")?;
            let ratio = get_f64(p, "ratio")?;
            let eps_rel = get_f64(p, "eps_rel")?;
            for n in get_usize_list(p, "ns")? {
                let inst = suites::ridge_instance(n, d, ratio, seed ^ n as u64)?;
                let (_, _, ledger) = suites::katyusha_run(&inst, eps_rel, EstimatorMode::Minibatch, seed)?;
                let theory = suites::theory_value(n, d, ratio);
                rows.push(vec![
                    n.to_string(),
                    d.to_string(),
                    fmt_f(ratio),
                    ledger.classical().to_string(),
                    ledger.quantum().to_string(),
                    fmt_f(theory),
                    fmt_f(ledger.quantum() / theory),
                ]);
            }
        }
    }
    Ok(rows)
}

fn header_line(cfg: &ExperimentConfig, hash: &str) -> String {
    format!(
        "# finsum {VERSION} experiment={} config_hash={hash} seed={}\n",
        cfg.kind.name(),
        cfg.seed
    )
}

fn push_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let line: Vec<String> = cells.into_iter().collect();
    let _ = writeln!(out, "{}", line.join(","));
}

/// Runs the configured experiment (ignoring any grid) and returns the CSV text.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<String> {
    let hash = cfg.config_hash();
    let rows = run_rows(cfg.kind, &cfg.params, cfg.seed, cfg.repetitions)?;
    let mut out = header_line(cfg, &hash);
    push_row(&mut out, std::iter::once("config_hash".to_string()).chain(cfg.kind.columns().iter().map(|c| c.to_string())));
    for r in rows {
        push_row(&mut out, std::iter::once(hash.clone()).chain(r));
    }
    Ok(out)
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Float(f) => fmt_f(*f),
        other => other.to_string().replace(',', ";"),
    }
}

/// Runs every grid cell with seed `seed ^ cell` on `jobs` workers (0 = all cores).
///
/// A failing cell yields a single row whose status column holds the error.
pub fn sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<String> {
    let hash = cfg.config_hash();
    let cells = cfg.cell_count();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        (0..cells)
            .into_par_iter()
            .map(|c| {
                let (params, coords) = cfg.cell(c);
                let rows = run_rows(cfg.kind, &params, cfg.seed ^ c as u64, cfg.repetitions);
                (coords, rows)
            })
            .collect()
    });
    let mut out = header_line(cfg, &hash);
    let columns = cfg.kind.columns();
    push_row(
        &mut out,
        ["config_hash", "cell", "status"]
            .into_iter()
            .map(String::from)
            .chain(cfg.grid.keys().map(|k| format!("grid_{k}")))
            .chain(columns.iter().map(|c| c.to_string())),
    );
    for (c, (coords, rows)) in results.into_iter().enumerate() {
        let prefix = |status: String| {
            [hash.clone(), c.to_string(), status]
                .into_iter()
                .chain(coords.iter().map(|(_, v)| csv_cell(v)))
                .collect::<Vec<_>>()
        };
        match rows {
            Ok(rows) => {
                for r in rows {
                    push_row(&mut out, prefix("ok".into()).into_iter().chain(r));
                }
            }
            Err(e) => {
                log::warn!("cell {c} failed: {e}");
                let msg = format!("failed: {e}").replace([',', '\n', '"'], " ");
                push_row(
                    &mut out,
                    prefix(msg).into_iter().chain(columns.iter().map(|_| String::new())),
                );
            }
        }
    }
    Ok(out)
}
