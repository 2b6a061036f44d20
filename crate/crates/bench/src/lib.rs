//! Experiment matrices over (suite, solver, seed) with detail and summary
//! CSV output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cqr::arc::minimize_arc;
use cqr::driver::{minimize, BetaChoice, DriverConfig, RunLog, RunStatus, Variant};
use cqr::suite::{Family, SuiteSpec};
use cqr::{Ar3Problem, CqrError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Cqr(#[from] CqrError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T> = std::result::Result<T, BenchError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Practical variant, beta from the last step.
    CqrPracticalC2,
    /// Practical variant, beta from the mean local diagonal.
    CqrPracticalC3,
    /// Practical variant, beta from the tensor norm estimate.
    CqrChoice1,
    /// Optimal-complexity variant with beta from the last step.
    CqrOptimal,
    Arc,
    /// CQR with the variant and beta choice of the bench configuration.
    Cqr,
}

impl Solver {
    pub const ALL: [Solver; 6] = [
        Solver::CqrPracticalC2,
        Solver::CqrPracticalC3,
        Solver::CqrChoice1,
        Solver::CqrOptimal,
        Solver::Arc,
        Solver::Cqr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Solver::CqrPracticalC2 => "cqr_practical_c2",
            Solver::CqrPracticalC3 => "cqr_practical_c3",
            Solver::CqrChoice1 => "cqr_choice1",
            Solver::CqrOptimal => "cqr_optimal",
            Solver::Arc => "arc",
            Solver::Cqr => "cqr",
        }
    }

    /// Driver settings for this solver; `base` supplies tolerances and, for
    /// `Cqr`, the variant and beta choice.
    pub fn driver_config(self, base: &DriverConfig) -> DriverConfig {
        let with = |variant, beta_choice| DriverConfig { variant, beta_choice, ..*base };
        match self {
            Solver::CqrPracticalC2 => with(Variant::Practical, BetaChoice::LastStep),
            Solver::CqrPracticalC3 => with(Variant::Practical, BetaChoice::DiagonalMean),
            Solver::CqrChoice1 => with(Variant::Practical, BetaChoice::NormBound),
            Solver::CqrOptimal => with(Variant::Optimal, BetaChoice::LastStep),
            Solver::Arc | Solver::Cqr => *base,
        }
    }

    pub fn run(self, p: &Ar3Problem, base: &DriverConfig) -> cqr::Result<RunLog> {
        let cfg = self.driver_config(base);
        match self {
            Solver::Arc => minimize_arc(p, &cfg),
            _ => minimize(p, &cfg),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Solver {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown solver {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Each suite runs seeds `seed .. seed + repeats`.
    pub suites: Vec<SuiteSpec>,
    pub solvers: Vec<Solver>,
    pub repeats: usize,
    pub driver: DriverConfig,
    pub out: PathBuf,
    /// Also write one run-log CSV per cell under `out/traces`.
    pub trace: bool,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            suites: vec![SuiteSpec::preset(Family::Random, 50, 0)],
            solvers: vec![Solver::CqrPracticalC2, Solver::Arc],
            repeats: 10,
            driver: DriverConfig::default(),
            out: PathBuf::from("bench-out"),
            trace: false,
            threads: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(BenchError::Config("repeats must be at least 1".into()));
        }
        if self.suites.is_empty() || self.solvers.is_empty() {
            return Err(BenchError::Config("need at least one suite and one solver".into()));
        }
        if self.threads == Some(0) {
            return Err(BenchError::Config("threads must be at least 1".into()));
        }
        for s in &self.suites {
            s.validate()?;
        }
        self.driver.validate()?;
        Ok(())
    }
}

/// Short name of a suite used in CSV rows and trace file names.
pub fn suite_label(index: usize, s: &SuiteSpec) -> String {
    match s.family {
        Family::BadlyScaled | Family::SingleEntry => format!("{index}_{}_n{}_scale{:e}", s.family, s.n, s.scale),
        _ => format!("{index}_{}_n{}_sigma{}", s.family, s.n, s.sigma),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRow {
    pub suite: String,
    pub family: Family,
    pub n: usize,
    pub sigma: f64,
    pub scale: f64,
    pub seed: u64,
    pub solver: Solver,
    pub status: String,
    pub total_iterations: usize,
    pub successful_iterations: usize,
    pub unsuccessful_iterations: usize,
    pub function_evals: usize,
    pub derivative_evals: usize,
    pub final_f: f64,
    pub final_grad_norm: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub suite: String,
    pub family: Family,
    pub n: usize,
    pub solver: Solver,
    pub runs: usize,
    pub converged: usize,
    pub mean_total_iterations: f64,
    pub mean_successful_iterations: f64,
    pub mean_function_evals: f64,
    pub mean_derivative_evals: f64,
    pub mean_final_f: f64,
    /// This solver's mean final value divided by the lowest mean final
    /// value over all solvers on the suite.
    pub relative_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixResult {
    pub detail: Vec<DetailRow>,
    pub summary: Vec<SummaryRow>,
}

struct Cell {
    suite_index: usize,
    solver_index: usize,
    seed: u64,
}

fn run_cell(cfg: &BenchConfig, cell: &Cell) -> (DetailRow, Option<RunLog>) {
    let spec = SuiteSpec { seed: cell.seed, ..cfg.suites[cell.suite_index].clone() };
    let solver = cfg.solvers[cell.solver_index];
    let outcome = spec.generate().and_then(|p| solver.run(&p, &cfg.driver));
    let mut row = DetailRow {
        suite: suite_label(cell.suite_index, &spec),
        family: spec.family,
        n: spec.n,
        sigma: spec.sigma,
        scale: spec.scale,
        seed: cell.seed,
        solver,
        status: RunStatus::Error.to_string(),
        total_iterations: 0,
        successful_iterations: 0,
        unsuccessful_iterations: 0,
        function_evals: 0,
        derivative_evals: 0,
        final_f: f64::NAN,
        final_grad_norm: f64::NAN,
        error: String::new(),
    };
    match outcome {
        Ok(log) => {
            row.status = log.status.to_string();
            row.total_iterations = log.total_iterations();
            row.successful_iterations = log.successful_iterations();
            row.unsuccessful_iterations = log.unsuccessful_iterations();
            row.function_evals = log.function_evals;
            row.derivative_evals = log.derivative_evals;
            row.final_f = log.final_f;
            row.final_grad_norm = log.final_grad_norm;
            row.error = log.error.clone().unwrap_or_default();
            (row, Some(log))
        }
        Err(e) => {
            row.error = e.to_string();
            (row, None)
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Per-(suite, solver) means of the detail rows, which must be sorted by
/// suite and solver.
pub fn summarize(detail: &[DetailRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, Solver), Vec<&DetailRow>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in detail {
        let key = (r.suite.clone(), r.solver);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    let mut rows: Vec<SummaryRow> = order
        .iter()
        .map(|key| {
            let rs = &groups[key];
            let m = |f: &dyn Fn(&DetailRow) -> f64| mean(rs.iter().map(|r| f(r)));
            SummaryRow {
                suite: key.0.clone(),
                family: rs[0].family,
                n: rs[0].n,
                solver: key.1,
                runs: rs.len(),
                converged: rs.iter().filter(|r| r.status == RunStatus::Converged.as_str()).count(),
                mean_total_iterations: m(&|r| r.total_iterations as f64),
                mean_successful_iterations: m(&|r| r.successful_iterations as f64),
                mean_function_evals: m(&|r| r.function_evals as f64),
                mean_derivative_evals: m(&|r| r.derivative_evals as f64),
                mean_final_f: mean(rs.iter().map(|r| r.final_f).filter(|f| f.is_finite())),
                relative_min: f64::NAN,
            }
        })
        .collect();
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for r in &rows {
        if r.mean_final_f.is_finite() {
            let b = best.entry(r.suite.clone()).or_insert(f64::INFINITY);
            *b = b.min(r.mean_final_f);
        }
    }
    for r in &mut rows {
        if let Some(&b) = best.get(&r.suite) {
            r.relative_min = if b == 0.0 && r.mean_final_f == 0.0 { 1.0 } else { r.mean_final_f / b };
        }
    }
    rows
}

/// Runs every (suite, solver, seed) cell on a worker pool. A failing cell
/// becomes a row with status `error`; it never aborts the matrix.
pub fn run_matrix(cfg: &BenchConfig) -> Result<MatrixResult> {
    run_matrix_with_logs(cfg).map(|(r, _)| r)
}

fn run_matrix_with_logs(cfg: &BenchConfig) -> Result<(MatrixResult, Vec<Option<RunLog>>)> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for (suite_index, spec) in cfg.suites.iter().enumerate() {
        for solver_index in 0..cfg.solvers.len() {
            for r in 0..cfg.repeats as u64 {
                cells.push(Cell { suite_index, solver_index, seed: spec.seed + r });
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build()?;
    // par_iter().collect() keeps the cell order, which is already sorted by
    // suite, solver and seed.
    let results: Vec<(DetailRow, Option<RunLog>)> = pool.install(|| cells.par_iter().map(|c| run_cell(cfg, c)).collect());
    let (detail, logs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = summarize(&detail);
    Ok((MatrixResult { detail, summary }, logs))
}

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => BenchError::Io { path: path.display().to_string(), source },
        other => BenchError::Config(format!("{other:?}")),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

pub const DETAIL_FILE: &str = "detail.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Runs the matrix and writes `detail.csv`, `summary.csv` and, when
/// requested, `traces/<suite>_<solver>_<seed>.csv` under `cfg.out`.
pub fn run_and_write(cfg: &BenchConfig) -> Result<MatrixResult> {
    let (result, logs) = run_matrix_with_logs(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    write_csv(&result.detail, &cfg.out.join(DETAIL_FILE))?;
    write_csv(&result.summary, &cfg.out.join(SUMMARY_FILE))?;
    if cfg.trace {
        let dir = cfg.out.join("traces");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (row, log) in result.detail.iter().zip(&logs) {
            if let Some(log) = log {
                let path = dir.join(format!("{}_{}_{}.csv", row.suite, row.solver, row.seed));
                emit_trace(log, &path)?;
            }
        }
    }
    Ok(result)
}

pub fn emit_trace(run: &RunLog, path: &Path) -> Result<()> {
    Ok(cqr::io::emit_trace(run, path)?)
}

/// Applies the keys of a JSON object on top of `cfg`; nested objects such as
/// `driver` are merged key by key.
pub fn apply_json_overrides(cfg: &BenchConfig, overrides: &serde_json::Value) -> Result<BenchConfig> {
    fn merge(base: &mut serde_json::Value, over: &serde_json::Value) {
        match (base, over) {
            (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
                for (k, v) in o {
                    merge(b.entry(k.clone()).or_insert(serde_json::Value::Null), v);
                }
            }
            (b, o) => *b = o.clone(),
        }
    }
    if !overrides.is_object() {
        return Err(BenchError::Config("config file must hold a JSON object".into()));
    }
    let mut value = serde_json::to_value(cfg)?;
    merge(&mut value, overrides);
    Ok(serde_json::from_value(value)?)
}

pub fn load_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(solvers: Vec<Solver>, repeats: usize) -> BenchConfig {
        BenchConfig {
            suites: vec![SuiteSpec::preset(Family::Random, 4, 3)],
            solvers,
            repeats,
            threads: Some(2),
            ..BenchConfig::default()
        }
    }

    #[test]
    fn solver_names_round_trip() {
        for s in Solver::ALL {
            assert_eq!(s.as_str().parse::<Solver>().unwrap(), s);
        }
        assert!("qqr".parse::<Solver>().is_err());
    }

    #[test]
    fn single_cell() {
        let r = run_matrix(&tiny(vec![Solver::CqrPracticalC2], 1)).unwrap();
        assert_eq!(r.detail.len(), 1);
        assert_eq!(r.summary.len(), 1);
        assert_eq!(r.summary[0].relative_min, 1.0);
    }

    #[test]
    fn summary_means_match_detail() {
        let r = run_matrix(&tiny(vec![Solver::CqrPracticalC2, Solver::Arc], 3)).unwrap();
        assert_eq!(r.detail.len(), 6);
        for s in &r.summary {
            let rows: Vec<_> = r.detail.iter().filter(|d| d.solver == s.solver && d.suite == s.suite).collect();
            assert_eq!(rows.len(), 3);
            let m = rows.iter().map(|d| d.total_iterations as f64).sum::<f64>() / 3.0;
            assert!((m - s.mean_total_iterations).abs() < 1e-12);
            let mf = rows.iter().map(|d| d.final_f).sum::<f64>() / 3.0;
            assert!((mf - s.mean_final_f).abs() <= 1e-12 * mf.abs());
            assert!(s.relative_min <= 1.0 + 1e-12);
        }
        assert!(r.summary.iter().any(|s| s.relative_min == 1.0));
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let a = run_matrix(&BenchConfig { threads: Some(1), ..tiny(vec![Solver::CqrPracticalC3, Solver::Arc], 2) }).unwrap();
        let b = run_matrix(&BenchConfig { threads: Some(4), ..tiny(vec![Solver::CqrPracticalC3, Solver::Arc], 2) }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failing_cells_are_recorded() {
        let cfg = BenchConfig {
            driver: DriverConfig { max_iter: 1, eps: 1e-300, ..DriverConfig::default() },
            ..tiny(vec![Solver::CqrPracticalC2], 1)
        };
        let r = run_matrix(&cfg).unwrap();
        assert_eq!(r.detail[0].status, "max_iter");
        assert_eq!(r.summary[0].converged, 0);
    }

    #[test]
    fn invalid_configs() {
        assert!(run_matrix(&tiny(vec![Solver::Arc], 0)).is_err());
        assert!(run_matrix(&tiny(vec![], 1)).is_err());
        let mut bad = tiny(vec![Solver::Arc], 1);
        bad.suites[0].sigma = -1.0;
        assert!(run_matrix(&bad).is_err());
    }

    #[test]
    fn custom_solver_uses_bench_driver_settings() {
        let base = DriverConfig { variant: Variant::Framework, beta_choice: BetaChoice::DiagonalMean, ..DriverConfig::default() };
        assert_eq!(Solver::Cqr.driver_config(&base), base);
        let c = Solver::CqrOptimal.driver_config(&base);
        assert_eq!((c.variant, c.beta_choice), (Variant::Optimal, BetaChoice::LastStep));
    }

    #[test]
    fn json_overrides_merge() {
        let cfg = BenchConfig::default();
        let over = serde_json::json!({"repeats": 3, "driver": {"eps": 1e-3}, "solvers": ["arc"]});
        let c = apply_json_overrides(&cfg, &over).unwrap();
        assert_eq!(c.repeats, 3);
        assert_eq!(c.driver.eps, 1e-3);
        assert_eq!(c.driver.eta, cfg.driver.eta);
        assert_eq!(c.solvers, vec![Solver::Arc]);
        assert!(apply_json_overrides(&cfg, &serde_json::json!([1])).is_err());
        assert!(apply_json_overrides(&cfg, &serde_json::json!({"repeats": "x"})).is_err());
    }
}
