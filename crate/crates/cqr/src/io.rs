//! Problem JSON files and per-iteration CSV traces.
//!
//! Problem file: `{n, f0, g, H, T, sigma}` with `H` the row-major upper
//! triangle (`n(n+1)/2` values) and `T` a list of `{i, j, k, value}` records
//! with 1-based indices `i <= j <= k`. Omitted tensor entries are zero.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ar3::Ar3Problem;
use crate::driver::RunLog;
use crate::error::{CqrError, Result};
use crate::secular::NewtonStep;
use crate::tensor::SymTensor3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub f0: f64,
    pub g: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<TensorEntry>,
    pub sigma: f64,
}

impl ProblemFile {
    pub fn from_problem(p: &Ar3Problem) -> Self {
        let n = p.n();
        let mut h = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                h.push(p.h[(i, j)]);
            }
        }
        let t = p
            .t
            .iter_unique()
            .filter(|e| e.3 != 0.0)
            .map(|(i, j, k, value)| TensorEntry { i: i + 1, j: j + 1, k: k + 1, value })
            .collect();
        Self { n, f0: p.f0, g: p.g.iter().copied().collect(), h, t, sigma: p.sigma }
    }

    pub fn to_problem(&self) -> Result<Ar3Problem> {
        let n = self.n;
        if self.g.len() != n {
            return Err(CqrError::Format(format!("g has {} entries, expected {n}", self.g.len())));
        }
        if self.h.len() != n * (n + 1) / 2 {
            return Err(CqrError::Format(format!(
                "H has {} entries, expected {}",
                self.h.len(),
                n * (n + 1) / 2
            )));
        }
        let mut h = DMatrix::zeros(n, n);
        let mut vals = self.h.iter();
        for i in 0..n {
            for j in i..n {
                let v = *vals.next().expect("length checked");
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let mut t = SymTensor3::zeros(n);
        for e in &self.t {
            if e.i == 0 || e.j == 0 || e.k == 0 || !(e.i <= e.j && e.j <= e.k) {
                return Err(CqrError::Format(format!(
                    "tensor entry ({}, {}, {}) must satisfy 1 <= i <= j <= k",
                    e.i, e.j, e.k
                )));
            }
            t.set(e.i - 1, e.j - 1, e.k - 1, e.value)?;
        }
        Ar3Problem::new(self.f0, DVector::from_vec(self.g.clone()), h, t, self.sigma)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CqrError + '_ {
    move |source| CqrError::Io { path: path.display().to_string(), source }
}

pub fn problem_to_json(p: &Ar3Problem) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ProblemFile::from_problem(p))?)
}

pub fn problem_from_json(s: &str) -> Result<Ar3Problem> {
    serde_json::from_str::<ProblemFile>(s)?.to_problem()
}

pub fn read_problem(path: &Path) -> Result<Ar3Problem> {
    let mut s = String::new();
    BufReader::new(File::open(path).map_err(io_err(path))?)
        .read_to_string(&mut s)
        .map_err(io_err(path))?;
    problem_from_json(&s)
}

pub fn write_problem(p: &Ar3Problem, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    w.write_all(problem_to_json(p)?.as_bytes()).map_err(io_err(path))?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// One row of the run-log CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub beta: f64,
    pub d: f64,
    pub sigma_c: f64,
    /// Empty when the model predicted no decrease.
    pub rho: Option<f64>,
    pub step_norm: f64,
    pub success: bool,
    pub case: Option<String>,
    pub trench: Option<String>,
    pub newton_iters: usize,
}

pub fn trace_rows(run: &RunLog) -> Vec<TraceRow> {
    run.records
        .iter()
        .map(|r| TraceRow {
            iter: r.iter,
            f: r.f,
            grad_norm: r.grad_norm,
            beta: r.beta,
            d: r.d,
            sigma_c: r.sigma_c,
            rho: r.rho.is_finite().then_some(r.rho),
            step_norm: r.step_norm,
            success: r.success,
            case: r.case.map(|c| c.as_str().to_string()),
            trench: r.trench.map(|t| t.as_str().to_string()),
            newton_iters: r.newton_iters,
        })
        .collect()
}

const TRACE_HEADER: [&str; 12] = [
    "iter",
    "f",
    "grad_norm",
    "beta",
    "d",
    "sigma_c",
    "rho",
    "step_norm",
    "success",
    "case",
    "trench",
    "newton_iters",
];

pub fn write_trace<W: Write>(run: &RunLog, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for row in trace_rows(run) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CqrError::Csv(e.into()))
}

/// Writes the run-log CSV; an empty run gives a header-only file.
pub fn emit_trace(run: &RunLog, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_trace(run, BufWriter::new(file)).map_err(|e| match e {
        CqrError::Csv(c) if c.is_io_error() => match c.into_kind() {
            csv::ErrorKind::Io(source) => CqrError::Io { path: path.display().to_string(), source },
            _ => unreachable!("checked is_io_error"),
        },
        other => other,
    })
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Writes secular Newton iterates as `k, lambda, psi, k_trench, phi1` rows.
pub fn write_newton_trace<W: Write>(steps: &[NewtonStep], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in steps {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| CqrError::Csv(e.into()))
}
