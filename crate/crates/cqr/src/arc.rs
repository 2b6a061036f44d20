//! Adaptive cubic regularization baseline: minimize `m3` by repeatedly
//! minimizing `f + g.s + 1/2 s.Hs + sigma_q/3 |s|^3` built from its local
//! gradient and Hessian.

use nalgebra::{DMatrix, DVector};

use crate::ar3::Ar3Problem;
use crate::driver::{ratio, DriverConfig, IterRecord, RunLog, RunStatus};
use crate::error::{check_dim, CqrError, Result};
use crate::pencil::PencilDecomposition;
use crate::secular::{find_root, Bracket, CubicTarget, NewtonStep, HARD_CASE_TOL};

/// Smallest cubic weight the outer loop will use.
pub const SIGMA_Q_MIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CubicModel {
    pub f: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
    pub sigma_q: f64,
}

impl CubicModel {
    pub fn new(f: f64, g: DVector<f64>, h: DMatrix<f64>, sigma_q: f64) -> Result<Self> {
        check_dim(g.len(), h.nrows())?;
        check_dim(g.len(), h.ncols())?;
        crate::ar3::check_symmetric(&h)?;
        if !(sigma_q > 0.0) {
            return Err(CqrError::InvalidParameter("sigma_q must be positive".into()));
        }
        Ok(Self { f, g, h, sigma_q })
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    /// `M_q(s) - M_q(0)`.
    pub fn increment(&self, s: &DVector<f64>) -> Result<f64> {
        check_dim(self.n(), s.len())?;
        Ok(self.g.dot(s) + 0.5 * s.dot(&(&self.h * s)) + self.sigma_q / 3.0 * s.norm().powi(3))
    }

    pub fn eval(&self, s: &DVector<f64>) -> Result<f64> {
        Ok(self.f + self.increment(s)?)
    }

    /// Residual of `(H + lambda I) s + g = 0`.
    pub fn residual(&self, s: &DVector<f64>, lambda: f64) -> f64 {
        (&self.h * s + s * lambda + &self.g).norm()
    }
}

#[derive(Debug, Clone)]
pub struct CubicOutcome {
    /// `sigma_q |s|`.
    pub lambda: f64,
    pub s: DVector<f64>,
    pub newton_iters: usize,
    pub hard_case: bool,
    pub trace: Vec<NewtonStep>,
}

/// Global minimizer of the cubic model: the root of `|s(lambda)| = lambda /
/// sigma_q` with `lambda >= max(0, -lambda_1)`.
pub fn solve_cubic_subproblem(m: &CubicModel) -> Result<CubicOutcome> {
    let n = m.n();
    let eye = DMatrix::identity(n, n);
    let pencil = PencilDecomposition::new(&m.h, &eye)?;
    let l1 = pencil.lambda_1();
    let gamma = pencil.gamma(&m.g);
    let g_norm = m.g.norm();
    let lo = (-l1).max(0.0);
    let outcome = |lambda: f64, s: DVector<f64>, hard_case: bool| CubicOutcome {
        lambda,
        s,
        newton_iters: 0,
        hard_case,
        trace: Vec::new(),
    };

    if g_norm <= 1e-14 * (1.0 + pencil.spectral_radius()) {
        return Ok(if l1 >= 0.0 {
            outcome(0.0, DVector::zeros(n), false)
        } else {
            outcome(lo, pencil.u_1() * (lo / m.sigma_q), true)
        });
    }

    let cluster = pencil.leading_cluster();
    if l1 < 0.0 && gamma.rows(0, cluster).norm() <= HARD_CASE_TOL * g_norm {
        let mut ss = DVector::zeros(n);
        for i in cluster..n {
            ss += pencil.u.column(i) * (-gamma[i] / (pencil.lambdas[i] - l1));
        }
        let r = lo / m.sigma_q;
        let ns = ss.norm();
        if ns <= r {
            let s = ss + pencil.u_1() * (r * r - ns * ns).sqrt();
            return Ok(outcome(lo, s, true));
        }
    }

    let target = CubicTarget { sigma_q: m.sigma_q };
    let bracket = Bracket { lo, hi: None, negative_at_lo: true };
    let root = find_root(&m.h, &eye, &m.g, &target, bracket, lo)?;
    Ok(CubicOutcome {
        lambda: root.lambda,
        s: root.eval.s,
        newton_iters: root.iters,
        hard_case: false,
        trace: root.trace,
    })
}

/// ARC outer loop with the ratio test and factors of `cfg`; the cubic weight
/// starts at `cfg.d0` and moves like the quartic weight of the CQR driver.
///
/// In the records `d` holds `sigma_q`, `beta` holds `2 sigma_q` and `sigma_c`
/// is zero, the cubic model seen as a CQR model.
pub fn minimize_arc(p: &Ar3Problem, cfg: &DriverConfig) -> Result<RunLog> {
    cfg.validate()?;
    let mut s = DVector::zeros(p.n());
    let mut loc = p.recenter(&s)?;
    let mut sigma_q = cfg.d0.max(SIGMA_Q_MIN);
    let mut records = Vec::new();
    let mut fevals = 1;
    let mut devals = 1;
    let mut error = None;

    let status = loop {
        let grad_norm = loc.g.norm();
        if grad_norm <= cfg.eps {
            break RunStatus::Converged;
        }
        if records.len() >= cfg.max_iter {
            break RunStatus::MaxIter;
        }
        let model = CubicModel::new(loc.f, loc.g.clone(), loc.h.clone(), sigma_q)?;
        let out = match solve_cubic_subproblem(&model) {
            Ok(o) => o,
            Err(e) => {
                error = Some(e.to_string());
                break RunStatus::Error;
            }
        };
        let step = out.s;
        let model_decrease = -model.increment(&step)?;
        let actual_decrease = -loc.increment(&step)?;
        fevals += 1;
        let rho = ratio(actual_decrease, model_decrease);
        let accepted = rho.is_some_and(|r| r >= cfg.eta);

        let mut record = IterRecord {
            iter: records.len(),
            f: loc.f,
            grad_norm,
            beta: 2.0 * sigma_q,
            d: sigma_q,
            sigma_c: 0.0,
            rho: rho.unwrap_or(f64::NAN),
            step_norm: step.norm(),
            success: accepted,
            case: None,
            trench: None,
            newton_iters: out.newton_iters,
            model_status: None,
            iterate_norm: s.norm(),
            actual_decrease,
            trial_grad_norm: None,
        };

        if accepted {
            let f_new = loc.f - actual_decrease;
            s += &step;
            loc = p.recenter(&s)?;
            loc.f = f_new;
            devals += 1;
            record.trial_grad_norm = Some(loc.g.norm());
            if rho.is_some_and(|r| r >= cfg.eta1) {
                sigma_q = (sigma_q * cfg.gamma2).max(SIGMA_Q_MIN);
            }
        } else {
            sigma_q *= cfg.gamma;
        }
        records.push(record);
    };

    Ok(RunLog {
        records,
        final_grad_norm: loc.g.norm(),
        final_f: loc.f,
        final_s: s,
        status,
        error,
        function_evals: fevals,
        derivative_evals: devals,
    })
}
