//! Outer iteration: minimize `m3` by repeatedly minimizing a local
//! cubic-quartic model and adapting its quartic weight `sigma + 4 d`.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ar3::{Ar3Problem, LocalExpansion};
use crate::error::{CqrError, Result};
use crate::model::CqrPolynomial;
use crate::pencil::PencilDecomposition;
use crate::secular::{self, CaseLabel, SolveStatus, Trench};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Ratio test only; beta used as produced by the beta rule.
    Framework,
    /// Ratio test; beta rules 2 and 3 clamped to `[-B, B]`.
    Practical,
    /// Ratio test plus the beta/sigma_c acceptance clauses; beta always
    /// clamped to `[-B, B]`.
    Optimal,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Framework => "framework",
            Variant::Practical => "practical",
            Variant::Optimal => "optimal",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = CqrError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "framework" => Ok(Variant::Framework),
            "practical" => Ok(Variant::Practical),
            "optimal" => Ok(Variant::Optimal),
            _ => Err(CqrError::InvalidParameter(format!("unknown variant {s:?}"))),
        }
    }
}

/// Rule producing the cubic weight `beta` of each model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum BetaChoice {
    /// `Lambda0 + 6 sigma |s_i|`, an estimate of the local tensor norm.
    NormBound,
    /// Third derivative along the last accepted step, `T_i[s]^3 / |s|^3`.
    LastStep,
    /// Mean of the diagonal of the local third derivative.
    DiagonalMean,
}

impl TryFrom<u8> for BetaChoice {
    type Error = CqrError;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(BetaChoice::NormBound),
            2 => Ok(BetaChoice::LastStep),
            3 => Ok(BetaChoice::DiagonalMean),
            _ => Err(CqrError::InvalidParameter(format!("beta choice must be 1, 2 or 3, got {v}"))),
        }
    }
}

impl From<BetaChoice> for u8 {
    fn from(c: BetaChoice) -> u8 {
        match c {
            BetaChoice::NormBound => 1,
            BetaChoice::LastStep => 2,
            BetaChoice::DiagonalMean => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriverConfig {
    pub eta: f64,
    pub eta1: f64,
    pub gamma: f64,
    pub gamma2: f64,
    pub alpha: f64,
    pub eps: f64,
    pub d0: f64,
    pub beta_choice: BetaChoice,
    pub variant: Variant,
    pub max_iter: usize,
    /// Bound `B` on `|beta|`; defaults to the largest absolute tensor entry.
    pub b_cap: Option<f64>,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            eta1: 0.9,
            gamma: 2.0,
            gamma2: 0.5,
            alpha: 0.1,
            eps: 1e-5,
            d0: 1.0,
            beta_choice: BetaChoice::LastStep,
            variant: Variant::Practical,
            max_iter: 500,
            b_cap: None,
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CqrError::InvalidParameter(msg.to_string()));
        if !(self.eta1 > self.eta && self.eta > 0.0) {
            return bad("need eta1 > eta > 0");
        }
        if !(self.gamma > 1.0 && 1.0 > self.gamma2 && self.gamma2 > 0.0) {
            return bad("need gamma > 1 > gamma2 > 0");
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad("need 0 < alpha < 1/2");
        }
        if !(self.eps > 0.0) {
            return bad("need eps > 0");
        }
        if !(self.d0 >= 0.0) {
            return bad("need d0 >= 0");
        }
        if let Some(b) = self.b_cap {
            if !(b >= 0.0) {
                return bad("need B >= 0");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIter,
    Error,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIter => "max_iter",
            RunStatus::Error => "error",
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub beta: f64,
    pub d: f64,
    pub sigma_c: f64,
    /// `NaN` when the model predicts no decrease.
    pub rho: f64,
    pub step_norm: f64,
    pub success: bool,
    pub case: Option<CaseLabel>,
    pub trench: Option<Trench>,
    pub newton_iters: usize,
    pub model_status: Option<SolveStatus>,
    /// `|s_i|`, the distance of the current iterate from the origin.
    pub iterate_norm: f64,
    /// `m3(s_i) - m3(s_i + s_c)`.
    pub actual_decrease: f64,
    /// `|grad m3(s_i + s_c)|` when it was evaluated.
    pub trial_grad_norm: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub records: Vec<IterRecord>,
    pub final_s: DVector<f64>,
    pub final_f: f64,
    pub final_grad_norm: f64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub function_evals: usize,
    pub derivative_evals: usize,
}

impl RunLog {
    pub fn total_iterations(&self) -> usize {
        self.records.len()
    }

    pub fn successful_iterations(&self) -> usize {
        self.records.iter().filter(|r| r.success).count()
    }

    pub fn unsuccessful_iterations(&self) -> usize {
        self.total_iterations() - self.successful_iterations()
    }
}

/// `rho = actual / predicted`, or `None` when the model predicts no decrease.
pub fn ratio(actual_decrease: f64, model_decrease: f64) -> Option<f64> {
    (model_decrease > 0.0).then(|| actual_decrease / model_decrease)
}

/// Acceptance test of the optimal-complexity variant.
pub fn accept_rule_optimal(beta: f64, sigma_c: f64, step_norm: f64, rho: f64, cfg: &DriverConfig, b_cap: f64) -> bool {
    if rho < cfg.eta || step_norm <= 0.0 {
        return false;
    }
    let a = cfg.alpha;
    let c = (-beta + a) / step_norm;
    (a..=b_cap).contains(&beta)
        || ((-b_cap..=-4.0 * a).contains(&beta) && !(c / 6.0..=2.0 * c / 3.0).contains(&sigma_c))
        || ((-4.0 * a..=a).contains(&beta) && sigma_c >= 2.0 / 3.0 * c)
}

pub fn beta_init(p: &Ar3Problem, choice: BetaChoice) -> f64 {
    match choice {
        BetaChoice::NormBound => p.t.lambda0_surrogate(),
        BetaChoice::LastStep | BetaChoice::DiagonalMean => -p.t.diagonal().amax(),
    }
}

fn clamp_beta(beta: f64, b_cap: f64) -> f64 {
    if beta.abs() > b_cap {
        beta.signum() * b_cap
    } else {
        beta
    }
}

/// Beta for the model at `s_i`, given the last accepted step `last_step`.
pub fn beta_update(
    p: &Ar3Problem,
    s_i: &DVector<f64>,
    last_step: &DVector<f64>,
    choice: BetaChoice,
    previous: f64,
) -> Result<f64> {
    Ok(match choice {
        BetaChoice::NormBound => p.t.lambda0_surrogate() + 6.0 * p.sigma * s_i.norm(),
        BetaChoice::LastStep => {
            let r = last_step.norm();
            if r == 0.0 {
                previous
            } else {
                p.local_third_cubic(s_i, last_step)? / r.powi(3)
            }
        }
        BetaChoice::DiagonalMean => p.local_third_diagonal(s_i)?.mean(),
    })
}

fn clamps(variant: Variant, choice: BetaChoice) -> bool {
    match variant {
        Variant::Framework => false,
        Variant::Practical => choice != BetaChoice::NormBound,
        Variant::Optimal => true,
    }
}

pub fn minimize(p: &Ar3Problem, cfg: &DriverConfig) -> Result<RunLog> {
    cfg.validate()?;
    let b_cap = cfg.b_cap.unwrap_or_else(|| p.t.max_abs_entry());
    let clamp = clamps(cfg.variant, cfg.beta_choice);
    let fix_beta = |b: f64| if clamp { clamp_beta(b, b_cap) } else { b };

    let mut s = DVector::zeros(p.n());
    let mut loc: LocalExpansion<'_> = p.recenter(&s)?;
    let mut beta = fix_beta(beta_init(p, cfg.beta_choice));
    let mut d = cfg.d0;
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
        let sigma_c = p.sigma + 4.0 * d;
        let model = CqrPolynomial::identity_weight(loc.f, loc.g.clone(), loc.h.clone(), beta, sigma_c)?;
        let out = match secular::solve(&model) {
            Ok(o) => o,
            Err(e) => {
                error = Some(e.to_string());
                break RunStatus::Error;
            }
        };
        let step = out.s;
        let step_norm = step.norm();
        let model_decrease = -model.increment(&step)?;
        let actual_decrease = -loc.increment(&step)?;
        fevals += 1;
        let rho = ratio(actual_decrease, model_decrease);

        let mut record = IterRecord {
            iter: records.len(),
            f: loc.f,
            grad_norm,
            beta,
            d,
            sigma_c,
            rho: rho.unwrap_or(f64::NAN),
            step_norm,
            success: false,
            case: Some(out.case),
            trench: out.trench,
            newton_iters: out.newton_iters,
            model_status: Some(out.status),
            iterate_norm: s.norm(),
            actual_decrease,
            trial_grad_norm: None,
        };

        let trial = &s + &step;
        let mut terminal = false;
        let accepted = match (cfg.variant, rho) {
            (_, None) => false,
            (Variant::Optimal, Some(r)) => {
                let tg = p.grad(&trial)?.norm();
                devals += 1;
                record.trial_grad_norm = Some(tg);
                terminal = tg <= cfg.eps;
                terminal || accept_rule_optimal(beta, sigma_c, step_norm, r, cfg, b_cap)
            }
            (_, Some(r)) => r >= cfg.eta,
        };

        if accepted {
            let f_new = loc.f - actual_decrease;
            s = trial;
            loc = p.recenter(&s)?;
            loc.f = f_new;
            if record.trial_grad_norm.is_none() {
                devals += 1;
                record.trial_grad_norm = Some(loc.g.norm());
            }
            if rho.is_some_and(|r| r >= cfg.eta1) {
                d *= cfg.gamma2;
            }
            beta = fix_beta(beta_update(p, &s, &step, cfg.beta_choice, beta)?);
        } else {
            d = match cfg.variant {
                Variant::Optimal => cfg.gamma * d.max(1.0),
                _ if d > 0.0 => cfg.gamma * d,
                _ => 1.0,
            };
        }
        record.success = accepted;
        records.push(record);
        if terminal {
            break RunStatus::Converged;
        }
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

/// Constants of the worst-case analysis for a given problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryConstants {
    pub lambda0: f64,
    pub b: f64,
    pub r_c: f64,
    pub l_h: f64,
    pub d_max: f64,
    pub kappa_s: f64,
}

impl TheoryConstants {
    pub fn from_norms(g_norm: f64, h_norm: f64, b: f64, lambda0: f64, sigma: f64, cfg: &DriverConfig) -> Self {
        let r_c = (60.0 * g_norm / sigma)
            .cbrt()
            .max((30.0 * h_norm / sigma).sqrt())
            .max(80.0 * b / sigma + 90.0 * lambda0 / sigma);
        let l_h = lambda0 + 6.0 * sigma * r_c;
        Self {
            lambda0,
            b,
            r_c,
            l_h,
            d_max: cfg.gamma * (b + l_h).powf(1.5) / cfg.eps.sqrt(),
            kappa_s: cfg.alpha * cfg.eta / 24.0 * (b + l_h).powf(-1.5),
        }
    }

    /// Lower bound on the step length of a non-terminal iteration with
    /// regularization `d`.
    pub fn step_floor(&self, d: f64, eps: f64) -> f64 {
        let first = (eps / (self.b + self.l_h)).sqrt();
        if d > 0.0 {
            first.min(0.5 * (eps / d).cbrt())
        } else {
            first
        }
    }
}

pub fn theory_constants(p: &Ar3Problem, b_cap: f64, cfg: &DriverConfig) -> Result<TheoryConstants> {
    let n = p.n();
    let h_norm = PencilDecomposition::new(&p.h, &nalgebra::DMatrix::identity(n, n))?.spectral_radius();
    Ok(TheoryConstants::from_norms(p.g.norm(), h_norm, b_cap, p.t.lambda0_surrogate(), p.sigma, cfg))
}

/// Global minimizer of `f0 + g s + h/2 s^2 + t/6 s^3 + sigma/4 s^4`,
/// returned as `(s, value)`.
///
/// On each half-line the cubic term equals `+|t|/6 |s|^3` or `-|t|/6 |s|^3`,
/// so `m3` agrees with one of the two CQR models there. Candidates are both
/// models' minimizers and the stationary points of `m3`; the best one wins.
pub fn minimize_univariate(f0: f64, g: f64, h: f64, t: f64, sigma: f64) -> Result<(f64, f64)> {
    let p = Ar3Problem::univariate(f0, g, h, t, sigma)?;
    let mut best: Option<(f64, f64)> = None;
    let mut cands = Vec::new();
    for beta in [t.abs(), -t.abs()] {
        let m = CqrPolynomial::identity_weight(
            f0,
            DVector::from_element(1, g),
            nalgebra::DMatrix::from_element(1, 1, h),
            beta,
            sigma,
        )?;
        cands.push(secular::solve(&m)?.s);
    }
    // A model's global minimizer can sit on the side where it underestimates
    // m3, so also take every stationary point of m3.
    cands.extend(cubic_real_roots(sigma, t / 2.0, h, g).into_iter().map(|r| DVector::from_element(1, r)));
    for s in cands {
        let v = p.eval(&s)?;
        if best.is_none_or(|b| v < b.1) {
            best = Some((s[0], v));
        }
    }
    best.ok_or_else(|| CqrError::InvalidParameter("no univariate minimizer".into()))
}

/// Real roots of `a x^3 + b x^2 + c x + d` with `a > 0`, Newton-polished.
fn cubic_real_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (p2, p1, p0) = (b / a, c / a, d / a);
    let q = (3.0 * p1 - p2 * p2) / 9.0;
    let r = (9.0 * p2 * p1 - 27.0 * p0 - 2.0 * p2.powi(3)) / 54.0;
    let disc = q.powi(3) + r * r;
    let shift = p2 / 3.0;
    let mut roots = if disc > 0.0 {
        let sq = disc.sqrt();
        vec![(r + sq).cbrt() + (r - sq).cbrt() - shift]
    } else {
        let theta = if q == 0.0 { 0.0 } else { (r / (-q.powi(3)).sqrt()).clamp(-1.0, 1.0).acos() };
        let m = 2.0 * (-q).max(0.0).sqrt();
        (0..3)
            .map(|k| m * ((theta + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() - shift)
            .collect()
    };
    for x in roots.iter_mut() {
        for _ in 0..4 {
            let f = ((*x + p2) * *x + p1) * *x + p0;
            let df = (3.0 * *x + 2.0 * p2) * *x + p1;
            if df == 0.0 {
                break;
            }
            let nx = *x - f / df;
            if !nx.is_finite() {
                break;
            }
            *x = nx;
        }
    }
    roots
}

/// Minimizer of `f0 + sum_j (g_j s_j + D_j/2 s_j^2 + Td_j/6 s_j^3 + sigma/4 s_j^4)`.
pub fn minimize_separable_diag(
    g: &DVector<f64>,
    d: &DVector<f64>,
    td: &DVector<f64>,
    sigma: f64,
) -> Result<DVector<f64>> {
    let n = g.len();
    crate::error::check_dim(n, d.len())?;
    crate::error::check_dim(n, td.len())?;
    let mut s = DVector::zeros(n);
    for j in 0..n {
        s[j] = minimize_univariate(0.0, g[j], d[j], td[j], sigma)?.0;
    }
    Ok(s)
}
