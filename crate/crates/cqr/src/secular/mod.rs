//! Global minimization of a [`CqrPolynomial`] through its secular equation.
//!
//! A global minimizer `s_c` satisfies `(H + lambda W) s_c = -g` with
//! `H + lambda W` positive semidefinite and
//! `lambda = beta/2 |s_c|_W + sigma_c |s_c|_W^2`. Writing `psi(lambda)` for
//! `|s(lambda)|_W`, the last condition becomes `psi(lambda) = k(lambda)` on one
//! of the two trenches `k_plus`, `k_minus`; which one holds the global
//! minimizer depends on the case returned by [`classify_case`].

mod newton;
mod trench;

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CqrError, Result};
use crate::model::{CqrPolynomial, NecessaryReport};
use crate::pencil::PencilDecomposition;

pub use newton::{NewtonStep, PsiEval, NEWTON_MAX_ITER, NEWTON_TOL};
pub use trench::{inv_k_derivative, k_trench, trench_apex, Trench};

pub(crate) use newton::{find_root, psi_cholesky, Bracket};
pub(crate) use trench::{CqrTarget, CubicTarget};

/// Tolerance passed to [`CqrPolynomial::verify_necessary`] when labelling a
/// solution.
pub const CERTIFY_TOL: f64 = 1e-6;
/// Relative size of `gamma_1` below which the hard case is assumed.
pub const HARD_CASE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
}

impl CaseLabel {
    pub fn advised_trench(self) -> Trench {
        match self {
            CaseLabel::Case3 => Trench::KMinus,
            _ => Trench::KPlus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::Case1 => "case1",
            CaseLabel::Case2 => "case2",
            CaseLabel::Case3 => "case3",
            CaseLabel::Case4 => "case4",
            CaseLabel::Case5 => "case5",
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    UniqueGlobal,
    Global,
    LocalCase5Decrease,
    HardCase,
    GradientSmall,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::UniqueGlobal => "unique_global",
            SolveStatus::Global => "global",
            SolveStatus::LocalCase5Decrease => "local_case5_decrease",
            SolveStatus::HardCase => "hard_case",
            SolveStatus::GradientSmall => "gradient_small",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SecularOutcome {
    pub lambda: f64,
    pub s: DVector<f64>,
    pub trench: Option<Trench>,
    pub case: CaseLabel,
    pub newton_iters: usize,
    pub status: SolveStatus,
    pub necessary: NecessaryReport,
    pub trace: Vec<NewtonStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiVia {
    Cholesky,
    Spectral,
}

/// Shared per-model data: the pencil and `gamma = U^T g`.
struct Context<'a> {
    m: &'a CqrPolynomial,
    pencil: PencilDecomposition,
    gamma: DVector<f64>,
    g_norm: f64,
    pd_tol: f64,
}

impl<'a> Context<'a> {
    fn new(m: &'a CqrPolynomial) -> Result<Self> {
        let pencil = PencilDecomposition::new(&m.h, &m.w)?;
        let gamma = pencil.gamma(&m.g);
        let pd_tol = 1e-12 * (1.0 + pencil.spectral_radius());
        Ok(Self { m, gamma, g_norm: m.g.norm(), pd_tol, pencil })
    }

    fn lambda_1(&self) -> f64 {
        self.pencil.lambda_1()
    }

    /// `|gamma|` over the leading eigenvalue cluster.
    fn leading_gamma(&self) -> f64 {
        let c = self.pencil.leading_cluster();
        self.gamma.rows(0, c).norm()
    }

    fn is_hard(&self) -> bool {
        self.leading_gamma() <= HARD_CASE_TOL * self.g_norm
    }

    /// Spectral `psi` with pseudo-inverse semantics at poles: components with
    /// negligible `gamma_i` are dropped, others give `+inf`.
    fn psi_spectral(&self, lambda: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &li) in self.pencil.lambdas.iter().enumerate() {
            let d = lambda + li;
            let gi = self.gamma[i];
            if d.abs() <= 1e-14 * (1.0 + li.abs()) {
                if gi.abs() > HARD_CASE_TOL * self.g_norm {
                    return f64::INFINITY;
                }
                continue;
            }
            acc += gi * gi / (d * d);
        }
        acc.sqrt()
    }

    fn classify(&self) -> CaseLabel {
        let m = self.m;
        let l1 = self.lambda_1();
        if l1 <= self.pd_tol {
            return CaseLabel::Case1;
        }
        if m.beta >= 0.0 {
            return CaseLabel::Case2;
        }
        if m.beta <= -3.0 * 2f64.sqrt() * (l1 * m.sigma_c).sqrt() {
            return CaseLabel::Case4;
        }
        if m.beta > -4.0 * (m.sigma_c * l1).sqrt() {
            let (la, sa) = trench_apex(m.beta, m.sigma_c);
            if self.psi_spectral(la) < sa {
                return CaseLabel::Case3;
            }
        }
        CaseLabel::Case5
    }

    fn init_lambda(&self, trench: Trench) -> f64 {
        let l1 = self.lambda_1();
        let off = 1e-6_f64.max(1e-12 * (1.0 + l1.abs()));
        match trench {
            Trench::KMinus => 0.0,
            Trench::KPlus if l1 <= 0.0 => (-l1).max(0.0) + off,
            Trench::KPlus if self.m.beta < 0.0 => {
                let (la, _) = trench_apex(self.m.beta, self.m.sigma_c);
                (-l1).max(la) + off
            }
            Trench::KPlus => off,
        }
    }

    /// Feasible multiplier interval of a trench and the sign of `phi` at its
    /// left end; `None` when the trench cannot hold a root.
    fn bracket(&self, trench: Trench) -> Option<Bracket> {
        let m = self.m;
        let (la, _) = trench_apex(m.beta, m.sigma_c);
        let pole = -self.lambda_1();
        let (lo, hi) = match trench {
            Trench::KPlus => (pole.max(if m.beta > 0.0 { 0.0 } else { la }), None),
            Trench::KMinus => {
                if m.beta >= 0.0 {
                    return None;
                }
                let lo = pole.max(la);
                if lo >= 0.0 {
                    return None;
                }
                (lo, Some(0.0))
            }
        };
        let k_lo = k_trench(lo, trench, m.beta, m.sigma_c)?;
        let psi_lo = self.psi_spectral(lo);
        let phi_lo = if k_lo == 0.0 { f64::NEG_INFINITY } else { 1.0 / psi_lo - 1.0 / k_lo };
        match trench {
            Trench::KPlus if phi_lo < 0.0 => Some(Bracket { lo, hi, negative_at_lo: true }),
            Trench::KMinus if phi_lo > 0.0 => Some(Bracket { lo, hi, negative_at_lo: false }),
            _ => None,
        }
    }

    fn newton(&self, trench: Trench, lambda0: f64) -> Result<(f64, PsiEval, usize, Vec<NewtonStep>)> {
        let bracket = self.bracket(trench).ok_or(CqrError::NoRoot(trench))?;
        let target = CqrTarget { trench, beta: self.m.beta, sigma_c: self.m.sigma_c };
        let r = find_root(&self.m.h, &self.m.w, &self.m.g, &target, bracket, lambda0)?;
        Ok((r.lambda, r.eval, r.iters, r.trace))
    }

    fn label(&self, case: CaseLabel, trench: Trench, s: &DVector<f64>) -> Result<(SolveStatus, NecessaryReport)> {
        let m = self.m;
        let nec = m.verify_necessary(s, CERTIFY_TOL)?;
        if case != CaseLabel::Case5 && trench == case.advised_trench() && nec.passed {
            let status = if nec.min_eig > self.pd_tol { SolveStatus::UniqueGlobal } else { SolveStatus::Global };
            return Ok((status, nec));
        }
        if nec.passed && m.beta >= -3.0 * m.sigma_c * m.wnorm(s) {
            return Ok((SolveStatus::Global, nec));
        }
        if m.increment(s)? < 0.0 {
            return Ok((SolveStatus::LocalCase5Decrease, nec));
        }
        Err(CqrError::NoDecrease)
    }

    fn solve_degenerate(&self) -> Result<SecularOutcome> {
        let m = self.m;
        let l1 = self.lambda_1();
        let phi = |r: f64| 0.5 * l1 * r * r + m.beta / 6.0 * r.powi(3) + m.sigma_c / 4.0 * r.powi(4);
        let mut best: (f64, Option<Trench>, f64) = (0.0, None, 0.0);
        let mut strict = true;
        for t in [Trench::KPlus, Trench::KMinus] {
            if let Some(r) = k_trench(-l1, t, m.beta, m.sigma_c).filter(|&r| r > 0.0) {
                let v = phi(r);
                if v < best.2 {
                    best = (r, Some(t), v);
                } else if v <= best.2 + 1e-14 * (1.0 + v.abs()) && best.1.is_none() {
                    strict = false;
                }
            }
        }
        let (r, trench, _) = best;
        let s = self.pencil.u_1() * r;
        let case = self.classify();
        let nec = m.verify_necessary(&s, CERTIFY_TOL)?;
        let status = if r == 0.0 && l1 > self.pd_tol && strict {
            SolveStatus::UniqueGlobal
        } else {
            SolveStatus::GradientSmall
        };
        Ok(SecularOutcome {
            lambda: if r == 0.0 { 0.0 } else { -l1 },
            s,
            trench,
            case,
            newton_iters: 0,
            status,
            necessary: nec,
            trace: Vec::new(),
        })
    }

    fn hard_case(&self) -> Result<SecularOutcome> {
        if !self.is_hard() {
            return Err(CqrError::HardCase(format!(
                "leading gradient component {:.3e} is not negligible",
                self.leading_gamma()
            )));
        }
        let m = self.m;
        let l1 = self.lambda_1();
        let c = self.pencil.leading_cluster();
        let n = m.n();
        let mut ss = DVector::zeros(n);
        for i in c..n {
            let coef = -self.gamma[i] / (self.pencil.lambdas[i] - l1);
            ss += self.pencil.u.column(i) * coef;
        }
        let ns = m.wnorm(&ss);
        let u1 = self.pencil.u_1();
        let mut best: Option<(DVector<f64>, Trench, f64)> = None;
        for t in [Trench::KPlus, Trench::KMinus] {
            let Some(r) = k_trench(-l1, t, m.beta, m.sigma_c) else { continue };
            if r < ns * (1.0 - 1e-12) {
                continue;
            }
            let ks = (r * r - ns * ns).max(0.0).sqrt();
            let s = &ss + &u1 * ks;
            let v = m.increment(&s)?;
            if best.as_ref().is_none_or(|b| v < b.2) {
                best = Some((s, t, v));
            }
        }
        let (s, trench, _) = best.ok_or_else(|| CqrError::HardCase("no real root for the eigenvector weight".into()))?;
        let nec = m.verify_necessary(&s, CERTIFY_TOL)?;
        Ok(SecularOutcome {
            lambda: -l1,
            s,
            trench: Some(trench),
            case: self.classify(),
            newton_iters: 0,
            status: SolveStatus::HardCase,
            necessary: nec,
            trace: Vec::new(),
        })
    }

    fn solve(&self) -> Result<SecularOutcome> {
        if self.g_norm <= 1e-14 * (1.0 + self.pencil.spectral_radius()) {
            return self.solve_degenerate();
        }
        let case = self.classify();
        let advised = case.advised_trench();
        let mut iters = 0;
        for trench in [advised, advised.other()] {
            let Ok((lambda, ev, it, trace)) = self.newton(trench, self.init_lambda(trench)) else {
                continue;
            };
            iters += it;
            if let Ok((status, necessary)) = self.label(case, trench, &ev.s) {
                return Ok(SecularOutcome {
                    lambda,
                    s: ev.s,
                    trench: Some(trench),
                    case,
                    newton_iters: iters,
                    status,
                    necessary,
                    trace,
                });
            }
        }
        let mut out = self.hard_case()?;
        out.newton_iters = iters;
        Ok(out)
    }
}

/// Case of the model according to the sign of `lambda_1` and `beta`.
pub fn classify_case(m: &CqrPolynomial) -> Result<CaseLabel> {
    Ok(Context::new(m)?.classify())
}

/// Starting multiplier for the Newton iteration on `trench`.
pub fn init_lambda(m: &CqrPolynomial, trench: Trench) -> Result<f64> {
    Ok(Context::new(m)?.init_lambda(trench))
}

/// `psi(lambda) = |(H + lambda W)^{-1} g|_W`.
pub fn psi(m: &CqrPolynomial, lambda: f64, via: PsiVia) -> Result<PsiEval> {
    match via {
        PsiVia::Cholesky => psi_cholesky(&m.h, &m.w, &m.g, lambda),
        PsiVia::Spectral => {
            let ctx = Context::new(m)?;
            let n = m.n();
            let mut s = DVector::zeros(n);
            let mut omega_sq = 0.0;
            for i in 0..n {
                let d = lambda + ctx.pencil.lambdas[i];
                if d <= 0.0 {
                    return Err(CqrError::Factorization(lambda));
                }
                s -= ctx.pencil.u.column(i) * (ctx.gamma[i] / d);
                omega_sq += ctx.gamma[i].powi(2) / d.powi(3);
            }
            Ok(PsiEval { psi: ctx.psi_spectral(lambda), s, omega_sq })
        }
    }
}

/// `phi_1(lambda) = 1/psi(lambda) - 1/k(lambda)` on a trench.
pub fn phi1(m: &CqrPolynomial, lambda: f64, trench: Trench) -> Result<f64> {
    let ev = psi_cholesky(&m.h, &m.w, &m.g, lambda)?;
    let k = k_trench(lambda, trench, m.beta, m.sigma_c).ok_or(CqrError::NoRoot(trench))?;
    if k == 0.0 || ev.psi == 0.0 {
        return Err(CqrError::InvalidParameter("phi1 undefined where psi or k vanishes".into()));
    }
    Ok(1.0 / ev.psi - 1.0 / k)
}

/// Newton iteration for a root of `phi_1` on `trench`, started at
/// `lambda0` (moved into the feasible interval when outside it).
pub fn newton_root(m: &CqrPolynomial, trench: Trench, lambda0: f64) -> Result<SecularOutcome> {
    let ctx = Context::new(m)?;
    let (lambda, ev, iters, trace) = ctx.newton(trench, lambda0)?;
    let case = ctx.classify();
    let necessary = m.verify_necessary(&ev.s, CERTIFY_TOL)?;
    let (status, _) = ctx.label(case, trench, &ev.s)?;
    Ok(SecularOutcome { lambda, s: ev.s, trench: Some(trench), case, newton_iters: iters, status, necessary, trace })
}

/// Solution when `g` is orthogonal to the leading eigenspace and neither
/// trench has a root: `s = s_s + k u_1` at `lambda = -lambda_1`.
pub fn hard_case_solve(m: &CqrPolynomial) -> Result<SecularOutcome> {
    Context::new(m)?.hard_case()
}

/// Minimizes `m`, returning a certified global minimizer in Cases 1-4 and
/// a decreasing local minimizer in Case 5.
pub fn solve(m: &CqrPolynomial) -> Result<SecularOutcome> {
    Context::new(m)?.solve()
}

/// Leftmost generalized eigenvalue of `(H, W)`.
pub fn leftmost_eigenvalue(m: &CqrPolynomial) -> Result<f64> {
    Ok(PencilDecomposition::new(&m.h, &m.w)?.lambda_1())
}
