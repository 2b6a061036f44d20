//! Safeguarded Newton iteration on `phi(lambda) = 1/psi(lambda) - 1/k(lambda)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::trench::NormTarget;
use crate::error::{CqrError, Result};

/// `psi(lambda) = |s(lambda)|_W` with `(H + lambda W) s = -g`, plus
/// `|omega|^2` where `H + lambda W = L L^T` and `omega = L^{-1} W s`, so that
/// `d/dlambda psi^2 = -2 |omega|^2`.
#[derive(Debug, Clone)]
pub struct PsiEval {
    pub psi: f64,
    pub s: DVector<f64>,
    pub omega_sq: f64,
}

pub(crate) fn psi_cholesky(h: &DMatrix<f64>, w: &DMatrix<f64>, g: &DVector<f64>, lambda: f64) -> Result<PsiEval> {
    let a = h + w * lambda;
    let chol = a.cholesky().ok_or(CqrError::Factorization(lambda))?;
    let s = -chol.solve(g);
    let ws = w * &s;
    let psi = s.dot(&ws).max(0.0).sqrt();
    let omega = chol
        .l_dirty()
        .solve_lower_triangular(&ws)
        .ok_or(CqrError::Factorization(lambda))?;
    if !psi.is_finite() || !omega.iter().all(|x| x.is_finite()) {
        return Err(CqrError::Factorization(lambda));
    }
    Ok(PsiEval {
        psi,
        omega_sq: omega.norm_squared(),
        s,
    })
}

/// One row of the optional Newton trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonStep {
    pub k: usize,
    pub lambda: f64,
    pub psi: f64,
    pub k_trench: f64,
    pub phi1: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct RootResult {
    pub lambda: f64,
    pub eval: PsiEval,
    pub iters: usize,
    pub trace: Vec<NewtonStep>,
}

pub(crate) struct Bracket {
    pub lo: f64,
    /// `None` means unbounded to the right.
    pub hi: Option<f64>,
    /// Sign of phi near `lo`; phi has the opposite sign near `hi`.
    pub negative_at_lo: bool,
}

/// Relative stopping tolerance: `|psi - k| <= NEWTON_TOL (1 + k)`.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 200;

pub(crate) fn find_root(
    h: &DMatrix<f64>,
    w: &DMatrix<f64>,
    g: &DVector<f64>,
    target: &dyn NormTarget,
    bracket: Bracket,
    lambda0: f64,
) -> Result<RootResult> {
    let Bracket { mut lo, mut hi, negative_at_lo } = bracket;
    let orient = if negative_at_lo { 1.0 } else { -1.0 };
    let inside = |x: f64, lo: f64, hi: Option<f64>| x > lo && hi.is_none_or(|h| x < h);
    let fallback = |lo: f64, hi: Option<f64>| match hi {
        Some(h) => 0.5 * (lo + h),
        None => lo + lo.abs().max(1.0),
    };

    let mut lambda = if inside(lambda0, lo, hi) {
        lambda0
    } else if hi.is_none() {
        lo + 1e-6_f64.max(1e-12 * lo.abs())
    } else {
        fallback(lo, hi)
    };
    let mut trace = Vec::new();

    for it in 1..=NEWTON_MAX_ITER {
        let ev = match psi_cholesky(h, w, g, lambda) {
            Ok(ev) => ev,
            Err(_) => {
                // Only possible left of the pole.
                lo = lambda;
                lambda = fallback(lo, hi);
                continue;
            }
        };
        let Some(k) = target.k(lambda) else {
            lo = lambda;
            lambda = fallback(lo, hi);
            continue;
        };
        let phi = if k == 0.0 {
            f64::NEG_INFINITY
        } else if ev.psi == 0.0 {
            f64::INFINITY
        } else {
            1.0 / ev.psi - 1.0 / k
        };
        trace.push(NewtonStep { k: it, lambda, psi: ev.psi, k_trench: k, phi1: phi });

        let collapsed = hi.is_some_and(|h| h - lo <= 4.0 * f64::EPSILON * (1.0 + lambda.abs()));
        if (ev.psi - k).abs() <= NEWTON_TOL * (1.0 + k) || collapsed {
            return Ok(RootResult { lambda, eval: ev, iters: it, trace });
        }

        if orient * phi < 0.0 {
            lo = lambda;
        } else {
            hi = Some(lambda);
        }
        let dphi = ev.omega_sq / ev.psi.powi(3) - target.inv_k_derivative(lambda);
        let cand = lambda - phi / dphi;
        // Roundoff floor: the Newton update no longer moves lambda.
        if (cand - lambda).abs() <= 4.0 * f64::EPSILON * (1.0 + lambda.abs()) {
            return Ok(RootResult { lambda, eval: ev, iters: it, trace });
        }
        lambda = if cand.is_finite() && inside(cand, lo, hi) { cand } else { fallback(lo, hi) };
    }
    Err(CqrError::NewtonStalled(NEWTON_MAX_ITER))
}
