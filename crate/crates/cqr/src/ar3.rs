//! The quartically regularized cubic polynomial
//! `m3(s) = f0 + g.s + 1/2 s.Hs + 1/6 T[s]^3 + sigma/4 |s|^4`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, CqrError, Result};
use crate::tensor::SymTensor3;

#[derive(Debug, Clone, PartialEq)]
pub struct Ar3Problem {
    pub f0: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
    pub t: SymTensor3,
    pub sigma: f64,
}

pub(crate) fn check_symmetric(h: &DMatrix<f64>) -> Result<()> {
    if !h.is_square() {
        return Err(CqrError::NotSymmetric);
    }
    let scale = h.amax().max(1.0);
    for i in 0..h.nrows() {
        for j in 0..i {
            if (h[(i, j)] - h[(j, i)]).abs() > 1e-12 * scale {
                return Err(CqrError::NotSymmetric);
            }
        }
    }
    Ok(())
}

impl Ar3Problem {
    pub fn new(f0: f64, g: DVector<f64>, h: DMatrix<f64>, t: SymTensor3, sigma: f64) -> Result<Self> {
        let n = g.len();
        check_dim(n, h.nrows())?;
        check_dim(n, h.ncols())?;
        check_dim(n, t.n())?;
        check_symmetric(&h)?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(CqrError::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { f0, g, h, t, sigma })
    }

    /// One-dimensional instance `f0 + g s + h/2 s^2 + t/6 s^3 + sigma/4 s^4`.
    pub fn univariate(f0: f64, g: f64, h: f64, t: f64, sigma: f64) -> Result<Self> {
        let mut tt = SymTensor3::zeros(1);
        tt.set(0, 0, 0, t)?;
        Self::new(
            f0,
            DVector::from_element(1, g),
            DMatrix::from_element(1, 1, h),
            tt,
            sigma,
        )
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn eval(&self, s: &DVector<f64>) -> Result<f64> {
        check_dim(self.n(), s.len())?;
        let ns2 = s.norm_squared();
        Ok(self.f0
            + self.g.dot(s)
            + 0.5 * s.dot(&(&self.h * s))
            + self.t.cubic(s)? / 6.0
            + 0.25 * self.sigma * ns2 * ns2)
    }

    pub fn grad(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.n(), s.len())?;
        let ns2 = s.norm_squared();
        Ok(&self.g + &self.h * s + self.t.apply2(s)? * 0.5 + s * (self.sigma * ns2))
    }

    pub fn hess(&self, s: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.n(), s.len())?;
        let ns2 = s.norm_squared();
        let mut m = &self.h + self.t.apply1(s)?;
        for i in 0..self.n() {
            m[(i, i)] += self.sigma * ns2;
        }
        m += (s * s.transpose()) * (2.0 * self.sigma);
        Ok(m)
    }

    /// `T_i[s]^3` where `T_i` is the third derivative of `m3` at `s_i`.
    pub fn local_third_cubic(&self, s_i: &DVector<f64>, s: &DVector<f64>) -> Result<f64> {
        check_dim(self.n(), s_i.len())?;
        Ok(self.t.cubic(s)? + 6.0 * self.sigma * s_i.dot(s) * s.norm_squared())
    }

    /// Diagonal of the third derivative at `s_i`: `T[j,j,j] + 6 sigma (s_i)_j`.
    pub fn local_third_diagonal(&self, s_i: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.n(), s_i.len())?;
        Ok(self.t.diagonal() + s_i * (6.0 * self.sigma))
    }

    pub fn recenter(&self, s_i: &DVector<f64>) -> Result<LocalExpansion<'_>> {
        Ok(LocalExpansion {
            problem: self,
            f: self.eval(s_i)?,
            g: self.grad(s_i)?,
            h: self.hess(s_i)?,
            base: s_i.clone(),
        })
    }
}

/// Exact fourth-order Taylor expansion of `m3` about `base`.
#[derive(Debug, Clone)]
pub struct LocalExpansion<'a> {
    problem: &'a Ar3Problem,
    pub f: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
    pub base: DVector<f64>,
}

impl LocalExpansion<'_> {
    pub fn third_cubic(&self, s: &DVector<f64>) -> Result<f64> {
        self.problem.local_third_cubic(&self.base, s)
    }

    /// `m3(base + s) - m3(base)` summed term by term, which avoids the
    /// cancellation of subtracting two nearly equal function values.
    pub fn increment(&self, s: &DVector<f64>) -> Result<f64> {
        check_dim(self.g.len(), s.len())?;
        let ns2 = s.norm_squared();
        Ok(self.g.dot(s)
            + 0.5 * s.dot(&(&self.h * s))
            + self.third_cubic(s)? / 6.0
            + 0.25 * self.problem.sigma * ns2 * ns2)
    }

    pub fn eval(&self, s: &DVector<f64>) -> Result<f64> {
        Ok(self.f + self.increment(s)?)
    }
}
