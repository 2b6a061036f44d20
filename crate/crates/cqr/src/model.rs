//! Cubic-quartic regularized quadratic model
//! `M_c(s) = f + g.s + 1/2 s.Hs + beta/6 |s|_W^3 + sigma_c/4 |s|_W^4`.

use nalgebra::{DMatrix, DVector};

use crate::ar3::check_symmetric;
use crate::error::{check_dim, CqrError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CqrPolynomial {
    pub f: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
    pub beta: f64,
    pub sigma_c: f64,
    pub w: DMatrix<f64>,
}

/// Outcome of checking the first- and second-order global optimality
/// conditions at a candidate step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NecessaryReport {
    /// `|B(s) s + g| / max(1, |g|)`.
    pub residual: f64,
    /// Smallest generalized eigenvalue of `B(s)` relative to `W`.
    pub min_eig: f64,
    pub passed: bool,
}

impl CqrPolynomial {
    pub fn new(
        f: f64,
        g: DVector<f64>,
        h: DMatrix<f64>,
        beta: f64,
        sigma_c: f64,
        w: DMatrix<f64>,
    ) -> Result<Self> {
        let n = g.len();
        check_dim(n, h.nrows())?;
        check_dim(n, w.nrows())?;
        check_symmetric(&h)?;
        check_symmetric(&w)?;
        if !(sigma_c > 0.0) || !sigma_c.is_finite() || !beta.is_finite() {
            return Err(CqrError::InvalidParameter(format!(
                "need sigma_c > 0 and finite beta, got sigma_c = {sigma_c}, beta = {beta}"
            )));
        }
        if w.clone().cholesky().is_none() {
            return Err(CqrError::WeightNotPd);
        }
        Ok(Self { f, g, h, beta, sigma_c, w })
    }

    /// Model with `W = I`.
    pub fn identity_weight(f: f64, g: DVector<f64>, h: DMatrix<f64>, beta: f64, sigma_c: f64) -> Result<Self> {
        let n = g.len();
        Self::new(f, g, h, beta, sigma_c, DMatrix::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn wnorm(&self, s: &DVector<f64>) -> f64 {
        s.dot(&(&self.w * s)).max(0.0).sqrt()
    }

    /// `M_c(s) - M_c(0)`, summed term by term.
    pub fn increment(&self, s: &DVector<f64>) -> Result<f64> {
        check_dim(self.n(), s.len())?;
        let r = self.wnorm(s);
        Ok(self.g.dot(s) + 0.5 * s.dot(&(&self.h * s)) + self.beta / 6.0 * r.powi(3) + self.sigma_c / 4.0 * r.powi(4))
    }

    pub fn eval(&self, s: &DVector<f64>) -> Result<f64> {
        Ok(self.f + self.increment(s)?)
    }

    pub fn grad(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.n(), s.len())?;
        let r = self.wnorm(s);
        let ws = &self.w * s;
        Ok(&self.g + &self.h * s + ws * (0.5 * self.beta * r + self.sigma_c * r * r))
    }

    pub fn hess(&self, s: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.n(), s.len())?;
        let r = self.wnorm(s);
        if r == 0.0 {
            return if self.beta == 0.0 { Ok(self.h.clone()) } else { Err(CqrError::HessianAtOrigin) };
        }
        let ws = &self.w * s;
        let outer = &ws * ws.transpose();
        Ok(&self.h
            + (&self.w * r + &outer / r) * (0.5 * self.beta)
            + (&self.w * (r * r) + outer * 2.0) * self.sigma_c)
    }

    /// `B(s) = H + (beta/2 |s|_W + sigma_c |s|_W^2) W`.
    pub fn b_matrix(&self, s: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.n(), s.len())?;
        let r = self.wnorm(s);
        Ok(&self.h + &self.w * (0.5 * self.beta * r + self.sigma_c * r * r))
    }

    /// Multiplier implied by a step: `beta/2 |s|_W + sigma_c |s|_W^2`.
    pub fn implied_lambda(&self, s: &DVector<f64>) -> f64 {
        let r = self.wnorm(s);
        0.5 * self.beta * r + self.sigma_c * r * r
    }

    pub fn verify_necessary(&self, s: &DVector<f64>, tol: f64) -> Result<NecessaryReport> {
        let b = self.b_matrix(s)?;
        let residual = (&b * s + &self.g).norm() / self.g.norm().max(1.0);
        let min_eig = crate::pencil::PencilDecomposition::new(&b, &self.w)?.lambda_1();
        Ok(NecessaryReport {
            residual,
            min_eig,
            passed: residual <= tol && min_eig >= -tol,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rvec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)))
    }

    fn rsym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_iterator(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)));
        (&a + a.transpose()) * 0.5
    }

    pub(crate) fn random_model(n: usize, rng: &mut ChaCha8Rng, general_w: bool) -> CqrPolynomial {
        let w = if general_w {
            let a = DMatrix::from_iterator(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)));
            &a * a.transpose() + DMatrix::identity(n, n) * 0.5
        } else {
            DMatrix::identity(n, n)
        };
        CqrPolynomial::new(
            rng.random_range(-1.0..1.0),
            rvec(n, rng),
            rsym(n, rng),
            rng.random_range(-3.0..3.0),
            rng.random_range(0.5..3.0),
            w,
        )
        .unwrap()
    }

    #[test]
    fn origin_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(3, &mut rng, false);
        let z = DVector::zeros(3);
        assert_eq!(m.eval(&z).unwrap(), m.f);
        assert_eq!(m.grad(&z).unwrap(), m.g);
        assert_eq!(m.b_matrix(&z).unwrap(), m.h);
        assert!(matches!(m.hess(&z), Err(CqrError::HessianAtOrigin)));
        let mut m0 = m.clone();
        m0.beta = 0.0;
        assert_eq!(m0.hess(&z).unwrap(), m0.h);
    }

    #[test]
    fn beta_zero_reduces_to_quadratic_plus_quartic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = random_model(3, &mut rng, false);
        m.beta = 0.0;
        let s = rvec(3, &mut rng);
        let r2 = s.norm_squared();
        let direct = m.f + m.g.dot(&s) + 0.5 * s.dot(&(&m.h * &s)) + m.sigma_c / 4.0 * r2 * r2;
        assert!((m.eval(&s).unwrap() - direct).abs() < 1e-14);
        let gd = &m.g + &m.h * &s + &s * (m.sigma_c * r2);
        assert!((m.grad(&s).unwrap() - gd).norm() < 1e-14);
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let he = &m.h + (DMatrix::identity(3, 3) + &e1 * e1.transpose() * 2.0) * m.sigma_c;
        assert!((m.hess(&e1).unwrap() - he).norm() < 1e-14);
    }

    /// With sigma_c removed and beta = 2 sigma_q, the cubic term is the
    /// cubic-regularization term `sigma_q/3 |s|^3`.
    #[test]
    fn cubic_regularization_limit() {
        fn eval_without_quartic(m: &CqrPolynomial, s: &DVector<f64>) -> f64 {
            let r = m.wnorm(s);
            m.f + m.g.dot(s) + 0.5 * s.dot(&(&m.h * s)) + m.beta / 6.0 * r.powi(3)
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = random_model(3, &mut rng, false);
        let sigma_q = 1.7;
        m.beta = 2.0 * sigma_q;
        let s = rvec(3, &mut rng);
        let arc = m.f + m.g.dot(&s) + 0.5 * s.dot(&(&m.h * &s)) + sigma_q / 3.0 * s.norm().powi(3);
        assert!((eval_without_quartic(&m, &s) - arc).abs() < 1e-13);
    }

    #[test]
    fn b_matrix_hand_formula() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -2.0]);
        let m = CqrPolynomial::identity_weight(0.0, DVector::zeros(2), h.clone(), 2.0, 1.0).unwrap();
        let s = DVector::from_vec(vec![0.6, 0.8]);
        let b = m.b_matrix(&s).unwrap();
        assert!((b - (h + DMatrix::identity(2, 2) * 2.0)).norm() < 1e-14);
    }

    #[test]
    fn b_matrix_with_general_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_model(3, &mut rng, true);
        let s = rvec(3, &mut rng);
        let r = (s.transpose() * &m.w * &s)[(0, 0)].sqrt();
        let expect = &m.h + &m.w * (m.beta / 2.0 * r) + &m.w * (m.sigma_c * r * r);
        assert!((m.b_matrix(&s).unwrap() - expect).norm() < 1e-13);
    }

    #[test]
    fn necessary_conditions_simple_cases() {
        let z = DVector::zeros(2);
        let m = CqrPolynomial::identity_weight(0.0, z.clone(), DMatrix::identity(2, 2), 1.0, 1.0).unwrap();
        assert!(m.verify_necessary(&z, 1e-12).unwrap().passed);

        // n = 1, g = -1, H = 0, beta = 0, sigma_c = 1: s = 1 solves lambda^3 = 1.
        let m = CqrPolynomial::identity_weight(
            0.0,
            DVector::from_element(1, -1.0),
            DMatrix::zeros(1, 1),
            0.0,
            1.0,
        )
        .unwrap();
        let rep = m.verify_necessary(&DVector::from_element(1, 1.0), 1e-12).unwrap();
        assert_eq!(rep.residual, 0.0);
        assert_eq!(rep.min_eig, 1.0);
        assert!(rep.passed);
    }

    #[test]
    fn rejects_invalid_models() {
        let g = DVector::zeros(2);
        let h = DMatrix::identity(2, 2);
        assert!(CqrPolynomial::identity_weight(0.0, g.clone(), h.clone(), 1.0, 0.0).is_err());
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        assert!(matches!(
            CqrPolynomial::new(0.0, g, h, 1.0, 1.0, w),
            Err(CqrError::WeightNotPd)
        ));
    }

    fn check_derivatives(m: &CqrPolynomial, s: &DVector<f64>) -> (f64, f64) {
        let n = m.n();
        let h = f64::EPSILON.cbrt() * (1.0 + s.norm());
        let g = m.grad(s).unwrap();
        let hm = m.hess(s).unwrap();
        let mut fdg = DVector::zeros(n);
        let mut fdh = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = h;
            fdg[i] = (m.eval(&(s + &e)).unwrap() - m.eval(&(s - &e)).unwrap()) / (2.0 * h);
            let col = (m.grad(&(s + &e)).unwrap() - m.grad(&(s - &e)).unwrap()) / (2.0 * h);
            fdh.set_column(i, &col);
        }
        ((fdg - &g).norm() / (1.0 + g.norm()), (fdh - &hm).norm() / (1.0 + hm.norm()))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn derivatives_match_finite_differences_identity_weight(seed in 0u64..100_000, n in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(n, &mut rng, false);
            let s = rvec(n, &mut rng) + DVector::from_element(n, 0.1);
            let (eg, eh) = check_derivatives(&m, &s);
            prop_assert!(eg <= 1e-6, "gradient error {}", eg);
            prop_assert!(eh <= 1e-5, "hessian error {}", eh);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn derivatives_match_finite_differences_general_weight(seed in 0u64..100_000, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(n, &mut rng, true);
            let s = rvec(n, &mut rng) + DVector::from_element(n, 0.1);
            let (eg, eh) = check_derivatives(&m, &s);
            prop_assert!(eg <= 1e-6, "gradient error {}", eg);
            prop_assert!(eh <= 1e-5, "hessian error {}", eh);
        }
    }
}
