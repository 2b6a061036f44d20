use std::fmt;

use serde::{Deserialize, Serialize};

/// Branch of the inverse of `lambda = beta/2 r + sigma_c r^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trench {
    KPlus,
    KMinus,
}

impl Trench {
    pub fn other(self) -> Self {
        match self {
            Trench::KPlus => Trench::KMinus,
            Trench::KMinus => Trench::KPlus,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Trench::KPlus => 1.0,
            Trench::KMinus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Trench::KPlus => "k_plus",
            Trench::KMinus => "k_minus",
        }
    }
}

impl fmt::Display for Trench {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `k_pm(lambda) = (-beta +- sqrt(beta^2 + 16 lambda sigma_c)) / (4 sigma_c)`.
///
/// `None` when the discriminant is negative or the value is negative.
pub fn k_trench(lambda: f64, trench: Trench, beta: f64, sigma_c: f64) -> Option<f64> {
    let mut disc = beta * beta + 16.0 * lambda * sigma_c;
    if disc < 0.0 {
        if disc < -1e-13 * beta * beta {
            return None;
        }
        disc = 0.0;
    }
    let k = (-beta + trench.sign() * disc.sqrt()) / (4.0 * sigma_c);
    if k < 0.0 {
        // Rounding at the branch ends can produce tiny negatives.
        if k > -1e-15 * (1.0 + beta.abs() / sigma_c) {
            return Some(0.0);
        }
        return None;
    }
    Some(k)
}

/// Derivative of `1 / k_pm(lambda)`:
/// `-+ 32 sigma_c^2 / ((-beta +- R)^2 R)` with `R = sqrt(beta^2 + 16 lambda sigma_c)`.
pub fn inv_k_derivative(lambda: f64, trench: Trench, beta: f64, sigma_c: f64) -> f64 {
    let r = (beta * beta + 16.0 * lambda * sigma_c).max(0.0).sqrt();
    let sgn = trench.sign();
    let den = -beta + sgn * r;
    -sgn * 32.0 * sigma_c * sigma_c / (den * den * r)
}

/// Intersection of the two trenches: `(lambda_A, s_A)`.
pub fn trench_apex(beta: f64, sigma_c: f64) -> (f64, f64) {
    (-beta * beta / (16.0 * sigma_c), -beta / (4.0 * sigma_c))
}

/// Target norm as a function of the multiplier, with the derivative of its
/// reciprocal.
pub(crate) trait NormTarget {
    fn k(&self, lambda: f64) -> Option<f64>;
    fn inv_k_derivative(&self, lambda: f64) -> f64;
}

pub(crate) struct CqrTarget {
    pub trench: Trench,
    pub beta: f64,
    pub sigma_c: f64,
}

impl NormTarget for CqrTarget {
    fn k(&self, lambda: f64) -> Option<f64> {
        k_trench(lambda, self.trench, self.beta, self.sigma_c)
    }

    fn inv_k_derivative(&self, lambda: f64) -> f64 {
        inv_k_derivative(lambda, self.trench, self.beta, self.sigma_c)
    }
}

/// `|s| = lambda / sigma_q`, the cubic-regularization relation.
pub(crate) struct CubicTarget {
    pub sigma_q: f64,
}

impl NormTarget for CubicTarget {
    fn k(&self, lambda: f64) -> Option<f64> {
        (lambda >= 0.0).then(|| lambda / self.sigma_q)
    }

    fn inv_k_derivative(&self, lambda: f64) -> f64 {
        -self.sigma_q / (lambda * lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(k_trench(4.0, Trench::KPlus, 0.0, 1.0), Some(2.0));
        assert_eq!(k_trench(-1.0, Trench::KPlus, -4.0, 1.0), Some(1.0));
        assert_eq!(k_trench(-1.0, Trench::KMinus, -4.0, 1.0), Some(1.0));
        let k = k_trench(10.0, Trench::KPlus, 20.0, 10.0).unwrap();
        assert!((k - (-20.0 + 2000f64.sqrt()) / 40.0).abs() < 1e-15);
        assert!((k - 0.6180339887).abs() < 1e-9);
        assert_eq!(k_trench(-2.0, Trench::KPlus, -4.0, 1.0), None);
        // k_minus is negative for beta > 0.
        assert_eq!(k_trench(1.0, Trench::KMinus, 2.0, 1.0), None);
        assert_eq!(trench_apex(-4.0, 1.0), (-1.0, 1.0));
    }

    #[test]
    fn k_inverts_the_multiplier_relation() {
        for (beta, sigma, lambda) in [(3.0, 2.0, 5.0), (-3.0, 2.0, 1.0), (-6.0, 1.5, -1.0)] {
            for t in [Trench::KPlus, Trench::KMinus] {
                if let Some(r) = k_trench(lambda, t, beta, sigma) {
                    assert!((beta / 2.0 * r + sigma * r * r - lambda).abs() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn inverse_derivative_matches_finite_difference(
            beta in -20.0f64..20.0, sigma in 0.1f64..20.0, off in 0.05f64..10.0, minus in any::<bool>()
        ) {
            let (la, _) = trench_apex(beta, sigma);
            let trench = if minus { Trench::KMinus } else { Trench::KPlus };
            let lambda = if minus {
                prop_assume!(beta < -0.5);
                // interior of [lambda_A, 0]
                la * (off / 10.05).clamp(0.05, 0.95)
            } else {
                la.max(0.0) + off
            };
            let f = |l: f64| 1.0 / k_trench(l, trench, beta, sigma).unwrap();
            // Keep the stencil well inside the branch; 1/k_minus blows up at 0.
            let h = if minus { 1e-5 * lambda.abs().min(lambda - la) } else { 1e-6 * (1.0 + lambda.abs()) };
            let fd = (f(lambda + h) - f(lambda - h)) / (2.0 * h);
            let exact = inv_k_derivative(lambda, trench, beta, sigma);
            prop_assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()), "{} vs {}", fd, exact);
        }

        #[test]
        fn k_plus_is_increasing(beta in -20.0f64..20.0, sigma in 0.1f64..20.0, a in 0.0f64..5.0, b in 0.01f64..5.0) {
            let (la, _) = trench_apex(beta, sigma);
            let lo = if beta > 0.0 { 0.0 } else { la };
            let k1 = k_trench(lo + a, Trench::KPlus, beta, sigma).unwrap();
            let k2 = k_trench(lo + a + b, Trench::KPlus, beta, sigma).unwrap();
            prop_assert!(k2 > k1);
        }

        #[test]
        fn trenches_meet_at_apex(beta in -20.0f64..-0.01, sigma in 0.1f64..20.0) {
            let (la, sa) = trench_apex(beta, sigma);
            let kp = k_trench(la, Trench::KPlus, beta, sigma).unwrap();
            let km = k_trench(la, Trench::KMinus, beta, sigma).unwrap();
            // The discriminant at the apex is a rounding residue of size
            // eps*beta^2, so agreement is limited to about sqrt(eps).
            prop_assert!((kp - sa).abs() <= 1e-7 * sa);
            prop_assert!((km - sa).abs() <= 1e-7 * sa);
        }
    }
}
