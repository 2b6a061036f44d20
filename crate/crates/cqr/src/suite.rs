//! Seeded generators for the benchmark problem families.
//!
//! Streams come from ChaCha8 seeded with `seed`; normals are drawn with the
//! ziggurat sampler of `rand_distr::StandardNormal`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ar3::Ar3Problem;
use crate::error::{CqrError, Result};
use crate::tensor::SymTensor3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `g = a randn`, `H = b symm(randn)`, `T = c symm(randn)`.
    Random,
    /// `H = symm(30 (randn + n I))` with a small tensor (`c = 1`).
    Convex,
    /// Same Hessian as `Convex` with a large tensor (`c = 80`).
    LocallyConvex,
    /// Diagonal Hessian with entries in `[-1e-10, 1e10]` spread log-uniformly.
    IllConditionedDiag,
    /// The random family with `c = 300`.
    LargeTensor,
    /// `g = -a rand`, `H = b symm(randn)`, `T = -c symm(rand)`.
    DirectionalNegative,
    /// Diagonal tensor with entries uniform in `[0, c]`.
    DiagonalTensor,
    /// First entries of `g`, `H`, `T` set to `-scale`, the rest normal with
    /// standard deviation `noise`.
    BadlyScaled,
    /// `BadlyScaled` with every other entry zero.
    SingleEntry,
    /// `m3(s) = 3s - 50s^2 - 10s^3 + 3s^4`.
    Univariate,
    /// Diagonal `g`, `H` and `T` with normal entries.
    SeparableDiag,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Random,
        Family::Convex,
        Family::LocallyConvex,
        Family::IllConditionedDiag,
        Family::LargeTensor,
        Family::DirectionalNegative,
        Family::DiagonalTensor,
        Family::BadlyScaled,
        Family::SingleEntry,
        Family::Univariate,
        Family::SeparableDiag,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Random => "random",
            Family::Convex => "convex",
            Family::LocallyConvex => "locally_convex",
            Family::IllConditionedDiag => "ill_conditioned_diag",
            Family::LargeTensor => "large_tensor",
            Family::DirectionalNegative => "directional_negative",
            Family::DiagonalTensor => "diagonal_tensor",
            Family::BadlyScaled => "badly_scaled",
            Family::SingleEntry => "single_entry",
            Family::Univariate => "univariate",
            Family::SeparableDiag => "separable_diag",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = CqrError;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| CqrError::InvalidParameter(format!("unknown family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sigma: f64,
    pub scale: f64,
    pub noise: f64,
}

impl SuiteSpec {
    /// Family defaults for the scale parameters.
    pub fn preset(family: Family, n: usize, seed: u64) -> Self {
        let base = Self { family, n, seed, a: 80.0, b: 80.0, c: 80.0, sigma: 80.0, scale: 1.0, noise: 0.0 };
        match family {
            Family::Random => Self { sigma: 5.0, ..base },
            Family::Convex => Self { c: 1.0, ..base },
            Family::LocallyConvex | Family::IllConditionedDiag | Family::SeparableDiag => base,
            Family::LargeTensor => Self { c: 300.0, sigma: 5.0, ..base },
            Family::DirectionalNegative => Self { b: 0.1, ..base },
            Family::DiagonalTensor => Self { c: 40.0, ..base },
            Family::BadlyScaled => Self { sigma: 50.0, scale: 1e5, noise: 0.1f64.sqrt(), ..base },
            Family::SingleEntry => Self { sigma: 50.0, scale: 1e5, noise: 0.0, ..base },
            Family::Univariate => Self { n: 1, sigma: 12.0, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CqrError::InvalidParameter("n must be at least 1".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(CqrError::InvalidParameter("sigma must be positive".into()));
        }
        if matches!(self.family, Family::BadlyScaled | Family::SingleEntry) && !(self.scale > 0.0) {
            return Err(CqrError::InvalidParameter("scale must be positive".into()));
        }
        if self.family == Family::Univariate && self.n != 1 {
            return Err(CqrError::InvalidParameter("univariate has n = 1".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Ar3Problem> {
        self.validate()?;
        match self.family {
            Family::Random | Family::LargeTensor => random_problem(self),
            Family::BadlyScaled | Family::SingleEntry => badly_scaled_problem(self),
            _ => structured_problem(self),
        }
    }
}

fn normal_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `(A + A^T) / 2` of a standard normal matrix.
fn symm_normal_matrix(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

fn symm_tensor(n: usize, rng: &mut ChaCha8Rng, mut draw: impl FnMut(&mut ChaCha8Rng) -> f64) -> Result<SymTensor3> {
    let raw: Vec<f64> = (0..n * n * n).map(|_| draw(rng)).collect();
    SymTensor3::symmetrize_raw(n, &raw)
}

fn normal_tensor(n: usize, rng: &mut ChaCha8Rng) -> Result<SymTensor3> {
    symm_tensor(n, rng, |r| r.sample(StandardNormal))
}

pub fn random_problem(spec: &SuiteSpec) -> Result<Ar3Problem> {
    if !matches!(spec.family, Family::Random | Family::LargeTensor) {
        return Err(CqrError::InvalidParameter(format!("{} is not a random family", spec.family)));
    }
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let g = normal_vec(n, &mut rng) * spec.a;
    let h = symm_normal_matrix(n, &mut rng) * spec.b;
    let mut t = normal_tensor(n, &mut rng)?;
    t.scale_mut(spec.c);
    Ar3Problem::new(0.0, g, h, t, spec.sigma)
}

pub fn structured_problem(spec: &SuiteSpec) -> Result<Ar3Problem> {
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (g, h, t) = match spec.family {
        Family::Convex | Family::LocallyConvex => {
            let g = normal_vec(n, &mut rng) * spec.a;
            let shifted = symm_normal_matrix(n, &mut rng) + DMatrix::identity(n, n) * n as f64;
            let mut t = normal_tensor(n, &mut rng)?;
            t.scale_mut(spec.c);
            (g, shifted * 30.0, t)
        }
        Family::IllConditionedDiag => {
            let g = normal_vec(n, &mut rng) * spec.a;
            // Entries stay inside [-1e-10, 1e10]: positive magnitudes spread
            // log-uniformly, with both ends of the range pinned.
            let mut diag = DVector::from_fn(n, |_, _| 10f64.powf(rng.random_range(-10.0..=10.0)));
            diag[0] = -1e-10;
            if n > 1 {
                diag[1] = 1e10;
            }
            let mut t = normal_tensor(n, &mut rng)?;
            t.scale_mut(spec.c);
            (g, DMatrix::from_diagonal(&diag), t)
        }
        Family::DirectionalNegative => {
            let g = DVector::from_fn(n, |_, _| -spec.a * rng.random::<f64>());
            let h = symm_normal_matrix(n, &mut rng) * spec.b;
            let mut t = symm_tensor(n, &mut rng, |r| r.random::<f64>())?;
            t.scale_mut(-spec.c);
            (g, h, t)
        }
        Family::DiagonalTensor => {
            let g = normal_vec(n, &mut rng) * spec.a;
            let h = symm_normal_matrix(n, &mut rng) * spec.b;
            let mut t = SymTensor3::zeros(n);
            for j in 0..n {
                t.set(j, j, j, spec.c * rng.random::<f64>())?;
            }
            (g, h, t)
        }
        Family::SeparableDiag => {
            let g = normal_vec(n, &mut rng) * spec.a;
            let h = DMatrix::from_diagonal(&(normal_vec(n, &mut rng) * spec.b));
            let mut t = SymTensor3::zeros(n);
            for j in 0..n {
                t.set(j, j, j, spec.c * rng.sample::<f64, _>(StandardNormal))?;
            }
            (g, h, t)
        }
        Family::Univariate => return Ar3Problem::univariate(0.0, 3.0, -100.0, -60.0, spec.sigma),
        other => {
            return Err(CqrError::InvalidParameter(format!("{other} is not a structured family")));
        }
    };
    Ar3Problem::new(0.0, g, h, t, spec.sigma)
}

pub fn badly_scaled_problem(spec: &SuiteSpec) -> Result<Ar3Problem> {
    if !(spec.scale > 0.0) {
        return Err(CqrError::InvalidParameter("scale must be positive".into()));
    }
    let n = spec.n;
    let noise = if spec.family == Family::SingleEntry { 0.0 } else { spec.noise };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut g = normal_vec(n, &mut rng) * noise;
    let mut h = symm_normal_matrix(n, &mut rng) * noise;
    let mut t = normal_tensor(n, &mut rng)?;
    t.scale_mut(noise);
    g[0] = -spec.scale;
    h[(0, 0)] = -spec.scale;
    t.set(0, 0, 0, -spec.scale)?;
    Ar3Problem::new(0.0, g, h, t, spec.sigma)
}
