//! Supersymmetric third-order tensors.
//!
//! Only the entries `T[i,j,k]` with `i <= j <= k` are stored. Contractions
//! expand each stored entry over its distinct index permutations, so callers
//! never see the full `n^3` array.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, CqrError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor3 {
    n: usize,
    data: Vec<f64>,
}

#[inline]
fn offset(a: usize, b: usize, c: usize) -> usize {
    c * (c + 1) * (c + 2) / 6 + b * (b + 1) / 2 + a
}

#[inline]
fn sort3(i: usize, j: usize, k: usize) -> (usize, usize, usize) {
    let mut v = [i, j, k];
    v.sort_unstable();
    (v[0], v[1], v[2])
}

/// Distinct orderings of a sorted index triple.
#[inline]
fn perms(a: usize, b: usize, c: usize) -> ([(usize, usize, usize); 6], usize) {
    let mut out = [(a, b, c); 6];
    if a == b && b == c {
        (out, 1)
    } else if a == b {
        out[1] = (a, c, a);
        out[2] = (c, a, a);
        (out, 3)
    } else if b == c {
        out[1] = (b, a, b);
        out[2] = (b, b, a);
        (out, 3)
    } else {
        out[1] = (a, c, b);
        out[2] = (b, a, c);
        out[3] = (b, c, a);
        out[4] = (c, a, b);
        out[5] = (c, b, a);
        (out, 6)
    }
}

impl SymTensor3 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * (n + 1) * (n + 2) / 6],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (unique) entries.
    pub fn unique_len(&self) -> usize {
        self.data.len()
    }

    fn check_index(&self, i: usize, j: usize, k: usize) -> Result<()> {
        if i >= self.n || j >= self.n || k >= self.n {
            return Err(CqrError::TensorIndex { i, j, k, n: self.n });
        }
        Ok(())
    }

    /// Entry `T[i,j,k]` (0-based, any index order).
    pub fn get(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        self.check_index(i, j, k)?;
        let (a, b, c) = sort3(i, j, k);
        Ok(self.data[offset(a, b, c)])
    }

    /// Sets `T[i,j,k]` and all of its permutations.
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) -> Result<()> {
        self.check_index(i, j, k)?;
        let (a, b, c) = sort3(i, j, k);
        self.data[offset(a, b, c)] = value;
        Ok(())
    }

    /// Builds a tensor by averaging a raw (not necessarily symmetric) `n^3`
    /// array, stored with `raw[i*n*n + j*n + k]`, over all six index
    /// permutations.
    pub fn symmetrize_raw(n: usize, raw: &[f64]) -> Result<Self> {
        check_dim(n * n * n, raw.len())?;
        let mut t = Self::zeros(n);
        let at = |i: usize, j: usize, k: usize| raw[i * n * n + j * n + k];
        for c in 0..n {
            for b in 0..=c {
                for a in 0..=b {
                    let sum = at(a, b, c)
                        + at(a, c, b)
                        + at(b, a, c)
                        + at(b, c, a)
                        + at(c, a, b)
                        + at(c, b, a);
                    t.data[offset(a, b, c)] = sum / 6.0;
                }
            }
        }
        Ok(t)
    }

    /// Iterates over stored entries as `(i, j, k, value)` with `i <= j <= k`.
    pub fn iter_unique(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |c| {
            (0..=c).flat_map(move |b| (0..=b).map(move |a| (a, b, c, self.data[offset(a, b, c)])))
        })
    }

    /// `sum_{i,j,k} T[i,j,k] u_i v_j w_k`.
    pub fn apply3(&self, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        check_dim(self.n, u.len())?;
        check_dim(self.n, v.len())?;
        check_dim(self.n, w.len())?;
        let mut acc = 0.0;
        for (a, b, c, t) in self.iter_unique() {
            if t == 0.0 {
                continue;
            }
            let (ps, m) = perms(a, b, c);
            let mut s = 0.0;
            for &(p, q, r) in &ps[..m] {
                s += u[p] * v[q] * w[r];
            }
            acc += t * s;
        }
        Ok(acc)
    }

    /// `T[s]^3`, faster than `apply3(s, s, s)`.
    pub fn cubic(&self, s: &DVector<f64>) -> Result<f64> {
        check_dim(self.n, s.len())?;
        let mut acc = 0.0;
        for (a, b, c, t) in self.iter_unique() {
            if t == 0.0 {
                continue;
            }
            let (_, m) = perms(a, b, c);
            acc += t * m as f64 * s[a] * s[b] * s[c];
        }
        Ok(acc)
    }

    /// Vector `(T[s]^2)_i = sum_{j,k} T[i,j,k] s_j s_k`.
    pub fn apply2(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.n, s.len())?;
        let mut out = DVector::zeros(self.n);
        for (a, b, c, t) in self.iter_unique() {
            if t == 0.0 {
                continue;
            }
            let (ps, m) = perms(a, b, c);
            for &(p, q, r) in &ps[..m] {
                out[p] += t * s[q] * s[r];
            }
        }
        Ok(out)
    }

    /// Matrix `(T[s])_{ij} = sum_k T[i,j,k] s_k`.
    pub fn apply1(&self, s: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.n, s.len())?;
        let mut out = DMatrix::zeros(self.n, self.n);
        for (a, b, c, t) in self.iter_unique() {
            if t == 0.0 {
                continue;
            }
            let (ps, m) = perms(a, b, c);
            for &(p, q, r) in &ps[..m] {
                out[(p, q)] += t * s[r];
            }
        }
        Ok(out)
    }

    /// Diagonal entries `T[j,j,j]`.
    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(self.n, (0..self.n).map(|j| self.data[offset(j, j, j)]))
    }

    /// `sqrt(sum_i max_{j,k} T[i,j,k]^2)`, the computable stand-in for the
    /// operator norm used by the first beta rule.
    ///
    /// This is not an upper bound on `max_{|u|=1} |T[u]^3|` in general; the
    /// all-ones tensor in two dimensions is a counterexample. It is within a
    /// factor `n` of the norm from below.
    pub fn lambda0_surrogate(&self) -> f64 {
        let mut row_max = vec![0.0_f64; self.n];
        for (a, b, c, t) in self.iter_unique() {
            let t2 = t * t;
            for idx in [a, b, c] {
                if t2 > row_max[idx] {
                    row_max[idx] = t2;
                }
            }
        }
        row_max.iter().sum::<f64>().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &t| m.max(t.abs()))
    }

    pub fn scale_mut(&mut self, factor: f64) {
        for t in &mut self.data {
            *t *= factor;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&t| t == 0.0)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn dense(t: &SymTensor3) -> Vec<f64> {
        let n = t.n();
        let mut d = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    d[i * n * n + j * n + k] = t.get(i, j, k).unwrap();
                }
            }
        }
        d
    }

    pub(crate) fn random_tensor(n: usize, rng: &mut ChaCha8Rng) -> SymTensor3 {
        let raw: Vec<f64> = (0..n * n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymTensor3::symmetrize_raw(n, &raw).unwrap()
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn one_dimensional_examples() {
        let mut t = SymTensor3::zeros(1);
        t.set(0, 0, 0, 6.0).unwrap();
        let s = DVector::from_vec(vec![2.0]);
        assert_eq!(t.apply3(&s, &s, &s).unwrap(), 48.0);
        assert_eq!(t.apply2(&s).unwrap()[0], 24.0);
        assert_eq!(t.apply1(&s).unwrap()[(0, 0)], 12.0);
        assert_eq!(t.lambda0_surrogate(), 6.0);
        assert_eq!(t.max_abs_entry(), 6.0);
    }

    #[test]
    fn single_off_diagonal_entry_counts_three_permutations() {
        let mut t = SymTensor3::zeros(2);
        t.set(0, 0, 1, 1.0).unwrap();
        let u = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(t.apply3(&u, &u, &u).unwrap(), 3.0);
        assert_eq!(t.cubic(&u).unwrap(), 3.0);
    }

    #[test]
    fn zero_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tensor(3, &mut rng);
        let z = DVector::zeros(3);
        let v = random_vec(3, &mut rng);
        assert_eq!(t.apply3(&z, &v, &v).unwrap(), 0.0);
        assert_eq!(t.apply2(&z).unwrap(), DVector::zeros(3));
        assert_eq!(t.apply1(&z).unwrap(), DMatrix::zeros(3, 3));
        let zt = SymTensor3::zeros(3);
        assert_eq!(zt.lambda0_surrogate(), 0.0);
        assert_eq!(zt.max_abs_entry(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let t = SymTensor3::zeros(3);
        let v = DVector::zeros(2);
        assert!(matches!(t.apply2(&v), Err(CqrError::Dimension { .. })));
        assert!(t.apply1(&v).is_err());
        assert!(t.cubic(&v).is_err());
        assert!(t.get(0, 3, 1).is_err());
    }

    #[test]
    fn contractions_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=5 {
            let t = random_tensor(n, &mut rng);
            let d = dense(&t);
            let (u, v, w) = (random_vec(n, &mut rng), random_vec(n, &mut rng), random_vec(n, &mut rng));
            let mut s3 = 0.0;
            let mut s2 = DVector::zeros(n);
            let mut s1 = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let x = d[i * n * n + j * n + k];
                        s3 += x * u[i] * v[j] * w[k];
                        s2[i] += x * u[j] * u[k];
                        s1[(i, j)] += x * u[k];
                    }
                }
            }
            assert!((t.apply3(&u, &v, &w).unwrap() - s3).abs() < 1e-12);
            assert!((t.apply2(&u).unwrap() - s2).norm() < 1e-12);
            let a1 = t.apply1(&u).unwrap();
            assert!((&a1 - s1).norm() < 1e-12);
            assert!((&a1 - a1.transpose()).norm() == 0.0);
            let dmax = d.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            assert_eq!(t.max_abs_entry(), dmax);
        }
    }

    #[test]
    fn symmetrize_raw_averages_permutations() {
        let n = 2;
        let mut raw = vec![0.0; 8];
        raw[1] = 6.0; // (0,0,1)
        let t = SymTensor3::symmetrize_raw(n, &raw).unwrap();
        assert_eq!(t.get(0, 0, 1).unwrap(), 2.0);
        assert_eq!(t.get(1, 0, 0).unwrap(), 2.0);
        assert_eq!(t.get(0, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn surrogate_matches_row_max_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_tensor(4, &mut rng);
        let d = dense(&t);
        let n = 4;
        let mut acc = 0.0;
        for i in 0..n {
            let mut m = 0.0_f64;
            for j in 0..n {
                for k in 0..n {
                    m = m.max(d[i * n * n + j * n + k].powi(2));
                }
            }
            acc += m;
        }
        assert!((t.lambda0_surrogate() - acc.sqrt()).abs() < 1e-14);
    }

    /// The row-max surrogate can fall below the operator norm: for the
    /// all-ones tensor with n = 2 it is sqrt(2) while `T[u]^3` reaches
    /// 2*sqrt(2) at u = (1, 1)/sqrt(2).
    #[test]
    fn surrogate_is_not_an_operator_norm_bound() {
        let mut t = SymTensor3::zeros(2);
        for (i, j, k) in [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)] {
            t.set(i, j, k, 1.0).unwrap();
        }
        let u = DVector::from_vec(vec![1.0, 1.0]) / 2f64.sqrt();
        let along = t.cubic(&u).unwrap();
        assert!((along - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((t.lambda0_surrogate() - 2f64.sqrt()).abs() < 1e-12);
        assert!(t.lambda0_surrogate() < along);
    }

    /// What does hold: |T[u]^3| <= n * surrogate for unit u.
    #[test]
    fn surrogate_bounds_sampled_norm_up_to_dimension_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let t = random_tensor(2, &mut rng);
            let mut best = 0.0_f64;
            for _ in 0..10_000 {
                let u = random_vec(2, &mut rng);
                let nu = u.norm();
                if nu == 0.0 {
                    continue;
                }
                let u = u / nu;
                best = best.max(t.cubic(&u).unwrap().abs());
            }
            assert!(2.0 * t.lambda0_surrogate() >= best);
        }
    }

    proptest! {
        #[test]
        fn apply3_is_permutation_invariant(seed in 0u64..10_000, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tensor(n, &mut rng);
            let (u, v, w) = (random_vec(n, &mut rng), random_vec(n, &mut rng), random_vec(n, &mut rng));
            let base = t.apply3(&u, &v, &w).unwrap();
            for val in [
                t.apply3(&u, &w, &v).unwrap(),
                t.apply3(&v, &u, &w).unwrap(),
                t.apply3(&v, &w, &u).unwrap(),
                t.apply3(&w, &u, &v).unwrap(),
                t.apply3(&w, &v, &u).unwrap(),
            ] {
                prop_assert!((val - base).abs() <= 1e-13 * (1.0 + base.abs()));
            }
        }

        #[test]
        fn contractions_compose(seed in 0u64..10_000, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tensor(n, &mut rng);
            let s = random_vec(n, &mut rng);
            let c3 = t.apply3(&s, &s, &s).unwrap();
            let c2 = s.dot(&t.apply2(&s).unwrap());
            let c1 = s.dot(&(t.apply1(&s).unwrap() * &s));
            let scale = 1.0 + c3.abs();
            prop_assert!((c3 - c2).abs() <= 1e-12 * scale);
            prop_assert!((c3 - c1).abs() <= 1e-12 * scale);
            prop_assert!((c3 - t.cubic(&s).unwrap()).abs() <= 1e-12 * scale);
        }

        #[test]
        fn apply3_is_trilinear(seed in 0u64..10_000, alpha in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tensor(3, &mut rng);
            let (u, v, w) = (random_vec(3, &mut rng), random_vec(3, &mut rng), random_vec(3, &mut rng));
            let lhs = t.apply3(&(&u * alpha), &v, &w).unwrap();
            let rhs = alpha * t.apply3(&u, &v, &w).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }
}
