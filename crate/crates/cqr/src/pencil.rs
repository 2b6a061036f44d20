//! Generalized symmetric eigenproblem `H U = W U D` with `U^T W U = I`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, CqrError, Result};

#[derive(Debug, Clone)]
pub struct PencilDecomposition {
    /// Ascending generalized eigenvalues.
    pub lambdas: DVector<f64>,
    /// W-orthonormal eigenvectors as columns.
    pub u: DMatrix<f64>,
}

fn is_identity(w: &DMatrix<f64>) -> bool {
    let n = w.nrows();
    (0..n).all(|i| (0..n).all(|j| w[(i, j)] == if i == j { 1.0 } else { 0.0 }))
}

impl PencilDecomposition {
    pub fn new(h: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<Self> {
        let n = h.nrows();
        check_dim(n, h.ncols())?;
        check_dim(n, w.nrows())?;
        check_dim(n, w.ncols())?;
        if is_identity(w) {
            let sym = (h + h.transpose()) * 0.5;
            let (lambdas, u) = sorted(SymmetricEigen::new(sym));
            return Ok(Self { lambdas, u });
        }
        let chol = w.clone().cholesky().ok_or(CqrError::WeightNotPd)?;
        let l = chol.l();
        // C = L^{-1} H L^{-T}
        let x = l.solve_lower_triangular(h).ok_or(CqrError::WeightNotPd)?;
        let c = l
            .solve_lower_triangular(&x.transpose())
            .ok_or(CqrError::WeightNotPd)?;
        let c = (&c + c.transpose()) * 0.5;
        let (lambdas, v) = sorted(SymmetricEigen::new(c));
        let u = l
            .transpose()
            .solve_upper_triangular(&v)
            .ok_or(CqrError::WeightNotPd)?;
        Ok(Self { lambdas, u })
    }

    pub fn lambda_1(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn u_1(&self) -> DVector<f64> {
        self.u.column(0).into_owned()
    }

    /// `gamma = U^T g`.
    pub fn gamma(&self, g: &DVector<f64>) -> DVector<f64> {
        self.u.tr_mul(g)
    }

    /// Largest absolute generalized eigenvalue.
    pub fn spectral_radius(&self) -> f64 {
        self.lambdas.iter().fold(0.0_f64, |m, l| m.max(l.abs()))
    }

    /// Size of the leading eigenvalue cluster: eigenvalues within a relative
    /// tolerance of `lambda_1`.
    pub fn leading_cluster(&self) -> usize {
        let tol = 1e-10 * (1.0 + self.spectral_radius());
        self.lambdas.iter().take_while(|&&l| l - self.lambda_1() <= tol).count()
    }
}

fn sorted(eig: SymmetricEigen<f64, nalgebra::Dyn>) -> (DVector<f64>, DMatrix<f64>) {
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambdas = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut u = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        u.set_column(c, &eig.eigenvectors.column(i));
    }
    (lambdas, u)
}
