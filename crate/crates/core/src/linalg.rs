//! Restricted least-squares machinery shared by the solvers and certificates.
//!
//! Every application of `(A_I^T A_I)^{-1}` goes through a Cholesky solve; no
//! inverse is ever formed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::ensemble::SensingMatrix;
use crate::error::{Error, Result};

/// Relative pivot floor below which a Gram matrix is declared singular.
const PIVOT_FLOOR: f64 = 1e-13;

/// `A_I` and the Cholesky factor of `A_I^T A_I` for a fixed column subset.
#[derive(Debug, Clone)]
pub struct SupportSystem {
    columns: Vec<usize>,
    a_sub: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl SupportSystem {
    pub fn new(a: &SensingMatrix, columns: &[usize]) -> Result<Self> {
        let a_sub = a.select_columns(columns);
        Self::from_submatrix(columns.to_vec(), a_sub)
    }

    fn from_submatrix(columns: Vec<usize>, a_sub: DMatrix<f64>) -> Result<Self> {
        let k = columns.len();
        if k == 0 {
            return Ok(Self { columns, a_sub, chol: None });
        }
        if k > a_sub.nrows() {
            return Err(Error::RankDeficient { columns: k });
        }
        let gram = a_sub.tr_mul(&a_sub);
        let max_diag = gram.diagonal().max();
        let chol = Cholesky::new(gram).ok_or(Error::RankDeficient { columns: k })?;
        let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, &d| m.min(d * d));
        if !(min_pivot > PIVOT_FLOOR * max_diag) {
            return Err(Error::RankDeficient { columns: k });
        }
        Ok(Self { columns, a_sub, chol: Some(chol) })
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn submatrix(&self) -> &DMatrix<f64> {
        &self.a_sub
    }

    /// `(A_I^T A_I)^{-1} b`.
    pub fn solve_gram(&self, b: &DVector<f64>) -> DVector<f64> {
        match &self.chol {
            Some(c) => c.solve(b),
            None => DVector::zeros(0),
        }
    }

    /// `A_I^T v`.
    pub fn restrict(&self, v: &DVector<f64>) -> DVector<f64> {
        self.a_sub.tr_mul(v)
    }

    /// `A_I z`.
    pub fn expand(&self, z: &DVector<f64>) -> DVector<f64> {
        if self.k() == 0 {
            return DVector::zeros(self.a_sub.nrows());
        }
        &self.a_sub * z
    }

    /// `A_I^+ w = (A_I^T A_I)^{-1} A_I^T w`.
    pub fn pinv_apply(&self, w: &DVector<f64>) -> DVector<f64> {
        self.solve_gram(&self.restrict(w))
    }

    /// `P_{V_I^⊥} w = w - A_I (A_I^+ w)`.
    pub fn project_orth(&self, w: &DVector<f64>) -> DVector<f64> {
        w - self.expand(&self.pinv_apply(w))
    }

    /// `A_I (A_I^T A_I)^{-1} s`.
    pub fn d_vector(&self, signs: &DVector<f64>) -> DVector<f64> {
        self.expand(&self.solve_gram(signs))
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.a_sub.tr_mul(&self.a_sub)
    }
}

/// Lower-triangular Cholesky factor of a growing and shrinking Gram matrix,
/// maintained by rank-one updates as columns enter and leave.
#[derive(Debug, Clone, Default)]
pub struct UpdatableCholesky {
    // row i holds L[i][0..=i]
    rows: Vec<Vec<f64>>,
}

impl UpdatableCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Appends a column whose Gram cross terms with the current columns are
    /// `cross` and whose squared norm is `diag`. Fails, leaving the factor
    /// untouched, when the new pivot is numerically zero.
    pub fn push(&mut self, cross: &[f64], diag: f64) -> std::result::Result<(), f64> {
        debug_assert_eq!(cross.len(), self.dim());
        let l = self.forward(cross);
        let pivot_sq = diag - l.iter().map(|v| v * v).sum::<f64>();
        if !(pivot_sq > PIVOT_FLOOR * diag.max(f64::MIN_POSITIVE)) {
            return Err(pivot_sq);
        }
        let mut row = l;
        row.push(pivot_sq.sqrt());
        self.rows.push(row);
        Ok(())
    }

    /// Drops column `q` and restores triangularity of the trailing block with
    /// a rank-one update.
    pub fn remove(&mut self, q: usize) {
        let m = self.dim();
        assert!(q < m);
        let mut v: Vec<f64> = (q + 1..m).map(|i| self.rows[i][q]).collect();
        self.rows.remove(q);
        for row in self.rows.iter_mut().skip(q) {
            row.remove(q);
        }
        // trailing block occupies rows/cols q.. of the new factor
        let size = m - 1;
        for j in q..size {
            let vj = v[j - q];
            let ljj = self.rows[j][j];
            let r = ljj.hypot(vj);
            let c = r / ljj;
            let s = vj / ljj;
            self.rows[j][j] = r;
            for i in j + 1..size {
                let lij = (self.rows[i][j] + s * v[i - q]) / c;
                v[i - q] = c * v[i - q] - s * lij;
                self.rows[i][j] = lij;
            }
        }
    }

    /// Solves `L z = b`.
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let s: f64 = row[..i].iter().zip(&z).map(|(l, zj)| l * zj).sum();
            z.push((b[i] - s) / row[i]);
        }
        z
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.forward(b);
        let m = self.dim();
        for i in (0..m).rev() {
            let mut s = x[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                s -= self.rows[j][i] * xj;
            }
            x[i] = s / self.rows[i][i];
        }
        x
    }

    /// `(max L_ii / min L_ii)^2`, a cheap lower estimate of the Gram condition number.
    pub fn condition_estimate(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        let (lo, hi) =
            self.rows.iter().enumerate().fold((f64::INFINITY, 0.0f64), |(lo, hi), (i, r)| (lo.min(r[i]), hi.max(r[i])));
        (hi / lo).powi(2)
    }

    /// Rebuilds the factor from scratch.
    pub fn refactor(gram: &DMatrix<f64>) -> Option<Self> {
        let mut fresh = Self::new();
        for j in 0..gram.nrows() {
            let cross: Vec<f64> = (0..j).map(|i| gram[(j, i)]).collect();
            fresh.push(&cross, gram[(j, j)]).ok()?;
        }
        Some(fresh)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |i, j| if j <= i { self.rows[i][j] } else { 0.0 })
    }
}
