//! Dense kernels for the small projected matrices: Hessenberg reduction,
//! complex Schur form and eigenvectors, one-sided Jacobi SVD, LU
//! factorizations (dense and banded) and dense matrix functions `f(H)`.

mod eig;
mod hessenberg;
mod lu;
mod matfun;
mod svd;

use std::ops::{Index, IndexMut};

pub use eig::{eig_dense, eigenvalues, schur, EigDecomp, Schur};
pub use hessenberg::hessenberg_reduce;
pub use lu::{lu_factor, BandedLu, DenseLu, Factorization};
pub use matfun::{dense_matfun, expm};
pub use svd::{sigma_min_shifted, svd_small, Svd};

use crate::{Error, Result, C64};

pub(crate) const EPS: f64 = f64::EPSILON;

#[inline]
pub(crate) fn c64(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Column-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c64(1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Build from row-major nested data; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| c64(rows[i][j]))
    }

    pub fn from_columns(cols: &[Vec<C64>]) -> Result<Self> {
        let c = cols.len();
        let r = cols.first().map_or(0, |col| col.len());
        if cols.iter().any(|col| col.len() != r) {
            return Err(Error::Dimension("ragged columns".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: cols.concat(),
        })
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_vectors(&self) -> Vec<Vec<C64>> {
        (0..self.cols).map(|j| self.col(j).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub(crate) fn check_finite(&self, op: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let oc = other.col(j);
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, b) in oc.iter().enumerate() {
                if *b == C64::new(0.0, 0.0) {
                    continue;
                }
                let ac = &self.data[k * self.rows..(k + 1) * self.rows];
                for (d, a) in dst.iter_mut().zip(ac) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        let mut y = vec![C64::new(0.0, 0.0); self.rows];
        for (j, xj) in x.iter().enumerate() {
            for (yi, a) in y.iter_mut().zip(self.col(j)) {
                *yi += a * xj;
            }
        }
        y
    }

    /// `self^* x`
    pub fn matvec_adjoint(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, x.len(), "matvec dimension mismatch");
        (0..self.cols)
            .map(|j| crate::vecops::dot(self.col(j), x))
            .collect()
    }

    pub fn scaled(&self, alpha: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * alpha).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// `self - shift * I`
    pub fn shifted(&self, shift: C64) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] -= shift;
        }
        m
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| self.col(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Copy of the block `rows r0..r1`, `cols c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Self::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Self) {
        for j in 0..b.cols {
            for i in 0..b.rows {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_and_adjoint() {
        let a = DenseMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = DenseMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let ab = a.matmul(&b);
        assert_eq!(ab, DenseMatrix::from_real_rows(&[&[2.0, 1.0], &[4.0, 3.0]]));
        let z = DenseMatrix::from_rows(&[vec![C64::new(1.0, 2.0)]]).unwrap();
        assert_eq!(z.adjoint()[(0, 0)], C64::new(1.0, -2.0));
        assert_eq!(a.matvec_adjoint(&[c64(1.0), c64(0.0)]), vec![c64(1.0), c64(2.0)]);
    }
}
