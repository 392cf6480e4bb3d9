use std::sync::OnceLock;

use super::{LinearOperator, Structure};
use crate::densela::{lu_factor, BandedLu, DenseLu, DenseMatrix, Factorization};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Lazily built factorization shared by every solve on one operator.
#[derive(Debug, Default)]
pub(crate) struct LuCache(OnceLock<std::result::Result<Factorization, String>>);

impl LuCache {
    fn get(&self, build: impl FnOnce() -> Result<Factorization>) -> Result<&Factorization> {
        self.0
            .get_or_init(|| build().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|msg| Error::InvalidArgument(format!("factorization failed: {msg}")))
    }
}

/// Operator stored by diagonals: `diags[k] = (d, values)` holds `A[i, i + d]` in
/// `values[i]`, with zeros where `i + d` falls outside the matrix.
#[derive(Debug)]
pub struct BandedOperator {
    n: usize,
    diags: Vec<(isize, Vec<C64>)>,
    lu: LuCache,
}

impl BandedOperator {
    pub fn new(n: usize, mut diags: Vec<(isize, Vec<C64>)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("operator of size 0".into()));
        }
        for (d, vals) in &mut diags {
            if vals.len() != n {
                return Err(Error::Dimension(format!(
                    "diagonal {d} has {} entries, expected {n}",
                    vals.len()
                )));
            }
            if d.unsigned_abs() >= n {
                return Err(Error::Dimension(format!("diagonal offset {d} outside a {n}x{n} matrix")));
            }
            for (i, v) in vals.iter_mut().enumerate() {
                let j = i as isize + *d;
                if j < 0 || j >= n as isize {
                    *v = ZERO;
                }
            }
        }
        diags.sort_by_key(|(d, _)| *d);
        Ok(Self {
            n,
            diags,
            lu: LuCache::default(),
        })
    }

    /// Constant-coefficient Toeplitz band: `stencil` lists `(offset, value)`.
    pub fn toeplitz(n: usize, stencil: &[(isize, C64)]) -> Result<Self> {
        let diags = stencil
            .iter()
            .filter(|(d, _)| d.unsigned_abs() < n)
            .map(|&(d, v)| (d, vec![v; n]))
            .collect();
        Self::new(n, diags)
    }

    /// `(lower, upper)` bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let lower = self.diags.iter().map(|(d, _)| (-d).max(0) as usize).max().unwrap_or(0);
        let upper = self.diags.iter().map(|(d, _)| (*d).max(0) as usize).max().unwrap_or(0);
        (lower, upper)
    }

    /// Entry `A[i, j]`.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        let d = j as isize - i as isize;
        self.diags
            .binary_search_by_key(&d, |(o, _)| *o)
            .map(|k| self.diags[k].1[i])
            .unwrap_or(ZERO)
    }
}

impl LinearOperator for BandedOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n, "apply: vector length");
        let n = self.n as isize;
        let mut y = vec![ZERO; self.n];
        for (d, vals) in &self.diags {
            let lo = (-d).max(0);
            let hi = (n - d).min(n);
            for i in lo..hi {
                let i = i as usize;
                y[i] += vals[i] * x[(i as isize + d) as usize];
            }
        }
        y
    }

    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n, "apply_adjoint: vector length");
        let n = self.n as isize;
        let mut y = vec![ZERO; self.n];
        for (d, vals) in &self.diags {
            let lo = (-d).max(0);
            let hi = (n - d).min(n);
            for i in lo..hi {
                let i = i as usize;
                y[(i as isize + d) as usize] += vals[i].conj() * x[i];
            }
        }
        y
    }

    fn structure(&self) -> Structure {
        match self.bandwidths() {
            (l, u) if l <= 1 && u <= 1 => Structure::Tridiagonal,
            (lower, upper) => Structure::Banded { lower, upper },
        }
    }

    fn factorization(&self) -> Result<&Factorization> {
        self.lu.get(|| {
            let (kl, ku) = self.bandwidths();
            BandedLu::new(self.n, kl, ku, |i, j| self.entry(i, j)).map(Factorization::Banded)
        })
    }

    fn norm_fro(&self) -> f64 {
        self.diags
            .iter()
            .flat_map(|(_, v)| v.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j))
    }
}

/// Compressed sparse row operator for general sparsity patterns.
#[derive(Debug)]
pub struct CsrOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
    lu: LuCache,
}

impl CsrOperator {
    /// Build from unsorted triplets; duplicate positions are an error.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, C64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("operator of size 0".into()));
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut last = None;
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::Dimension(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
            }
            if last == Some((i, j)) {
                return Err(Error::InvalidArgument(format!("duplicate entry at ({i}, {j})")));
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
            lu: LuCache::default(),
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut lower, mut upper) = (0, 0);
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                lower = lower.max(i.saturating_sub(j));
                upper = upper.max(j.saturating_sub(i));
            }
        }
        (lower, upper)
    }
}

impl LinearOperator for CsrOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n, "apply: vector length");
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n, "apply_adjoint: vector length");
        let mut y = vec![ZERO; self.n];
        for (i, xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v.conj() * xi;
            }
        }
        y
    }

    fn structure(&self) -> Structure {
        Structure::GeneralSparse
    }

    /// Banded LU over the actual bandwidth when that is narrower than the
    /// matrix, dense partial pivoting otherwise.
    fn factorization(&self) -> Result<&Factorization> {
        self.lu.get(|| {
            let (kl, ku) = self.bandwidths();
            if 2 * kl + ku + 1 < self.n {
                let mut dense_row: Vec<C64> = vec![ZERO; self.n];
                let mut current = usize::MAX;
                BandedLu::new(self.n, kl, ku, |i, j| {
                    if i != current {
                        if current != usize::MAX {
                            for (c, _) in self.row(current) {
                                dense_row[c] = ZERO;
                            }
                        }
                        for (c, v) in self.row(i) {
                            dense_row[c] = v;
                        }
                        current = i;
                    }
                    dense_row[j]
                })
                .map(Factorization::Banded)
            } else {
                DenseLu::new(&self.to_dense()).map(Factorization::Dense)
            }
        })
    }

    fn norm_fro(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn to_dense(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                a[(i, j)] = v;
            }
        }
        a
    }
}

/// Explicitly stored square matrix.
#[derive(Debug)]
pub struct DenseOperator {
    a: DenseMatrix,
    lu: LuCache,
}

impl DenseOperator {
    pub fn new(a: DenseMatrix) -> Result<Self> {
        if !a.is_square() || a.rows() == 0 {
            return Err(Error::Dimension(format!(
                "dense operator must be square and non-empty, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        a.check_finite("dense operator")?;
        Ok(Self {
            a,
            lu: LuCache::default(),
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.a.matvec(x)
    }

    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.a.matvec_adjoint(x)
    }

    fn structure(&self) -> Structure {
        Structure::Dense
    }

    fn factorization(&self) -> Result<&Factorization> {
        self.lu.get(|| lu_factor(&self.a))
    }

    fn norm_fro(&self) -> f64 {
        self.a.norm_fro()
    }

    fn to_dense(&self) -> DenseMatrix {
        self.a.clone()
    }
}
