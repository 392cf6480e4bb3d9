use super::{c64, DenseMatrix, EPS};
use crate::{Error, Result, C64};

/// Dense LU with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DenseMatrix,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension("LU of a non-square matrix".into()));
        }
        a.check_finite("lu_factor")?;
        let n = a.rows();
        let tiny = EPS * a.norm_max();
        let mut lu = a.clone();
        let mut piv = vec![0; n];
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[(i, k)].norm().total_cmp(&lu[(j, k)].norm()))
                .unwrap();
            piv[k] = p;
            if lu[(p, k)].norm() <= tiny {
                return Err(Error::Singular { index: k });
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj == C64::new(0.0, 0.0) {
                    continue;
                }
                for i in k + 1..n {
                    let l = lu[(i, k)];
                    lu[(i, j)] -= l * ukj;
                }
            }
        }
        Ok(Self { lu, piv })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let lu = &self.lu;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for j in 0..n {
            let xj = x[j];
            for i in j + 1..n {
                x[i] -= lu[(i, j)] * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= lu[(j, j)];
            let xj = x[j];
            for i in 0..j {
                x[i] -= lu[(i, j)] * xj;
            }
        }
        x
    }

    /// Solve `A^* x = b` with the same factors.
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let lu = &self.lu;
        let mut x = b.to_vec();
        // U^* w = b
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= lu[(k, i)].conj() * x[k];
            }
            x[i] = s / lu[(i, i)].conj();
        }
        // L^* y = w
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= lu[(k, i)].conj() * x[k];
            }
            x[i] = s;
        }
        for k in (0..n).rev() {
            x.swap(k, self.piv[k]);
        }
        x
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = c64(1.0);
            let x = self.solve(&e);
            inv.col_mut(j).copy_from_slice(&x);
            e[j] = C64::new(0.0, 0.0);
        }
        inv
    }

    /// Solve `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut x = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve(b.col(j));
            x.col_mut(j).copy_from_slice(&col);
        }
        x
    }
}

/// Banded LU with partial pivoting (row interchanges), LAPACK `gbtrf` style.
///
/// Rows are stored with offsets `j - i` in `-kl ..= ku + kl`; pivoting grows
/// the upper bandwidth by `kl`. With `kl = ku = 1` this is the tridiagonal
/// (Thomas) elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<C64>,
    piv: Vec<usize>,
}

impl BandedLu {
    /// `entry(i, j)` is queried only for `-kl <= j - i <= ku`.
    pub fn new(
        n: usize,
        kl: usize,
        ku: usize,
        mut entry: impl FnMut(usize, usize) -> C64,
    ) -> Result<Self> {
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band: vec![C64::new(0.0, 0.0); n * width],
            piv: vec![0; n],
        };
        let mut amax = 0.0f64;
        for i in 0..n {
            let j0 = i.saturating_sub(kl);
            let j1 = (i + ku).min(n - 1);
            for j in j0..=j1 {
                let v = entry(i, j);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NonFinite("lu_factor"));
                }
                amax = amax.max(v.norm());
                *lu.at_mut(i, j) = v;
            }
        }
        let tiny = EPS * amax;
        let ufill = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let p = (k..=last)
                .max_by(|&a, &b| lu.at(a, k).norm().total_cmp(&lu.at(b, k).norm()))
                .unwrap();
            lu.piv[k] = p;
            if lu.at(p, k).norm() <= tiny {
                return Err(Error::Singular { index: k });
            }
            let jend = (k + ufill).min(n - 1);
            if p != k {
                for j in k..=jend {
                    let t = lu.at(k, j);
                    *lu.at_mut(k, j) = lu.at(p, j);
                    *lu.at_mut(p, j) = t;
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last {
                let l = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = l;
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..=jend {
                    let u = lu.at(k, j);
                    *lu.at_mut(i, j) -= l * u;
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> C64 {
        self.band[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        let k = self.idx(i, j);
        &mut self.band[k]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.at(i, k) * xk;
            }
        }
        let ufill = self.kl + self.ku;
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + ufill).min(n - 1) {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }

    /// Solve `A^* x = b` with the same factors.
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let ufill = self.kl + self.ku;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(ufill)..i {
                s -= self.at(k, i).conj() * x[k];
            }
            x[i] = s / self.at(i, i).conj();
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                s -= self.at(i, k).conj() * x[i];
            }
            x[k] = s;
            x.swap(k, self.piv[k]);
        }
        x
    }
}

/// A stored factorization of the outer operator, reused by every inner solve.
#[derive(Debug, Clone)]
pub enum Factorization {
    Banded(BandedLu),
    Dense(DenseLu),
}

impl Factorization {
    pub fn dim(&self) -> usize {
        match self {
            Factorization::Banded(f) => f.dim(),
            Factorization::Dense(f) => f.dim(),
        }
    }

    /// Solve `A x = b`, or `A^* x = b` when `adjoint` is set.
    pub fn solve(&self, b: &[C64], adjoint: bool) -> Vec<C64> {
        match (self, adjoint) {
            (Factorization::Banded(f), false) => f.solve(b),
            (Factorization::Banded(f), true) => f.solve_adjoint(b),
            (Factorization::Dense(f), false) => f.solve(b),
            (Factorization::Dense(f), true) => f.solve_adjoint(b),
        }
    }
}

/// Factor a dense matrix; banded storage is used when the profile is narrow.
pub fn lu_factor(a: &DenseMatrix) -> Result<Factorization> {
    let n = a.rows();
    let zero = C64::new(0.0, 0.0);
    let mut kl = 0;
    let mut ku = 0;
    for j in 0..a.cols() {
        for i in 0..n {
            if a[(i, j)] != zero {
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
    }
    if n > 0 && 2 * kl + ku + 1 < n {
        BandedLu::new(n, kl, ku, |i, j| a[(i, j)]).map(Factorization::Banded)
    } else {
        DenseLu::new(a).map(Factorization::Dense)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::vecops::norm;

    fn residual(a: &DenseMatrix, x: &[C64], b: &[C64]) -> f64 {
        let ax = a.matvec(x);
        norm(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>())
    }

    fn tridiag(n: usize, sub: f64, d: f64, sup: f64) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c64(d)
            } else if i == j + 1 {
                c64(sub)
            } else if j == i + 1 {
                c64(sup)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn identity_solve() {
        let b: Vec<C64> = (0..5).map(|i| C64::new(i as f64, -1.0)).collect();
        let f = lu_factor(&DenseMatrix::identity(5)).unwrap();
        assert_eq!(f.solve(&b, false), b);
        assert_eq!(f.solve(&b, true), b);
    }

    #[test]
    fn tridiagonal_solves_use_band_storage() {
        let n = 100;
        let a = tridiag(n, 1.5, 2.0, -1.0);
        let f = lu_factor(&a).unwrap();
        assert!(matches!(f, Factorization::Banded(ref b) if b.bandwidths() == (1, 1)));
        let mut b = vec![C64::new(0.0, 0.0); n];
        b[0] = c64(1.0);
        let x = f.solve(&b, false);
        let tol = 1e3 * n as f64 * EPS * a.norm_fro() * norm(&x);
        assert!(residual(&a, &x, &b) <= tol);
        let xa = f.solve(&b, true);
        assert!(residual(&a.adjoint(), &xa, &b) <= tol);
    }

    #[test]
    fn pivoting_is_exercised() {
        // Zero leading pivot forces a row swap.
        let n = 30;
        let mut a = tridiag(n, 3.0, 0.0, 1.0);
        a[(5, 5)] = c64(0.1);
        let b: Vec<C64> = (0..n).map(|i| C64::new(1.0, i as f64)).collect();
        for f in [
            lu_factor(&a).unwrap(),
            Factorization::Dense(DenseLu::new(&a).unwrap()),
        ] {
            let x = f.solve(&b, false);
            let tol = 1e3 * n as f64 * EPS * a.norm_fro() * norm(&x);
            assert!(residual(&a, &x, &b) <= tol, "{} {}", residual(&a, &x, &b), tol);
            let x = f.solve(&b, true);
            let tol = 1e3 * n as f64 * EPS * a.norm_fro() * norm(&x);
            assert!(residual(&a.adjoint(), &x, &b) <= tol, "{} {}", residual(&a.adjoint(), &x, &b), tol);
        }
    }

    #[test]
    fn adjoint_route_matches_explicit_adjoint() {
        let a = random_matrix(12, 12, 3);
        let b: Vec<C64> = random_matrix(12, 1, 4).col(0).to_vec();
        let direct = DenseLu::new(&a).unwrap().solve_adjoint(&b);
        let explicit = DenseLu::new(&a.adjoint()).unwrap().solve(&b);
        let diff: Vec<C64> = direct.iter().zip(&explicit).map(|(p, q)| p - q).collect();
        assert!(norm(&diff) <= 1e-12 * norm(&explicit));
    }

    #[test]
    fn banded_general_profile() {
        let n = 60;
        let base = random_matrix(n, n, 7);
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            let off = j as isize - i as isize;
            if (-4..=2).contains(&off) {
                base[(i, j)] + if i == j { c64(0.5) } else { c64(0.0) }
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let f = lu_factor(&a).unwrap();
        assert!(matches!(f, Factorization::Banded(ref b) if b.bandwidths() == (4, 2)));
        let b: Vec<C64> = random_matrix(n, 1, 8).col(0).to_vec();
        for adj in [false, true] {
            let x = f.solve(&b, adj);
            let m = if adj { a.adjoint() } else { a.clone() };
            assert!(residual(&m, &x, &b) <= 1e3 * n as f64 * EPS * a.norm_fro() * norm(&x));
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = DenseMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(DenseLu::new(&a), Err(Error::Singular { .. })));
        let z = DenseMatrix::zeros(6, 6);
        assert!(lu_factor(&z).is_err());
    }
}
