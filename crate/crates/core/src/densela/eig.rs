use super::{c64, hessenberg_reduce, DenseLu, DenseMatrix, EPS};
use crate::{Error, Result, C64};

/// Complex Schur form `H = Q T Q^*`, `T` upper triangular.
#[derive(Debug, Clone)]
pub struct Schur {
    pub q: DenseMatrix,
    pub t: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub values: Vec<C64>,
    /// Right eigenvectors as unit columns.
    pub vectors: DenseMatrix,
    /// `||X||_1 ||X^{-1}||_1`, infinite when `X` is numerically singular.
    pub condition_estimate: f64,
}

/// Givens pair `(c, s)`, `c` real, with `[c s; -conj(s) c] [x; y] = [r; 0]`.
#[inline]
fn givens(x: C64, y: C64) -> (f64, C64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if ax == 0.0 {
        return (0.0, c64(1.0));
    }
    let nrm = ax.hypot(ay);
    (ax / nrm, (x / ax) * y.conj() / nrm)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m = (a + d) * 0.5;
    let (mu1, mu2) = (m + disc, m - disc);
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

/// Single-shift complex QR on an upper Hessenberg matrix, in place.
///
/// With `z = Some(..)` the full triangular factor is formed and the
/// rotations are accumulated into `z`; otherwise only the active window is
/// updated and just the diagonal (the eigenvalues) is meaningful.
fn hessenberg_qr(h: &mut DenseMatrix, mut z: Option<&mut DenseMatrix>) -> Result<()> {
    let n = h.rows();
    if n <= 1 {
        return Ok(());
    }
    let want_t = z.is_some();
    let anorm = h.norm_fro().max(f64::MIN_POSITIVE);
    let max_sweeps = 30 * n;
    let mut total = 0usize;
    let mut its = 0usize;
    let mut ihi = n - 1;
    while ihi > 0 {
        let mut l = ihi;
        while l > 0 {
            let mut tst = h[(l - 1, l - 1)].l1_norm() + h[(l, l)].l1_norm();
            if tst == 0.0 {
                tst = anorm;
            }
            if h[(l, l - 1)].l1_norm() <= EPS * tst {
                h[(l, l - 1)] = C64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == ihi {
            ihi -= 1;
            its = 0;
            continue;
        }
        its += 1;
        total += 1;
        if total > max_sweeps {
            return Err(Error::NoConvergence {
                index: ihi,
                sweeps: total,
            });
        }
        let mu = if its.is_multiple_of(10) {
            h[(ihi, ihi)] + 0.75 * h[(ihi, ihi - 1)].norm()
        } else {
            wilkinson_shift(
                h[(ihi - 1, ihi - 1)],
                h[(ihi - 1, ihi)],
                h[(ihi, ihi - 1)],
                h[(ihi, ihi)],
            )
        };
        let (row_lo, col_hi) = if want_t { (0, n - 1) } else { (l, ihi) };
        let mut x = h[(l, l)] - mu;
        let mut y = h[(l + 1, l)];
        for k in l..ihi {
            if k > l {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            let cstart = if k > l { k - 1 } else { k };
            for j in cstart..=col_hi {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = b * c - s.conj() * a;
            }
            let rend = (k + 2).min(ihi);
            for i in row_lo..=rend {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + b * s.conj();
                h[(i, k + 1)] = b * c - a * s;
            }
            if let Some(z) = z.as_deref_mut() {
                for i in 0..n {
                    let a = z[(i, k)];
                    let b = z[(i, k + 1)];
                    z[(i, k)] = a * c + b * s.conj();
                    z[(i, k + 1)] = b * c - a * s;
                }
            }
            if k > l {
                h[(k + 1, k - 1)] = C64::new(0.0, 0.0);
            }
        }
    }
    Ok(())
}

/// Complex Schur decomposition via Hessenberg reduction and shifted QR.
pub fn schur(h: &DenseMatrix) -> Result<Schur> {
    let (mut q, mut t) = hessenberg_reduce(h)?;
    hessenberg_qr(&mut t, Some(&mut q))?;
    let n = t.rows();
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok(Schur { q, t })
}

/// Eigenvalues only; cheaper than [`eig_dense`] since no Schur vectors are kept.
pub fn eigenvalues(h: &DenseMatrix) -> Result<Vec<C64>> {
    let (_, mut t) = hessenberg_reduce(h)?;
    hessenberg_qr(&mut t, None)?;
    Ok(t.diagonal())
}

/// Eigenvectors of an upper triangular matrix by back-substitution, one
/// column per diagonal entry, not normalized.
pub(crate) fn triangular_eigenvectors(t: &DenseMatrix) -> DenseMatrix {
    let n = t.rows();
    let smin = (EPS * t.norm_fro()).max(f64::MIN_POSITIVE * 1e10);
    let mut y = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        let col = y.col_mut(k);
        col[k] = c64(1.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * col[j];
            }
            let mut d = t[(i, i)] - lam;
            if d.norm() < smin {
                d = c64(smin);
            }
            col[i] = -s / d;
            let big = col[i].norm();
            if big > 1e100 {
                for v in col[i..=k].iter_mut() {
                    *v /= big;
                }
            }
        }
    }
    y
}

/// All eigenpairs of a square matrix: Hessenberg reduction, shifted QR to
/// Schur form, back-substitution for the eigenvectors of the triangular factor.
pub fn eig_dense(h: &DenseMatrix) -> Result<EigDecomp> {
    let Schur { q, t } = schur(h)?;
    let y = triangular_eigenvectors(&t);
    let mut x = q.matmul(&y);
    for j in 0..x.cols() {
        let nrm = crate::vecops::norm(x.col(j));
        if nrm > 0.0 {
            crate::vecops::scale(c64(1.0 / nrm), x.col_mut(j));
        }
    }
    let condition_estimate = match DenseLu::new(&x) {
        Ok(lu) => x.norm_1() * lu.inverse().norm_1(),
        Err(_) => f64::INFINITY,
    };
    Ok(EigDecomp {
        values: t.diagonal(),
        vectors: x,
        condition_estimate,
    })
}
