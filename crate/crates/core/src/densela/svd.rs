use super::{c64, DenseMatrix, EPS};
use crate::vecops::{dot, norm};
use crate::{Result, C64};

/// Thin SVD `B = U diag(s) V^*`, `s` sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

/// One-sided (Hestenes) Jacobi on the columns of a tall matrix.
fn jacobi_tall(a: &DenseMatrix) -> Svd {
    let (m, n) = (a.rows(), a.cols());
    let mut w = a.column_vectors();
    let mut v = DenseMatrix::identity(n).column_vectors();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = w[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = dot(&w[p], &w[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // rotate w_q by the phase of gamma so the pair's Gram entry is real
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for cols in [&mut w, &mut v] {
                    let (lo, hi) = cols.split_at_mut(q);
                    let (xp, xq) = (&mut lo[p], &mut hi[0]);
                    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
                        let bq = *b * phase;
                        let ap = *a;
                        *a = ap * c - bq * s;
                        *b = ap * s + bq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = w.iter().enumerate().map(|(j, c)| (norm(c), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));
    let s: Vec<f64> = order.iter().map(|o| o.0).collect();
    let smax = s.first().copied().unwrap_or(0.0);
    let mut ucols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for &(sj, j) in &order {
        if sj > smax * EPS * (m.max(n) as f64) && sj > 0.0 {
            ucols.push(w[j].iter().map(|z| z / sj).collect());
        } else {
            ucols.push(complete_column(&ucols, m));
        }
    }
    let vcols: Vec<Vec<C64>> = order.iter().map(|&(_, j)| v[j].clone()).collect();
    Svd {
        u: DenseMatrix::from_columns(&ucols).unwrap_or_else(|_| DenseMatrix::zeros(m, 0)),
        s,
        v: DenseMatrix::from_columns(&vcols).unwrap_or_else(|_| DenseMatrix::zeros(n, 0)),
    }
}

/// A unit vector orthogonal to `cols`, picked among the coordinate vectors.
pub(crate) fn complete_column(cols: &[Vec<C64>], m: usize) -> Vec<C64> {
    let mut best: Option<Vec<C64>> = None;
    let mut best_norm = -1.0;
    for e in 0..m {
        let mut x = vec![C64::new(0.0, 0.0); m];
        x[e] = c64(1.0);
        for _ in 0..2 {
            for c in cols {
                let h = dot(c, &x);
                for (xi, ci) in x.iter_mut().zip(c) {
                    *xi -= h * ci;
                }
            }
        }
        let nx = norm(&x);
        if nx > best_norm {
            best_norm = nx;
            best = Some(x);
        }
        if nx > 0.5 {
            break;
        }
    }
    let mut x = best.unwrap_or_default();
    if best_norm > 0.0 {
        crate::vecops::scale(c64(1.0 / best_norm), &mut x);
    }
    x
}

/// Singular values (descending) and thin singular vectors of a small matrix.
pub fn svd_small(b: &DenseMatrix) -> Result<Svd> {
    b.check_finite("svd_small")?;
    if b.rows() >= b.cols() {
        Ok(jacobi_tall(b))
    } else {
        let t = jacobi_tall(&b.adjoint());
        Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

/// Smallest singular value of `M - theta I`.
pub fn sigma_min_shifted(m: &DenseMatrix, theta: C64) -> Result<f64> {
    let s = svd_small(&m.shifted(theta))?.s;
    Ok(s.last().copied().unwrap_or(0.0))
}
