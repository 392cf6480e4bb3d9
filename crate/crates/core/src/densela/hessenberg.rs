use super::{c64, DenseMatrix};
use crate::{Error, Result, C64};

/// Householder reduction `H = Q * Hess * Q^*` with `Hess` upper Hessenberg.
///
/// Entries below the first subdiagonal of the returned `Hess` are exactly zero.
pub fn hessenberg_reduce(h: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if !h.is_square() {
        return Err(Error::Dimension(format!(
            "hessenberg_reduce needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    h.check_finite("hessenberg_reduce")?;
    let n = h.rows();
    let mut a = h.clone();
    let mut q = DenseMatrix::identity(n);
    if n < 3 {
        return Ok((q, a));
    }
    let mut v = vec![C64::new(0.0, 0.0); n];
    for k in 0..n - 2 {
        let len = n - k - 1;
        let x: Vec<C64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let xnorm = crate::vecops::norm(&x);
        let tail = crate::vecops::norm(&x[1..]);
        if tail == 0.0 {
            continue;
        }
        // P = I - 2 w w^* / (w^* w), w = x - beta e1, beta = -phase(x0) ||x||
        let phase = if x[0].norm() == 0.0 {
            c64(1.0)
        } else {
            x[0] / x[0].norm()
        };
        let beta = -phase * xnorm;
        v[..len].copy_from_slice(&x);
        v[0] -= beta;
        let vnorm2: f64 = v[..len].iter().map(|z| z.norm_sqr()).sum();
        let w = &v[..len];
        let two_over = 2.0 / vnorm2;

        // left: rows k+1.., columns k..
        for j in k..n {
            let mut s = C64::new(0.0, 0.0);
            for (t, wi) in w.iter().enumerate() {
                s += wi.conj() * a[(k + 1 + t, j)];
            }
            s *= two_over;
            for (t, wi) in w.iter().enumerate() {
                a[(k + 1 + t, j)] -= wi * s;
            }
        }
        // right: all rows, columns k+1..
        for i in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for (t, wi) in w.iter().enumerate() {
                s += a[(i, k + 1 + t)] * wi;
            }
            s *= two_over;
            for (t, wi) in w.iter().enumerate() {
                a[(i, k + 1 + t)] -= s * wi.conj();
            }
        }
        for i in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for (t, wi) in w.iter().enumerate() {
                s += q[(i, k + 1 + t)] * wi;
            }
            s *= two_over;
            for (t, wi) in w.iter().enumerate() {
                q[(i, k + 1 + t)] -= s * wi.conj();
            }
        }
        a[(k + 1, k)] = beta;
        for i in k + 2..n {
            a[(i, k)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, a))
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::EPS;
    use super::*;

    fn check(h: &DenseMatrix) {
        let (q, hess) = hessenberg_reduce(h).unwrap();
        let d = h.rows() as f64;
        for j in 0..h.cols() {
            for i in j + 2..h.rows() {
                assert_eq!(hess[(i, j)], C64::new(0.0, 0.0));
            }
        }
        assert!(unitary_defect(&q) <= 10.0 * d * EPS);
        let back = q.matmul(&hess).matmul(&q.adjoint());
        assert!(back.sub(h).norm_fro() <= 1e2 * d * EPS * h.norm_fro());
    }

    #[test]
    fn two_by_two_is_untouched() {
        let h = random_matrix(2, 2, 1);
        let (q, hess) = hessenberg_reduce(&h).unwrap();
        assert_eq!(q, DenseMatrix::identity(2));
        assert_eq!(hess, h);
    }

    #[test]
    fn upper_triangular_is_untouched() {
        let mut h = random_matrix(5, 5, 2);
        for j in 0..5 {
            for i in j + 1..5 {
                h[(i, j)] = C64::new(0.0, 0.0);
            }
        }
        let (q, hess) = hessenberg_reduce(&h).unwrap();
        assert_eq!(hess, h);
        assert_eq!(q, DenseMatrix::identity(5));
    }

    #[test]
    fn random_reconstruction() {
        check(&random_matrix(6, 6, 3));
        check(&random_matrix(30, 30, 4));
        check(&random_real_matrix(17, 17, 5));
    }

    #[test]
    fn rejects_nan() {
        let mut h = random_matrix(4, 4, 6);
        h[(2, 1)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(hessenberg_reduce(&h), Err(Error::NonFinite(_))));
    }
}
