//! Vector kernels shared by the Krylov processes.

use crate::C64;

#[inline]
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    // x^* y
    x.iter()
        .zip(y)
        .fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
}

#[inline]
pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

#[inline]
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// `sum_j coeffs[j] * basis[j]`.
pub fn combine(basis: &[Vec<C64>], coeffs: &[C64]) -> Vec<C64> {
    let n = basis.first().map_or(0, |b| b.len());
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (b, c) in basis.iter().zip(coeffs) {
        axpy(*c, b, &mut out);
    }
    out
}

/// Two passes of classical Gram-Schmidt of `z` against the orthonormal
/// columns in `basis`. Returns the accumulated projection coefficients and
/// the norm of `z` before orthogonalization; `z` is overwritten with the
/// orthogonal remainder.
pub fn cgs2(basis: &[Vec<C64>], z: &mut [C64]) -> (Vec<C64>, f64) {
    let before = norm(z);
    let mut coeffs = vec![C64::new(0.0, 0.0); basis.len()];
    for _ in 0..2 {
        let proj: Vec<C64> = basis.iter().map(|b| dot(b, z)).collect();
        for (b, c) in basis.iter().zip(&proj) {
            axpy(-c, b, z);
        }
        for (acc, c) in coeffs.iter_mut().zip(&proj) {
            *acc += c;
        }
    }
    (coeffs, before)
}
