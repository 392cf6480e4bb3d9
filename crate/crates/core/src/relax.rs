//! Relaxed inner tolerances and the eigenvector-tail diagnostic behind them.
//!
//! The residual gap is a sum of products `||g_k|| |e_k* y|`, and the trailing
//! components of the eigenvector shrink as the outer iteration converges, so
//! later inner solves may be less accurate. From the third step on the inner
//! tolerance is
//!
//! ```text
//! eps_k = max(eps_out / m_max, min(1, delta / (2 m_max ||r||)) eps_out)
//! ```
//!
//! with `r` and `delta` (distance from the leading eigenvalue to the rest of
//! the projected spectrum) taken from the previous step. `m_max` stands in for
//! the final step count, which is unknown while iterating.

use serde::{Deserialize, Serialize};

use crate::densela::{eig_dense, sigma_min_shifted, DenseMatrix, EPS};
use crate::vecops::{dot, norm};
use crate::{Error, Result, C64};

/// Inner tolerance for outer step `k` (1-based).
pub fn next_tolerance(k: usize, theta_prev: f64, delta_prev: f64, r_prev: f64, eps_out: f64, m_max: usize) -> f64 {
    let floor = eps_out / m_max as f64;
    if k <= 2 || theta_prev.is_nan() || theta_prev <= 0.0 || !delta_prev.is_finite() {
        return floor;
    }
    let quotient = if r_prev > 0.0 {
        (delta_prev / (2.0 * m_max as f64 * r_prev)).min(1.0)
    } else {
        1.0
    };
    (quotient * eps_out).max(floor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauDiagnostics {
    /// `||K* q~ - conj(theta) q~||`
    pub s_norm: f64,
    /// `sigma_min(Y* K Y - theta I)`
    pub delta_true: f64,
    /// `||K q~ - theta q~||`, equal to `|t_{k+1,k} x_k|` for `k < m`.
    pub r_norm: f64,
    /// Upper bound `2 r / delta` for `tau`.
    pub tau_bound: f64,
    /// `r < delta^2 / (4 s)`
    pub condition_ok: bool,
    /// `||[x_2; y_2]||` of the eigenvector of the full matrix closest in angle to `q~`.
    pub tail_norm: Option<f64>,
    /// `|theta - theta_k|` for that eigenvector.
    pub theta_shift: Option<f64>,
    pub tail_ok: Option<bool>,
    pub shift_ok: Option<bool>,
}

/// Householder reflector `H` (Hermitian, unitary) with first column parallel to unit `q`.
fn completion(q: &[C64]) -> DenseMatrix {
    let n = q.len();
    let phase = if q[0].norm() > 0.0 { q[0] / q[0].norm() } else { C64::new(1.0, 0.0) };
    // w = q + phase e1 maps q onto -phase e1
    let mut w = q.to_vec();
    w[0] += phase;
    let ww = norm(&w).powi(2);
    DenseMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        C64::new(id, 0.0) - 2.0 * w[i] * w[j].conj() / ww
    })
}

/// Compare the eigenpair `(theta_k, q_k = [x; y])` of the leading `2k x 2k`
/// block matrix with the full `2m x 2m` one. `q_k` must have unit norm.
///
/// `tol` is the slack allowed in the two inequalities; `None` uses
/// `1e3 * 2m * eps * ||K||_F`.
pub fn verify_tau(
    k_hat: &DenseMatrix,
    k: usize,
    theta_k: C64,
    q_k: &[C64],
    tol: Option<f64>,
) -> Result<TauDiagnostics> {
    let two_m = k_hat.rows();
    if !k_hat.is_square() || !two_m.is_multiple_of(2) {
        return Err(Error::Dimension(format!("expected a 2m x 2m matrix, got {}x{}", k_hat.rows(), k_hat.cols())));
    }
    let m = two_m / 2;
    if k == 0 || k > m || q_k.len() != 2 * k {
        return Err(Error::Dimension(format!("step {k} with vector of length {} for m = {m}", q_k.len())));
    }
    let mut qt = vec![C64::new(0.0, 0.0); two_m];
    qt[..k].copy_from_slice(&q_k[..k]);
    qt[m..m + k].copy_from_slice(&q_k[k..]);

    let kq = k_hat.matvec(&qt);
    let r_norm = norm(&kq.iter().zip(&qt).map(|(a, b)| a - theta_k * b).collect::<Vec<_>>());
    let ks = k_hat.matvec_adjoint(&qt);
    let s_norm = norm(&ks.iter().zip(&qt).map(|(a, b)| a - theta_k.conj() * b).collect::<Vec<_>>());

    let h = completion(&qt);
    let rotated = h.matmul(k_hat).matmul(&h);
    let under = rotated.block(1, two_m, 1, two_m);
    let delta_true = if two_m > 1 { sigma_min_shifted(&under, theta_k)? } else { f64::INFINITY };
    let tau_bound = if delta_true > 0.0 { 2.0 * r_norm / delta_true } else { f64::INFINITY };
    let condition_ok = delta_true > 0.0 && r_norm * 4.0 * s_norm < delta_true * delta_true;
    let tol = tol.unwrap_or(1e3 * two_m as f64 * EPS * k_hat.norm_fro());

    let mut diag = TauDiagnostics {
        s_norm,
        delta_true,
        r_norm,
        tau_bound,
        condition_ok,
        tail_norm: None,
        theta_shift: None,
        tail_ok: None,
        shift_ok: None,
    };
    if condition_ok {
        let eig = eig_dense(k_hat)?;
        let best = (0..two_m)
            .max_by(|&a, &b| {
                let ca = dot(&qt, eig.vectors.col(a)).norm();
                let cb = dot(&qt, eig.vectors.col(b)).norm();
                ca.total_cmp(&cb)
            })
            .expect("non-empty spectrum");
        let q = eig.vectors.col(best);
        let tail = (norm(&q[k..m]).powi(2) + norm(&q[m + k..]).powi(2)).sqrt();
        let shift = (eig.values[best] - theta_k).norm();
        diag.tail_ok = Some(tail <= tau_bound / (1.0 + tau_bound * tau_bound).sqrt() + tol);
        diag.shift_ok = Some(shift <= s_norm * tau_bound + tol);
        diag.tail_norm = Some(tail);
        diag.theta_shift = Some(shift);
    }
    Ok(diag)
}
