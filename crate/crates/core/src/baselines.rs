//! Reference methods: the inexact power iteration on `f(A)* f(A)` and the
//! bound `||exp(A)|| <= exp(alpha)` with `alpha` the largest eigenvalue of the
//! Hermitian part of `A`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::densela::EPS;
use crate::funcatalog::MatFn;
use crate::inner::{approx_fav, InnerConfig};
use crate::matrices::LinearOperator;
use crate::outer::{start_vector, InexactnessLedger, LedgerEntry, RunReport, RunStatus, StartVector, TripletEstimate};
use crate::vecops::{axpy, dot, norm, scale};
use crate::{Error, Result, C64};

/// Power iteration for the dominant eigenvalue `lambda` of `f(A)* f(A)`.
///
/// Each step computes `y ~ f(A)* (f(A) v)` with two inner solves, sets
/// `lambda = |v* y|` (the quotient can pick up a small imaginary part from the
/// inexact products) and stops once `||y - lambda v|| / lambda <= eps_out`.
/// The reported singular value is `sqrt(lambda)`. The residual is the one of
/// the inexact products, without correction.
pub fn power_method(
    op: &dyn LinearOperator,
    f: MatFn,
    eps_out: f64,
    max_iters: usize,
    inner_cfg: &InnerConfig,
    seed: u64,
) -> Result<RunReport> {
    if !(eps_out > 0.0 && eps_out < 1.0) {
        return Err(Error::InvalidArgument(format!("eps_out must lie in (0, 1), got {eps_out}")));
    }
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be positive".into()));
    }
    inner_cfg.validate()?;
    let start = Instant::now();
    let mut v = start_vector(op.dim(), seed, StartVector::Uniform);
    let s = norm(&v);
    scale(C64::new(1.0 / s, 0.0), &mut v);

    let mut ledger = InexactnessLedger::default();
    let mut sigma_history = Vec::new();
    let mut residual_history = Vec::new();
    let mut status = RunStatus::MaxIterations;
    let mut last: Option<(f64, f64, Vec<C64>, Vec<C64>)> = None;

    for _ in 0..max_iters {
        let step = approx_fav(op, f, &v, inner_cfg, false)
            .and_then(|fwd| approx_fav(op, f, &fwd.vector, inner_cfg, true).map(|adj| (fwd, adj)));
        let (fwd, adj) = match step {
            Ok(pair) => pair,
            Err(e) => {
                status = RunStatus::Aborted(format!("step {}: {e}", ledger.len() + 1));
                break;
            }
        };
        ledger.entries.push(LedgerEntry {
            g1_norm: fwd.err_estimate,
            g2_norm: adj.err_estimate,
            eps_requested: inner_cfg.eps_inner,
            dims_fwd: fwd.dims_used,
            dims_adj: adj.dims_used,
            inner_converged: fwd.converged && adj.converged,
        });
        let y = adj.vector;
        let lambda = dot(&v, &y).norm();
        let res: Vec<C64> = y.iter().zip(&v).map(|(a, b)| a - lambda * b).collect();
        let res = norm(&res);
        let rel = if lambda > 0.0 { res / lambda } else { f64::INFINITY };
        sigma_history.push(lambda.sqrt());
        residual_history.push(rel);
        let left = fwd.vector;
        last = Some((lambda, res, v.clone(), left));
        if rel <= eps_out {
            status = RunStatus::Converged;
            break;
        }
        let ny = norm(&y);
        if ny == 0.0 || !ny.is_finite() {
            status = RunStatus::Aborted("power iterate vanished".into());
            break;
        }
        v = y;
        scale(C64::new(1.0 / ny, 0.0), &mut v);
    }

    let triplets = last
        .map(|(lambda, res, right, mut left)| {
            let nl = norm(&left);
            if nl > 0.0 {
                scale(C64::new(1.0 / nl, 0.0), &mut left);
            }
            let sigma = lambda.sqrt();
            vec![TripletEstimate {
                theta: sigma,
                eigenvalue: C64::new(sigma, 0.0),
                left,
                right,
                x: Vec::new(),
                y: Vec::new(),
                computed_residual: res,
                gap_bound: f64::NAN,
                theta_gap_second: f64::NAN,
            }]
        })
        .unwrap_or_default();
    let outer_iters = ledger.len();
    let inner_total = ledger.inner_total();
    Ok(RunReport {
        triplets,
        outer_iters,
        inner_total,
        inner_avg: if outer_iters > 0 { inner_total as f64 / (2 * outer_iters) as f64 } else { 0.0 },
        ledger,
        wall_time: start.elapsed().as_secs_f64(),
        converged: status == RunStatus::Converged,
        status,
        seed,
        eps_history: vec![inner_cfg.eps_inner; outer_iters],
        sigma_history,
        residual_history,
        state: None,
    })
}

/// Accuracy of `alpha`, which is the relative accuracy of `exp(alpha)`.
pub const EXP_BOUND_TOL: f64 = 1e-6;
const EXP_BOUND_MAX_ITERS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpBound {
    /// `exp(alpha)`
    pub bound: f64,
    /// Largest eigenvalue of `(B + B*) / 2` with `B = sign * A`.
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Number of eigenvalues of the symmetric tridiagonal `(a, b)` below `x`.
fn sturm_count(a: &[f64], b: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..a.len() {
        let off = if i > 0 { b[i - 1] * b[i - 1] } else { 0.0 };
        d = a[i] - x - if i > 0 { off / d } else { 0.0 };
        if d == 0.0 {
            d = -EPS * (a[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue of the symmetric tridiagonal `(a, b)` by bisection.
fn tridiag_max_eig(a: &[f64], b: &[f64]) -> f64 {
    let k = a.len();
    let radius = |i: usize| {
        (if i > 0 { b[i - 1].abs() } else { 0.0 }) + (if i + 1 < k { b[i].abs() } else { 0.0 })
    };
    let mut lo = (0..k).map(|i| a[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..k).map(|i| a[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    while hi - lo > 2.0 * EPS * scale {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(a, b, mid) == k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `|s_k|` for the unit eigenvector `s` of the largest eigenvalue `theta`,
/// by inverse iteration just above `theta`, where `T - shift I` is negative
/// definite and needs no pivoting.
fn last_component(a: &[f64], b: &[f64], theta: f64) -> f64 {
    let k = a.len();
    let scale = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let shift = theta + 1e-10 * scale;
    // LDL^T of T - shift I
    let mut d = vec![0.0; k];
    let mut l = vec![0.0; k];
    for i in 0..k {
        d[i] = a[i] - shift - if i > 0 { l[i - 1] * b[i - 1] } else { 0.0 };
        if i + 1 < k {
            l[i] = b[i] / d[i];
        }
    }
    let mut s = vec![1.0; k];
    for _ in 0..3 {
        for i in 1..k {
            s[i] -= l[i - 1] * s[i - 1];
        }
        for i in 0..k {
            s[i] /= d[i];
        }
        for i in (0..k.saturating_sub(1)).rev() {
            s[i] -= l[i] * s[i + 1];
        }
        let nrm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        s.iter_mut().for_each(|x| *x /= nrm);
    }
    s[k - 1].abs()
}

/// Upper bound `exp(alpha)` for `||exp(sign * A)||`.
///
/// `alpha` comes from the three-term Lanczos recurrence on
/// `x -> (A x + A* x) / 2`, stopped when the Ritz residual of the largest Ritz
/// value is below `1e-6`. The largest eigenvalues of discretized operators
/// are tightly clustered and need thousands of steps at `n = 10^4`, so the
/// basis is not kept; loss of orthogonality only duplicates converged Ritz
/// values and never pushes the largest one above `lambda_max`.
pub fn exp_norm_bound(op: &dyn LinearOperator, sign: f64) -> Result<ExpBound> {
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::InvalidArgument(format!("sign must be +1 or -1, got {sign}")));
    }
    let n = op.dim();
    let max_iters = EXP_BOUND_MAX_ITERS.min(n);
    let mut q = start_vector(n, 0x5eed, StartVector::Normal);
    let s = norm(&q);
    scale(C64::new(1.0 / s, 0.0), &mut q);
    let mut q_prev = vec![C64::new(0.0, 0.0); n];

    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut ritz = f64::NEG_INFINITY;
    let mut converged = false;
    let mut next_check = 10;

    for k in 1..=max_iters {
        let ax = op.apply(&q);
        let ahx = op.apply_adjoint(&q);
        let mut w: Vec<C64> = ax.iter().zip(&ahx).map(|(a, b)| 0.5 * sign * (a + b)).collect();
        let mut alpha = dot(&q, &w).re;
        let beta_prev = betas.last().copied().unwrap_or(0.0);
        for ((wi, qi), pi) in w.iter_mut().zip(&q).zip(&q_prev) {
            *wi -= alpha * qi + beta_prev * pi;
        }
        let before = norm(&w);
        // local reorthogonalization against q keeps the recurrence accurate
        let c = dot(&q, &w);
        axpy(-c, &q, &mut w);
        alpha += c.re;
        let beta = norm(&w);
        alphas.push(alpha);

        let invariant = beta <= n as f64 * EPS * before.max(alpha.abs());
        // the Ritz check costs O(k), so it runs on a geometric schedule
        if invariant || k == max_iters || k >= next_check {
            next_check = k + (k / 50).max(10);
            ritz = tridiag_max_eig(&alphas, &betas);
            let residual = beta * last_component(&alphas, &betas, ritz);
            if invariant || residual <= EXP_BOUND_TOL {
                converged = true;
                break;
            }
        }
        betas.push(beta);
        q_prev = std::mem::replace(&mut q, w);
        scale(C64::new(1.0 / beta, 0.0), &mut q);
    }

    Ok(ExpBound {
        bound: ritz.exp(),
        alpha: ritz,
        iterations: alphas.len(),
        converged,
    })
}
