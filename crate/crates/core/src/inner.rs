//! Approximation of `f(A) v` by projection onto a Krylov subspace.
//!
//! With an orthonormal basis `P_k` whose first column is `v / beta`,
//! `f(A) v ~ z_k = beta P_k f(H_k) e_1`, `H_k = P_k* A P_k`. The subspaces are
//! nested, so `||z_{k+j} - z_k|| = ||c_{k+j} - [c_k; 0]||` for the coefficient
//! vectors `c_k = beta f(H_k) e_1`, and the test
//!
//! ```text
//! omega = ||z_{k+j} - z_k|| / ||z_k||,   omega / (1 - omega) <= eps_in
//! ```
//!
//! costs no long-vector work. The returned iterate is `z_k`, the one the
//! estimate `||f(A) v - z_k|| ~ omega / (1 - omega) ||z_k||` speaks about.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::densela::{dense_matfun, DenseMatrix};
use crate::funcatalog::MatFn;
use crate::matrices::LinearOperator;
use crate::vecops::{cgs2, combine, dot, norm, scale};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InnerMethod {
    /// Arnoldi on `A` (or `A*`) with full reorthogonalization.
    #[serde(rename = "krylov")]
    StandardKrylov,
    /// Alternating products with `A` and solves with `A`, one factorization per operator.
    #[serde(rename = "eksm")]
    ExtendedKrylov,
}

impl InnerMethod {
    pub fn token(self) -> &'static str {
        match self {
            InnerMethod::StandardKrylov => "krylov",
            InnerMethod::ExtendedKrylov => "eksm",
        }
    }
}

impl fmt::Display for InnerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for InnerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "krylov" | "standard" | "standard-krylov" => Ok(InnerMethod::StandardKrylov),
            "eksm" | "extended" | "extended-krylov" => Ok(InnerMethod::ExtendedKrylov),
            _ => Err(Error::InvalidArgument(format!("unknown inner method '{s}'"))),
        }
    }
}

pub const DEFAULT_LAG: usize = 2;
pub const DEFAULT_MAX_DIM: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerConfig {
    pub method: InnerMethod,
    /// Relative tolerance on `||f(A) v - z|| / ||z||`.
    pub eps_inner: f64,
    /// Lag `j` between the certified iterate and the one used to estimate its error.
    pub lag: usize,
    pub max_dim: usize,
}

impl InnerConfig {
    pub fn new(method: InnerMethod, eps_inner: f64) -> Self {
        Self {
            method,
            eps_inner,
            lag: DEFAULT_LAG,
            max_dim: DEFAULT_MAX_DIM,
        }
    }

    pub fn with_eps(self, eps_inner: f64) -> Self {
        Self { eps_inner, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_inner > 0.0 && self.eps_inner < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "inner tolerance must lie in (0, 1), got {}",
                self.eps_inner
            )));
        }
        if self.lag < 1 || self.max_dim < self.lag + 2 {
            return Err(Error::InvalidArgument(format!(
                "need lag >= 1 and max_dim >= lag + 2, got lag {} max_dim {}",
                self.lag, self.max_dim
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub vector: Vec<C64>,
    /// Absolute estimate of `||f(A) v - vector||`.
    pub err_estimate: f64,
    /// Basis dimension reached, including the lag steps.
    pub dims_used: usize,
    pub omega_history: Vec<f64>,
    pub converged: bool,
    /// The subspace became invariant; `vector` is exact up to rounding.
    pub breakdown: bool,
}

/// Growing orthonormal basis together with `H = P* B P`, where `B` is `A` or `A*`.
pub(crate) struct KrylovBasis<'a> {
    op: &'a dyn LinearOperator,
    adjoint: bool,
    method: InnerMethod,
    pub(crate) p: Vec<Vec<C64>>,
    /// `B p_i` for every basis vector (extended method only).
    bp: Vec<Vec<C64>>,
    h: DenseMatrix,
    /// Index of the last basis vector produced by each chain (extended method).
    last_fwd: usize,
    last_inv: usize,
    pub(crate) exhausted: bool,
}

impl<'a> KrylovBasis<'a> {
    pub(crate) fn new(
        op: &'a dyn LinearOperator,
        adjoint: bool,
        method: InnerMethod,
        p1: Vec<C64>,
        cap: usize,
    ) -> Self {
        let mut basis = Self {
            op,
            adjoint,
            method,
            p: vec![p1],
            bp: Vec::new(),
            h: DenseMatrix::zeros(cap + 1, cap + 1),
            last_fwd: 0,
            last_inv: 0,
            exhausted: false,
        };
        if method == InnerMethod::ExtendedKrylov {
            basis.project_newest();
        }
        basis
    }

    fn mul(&self, x: &[C64]) -> Vec<C64> {
        if self.adjoint {
            self.op.apply_adjoint(x)
        } else {
            self.op.apply(x)
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.p.len()
    }

    /// Leading `k x k` block of `H`.
    pub(crate) fn projected(&self, k: usize) -> DenseMatrix {
        self.h.block(0, k, 0, k)
    }

    /// Orthogonalize `w` against the basis; returns the coefficients and
    /// whether `w` was (numerically) inside the span.
    fn orthogonalize(&self, w: &mut [C64]) -> (Vec<C64>, f64, bool) {
        let (coeffs, before) = cgs2(&self.p, w);
        let after = norm(w);
        let tiny = self.op.dim() as f64 * f64::EPSILON * before;
        (coeffs, after, after <= tiny || after == 0.0)
    }

    fn push(&mut self, mut w: Vec<C64>, nrm: f64) {
        scale(C64::new(1.0 / nrm, 0.0), &mut w);
        self.p.push(w);
    }

    /// Record `B p_k` for the newest vector and fill the new row and column of `H`.
    fn project_newest(&mut self) {
        let k = self.dim() - 1;
        let bpk = self.mul(&self.p[k]);
        for i in 0..=k {
            self.h[(i, k)] = dot(&self.p[i], &bpk);
        }
        for j in 0..k {
            self.h[(k, j)] = dot(&self.p[k], &self.bp[j]);
        }
        self.bp.push(bpk);
    }

    /// Add one basis vector. Sets `exhausted` when the span is invariant.
    pub(crate) fn extend(&mut self) -> Result<()> {
        let k = self.dim();
        match self.method {
            InnerMethod::StandardKrylov => {
                let mut w = self.mul(&self.p[k - 1]);
                let (coeffs, nrm, dependent) = self.orthogonalize(&mut w);
                for (i, c) in coeffs.iter().enumerate() {
                    self.h[(i, k - 1)] = *c;
                }
                if dependent {
                    self.exhausted = true;
                    return Ok(());
                }
                self.h[(k, k - 1)] = C64::new(nrm, 0.0);
                self.push(w, nrm);
            }
            InnerMethod::ExtendedKrylov => {
                // p_2 comes from the inverse chain, then the chains alternate
                let use_inverse = k % 2 == 1;
                let mut w = if use_inverse {
                    self.op.solve(&self.p[self.last_inv], self.adjoint)?
                } else {
                    self.bp[self.last_fwd].clone()
                };
                let (_, nrm, dependent) = self.orthogonalize(&mut w);
                if dependent {
                    self.exhausted = true;
                    return Ok(());
                }
                self.push(w, nrm);
                if use_inverse {
                    self.last_inv = k;
                } else {
                    self.last_fwd = k;
                }
                self.project_newest();
            }
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    basis: &KrylovBasis,
    c: &[C64],
    k: usize,
    dims_used: usize,
    err_estimate: f64,
    omega_history: Vec<f64>,
    converged: bool,
    breakdown: bool,
) -> InnerResult {
    InnerResult {
        vector: combine(&basis.p[..k], c),
        err_estimate,
        dims_used,
        omega_history,
        converged,
        breakdown,
    }
}

fn coefficients(h: &DenseMatrix, f: MatFn, beta: f64) -> Result<Vec<C64>> {
    let fh = dense_matfun(h, f)?;
    Ok(fh.col(0).iter().map(|c| c * beta).collect())
}

/// `z ~ f(A) v`, or `z ~ f(A)* v = f(A*) v` when `adjoint` is set.
///
/// For the functions in [`MatFn`] the coefficients are real and the excluded
/// set is closed under conjugation, so `f(A)* = f(A*)` and the adjoint case
/// runs the same process on `A*`.
pub fn approx_fav(
    op: &dyn LinearOperator,
    f: MatFn,
    v: &[C64],
    cfg: &InnerConfig,
    adjoint: bool,
) -> Result<InnerResult> {
    cfg.validate()?;
    let n = op.dim();
    if v.len() != n {
        return Err(Error::Dimension(format!("vector of length {} for operator of size {n}", v.len())));
    }
    let beta = norm(v);
    if beta == 0.0 {
        return Ok(InnerResult {
            vector: vec![C64::new(0.0, 0.0); n],
            err_estimate: 0.0,
            dims_used: 0,
            omega_history: Vec::new(),
            converged: true,
            breakdown: true,
        });
    }
    let mut p1 = v.to_vec();
    scale(C64::new(1.0 / beta, 0.0), &mut p1);
    let cap = cfg.max_dim.min(n);
    let mut basis = KrylovBasis::new(op, adjoint, cfg.method, p1, cap);


    // c[k - 1] = beta f(H_k) e_1
    let mut c: Vec<Vec<C64>> = Vec::new();
    let mut omega_history = Vec::new();
    let mut last_estimate = f64::INFINITY;
    loop {
        let m = basis.dim();
        if cfg.method == InnerMethod::StandardKrylov {
            // fills column m of H, so H_m is final afterwards
            basis.extend()?;
        }
        c.push(coefficients(&basis.projected(m), f, beta)?);
        if basis.exhausted {
            return Ok(finish(&basis, &c[m - 1], m, m, 0.0, omega_history, true, true));
        }
        if m > cfg.lag {
            let k = m - cfg.lag;
            let (ck, cm) = (&c[k - 1], &c[m - 1]);
            let zk_norm = norm(ck);
            let diff = cm
                .iter()
                .enumerate()
                .map(|(i, x)| (x - ck.get(i).copied().unwrap_or_default()).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let omega = if zk_norm > 0.0 { diff / zk_norm } else { f64::INFINITY };
            omega_history.push(omega);
            if omega < 1.0 {
                let rel = omega / (1.0 - omega);
                last_estimate = rel * zk_norm;
                if rel <= cfg.eps_inner {
                    return Ok(finish(&basis, ck, k, m, last_estimate, omega_history, true, false));
                }
            }
        }
        if m >= cap {
            return Ok(finish(&basis, &c[m - 1], m, m, last_estimate, omega_history, false, false));
        }
        if cfg.method == InnerMethod::ExtendedKrylov {
            basis.extend()?;
            if basis.exhausted {
                return Ok(finish(&basis, &c[m - 1], m, m, 0.0, omega_history, true, true));
            }
        }
    }
}
