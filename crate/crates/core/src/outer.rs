//! Inexact Golub-Kahan-Lanczos bidiagonalization.
//!
//! Step `j` computes `z ~ f(A) v_j`, orthogonalizes it against `U` to get
//! `u_j` and the column `m_j`, then `z ~ f(A)* u_j` against `V` for `v_{j+1}`
//! and `t_j`. With inexact products
//!
//! ```text
//! f(A) V_m  = U_m M_m + G1
//! f(A)* U_m = V_m T_m + t_{m+1,m} v_{m+1} e_m* + G2
//! ```
//!
//! with `M_m` upper triangular and `T_m` upper Hessenberg. An eigenpair
//! `(theta, q = [x; y])` of `K = [[0, M_m], [T_m, 0]]` gives the triplet
//! estimate `(|theta|, U x, V y)`, whose computed residual is
//! `|t_{m+1,m}| |x_m|` (the last entry of the `x` block of the unit `q`; the
//! `v_{m+1}` term enters through the second block row, which acts on `x`).
//! The distance to the true residual is at most
//! `sum_j (||g1_j||^2 |y_j|^2 + ||g2_j||^2 |x_j|^2)^{1/2}`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::densela::{eigenvalues, DenseLu, DenseMatrix, EPS};
use crate::funcatalog::MatFn;
use crate::inner::{approx_fav, InnerConfig, InnerMethod, DEFAULT_LAG, DEFAULT_MAX_DIM};
use crate::matrices::LinearOperator;
use crate::relax::next_tolerance;
use crate::vecops::{cgs2, combine, norm, scale};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Result of double classical Gram-Schmidt.
#[derive(Debug, Clone, PartialEq)]
pub struct Rgs {
    /// Projections onto the basis followed by the norm of the remainder.
    pub coeffs: Vec<C64>,
    /// Normalized remainder; `None` when `z` lies in the span (breakdown).
    pub q: Option<Vec<C64>>,
}

/// Orthogonalize `z` against the orthonormal `basis` with two passes.
pub fn rgs(mut z: Vec<C64>, basis: &[Vec<C64>]) -> Rgs {
    let n = z.len();
    let (mut coeffs, before) = cgs2(basis, &mut z);
    let rest = norm(&z);
    coeffs.push(C64::new(rest, 0.0));
    if before == 0.0 || rest < n as f64 * EPS * before {
        return Rgs { coeffs, q: None };
    }
    scale(C64::new(1.0 / rest, 0.0), &mut z);
    Rgs { coeffs, q: Some(z) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// Estimated `||f(A) v_k - z||`.
    pub g1_norm: f64,
    /// Estimated `||f(A)* u_k - z||`.
    pub g2_norm: f64,
    /// Relative inner tolerance used for both products of the step.
    pub eps_requested: f64,
    pub dims_fwd: usize,
    pub dims_adj: usize,
    /// Both inner solves met their tolerance.
    pub inner_converged: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InexactnessLedger {
    pub entries: Vec<LedgerEntry>,
}

impl InexactnessLedger {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `sum_k (g1_k^2 |y_k|^2 + g2_k^2 |x_k|^2)^{1/2}`.
    pub fn gap_bound(&self, x: &[C64], y: &[C64]) -> f64 {
        self.entries
            .iter()
            .zip(x.iter().zip(y))
            .map(|(e, (xk, yk))| (e.g1_norm.powi(2) * yk.norm_sqr() + e.g2_norm.powi(2) * xk.norm_sqr()).sqrt())
            .sum()
    }

    pub fn inner_total(&self) -> usize {
        self.entries.iter().map(|e| e.dims_fwd + e.dims_adj).sum()
    }
}

/// Distribution of the entries of the random starting vector.
///
/// Uniform `(0, 1)` entries have a large component along smooth leading
/// singular vectors, which is what the outer iteration counts of the test
/// problems are calibrated against; standard normal entries are unbiased
/// but can need several times as many outer steps on those problems.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartVector {
    #[default]
    Uniform,
    Normal,
}

/// Seeded random vector (not normalized).
pub fn start_vector(n: usize, seed: u64, start: StartVector) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match start {
        StartVector::Uniform => (0..n).map(|_| C64::new(rng.random::<f64>(), 0.0)).collect(),
        StartVector::Normal => (0..n).map(|_| C64::new(StandardNormal.sample(&mut rng), 0.0)).collect(),
    }
}

/// Bases and projected blocks after `j` completed steps.
#[derive(Debug, Clone)]
pub struct BidiagState {
    /// `u_1..u_j`
    pub u: Vec<Vec<C64>>,
    /// `v_1..v_{j+1}` (only `v_1..v_j` after a breakdown)
    pub v: Vec<Vec<C64>>,
    /// column `k` of `M`, `k + 1` entries
    m_cols: Vec<Vec<C64>>,
    /// column `k` of `T`, `k + 2` entries
    t_cols: Vec<Vec<C64>>,
    pub ledger: InexactnessLedger,
    /// `f(A)* u_j` fell into the span of `V`, so `t_{j+1,j} = 0`.
    pub breakdown: bool,
    rng: ChaCha8Rng,
}

impl BidiagState {
    pub fn new(v1: Vec<C64>, seed: u64) -> Result<Self> {
        let nrm = norm(&v1);
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::InvalidArgument("starting vector must be finite and nonzero".into()));
        }
        let mut v1 = v1;
        scale(C64::new(1.0 / nrm, 0.0), &mut v1);
        Ok(Self {
            u: Vec::new(),
            v: vec![v1],
            m_cols: Vec::new(),
            t_cols: Vec::new(),
            ledger: InexactnessLedger::default(),
            breakdown: false,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
        })
    }

    /// Start from a seeded random vector.
    pub fn random_start(n: usize, seed: u64, start: StartVector) -> Result<Self> {
        Self::new(start_vector(n, seed, start), seed)
    }

    pub fn steps(&self) -> usize {
        self.m_cols.len()
    }

    pub fn dim(&self) -> usize {
        self.v[0].len()
    }

    /// Leading `j x j` block of `M`.
    pub fn m_matrix(&self, j: usize) -> DenseMatrix {
        DenseMatrix::from_fn(j, j, |r, c| if r <= c { self.m_cols[c][r] } else { ZERO })
    }

    /// Leading `(j + 1) x j` block of `T`.
    pub fn t_matrix(&self, j: usize) -> DenseMatrix {
        DenseMatrix::from_fn(j + 1, j, |r, c| if r <= c + 1 { self.t_cols[c][r] } else { ZERO })
    }

    /// `t_{j+1,j}` after `j` steps.
    pub fn t_next(&self, j: usize) -> C64 {
        self.t_cols[j - 1][j]
    }

    /// `[[0, M_j], [T_j(1..j, :), 0]]`.
    pub fn k_hat(&self, j: usize) -> DenseMatrix {
        let mut k = DenseMatrix::zeros(2 * j, 2 * j);
        k.set_block(0, j, &self.m_matrix(j));
        k.set_block(j, 0, &self.t_matrix(j).block(0, j, 0, j));
        k
    }

    fn random_orthogonal(&mut self, basis: &[Vec<C64>]) -> Vec<C64> {
        let n = self.dim();
        loop {
            let w: Vec<C64> = (0..n)
                .map(|_| C64::new(StandardNormal.sample(&mut self.rng), 0.0))
                .collect();
            if let Some(q) = rgs(w, basis).q {
                return q;
            }
        }
    }
}

/// One step of the inexact recurrence with tolerance `cfg.eps_inner`.
pub fn bidiag_step(
    state: &mut BidiagState,
    op: &dyn LinearOperator,
    f: MatFn,
    cfg: &InnerConfig,
) -> Result<()> {
    if state.breakdown {
        return Err(Error::InvalidArgument("bidiagonalization already broke down".into()));
    }
    if op.dim() != state.dim() {
        return Err(Error::Dimension(format!("operator {} vs vectors {}", op.dim(), state.dim())));
    }
    let j = state.steps();
    let vj = &state.v[j];
    let fwd = approx_fav(op, f, vj, cfg, false)?;
    let r = rgs(fwd.vector, &state.u);
    let mut m_col = r.coeffs;
    let uj = match r.q {
        Some(q) => q,
        None => {
            // f(A) v_j already lies in span(U): any new direction works with m_jj = 0
            m_col[j] = ZERO;
            let basis = state.u.clone();
            state.random_orthogonal(&basis)
        }
    };
    state.u.push(uj);
    state.m_cols.push(m_col);

    let adj = approx_fav(op, f, &state.u[j], cfg, true)?;
    let r = rgs(adj.vector, &state.v);
    let mut t_col = r.coeffs;
    match r.q {
        Some(q) => state.v.push(q),
        None => {
            t_col[j + 1] = ZERO;
            state.breakdown = true;
        }
    }
    state.t_cols.push(t_col);
    state.ledger.entries.push(LedgerEntry {
        g1_norm: fwd.err_estimate,
        g2_norm: adj.err_estimate,
        eps_requested: cfg.eps_inner,
        dims_fwd: fwd.dims_used,
        dims_adj: adj.dims_used,
        inner_converged: fwd.converged && adj.converged,
    });
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletEstimate {
    /// `|theta|`, the singular value estimate.
    pub theta: f64,
    /// The eigenvalue of `K` itself (principal member of its `+-` pair).
    pub eigenvalue: C64,
    /// `U x / ||x||`
    pub left: Vec<C64>,
    /// `V y / ||y||`
    pub right: Vec<C64>,
    /// Blocks of the unit eigenvector `q = [x; y]`.
    pub x: Vec<C64>,
    pub y: Vec<C64>,
    pub computed_residual: f64,
    pub gap_bound: f64,
    /// `(theta - theta_next) / theta` against the next estimate.
    pub theta_gap_second: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub triplets: Vec<TripletEstimate>,
    /// Spectrum of `K`, sorted by modulus (largest first).
    pub spectrum: Vec<C64>,
    /// Distance from the leading eigenvalue to the rest of the spectrum.
    pub delta: f64,
}

/// Eigenvalues of `[[0, M], [T, 0]]` for square `M`, `T`.
///
/// `K^2 = diag(M T, T M)` and `[x; -y]` is an eigenvector for `-theta` when
/// `[x; y]` is one for `theta`, so the spectrum is `+-sqrt(eig(M T))`.
/// Returns the principal roots sorted by modulus (ties: larger real part,
/// then larger imaginary part).
pub fn block_antidiagonal_roots(m: &DenseMatrix, t: &DenseMatrix) -> Result<Vec<C64>> {
    let mut roots: Vec<C64> = eigenvalues(&m.matmul(t))?.into_iter().map(|mu| mu.sqrt()).collect();
    roots.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    Ok(roots)
}

/// A few steps of inverse iteration on `a - shift I`.
fn inverse_iteration(a: &DenseMatrix, shift: C64) -> Result<Vec<C64>> {
    let n = a.rows();
    let scale_a = a.norm_fro().max(f64::MIN_POSITIVE);
    let mut pert = 1e2 * EPS * scale_a;
    let lu = loop {
        match DenseLu::new(&a.shifted(shift + pert)) {
            Ok(lu) => break lu,
            Err(Error::Singular { .. }) if pert < 1e-3 * scale_a => pert *= 1e3,
            Err(e) => return Err(e),
        }
    };
    let mut w: Vec<C64> = (0..n).map(|i| C64::new(1.0, (i as f64 * 0.7).sin() * 0.1)).collect();
    for _ in 0..3 {
        w = lu.solve(&w);
        let s = norm(&w);
        if !s.is_finite() || s == 0.0 {
            return Err(Error::NonFinite("inverse iteration"));
        }
        scale(C64::new(1.0 / s, 0.0), &mut w);
    }
    Ok(w)
}

/// Unit eigenvector `[x; y]` of `K` for `theta`.
fn k_eigenvector(m: &DenseMatrix, t: &DenseMatrix, theta: C64) -> Result<(Vec<C64>, Vec<C64>)> {
    let j = m.rows();
    let scale_k = m.norm_fro().max(t.norm_fro());
    if theta.norm() > 1e-8 * scale_k {
        // M T x = theta^2 x and y = T x / theta
        let x = inverse_iteration(&m.matmul(t), theta * theta)?;
        let y: Vec<C64> = t.matvec(&x).into_iter().map(|z| z / theta).collect();
        let s = (norm(&x).powi(2) + norm(&y).powi(2)).sqrt();
        let x = x.into_iter().map(|z| z / s).collect();
        let y = y.into_iter().map(|z| z / s).collect();
        Ok((x, y))
    } else {
        let mut k = DenseMatrix::zeros(2 * j, 2 * j);
        k.set_block(0, j, m);
        k.set_block(j, 0, t);
        let q = inverse_iteration(&k, theta)?;
        Ok((q[..j].to_vec(), q[j..].to_vec()))
    }
}

fn unit(mut w: Vec<C64>) -> Vec<C64> {
    let s = norm(&w);
    if s > 0.0 {
        scale(C64::new(1.0 / s, 0.0), &mut w);
    }
    w
}

/// Leading `num_triplets` estimates from the current state.
pub fn extract_leading(state: &BidiagState, num_triplets: usize) -> Result<Extraction> {
    let j = state.steps();
    if j == 0 {
        return Err(Error::InvalidArgument("no completed bidiagonalization step".into()));
    }
    let m = state.m_matrix(j);
    let t = state.t_matrix(j).block(0, j, 0, j);
    let roots = block_antidiagonal_roots(&m, &t)?;
    let mut spectrum = Vec::with_capacity(2 * j);
    for r in &roots {
        spectrum.push(*r);
        spectrum.push(-*r);
    }
    let lead = roots[0];
    let delta = spectrum
        .iter()
        .skip(1)
        .map(|z| (z - lead).norm())
        .fold(f64::INFINITY, f64::min);
    let t_next = state.t_next(j).norm();
    let mut triplets = Vec::new();
    for (i, &theta) in roots.iter().take(num_triplets.max(1)).enumerate() {
        let (x, y) = k_eigenvector(&m, &t, theta)?;
        let next = roots.get(i + 1).map_or(0.0, |r| r.norm());
        let abs = theta.norm();
        triplets.push(TripletEstimate {
            theta: abs,
            eigenvalue: theta,
            left: unit(combine(&state.u[..j], &x)),
            right: unit(combine(&state.v[..j], &y)),
            computed_residual: t_next * x[j - 1].norm(),
            gap_bound: state.ledger.gap_bound(&x, &y),
            theta_gap_second: if abs > 0.0 { (abs - next) / abs } else { 0.0 },
            x,
            y,
        });
    }
    Ok(Extraction {
        triplets,
        spectrum,
        delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub eps_out: f64,
    pub m_max: usize,
    pub method: InnerMethod,
    /// Fixed relative inner tolerance; `None` means `eps_out / m_max`.
    pub eps_inner: Option<f64>,
    pub relax: bool,
    pub lag: usize,
    pub max_inner_dim: usize,
    pub num_triplets: usize,
    pub seed: u64,
    pub start: StartVector,
}

pub const DEFAULT_M_MAX: usize = 500;

impl RunConfig {
    pub fn new(eps_out: f64) -> Self {
        Self {
            eps_out,
            m_max: DEFAULT_M_MAX,
            method: InnerMethod::StandardKrylov,
            eps_inner: None,
            relax: false,
            lag: DEFAULT_LAG,
            max_inner_dim: DEFAULT_MAX_DIM,
            num_triplets: 1,
            seed: 0,
            start: StartVector::Uniform,
        }
    }

    pub fn fixed_eps_inner(&self) -> f64 {
        self.eps_inner.unwrap_or(self.eps_out / self.m_max as f64)
    }

    pub fn inner_config(&self, eps_inner: f64) -> InnerConfig {
        InnerConfig {
            method: self.method,
            eps_inner,
            lag: self.lag,
            max_dim: self.max_inner_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_out > 0.0 && self.eps_out < 1.0) {
            return Err(Error::InvalidArgument(format!("eps_out must lie in (0, 1), got {}", self.eps_out)));
        }
        if self.m_max == 0 || self.num_triplets == 0 {
            return Err(Error::InvalidArgument("m_max and num_triplets must be positive".into()));
        }
        self.inner_config(self.fixed_eps_inner()).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    /// An invariant subspace was found; the estimates are exact up to the inner errors.
    Breakdown,
    MaxIterations,
    Aborted(String),
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub triplets: Vec<TripletEstimate>,
    pub outer_iters: usize,
    pub inner_total: usize,
    /// Inner dimensions per inner call (two calls per outer step).
    pub inner_avg: f64,
    pub ledger: InexactnessLedger,
    pub wall_time: f64,
    pub converged: bool,
    pub status: RunStatus,
    pub seed: u64,
    /// Inner tolerance issued at each step.
    pub eps_history: Vec<f64>,
    /// Leading `|theta|` after each step.
    pub sigma_history: Vec<f64>,
    /// Relative computed residual of the leading triplet after each step.
    pub residual_history: Vec<f64>,
    pub state: Option<BidiagState>,
}

impl RunReport {
    pub fn sigma(&self) -> f64 {
        self.triplets.first().map_or(f64::NAN, |t| t.theta)
    }

    pub fn rel_gap_second(&self) -> f64 {
        self.triplets.first().map_or(f64::NAN, |t| t.theta_gap_second)
    }

    pub fn gap_bound(&self) -> f64 {
        self.triplets.first().map_or(f64::NAN, |t| t.gap_bound)
    }
}

/// Run the bidiagonalization until the leading estimate satisfies
/// `|t_{j+1,j} x_j| / |theta| < eps_out` or `m_max` steps are done.
pub fn run(op: &dyn LinearOperator, f: MatFn, cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut state = BidiagState::random_start(op.dim(), cfg.seed, cfg.start)?;
    let mut eps_history = Vec::new();
    let mut sigma_history = Vec::new();
    let mut residual_history = Vec::new();
    let mut last: Option<Extraction> = None;
    let mut status = RunStatus::MaxIterations;

    for k in 1..=cfg.m_max {
        let eps_k = match (&last, cfg.relax) {
            (Some(prev), true) => {
                let lead = &prev.triplets[0];
                next_tolerance(k, lead.theta, prev.delta, lead.computed_residual, cfg.eps_out, cfg.m_max)
            }
            _ => cfg.fixed_eps_inner(),
        };
        eps_history.push(eps_k);
        let step = bidiag_step(&mut state, op, f, &cfg.inner_config(eps_k))
            .and_then(|_| extract_leading(&state, cfg.num_triplets));
        let ext = match step {
            Ok(ext) => ext,
            Err(e) => {
                status = RunStatus::Aborted(format!("step {k}: {e}"));
                break;
            }
        };
        let lead = &ext.triplets[0];
        let rel = if lead.theta > 0.0 {
            lead.computed_residual / lead.theta
        } else if lead.computed_residual == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        sigma_history.push(lead.theta);
        residual_history.push(rel);
        let breakdown = state.breakdown;
        last = Some(ext);
        if breakdown {
            status = RunStatus::Breakdown;
            break;
        }
        if rel < cfg.eps_out {
            status = RunStatus::Converged;
            break;
        }
    }

    let outer_iters = state.steps();
    let inner_total = state.ledger.inner_total();
    let calls = 2 * state.ledger.len();
    Ok(RunReport {
        triplets: last.map(|e| e.triplets).unwrap_or_default(),
        outer_iters,
        inner_total,
        inner_avg: if calls > 0 { inner_total as f64 / calls as f64 } else { 0.0 },
        ledger: state.ledger.clone(),
        wall_time: start.elapsed().as_secs_f64(),
        converged: matches!(status, RunStatus::Converged | RunStatus::Breakdown),
        status,
        seed: cfg.seed,
        eps_history,
        sigma_history,
        residual_history,
        state: Some(state),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::testutil::{random_matrix, random_real_matrix, unitary_defect};
    use crate::densela::{dense_matfun, eig_dense, svd_small};
    use crate::matrices::{a2, DenseOperator};
    use proptest::{prop_assert, proptest};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn exact_cfg(eps_out: f64, m_max: usize) -> RunConfig {
        let mut cfg = RunConfig::new(eps_out);
        cfg.m_max = m_max;
        cfg.eps_inner = Some(1e-14);
        cfg
    }

    #[test]
    fn rgs_projects_and_detects_span() {
        let e1 = vec![c(1.0), c(0.0), c(0.0)];
        let r = rgs(vec![c(3.0), c(4.0), c(0.0)], std::slice::from_ref(&e1));
        assert_eq!(r.coeffs.len(), 2);
        assert!((r.coeffs[0] - c(3.0)).norm() < 1e-15);
        assert!((r.coeffs[1] - c(4.0)).norm() < 1e-15);
        let q = r.q.unwrap();
        assert!((q[1] - c(1.0)).norm() < 1e-15 && q[0].norm() < 1e-15);

        let r = rgs(vec![c(2.0), c(0.0), c(0.0)], &[e1]);
        assert!(r.q.is_none());
        assert!(rgs(vec![c(0.0); 3], &[]).q.is_none());
    }

    #[test]
    fn antidiagonal_roots_of_small_blocks() {
        // M T = [[2, 1], [2, 2]] has eigenvalues 2 +- sqrt(2)
        let m = DenseMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 2.0]]);
        let t = DenseMatrix::from_real_rows(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let roots = block_antidiagonal_roots(&m, &t).unwrap();
        let s2 = 2f64.sqrt();
        assert!((roots[0] - c((2.0 + s2).sqrt())).norm() < 1e-14);
        assert!((roots[1] - c((2.0 - s2).sqrt())).norm() < 1e-14);
    }

    proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(32))]
        #[test]
        fn spectrum_comes_in_plus_minus_pairs(j in 1usize..9, seed in 0u64..1000) {
            let a = random_matrix(j, j, seed);
            let b = random_matrix(j, j, seed + 7);
            let m = DenseMatrix::from_fn(j, j, |r, col| if r <= col { a[(r, col)] } else { ZERO });
            let t = DenseMatrix::from_fn(j, j, |r, col| if r <= col + 1 { b[(r, col)] } else { ZERO });
            let mut k = DenseMatrix::zeros(2 * j, 2 * j);
            k.set_block(0, j, &m);
            k.set_block(j, 0, &t);
            let direct = eig_dense(&k).unwrap().values;
            let roots = block_antidiagonal_roots(&m, &t).unwrap();
            let scale = k.norm_fro();
            for z in &direct {
                // the negated eigenvalue belongs to the spectrum as well
                let dist = |w: C64| roots.iter().map(|r| (r - w).norm().min((r + w).norm())).fold(f64::INFINITY, f64::min);
                prop_assert!(dist(*z) < 1e-6 * scale, "{z} not among +-roots");
                let neg = direct.iter().map(|w| (w + z).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(neg < 1e-6 * scale);
            }
        }
    }

    #[test]
    fn scalar_operator_breaks_down_with_exact_value() {
        let op = DenseOperator::new(DenseMatrix::from_real_rows(&[&[2.0]])).unwrap();
        let r = run(&op, MatFn::Exp, &exact_cfg(1e-8, 10)).unwrap();
        assert_eq!(r.status, RunStatus::Breakdown);
        assert_eq!(r.outer_iters, 1);
        assert!((r.sigma() - 2f64.exp()).abs() < 1e-13 * 2f64.exp());
        assert!(r.converged);
    }

    #[test]
    fn exact_products_give_adjoint_blocks() {
        for n in [50, 200] {
            let op = a2(n).unwrap();
            let r = run(&op, MatFn::Exp, &exact_cfg(1e-10, 30)).unwrap();
            let st = r.state.as_ref().unwrap();
            let j = st.steps();
            let m = st.m_matrix(j);
            let t = st.t_matrix(j).block(0, j, 0, j);
            let defect = t.sub(&m.adjoint()).norm_fro();
            assert!(defect <= 1e-8 * m.norm_fro(), "n {n}: {defect:e}");
            assert_eq!(r.ledger.len(), r.outer_iters);
            assert_eq!(r.sigma_history.len(), r.outer_iters);
        }
    }

    #[test]
    fn exact_mode_sigma_is_monotone_and_bounded() {
        for n in [50, 200] {
            let op = a2(n).unwrap();
            let dense = dense_matfun(&op.to_dense(), MatFn::Exp).unwrap();
            let sigma1 = svd_small(&dense).unwrap().s[0];
            let r = run(&op, MatFn::Exp, &exact_cfg(1e-12, n)).unwrap();
            assert!(r.converged);
            for w in r.sigma_history.windows(2) {
                assert!(w[1] >= w[0] * (1.0 - 1e-12), "n {n}: {} then {}", w[0], w[1]);
            }
            assert!(r.sigma_history.iter().all(|&s| s <= sigma1 * (1.0 + 1e-12)));
            assert!((r.sigma() - sigma1).abs() < 1e-10 * sigma1, "n {n}: {} vs {sigma1} {:?} {}", r.sigma(), r.status, r.outer_iters);
        }
    }

    #[test]
    fn identity_function_matches_dense_svd() {
        let a = random_real_matrix(100, 100, 21);
        let sigma1 = svd_small(&a).unwrap().s[0];
        let op = DenseOperator::new(a).unwrap();
        let mut cfg = RunConfig::new(1e-8);
        cfg.m_max = 100;
        let r = run(&op, MatFn::Identity, &cfg).unwrap();
        assert!(r.converged);
        assert!((r.sigma() - sigma1).abs() < 1e-8 * sigma1);
    }

    #[test]
    fn bases_stay_orthonormal() {
        let op = a2(200).unwrap();
        let mut cfg = RunConfig::new(1e-8);
        cfg.m_max = 40;
        let r = run(&op, MatFn::Sqrt, &cfg).unwrap();
        let st = r.state.unwrap();
        let j = st.steps();
        let u = DenseMatrix::from_columns(&st.u).unwrap();
        let v = DenseMatrix::from_columns(&st.v).unwrap();
        assert!(unitary_defect(&u) <= 1e2 * j as f64 * EPS);
        assert!(unitary_defect(&v) <= 1e2 * (j + 1) as f64 * EPS);
    }

    #[test]
    fn inexact_estimates_obey_dominance_and_gap_bounds() {
        let op = a2(100).unwrap();
        let mut cfg = RunConfig::new(1e-6);
        cfg.m_max = 40;
        cfg.eps_inner = Some(1e-4);
        cfg.num_triplets = 3;
        let r = run(&op, MatFn::Exp, &cfg).unwrap();
        let st = r.state.as_ref().unwrap();
        let j = st.steps();
        let bound = 0.5
            * (svd_small(&st.m_matrix(j)).unwrap().s[0]
                + svd_small(&st.t_matrix(j).block(0, j, 0, j)).unwrap().s[0]);
        let worst: f64 = r.ledger.entries.iter().map(|e| e.g1_norm.max(e.g2_norm)).sum();
        for t in &r.triplets {
            assert!(t.theta <= bound * (1.0 + 1e-12));
            assert!(t.gap_bound <= worst * (1.0 + 1e-12));
        }
    }

    #[test]
    fn computed_residual_matches_adjoint_relation() {
        // with f(A) V = U M exactly, || f(A)* U x - theta V y || = |t_{j+1,j} x_j|
        let op = a2(80).unwrap();
        let fa = dense_matfun(&op.to_dense(), MatFn::Exp).unwrap();
        let r = run(&op, MatFn::Exp, &exact_cfg(1e-5, 30)).unwrap();
        let st = r.state.as_ref().unwrap();
        let t = &r.triplets[0];
        let ux = combine(&st.u, &t.x);
        let vy = combine(&st.v[..st.steps()], &t.y);
        let lhs = fa.matvec_adjoint(&ux);
        let res: Vec<C64> = lhs.iter().zip(&vy).map(|(a, b)| a - t.eigenvalue * b).collect();
        let true_res = norm(&res);
        assert!((true_res - t.computed_residual).abs() < 1e-10 * t.theta, "{true_res:e} vs {:e}", t.computed_residual);
    }

    #[test]
    fn same_seed_reproduces_the_run() {
        let op = a2(60).unwrap();
        let mut cfg = RunConfig::new(1e-6);
        cfg.seed = 11;
        let a = run(&op, MatFn::Sqrt, &cfg).unwrap();
        let b = run(&op, MatFn::Sqrt, &cfg).unwrap();
        assert_eq!(a.sigma_history, b.sigma_history);
        assert_eq!(a.inner_total, b.inner_total);
    }

    #[test]
    fn rejects_bad_configuration() {
        let op = a2(10).unwrap();
        assert!(run(&op, MatFn::Exp, &RunConfig::new(0.0)).is_err());
        let mut cfg = RunConfig::new(1e-3);
        cfg.m_max = 0;
        assert!(run(&op, MatFn::Exp, &cfg).is_err());
    }
}
