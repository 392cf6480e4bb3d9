//! Operators `A` consumed by the solvers, the five test families and a
//! Matrix Market reader.
//!
//! Every operator offers exact forward and adjoint products plus a cached LU
//! factorization, built on first use, for the extended Krylov inner solver.
//! The test families are:
//!
//! * `A1 = tridiag(0, lambda_i, 0.3)`, `lambda_i = (1 + rho1_i) + i (rho2_i - 0.5)`,
//!   with `rho` uniform on `[0, 1)` drawn from `ChaCha8Rng::seed_from_u64(seed)`
//!   (all `rho1` first, then all `rho2`).
//! * `A2 = tridiag(1.5, 2, -1)` (sub-, main and superdiagonal).
//! * `A3`, Toeplitz with `4` on offset `-7`, `-2` on `-2`, `10` on the diagonal, `6` on `+4`.
//! * `A4`, a Matrix Market file plus `shift * I`.
//! * `A5`, centered differences for `-lap(u) - 100 u_x - 100 u_y` on the unit
//!   square with Dirichlet conditions, `g x g` interior grid, `h = 1/(g+1)`,
//!   lexicographic ordering with `x` fastest. Rows are multiplied by `h^2`, so
//!   the diagonal is `4` and the neighbours are `-1 -+ 50h`.

mod market;
mod operators;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use market::{parse_matrix_market, read_matrix_market, MarketMatrix};
pub use operators::{BandedOperator, CsrOperator, DenseOperator};

use crate::densela::{DenseMatrix, Factorization};
use crate::{Error, Result, C64};

/// Storage class of an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Tridiagonal,
    Banded { lower: usize, upper: usize },
    GeneralSparse,
    Dense,
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Tridiagonal => write!(f, "tridiagonal"),
            Structure::Banded { lower, upper } => write!(f, "banded({lower},{upper})"),
            Structure::GeneralSparse => write!(f, "general-sparse"),
            Structure::Dense => write!(f, "dense"),
        }
    }
}

/// A square complex matrix known through its action.
pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64>;
    fn structure(&self) -> Structure;
    /// LU factors, computed once and then shared.
    fn factorization(&self) -> Result<&Factorization>;
    fn norm_fro(&self) -> f64;
    fn to_dense(&self) -> DenseMatrix;

    /// Solve `A x = b`, or `A* x = b` when `adjoint` is set.
    fn solve(&self, b: &[C64], adjoint: bool) -> Result<Vec<C64>> {
        Ok(self.factorization()?.solve(b, adjoint))
    }
}

pub type Operator = Arc<dyn LinearOperator>;

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixKind {
    A1,
    A2,
    A3,
    A4 { path: PathBuf },
    A5,
    File { path: PathBuf },
    Dense(DenseMatrix),
}

/// Recipe for one operator. `n` is ignored for file and dense kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSpec {
    pub kind: MatrixKind,
    pub n: usize,
    pub seed: u64,
    pub shift: f64,
}

pub const DEFAULT_N: usize = 10_000;
pub const DEFAULT_A4_SHIFT: f64 = 10.0;
pub const DEFAULT_A4_PATH: &str = "e20r1000.mtx";

impl MatrixSpec {
    pub fn new(kind: MatrixKind, n: usize) -> Self {
        let shift = if matches!(kind, MatrixKind::A4 { .. }) {
            DEFAULT_A4_SHIFT
        } else {
            0.0
        };
        Self {
            kind,
            n,
            seed: 0,
            shift,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    /// Short name used in reports.
    pub fn label(&self) -> String {
        match &self.kind {
            MatrixKind::A1 => "A1".into(),
            MatrixKind::A2 => "A2".into(),
            MatrixKind::A3 => "A3".into(),
            MatrixKind::A4 { .. } => "A4".into(),
            MatrixKind::A5 => "A5".into(),
            MatrixKind::File { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into()),
            MatrixKind::Dense(_) => "dense".into(),
        }
    }

    /// Whether the operator is fully determined by the spec (no RNG, no file).
    pub fn is_deterministic(&self) -> bool {
        matches!(self.kind, MatrixKind::A2 | MatrixKind::A3 | MatrixKind::A5)
    }
}

/// Parses `NAME[:key=value]...`, e.g. `A5:n=10000`, `A1:n=1000:seed=3`,
/// `A4:path=e20r1000.mtx:shift=10` or `file:path=m.mtx`.
impl FromStr for MatrixSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or("").trim().to_ascii_lowercase();
        let mut n = DEFAULT_N;
        let mut seed = None;
        let mut shift = None;
        let mut path = None;
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected key=value in {s:?}, got {part:?}")))?;
            let bad = || Error::InvalidArgument(format!("bad value for {key} in {s:?}"));
            match key.trim() {
                "n" => n = value.parse().map_err(|_| bad())?,
                "seed" => seed = Some(value.parse().map_err(|_| bad())?),
                "shift" => shift = Some(value.parse().map_err(|_| bad())?),
                "path" => path = Some(PathBuf::from(value)),
                other => return Err(Error::InvalidArgument(format!("unknown key {other:?} in {s:?}"))),
            }
        }
        let kind = match name.as_str() {
            "a1" => MatrixKind::A1,
            "a2" => MatrixKind::A2,
            "a3" => MatrixKind::A3,
            "a4" => MatrixKind::A4 {
                path: path.unwrap_or_else(|| PathBuf::from(DEFAULT_A4_PATH)),
            },
            "a5" => MatrixKind::A5,
            "file" => MatrixKind::File {
                path: path.ok_or_else(|| Error::InvalidArgument(format!("{s:?}: file needs path=")))?,
            },
            _ => return Err(Error::InvalidArgument(format!("unknown matrix {s:?}"))),
        };
        let mut spec = MatrixSpec::new(kind, n);
        if let Some(seed) = seed {
            spec.seed = seed;
        }
        if let Some(shift) = shift {
            spec.shift = shift;
        }
        Ok(spec)
    }
}

pub fn build_operator(spec: &MatrixSpec) -> Result<Operator> {
    let n = spec.n;
    if n == 0 && !matches!(spec.kind, MatrixKind::A4 { .. } | MatrixKind::File { .. } | MatrixKind::Dense(_)) {
        return Err(Error::Dimension("n must be positive".into()));
    }
    Ok(match &spec.kind {
        MatrixKind::A1 => Arc::new(a1(n, spec.seed)?),
        MatrixKind::A2 => Arc::new(a2(n)?),
        MatrixKind::A3 => Arc::new(a3(n)?),
        MatrixKind::A5 => Arc::new(a5(n)?),
        MatrixKind::A4 { path } | MatrixKind::File { path } => {
            Arc::new(from_market(&read_matrix_market(path)?, spec.shift)?)
        }
        MatrixKind::Dense(a) => {
            let a = if spec.shift != 0.0 {
                a.shifted(C64::new(-spec.shift, 0.0))
            } else {
                a.clone()
            };
            Arc::new(DenseOperator::new(a)?)
        }
    })
}

pub fn a1(n: usize, seed: u64) -> Result<BandedOperator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho1: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let rho2: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let diag = rho1
        .iter()
        .zip(&rho2)
        .map(|(r1, r2)| C64::new(1.0 + r1, r2 - 0.5))
        .collect();
    let mut diags = vec![(0, diag)];
    if n > 1 {
        diags.push((1, vec![C64::new(0.3, 0.0); n]));
    }
    BandedOperator::new(n, diags)
}

pub fn a2(n: usize) -> Result<BandedOperator> {
    let r = |x: f64| C64::new(x, 0.0);
    BandedOperator::toeplitz(n, &[(-1, r(1.5)), (0, r(2.0)), (1, r(-1.0))])
}

pub fn a3(n: usize) -> Result<BandedOperator> {
    let r = |x: f64| C64::new(x, 0.0);
    BandedOperator::toeplitz(n, &[(-7, r(4.0)), (-2, r(-2.0)), (0, r(10.0)), (4, r(6.0))])
}

pub fn a5(n: usize) -> Result<BandedOperator> {
    let g = (n as f64).sqrt().round() as usize;
    if g * g != n {
        return Err(Error::Dimension(format!("A5 needs a perfect square n, got {n}")));
    }
    let h = 1.0 / (g as f64 + 1.0);
    let forward = C64::new(-1.0 - 50.0 * h, 0.0);
    let backward = C64::new(-1.0 + 50.0 * h, 0.0);
    let zero = C64::new(0.0, 0.0);
    let east = (0..n).map(|p| if p % g + 1 < g { forward } else { zero }).collect();
    let west = (0..n).map(|p| if p % g > 0 { backward } else { zero }).collect();
    let mut diags = vec![(0, vec![C64::new(4.0, 0.0); n])];
    if g > 1 {
        diags.push((1, east));
        diags.push((-1, west));
        diags.push((g as isize, vec![forward; n]));
        diags.push((-(g as isize), vec![backward; n]));
    }
    BandedOperator::new(n, diags)
}

/// Sparse operator from file data plus `shift * I`.
pub fn from_market(m: &MarketMatrix, shift: f64) -> Result<CsrOperator> {
    if m.rows != m.cols {
        return Err(Error::Dimension(format!("matrix is {}x{}, not square", m.rows, m.cols)));
    }
    let mut entries = m.entries.clone();
    if shift != 0.0 {
        let mut on_diag = vec![false; m.rows];
        for e in entries.iter_mut().filter(|e| e.0 == e.1) {
            e.2 += shift;
            on_diag[e.0] = true;
        }
        entries.extend(
            (0..m.rows)
                .filter(|&i| !on_diag[i])
                .map(|i| (i, i, C64::new(shift, 0.0))),
        );
    }
    CsrOperator::from_triplets(m.rows, entries)
}
