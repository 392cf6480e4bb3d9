use super::{c64, eig_dense, schur, DenseLu, DenseMatrix, EPS};
use crate::funcatalog::MatFn;
use crate::{Error, Result, C64};

/// Above this eigenvector condition number `f(H)` is evaluated through the
/// Schur form instead of `X f(Lambda) X^{-1}`.
pub const DIAGONALIZATION_KAPPA_MAX: f64 = 1e6;
/// Eigenvalues closer than `CLUSTER_FRACTION * ||H||_F` share a Parlett block.
pub const CLUSTER_FRACTION: f64 = 0.1;
/// Relative distance to the branch cut below which `f(H)` is refused.
pub const CUT_GUARD: f64 = 1e-12;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn lincomb(terms: &[(f64, &DenseMatrix)], n: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(n, n);
    for (c, m) in terms {
        out = out.add(&m.scaled(c64(*c)));
    }
    out
}

/// Matrix exponential by scaling and squaring with the degree-13 diagonal
/// Padé approximant; `H` is scaled so that `||H / 2^s||_1 <= 5.37`.
pub fn expm(h: &DenseMatrix) -> Result<DenseMatrix> {
    if !h.is_square() {
        return Err(Error::Dimension("expm of a non-square matrix".into()));
    }
    h.check_finite("expm")?;
    let n = h.rows();
    let norm = h.norm_1();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = h.scaled(c64(0.5f64.powi(s)));
    let id = DenseMatrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let b = &PADE13;
    let u_inner = a6
        .matmul(&lincomb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n))
        .add(&lincomb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2), (b[1], &id)], n));
    let u = a.matmul(&u_inner);
    let v = a6
        .matmul(&lincomb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n))
        .add(&lincomb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2), (b[0], &id)], n));
    let p = v.add(&u);
    let q = v.sub(&u);
    let mut r = DenseLu::new(&q)?.solve_matrix(&p);
    for _ in 0..s {
        r = r.matmul(&r);
    }
    Ok(r)
}

fn check_spectrum(f: MatFn, values: &[C64], scale: f64) -> Result<()> {
    if !f.has_branch_cut() {
        return Ok(());
    }
    for &lam in values {
        let d = f.distance_to_cut(lam);
        if d <= CUT_GUARD * scale || d == 0.0 {
            return Err(Error::SpectrumOnCut {
                function: f.token(),
                eigenvalue: lam,
                distance: d,
            });
        }
    }
    Ok(())
}

/// `f(H)` for a small dense `H`.
///
/// `exp` and `expneg` go through Padé scaling and squaring. The branch-cut
/// functions use `X f(Lambda) X^{-1}` when the eigenvector matrix is well
/// conditioned and the blocked Schur-Parlett recurrence otherwise.
pub fn dense_matfun(h: &DenseMatrix, f: MatFn) -> Result<DenseMatrix> {
    if !h.is_square() {
        return Err(Error::Dimension("dense_matfun of a non-square matrix".into()));
    }
    h.check_finite("dense_matfun")?;
    match f {
        MatFn::Identity => return Ok(h.clone()),
        MatFn::Exp => return expm(h),
        MatFn::ExpNeg => return expm(&h.scaled(c64(-1.0))),
        _ => {}
    }
    if h.rows() == 0 {
        return Ok(h.clone());
    }
    let scale = h.norm_fro();
    let eig = eig_dense(h)?;
    check_spectrum(f, &eig.values, scale)?;
    if eig.condition_estimate <= DIAGONALIZATION_KAPPA_MAX {
        let lu = DenseLu::new(&eig.vectors)?;
        let xinv = lu.inverse();
        let mut xf = eig.vectors.clone();
        for (j, lam) in eig.values.iter().enumerate() {
            let fl = f.eval(*lam)?;
            crate::vecops::scale(fl, xf.col_mut(j));
        }
        Ok(xf.matmul(&xinv))
    } else {
        schur_parlett(h, f)
    }
}

/// Blocked Schur-Parlett evaluation of `f(H)`.
pub(crate) fn schur_parlett(h: &DenseMatrix, f: MatFn) -> Result<DenseMatrix> {
    let s = schur(h)?;
    let scale = h.norm_fro();
    let diag = s.t.diagonal();
    check_spectrum(f, &diag, scale)?;
    let blocks = cluster_blocks(&diag, CLUSTER_FRACTION * scale);
    let ft = match block_parlett(&s.t, &blocks, f) {
        Ok(ft) => ft,
        // merge everything into one atomic block and retry
        Err(Error::Parlett(_)) if blocks.len() > 1 => {
            block_parlett(&s.t, &[(0, s.t.rows())], f)?
        }
        Err(e) => return Err(e),
    };
    Ok(s.q.matmul(&ft).matmul(&s.q.adjoint()))
}

/// Contiguous index ranges `[start, end)` such that eigenvalues closer than
/// `delta` (transitively) share a range.
pub(crate) fn cluster_blocks(diag: &[C64], delta: f64) -> Vec<(usize, usize)> {
    let n = diag.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for a in 0..n {
        for b in a + 1..n {
            if (diag[a] - diag[b]).norm() < delta {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
    }
    let mut span: Vec<(usize, usize)> = vec![(usize::MAX, 0); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        span[r].0 = span[r].0.min(i);
        span[r].1 = span[r].1.max(i + 1);
    }
    let mut spans: Vec<(usize, usize)> = span.into_iter().filter(|s| s.0 != usize::MAX).collect();
    spans.sort();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for s in spans {
        match merged.last_mut() {
            Some(last) if s.0 < last.1 => last.1 = last.1.max(s.1),
            _ => merged.push(s),
        }
    }
    merged
}

fn block_parlett(t: &DenseMatrix, blocks: &[(usize, usize)], f: MatFn) -> Result<DenseMatrix> {
    let n = t.rows();
    let nb = blocks.len();
    let tnorm = t.norm_fro();
    let blk = |i: usize, j: usize| t.block(blocks[i].0, blocks[i].1, blocks[j].0, blocks[j].1);
    let mut fb: Vec<Vec<Option<DenseMatrix>>> = vec![vec![None; nb]; nb];
    for (b, row) in fb.iter_mut().enumerate() {
        row[b] = Some(atomic_triangular(&blk(b, b), f)?);
    }
    for j in 0..nb {
        for i in (0..j).rev() {
            let tij = blk(i, j);
            let fii = fb[i][i].as_ref().unwrap();
            let fjj = fb[j][j].as_ref().unwrap();
            let mut rhs = fii.matmul(&tij).sub(&tij.matmul(fjj));
            for k in i + 1..j {
                let fik = fb[i][k].as_ref().unwrap();
                let fkj = fb[k][j].as_ref().unwrap();
                rhs = rhs.add(&fik.matmul(&blk(k, j))).sub(&blk(i, k).matmul(fkj));
            }
            let x = triangular_sylvester(&blk(i, i), &blk(j, j), &rhs, tnorm)?;
            fb[i][j] = Some(x);
        }
    }
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..nb {
        for j in i..nb {
            out.set_block(blocks[i].0, blocks[j].0, fb[i][j].as_ref().unwrap());
        }
    }
    Ok(out)
}

/// Solve `A X - X B = C` for upper triangular `A`, `B`.
fn triangular_sylvester(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    scale: f64,
) -> Result<DenseMatrix> {
    let (p, q) = (a.rows(), b.rows());
    let mut x = DenseMatrix::zeros(p, q);
    for col in 0..q {
        let mut r: Vec<C64> = c.col(col).to_vec();
        for l in 0..col {
            let blc = b[(l, col)];
            for i in 0..p {
                r[i] += x[(i, l)] * blc;
            }
        }
        let shift = b[(col, col)];
        for i in (0..p).rev() {
            let mut s = r[i];
            for k in i + 1..p {
                s -= a[(i, k)] * x[(k, col)];
            }
            let d = a[(i, i)] - shift;
            if d.norm() <= 1e2 * EPS * scale {
                return Err(Error::Parlett(format!(
                    "near-equal eigenvalues across blocks ({} vs {})",
                    a[(i, i)],
                    shift
                )));
            }
            x[(i, col)] = s / d;
        }
    }
    Ok(x)
}

fn triangular_sqrt(t: &DenseMatrix) -> DenseMatrix {
    let n = t.rows();
    let mut r = DenseMatrix::zeros(n, n);
    for j in 0..n {
        r[(j, j)] = t[(j, j)].sqrt();
        for i in (0..j).rev() {
            let mut s = t[(i, j)];
            for k in i + 1..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            r[(i, j)] = s / (r[(i, i)] + r[(j, j)]);
        }
    }
    r
}

fn triangular_inverse(t: &DenseMatrix) -> Result<DenseMatrix> {
    let n = t.rows();
    let mut x = DenseMatrix::zeros(n, n);
    for j in 0..n {
        if t[(j, j)].norm() == 0.0 {
            return Err(Error::Singular { index: j });
        }
        x[(j, j)] = t[(j, j)].inv();
        for i in (0..j).rev() {
            let mut s = C64::new(0.0, 0.0);
            for k in i + 1..=j {
                s += t[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = -s / t[(i, i)];
        }
    }
    Ok(x)
}

/// `f` on one upper triangular diagonal block of the Schur form.
fn atomic_triangular(t: &DenseMatrix, f: MatFn) -> Result<DenseMatrix> {
    match f {
        MatFn::Identity => Ok(t.clone()),
        MatFn::Exp => expm(t),
        MatFn::ExpNeg => expm(&t.scaled(c64(-1.0))),
        MatFn::Sqrt => Ok(triangular_sqrt(t)),
        MatFn::InvSqrt => triangular_inverse(&triangular_sqrt(t)),
        MatFn::Phi => {
            let s = triangular_sqrt(t);
            let e = expm(&s.scaled(c64(-1.0)))?;
            let em1 = e.sub(&DenseMatrix::identity(t.rows()));
            Ok(em1.matmul(&triangular_inverse(t)?))
        }
    }
}
