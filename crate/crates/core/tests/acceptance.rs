//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::time::Instant;

use matfun_norm::baselines::{exp_norm_bound, power_method};
use matfun_norm::densela::{dense_matfun, eig_dense, svd_small, DenseMatrix};
use matfun_norm::funcatalog::MatFn;
use matfun_norm::inner::{InnerConfig, InnerMethod};
use matfun_norm::matrices::{a2, a3, a5, build_operator, LinearOperator, MatrixSpec};
use matfun_norm::outer::{run, BidiagState, RunConfig, RunReport};
use matfun_norm::relax::verify_tau;
use matfun_norm::C64;

const EPS: f64 = f64::EPSILON;

/// Records its checks in the `Check`; returns a reason when part of it was skipped.
type Criterion = fn(&mut Check) -> Option<String>;

enum Outcome {
    Pass,
    Fail,
    Skip(String),
}

struct Check {
    notes: Vec<String>,
    failed: bool,
}

impl Check {
    fn new() -> Self {
        Self {
            notes: Vec::new(),
            failed: false,
        }
    }

    fn expect(&mut self, ok: bool, note: String) {
        self.notes.push(format!("{} {note}", if ok { "ok  " } else { "FAIL" }));
        self.failed |= !ok;
    }

    fn info(&mut self, note: String) {
        self.notes.push(format!("     {note}"));
    }

    fn outcome(&self) -> Outcome {
        if self.failed {
            Outcome::Fail
        } else {
            Outcome::Pass
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn combine(basis: &[Vec<C64>], c: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); basis[0].len()];
    for (b, ck) in basis.iter().zip(c) {
        for (o, bi) in out.iter_mut().zip(b) {
            *o += ck * bi;
        }
    }
    out
}

fn cfg(eps_out: f64, m_max: usize) -> RunConfig {
    let mut c = RunConfig::new(eps_out);
    c.m_max = m_max;
    c
}

fn dense_sigma1(op: &dyn LinearOperator, f: MatFn) -> f64 {
    svd_small(&dense_matfun(&op.to_dense(), f).unwrap()).unwrap().s[0]
}

fn unitary_defect(cols: &[Vec<C64>]) -> f64 {
    let q = DenseMatrix::from_columns(cols).unwrap();
    q.adjoint().matmul(&q).sub(&DenseMatrix::identity(q.cols())).norm_fro()
}

fn reference_values(c: &mut Check) -> Option<String> {
    let cases: [(&str, f64, f64, f64, usize); 4] = [
        ("A2", 1e-2, 12.1783, 5e-3, 5),
        ("A2", 1e-4, 12.1825, 5e-4, 47),
        ("A5", 1e-4, 2975.18, 5e-3, 55),
        ("A3", 1e-4, 6.77296e8, 1e-3, 183),
    ];
    for (name, eps, want, tol, ref_outer) in cases {
        let op = build_operator(&name.parse::<MatrixSpec>().unwrap()).unwrap();
        let r = run(op.as_ref(), MatFn::Exp, &cfg(eps, 1000)).unwrap();
        c.expect(
            r.converged && rel(r.sigma(), want) <= tol,
            format!("{name}/exp eps {eps:.0e}: sigma {:.6e} vs {want:e} (rel {:.1e} <= {tol:.0e})", r.sigma(), rel(r.sigma(), want)),
        );
        c.expect(
            r.outer_iters <= 2 * ref_outer && 2 * r.outer_iters >= ref_outer,
            format!("{name}/exp eps {eps:.0e}: {} outer steps vs {ref_outer} (within 2x), {:.2} s", r.outer_iters, r.wall_time),
        );
        if name == "A2" && eps == 1e-2 {
            c.expect(r.wall_time < 60.0, format!("A2/exp eps 1e-2 runtime {:.2} s < 60 s", r.wall_time));
        }
    }
    None
}

fn power_cross_check(c: &mut Check) -> Option<String> {
    let eps = 1e-2;
    let inner = InnerConfig::new(InnerMethod::StandardKrylov, eps / 100.0);
    let mut more_expensive = 0;
    let mut pairs = 0;
    for name in ["A2", "A3", "A5"] {
        let op = build_operator(&name.parse::<MatrixSpec>().unwrap()).unwrap();
        let p = power_method(op.as_ref(), MatFn::Exp, eps, 1000, &inner, 0).unwrap();
        let b = run(op.as_ref(), MatFn::Exp, &cfg(eps, 1000)).unwrap();
        pairs += 1;
        if p.outer_iters >= b.outer_iters {
            more_expensive += 1;
        }
        c.info(format!(
            "{name}/exp: power sigma {:.6e} in {} steps ({} inner), bidiagonalization {} steps ({} inner)",
            p.sigma(),
            p.outer_iters,
            p.inner_total,
            b.outer_iters,
            b.inner_total
        ));
        if name == "A2" {
            c.expect(
                p.converged && rel(p.sigma(), 12.176) <= 1e-2,
                format!("A2/exp power sigma {:.6} vs 12.176 (rel {:.1e} <= 1e-2)", p.sigma(), rel(p.sigma(), 12.176)),
            );
        }
    }
    // the fourth pair needs the A4 file; one exception is allowed among the pairs run
    c.expect(
        more_expensive + 1 >= pairs,
        format!("power needs at least as many outer steps on {more_expensive} of {pairs} pairs (A4 absent)"),
    );
    None
}

fn oracle_equivalence(c: &mut Check) -> Option<String> {
    let funcs = [MatFn::Exp, MatFn::ExpNeg, MatFn::Sqrt, MatFn::InvSqrt, MatFn::Phi];
    let mut worst: f64 = 0.0;
    for (n, grid_n) in [(50, 49), (100, 100), (200, 196)] {
        let ops: [(String, Box<dyn LinearOperator>); 2] = [
            (format!("A2 n={n}"), Box::new(a2(n).unwrap())),
            (format!("A5 n={grid_n}"), Box::new(a5(grid_n).unwrap())),
        ];
        for (label, op) in &ops {
            for f in funcs {
                let want = dense_sigma1(op.as_ref(), f);
                let mut rc = cfg(1e-6, op.dim());
                rc.eps_inner = Some(1e-10);
                let r = run(op.as_ref(), f, &rc).unwrap();
                let e = rel(r.sigma(), want);
                worst = worst.max(e);
                if !(r.converged && e <= 1e-5) {
                    c.expect(false, format!("{label} {f}: sigma {:.10e} vs {want:.10e} ({:?})", r.sigma(), r.status));
                }
            }
        }
    }
    c.expect(!c.failed, format!("30 runs within 1e-5 relative of the dense SVD (worst {worst:.1e})"));
    None
}

/// `|| [f(A) V y - theta U x; f(A)* U x - theta V y - t x_m v_{m+1}] ||` with dense `f(A)`.
fn residual_gap(fa: &DenseMatrix, st: &BidiagState, r: &RunReport) -> f64 {
    let t = &r.triplets[0];
    let m = st.steps();
    let ux = combine(&st.u, &t.x);
    let vy = combine(&st.v[..m], &t.y);
    let top: Vec<C64> = fa.matvec(&vy).iter().zip(&ux).map(|(a, b)| a - t.eigenvalue * b).collect();
    let tx = st.t_next(m) * t.x[m - 1];
    let bottom: Vec<C64> = fa
        .matvec_adjoint(&ux)
        .iter()
        .zip(&vy)
        .enumerate()
        .map(|(i, (a, b))| a - t.eigenvalue * b - st.v.get(m).map_or(C64::new(0.0, 0.0), |v| tx * v[i]))
        .collect();
    (norm(&top).powi(2) + norm(&bottom).powi(2)).sqrt()
}

fn gap_accounting(c: &mut Check) -> Option<String> {
    let op = a2(200).unwrap();
    let fa = dense_matfun(&op.to_dense(), MatFn::Exp).unwrap();
    for eps in [1e-4, 1e-6] {
        let m_max = op.dim();
        let mut rc = cfg(eps, m_max);
        // relative inner tolerance eps / m_max keeps every ||g|| / sigma below eps / m
        rc.eps_inner = Some(eps / m_max as f64);
        let r = run(&op, MatFn::Exp, &rc).unwrap();
        let st = r.state.as_ref().unwrap();
        let sigma = r.sigma();
        let m = r.outer_iters;
        let worst = r.ledger.entries.iter().map(|e| e.g1_norm.max(e.g2_norm)).fold(0.0, f64::max) / sigma;
        c.expect(worst < eps / m as f64, format!("eps {eps:.0e}: max ledger entry / sigma {worst:.1e} < eps/m = {:.1e}", eps / m as f64));
        let gap = residual_gap(&fa, st, &r) / sigma;
        c.expect(r.converged && gap < eps, format!("eps {eps:.0e}: reconciled residual gap / sigma {gap:.1e} < {eps:.0e} ({m} steps)"));
        c.info(format!("eps {eps:.0e}: gap bound / sigma {:.1e}", r.gap_bound() / sigma));
    }
    None
}

fn relaxation(c: &mut Check) -> Option<String> {
    let op = a5(2500).unwrap();
    let mut fixed = cfg(1e-7, 50);
    fixed.method = InnerMethod::ExtendedKrylov;
    let relaxed = RunConfig { relax: true, ..fixed };
    let rf = run(&op, MatFn::InvSqrt, &fixed).unwrap();
    let rr = run(&op, MatFn::InvSqrt, &relaxed).unwrap();
    c.info(format!(
        "fixed: sigma {:.10e}, {} outer, {} inner; relaxed: sigma {:.10e}, {} outer, {} inner",
        rf.sigma(),
        rf.outer_iters,
        rf.inner_total,
        rr.sigma(),
        rr.outer_iters,
        rr.inner_total
    ));
    let h = &rr.eps_history;
    let tail = &h[h.len().saturating_sub(3)..];
    c.expect(
        rr.converged && tail.windows(2).all(|w| w[1] >= w[0]),
        format!("issued tolerances over the last 3 steps non-decreasing: {tail:?}"),
    );
    c.expect(
        rf.converged && rel(rr.sigma(), rf.sigma()) <= 1e-6,
        format!("relaxed vs fixed sigma rel {:.1e} <= 1e-6", rel(rr.sigma(), rf.sigma())),
    );
    c.expect(
        rr.inner_total < rf.inner_total,
        format!("relaxed inner total {} < fixed {}", rr.inner_total, rf.inner_total),
    );
    None
}

fn tau_diagnostic(c: &mut Check) -> Option<String> {
    let op = a5(196).unwrap();
    let r = run(&op, MatFn::Sqrt, &cfg(1e-6, 196)).unwrap();
    let st = r.state.as_ref().unwrap();
    let m = st.steps();
    let k = m - 1;
    let kk = st.k_hat(k);
    let e = eig_dense(&kk).unwrap();
    let lead = (0..2 * k)
        .max_by(|&a, &b| {
            let (za, zb) = (e.values[a], e.values[b]);
            za.norm().total_cmp(&zb.norm()).then(za.re.total_cmp(&zb.re))
        })
        .unwrap();
    let q = e.vectors.col(lead);
    let s = norm(q);
    let q: Vec<C64> = q.iter().map(|z| z / s).collect();
    let d = verify_tau(&st.k_hat(m), k, e.values[lead], &q, Some(1e-10)).unwrap();
    c.info(format!("A5 n=196 sqrt: m = {m}, {d:?}"));
    c.expect(r.converged && d.condition_ok, format!("condition r < delta^2/(4s): r {:.1e}, delta {:.1e}, s {:.1e}", d.r_norm, d.delta_true, d.s_norm));
    c.expect(d.tail_ok == Some(true), format!("tail {:?} <= tau/sqrt(1+tau^2) with tau <= {:.1e}", d.tail_norm, d.tau_bound));
    c.expect(d.shift_ok == Some(true), format!("theta shift {:?} <= s tau", d.theta_shift));
    None
}

fn exp_bound(c: &mut Check) -> Option<String> {
    let ops: [(&str, Box<dyn LinearOperator>); 3] =
        [("A2", Box::new(a2(10000).unwrap())), ("A3", Box::new(a3(10000).unwrap())), ("A5", Box::new(a5(10000).unwrap()))];
    for (name, op) in &ops {
        for (sign, f) in [(1.0, MatFn::Exp), (-1.0, MatFn::ExpNeg)] {
            let b = exp_norm_bound(op.as_ref(), sign).unwrap();
            let eps = 1e-4;
            let r = run(op.as_ref(), f, &cfg(eps, 1000)).unwrap();
            c.expect(
                b.converged && r.converged && b.bound >= r.sigma() * (1.0 - eps),
                format!("{name} sign {sign:+}: bound {:.4e} >= ||exp|| {:.4e} (ratio {:.2})", b.bound, r.sigma(), b.bound / r.sigma()),
            );
        }
    }
    let path = Path::new("e20r1000.mtx");
    (!path.exists()).then(|| "A4 (e20r1000.mtx) not available; the bound/true ratio check was not run".to_string())
}

fn structural(c: &mut Check) -> Option<String> {
    for n in [50, 200] {
        let op = a2(n).unwrap();
        let mut exact = cfg(1e-12, n);
        exact.eps_inner = Some(1e-14);
        let r = run(&op, MatFn::Exp, &exact).unwrap();
        let st = r.state.as_ref().unwrap();
        let j = st.steps();
        let m = st.m_matrix(j);
        let t = st.t_matrix(j).block(0, j, 0, j);
        let defect = t.sub(&m.adjoint()).norm_fro() / m.norm_fro();
        c.expect(defect <= 1e-8, format!("n {n}: exact-mode ||T - M^T|| / ||M|| = {defect:.1e} <= 1e-8"));
        let monotone = r.sigma_history.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e3 * EPS));
        c.expect(monotone, format!("n {n}: exact-mode sigma non-decreasing over {j} steps"));

        let mut inexact = cfg(1e-8, n);
        inexact.eps_inner = Some(1e-6);
        let op5 = a5(if n == 50 { 49 } else { 196 }).unwrap();
        for (label, op) in [("A2", &op as &dyn LinearOperator), ("A5", &op5)] {
            let r = run(op, MatFn::Sqrt, &inexact).unwrap();
            let st = r.state.as_ref().unwrap();
            let j = st.steps();
            let k = st.k_hat(j);
            let vals = eig_dense(&k).unwrap().values;
            let scale = k.norm_fro();
            let pairing = vals
                .iter()
                .map(|z| vals.iter().map(|w| (w + z).norm()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
                / scale;
            c.expect(pairing < 1e-8, format!("n {n} {label}: +- pairing defect {pairing:.1e}"));
            let du = unitary_defect(&st.u);
            let dv = unitary_defect(&st.v);
            let bound = 1e2 * (j + 1) as f64 * EPS;
            c.expect(du <= bound && dv <= bound, format!("n {n} {label}: orthonormality U {du:.1e}, V {dv:.1e} <= {bound:.1e}"));
        }
    }
    None
}

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("reference values at n = 10000", reference_values),
        ("power-method cross-check", power_cross_check),
        ("dense-oracle equivalence", oracle_equivalence),
        ("residual-gap accounting", gap_accounting),
        ("relaxed inner tolerances", relaxation),
        ("eigenvector-tail diagnostic", tau_diagnostic),
        ("Hermitian-part exponential bound", exp_bound),
        ("structural invariants", structural),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let mut c = Check::new();
        let start = Instant::now();
        let skipped = f(&mut c);
        let outcome = match (c.outcome(), skipped) {
            (Outcome::Pass, Some(reason)) => Outcome::Skip(reason),
            (o, _) => o,
        };
        for note in &c.notes {
            println!("    {note}");
        }
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Outcome::Pass => println!("PASS [{}] {name} ({secs:.1} s)", i + 1),
            Outcome::Fail => {
                failures += 1;
                println!("FAIL [{}] {name} ({secs:.1} s)", i + 1);
            }
            Outcome::Skip(reason) => println!("PASS [{}] {name}; partial SKIP: {reason} ({secs:.1} s)", i + 1),
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
