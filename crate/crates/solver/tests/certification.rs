//! Solver certification against an independent KKT residual evaluator.
//!
//! The residual code below recomputes stationarity, primal/dual feasibility,
//! cone membership and complementarity from the raw certificate vectors using
//! its own arithmetic; it never calls back into the solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vhetnet_solver::{
    solve_misocp, solve_socp, AffExpr, ConicProgram, MisocpOptions, SolveStatus,
    StandardCertificate,
};

const KKT_TOL: f64 = 1e-6;

/// Independent KKT residual check of a standard-form certificate:
/// max of stationarity, primal equality/cone feasibility, dual cone
/// membership violation and complementarity, all relatively scaled.
fn kkt_residual(cert: &StandardCertificate) -> f64 {
    let f = &cert.form;
    let n = f.c.len();
    let (x, y, z, s) = (&cert.x, &cert.y, &cert.z, &cert.s);

    let norm_inf = |v: &[f64]| v.iter().fold(0.0f64, |m, t| m.max(t.abs()));

    // stationarity: c + A^T y + G^T z = 0, relative to the largest
    // participating term (backward-error normalization)
    let mut aty = vec![0.0; n];
    for i in 0..f.a.n_rows {
        let (cols, vals) = f.a.row(i);
        for (c, v) in cols.iter().zip(vals) {
            aty[*c] += v * y[i];
        }
    }
    let mut gtz = vec![0.0; n];
    for i in 0..f.g.n_rows {
        let (cols, vals) = f.g.row(i);
        for (c, v) in cols.iter().zip(vals) {
            gtz[*c] += v * z[i];
        }
    }
    let stat: Vec<f64> = (0..n).map(|j| f.c[j] + aty[j] + gtz[j]).collect();
    let dres = norm_inf(&stat)
        / norm_inf(&f.c).max(norm_inf(&aty)).max(norm_inf(&gtz)).max(1.0);

    // primal feasibility
    let mut peq = 0.0f64;
    let mut ax_norm = 0.0f64;
    for i in 0..f.a.n_rows {
        let (cols, vals) = f.a.row(i);
        let ax: f64 = cols.iter().zip(vals).map(|(c, v)| v * x[*c]).sum();
        ax_norm = ax_norm.max(ax.abs());
        peq = peq.max((ax - f.b[i]).abs());
    }
    peq /= norm_inf(&f.b).max(ax_norm).max(1.0);
    let mut pin = 0.0f64;
    let mut gx_norm = 0.0f64;
    for i in 0..f.g.n_rows {
        let (cols, vals) = f.g.row(i);
        let gx: f64 = cols.iter().zip(vals).map(|(c, v)| v * x[*c]).sum();
        gx_norm = gx_norm.max(gx.abs());
        pin = pin.max((gx + s[i] - f.h[i]).abs());
    }
    pin /= norm_inf(&f.h).max(gx_norm).max(norm_inf(s)).max(1.0);

    // cone membership for s and z (the cone is self-dual)
    let mut cone_viol = 0.0f64;
    for v in [s, z] {
        for i in 0..f.dims.nonneg {
            cone_viol = cone_viol.max(-v[i]);
        }
        let mut off = f.dims.nonneg;
        for &dim in &f.dims.socs {
            let head = v[off];
            let tail: f64 = v[off + 1..off + dim].iter().map(|t| t * t).sum::<f64>().sqrt();
            cone_viol = cone_viol.max(tail - head);
            off += dim;
        }
    }
    let scale = norm_inf(s).max(norm_inf(z)).max(1.0);
    cone_viol /= scale;

    // complementarity
    let gap: f64 = s.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
    let pcost: f64 = f.c.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let dcost: f64 = -f.b.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>()
        - f.h.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>();
    let relgap = gap.abs() / pcost.abs().min(dcost.abs()).max(1.0);

    dres.max(peq).max(pin).max(cone_viol).max(relgap)
}

/// Random feasible SOCP with a known strictly feasible primal-dual pair:
/// pick x0 and interior s0, set h = G x0 + s0 and b = A x0; pick interior z0
/// and free y0, set the objective to -(A^T y0 + G^T z0) so the dual is
/// feasible too. Strong duality then guarantees an attained optimum.
fn random_feasible_socp(rng: &mut ChaCha8Rng) -> ConicProgram {
    let n = rng.random_range(4..12);
    let mut p = ConicProgram::new();
    for j in 0..n {
        p.add_var(format!("x{j}"), None, None);
    }
    let dense_expr = |rng: &mut ChaCha8Rng, n: usize| {
        let mut e = AffExpr::constant(0.0);
        for j in 0..n {
            if rng.random_bool(0.6) {
                e.push(j, rng.random_range(-2.0..2.0));
            }
        }
        e
    };
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

    // a couple of equalities through x0
    let n_eq = rng.random_range(0..3);
    for _ in 0..n_eq {
        let e = dense_expr(rng, n);
        if e.terms.is_empty() {
            continue;
        }
        let rhs = e.eval(&x0);
        p.add_eq(e.terms.clone(), rhs);
    }

    // linear inequalities with slack at x0
    for _ in 0..rng.random_range(2..6) {
        let e = dense_expr(rng, n);
        if e.terms.is_empty() {
            continue;
        }
        let rhs = e.eval(&x0) + rng.random_range(0.1..2.0);
        p.add_le(e.terms.clone(), rhs);
    }

    // second-order cones with interior slack at x0
    for _ in 0..rng.random_range(1..4) {
        let dim = rng.random_range(2..6);
        let mut exprs = Vec::with_capacity(dim);
        let mut tail_sq = 0.0;
        let mut tails = Vec::new();
        for _ in 1..dim {
            let e = dense_expr(rng, n);
            let v = e.eval(&x0);
            tail_sq += v * v;
            tails.push(e);
        }
        // head expression with margin above the tail norm at x0
        let mut head = dense_expr(rng, n);
        let margin = rng.random_range(0.2..1.5);
        head.constant = tail_sq.sqrt() + margin - (head.eval(&x0) - head.constant);
        exprs.push(head);
        exprs.extend(tails);
        p.add_soc(exprs);
    }

    // dual-feasible objective: maximize obj = -c where
    // c = -(A^T y0 + G^T z0) for interior multipliers
    let sf = p.to_standard_form();
    let mut c = vec![0.0; n];
    for i in 0..sf.a.n_rows {
        let y0: f64 = rng.random_range(-1.0..1.0);
        let (cols, vals) = sf.a.row(i);
        for (cc, v) in cols.iter().zip(vals) {
            c[*cc] -= v * y0;
        }
    }
    // z0 interior: nonneg part positive, soc heads dominating
    let mut z0 = vec![0.0; sf.g.n_rows];
    for v in z0.iter_mut().take(sf.dims.nonneg) {
        *v = rng.random_range(0.05..1.0);
    }
    let mut off = sf.dims.nonneg;
    for &dim in &sf.dims.socs {
        let mut norm_sq = 0.0;
        for i in 1..dim {
            let v: f64 = rng.random_range(-0.5..0.5);
            z0[off + i] = v;
            norm_sq += v * v;
        }
        z0[off] = (norm_sq as f64).sqrt() + rng.random_range(0.1..1.0);
        off += dim;
    }
    for i in 0..sf.g.n_rows {
        let (cols, vals) = sf.g.row(i);
        for (cc, v) in cols.iter().zip(vals) {
            c[*cc] -= v * z0[i];
        }
    }
    for (j, cj) in c.iter().enumerate() {
        p.set_objective(j, -cj);
    }
    p
}

#[test]
fn random_socps_satisfy_kkt_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x50c9);
    let mut solved = 0;
    for trial in 0..50 {
        let prog = random_feasible_socp(&mut rng);
        let rep = solve_socp(&prog).unwrap();
        assert_eq!(
            rep.status,
            SolveStatus::Optimal,
            "trial {trial}: expected optimal, got {:?} (residuals {:?})",
            rep.status,
            rep.residuals
        );
        let cert = rep.certificate.as_ref().expect("optimal solve carries certificate");
        let res = kkt_residual(cert);
        assert!(res <= KKT_TOL, "trial {trial}: KKT residual {res:.3e} > {KKT_TOL:.0e}");
        solved += 1;
    }
    assert_eq!(solved, 50);
}

#[test]
fn misocp_matches_exhaustive_enumeration_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0b);
    for trial in 0..15 {
        // random SOCP plus 3 binaries gating extra capacity
        let mut prog = random_feasible_socp(&mut rng);
        let t = prog.add_var("t_extra", Some(0.0), None);
        prog.set_objective(t, 1.0);
        let mut bins = Vec::new();
        let mut terms = vec![(t, 1.0)];
        for k in 0..3 {
            let a = prog.add_binary(format!("a{k}"));
            let cost = rng.random_range(0.05..0.6);
            prog.set_objective(a, -cost);
            terms.push((a, -rng.random_range(0.5..2.0)));
            bins.push(a);
        }
        // t <= sum gains * a
        prog.add_le(terms, 0.0);

        let rep = solve_misocp(&prog, &MisocpOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal, "trial {trial}");

        // enumeration oracle
        let mut best = f64::NEG_INFINITY;
        for pattern in 0..(1u32 << bins.len()) {
            let mut fixed = prog.clone();
            for (k, &a) in bins.iter().enumerate() {
                fixed.fix_var(a, ((pattern >> k) & 1) as f64);
            }
            let r = solve_socp(&fixed).unwrap();
            if r.status == SolveStatus::Optimal && r.objective > best {
                best = r.objective;
            }
        }
        let tol = 1e-4 * best.abs().max(1.0);
        assert!(
            (rep.objective - best).abs() <= tol,
            "trial {trial}: bnb {} vs enumeration {best}",
            rep.objective
        );
    }
}
