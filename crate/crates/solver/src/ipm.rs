//! Homogeneous self-dual embedding interior-point method for second-order
//! cone programs in the standard form
//!
//! ```text
//!   minimize  c'x   s.t.  A x = b,   G x + s = h,   s in K,
//! ```
//!
//! where K is a nonnegative orthant times second-order cones. The embedding
//! tracks (x, y, z, s, tau, kappa) and converges either to an optimal point
//! (tau > 0) or to an infeasibility/unboundedness certificate (kappa > 0).
//! Search directions come from a Mehrotra predictor-corrector with
//! Nesterov-Todd scaling; each direction requires one factorization of the
//! condensed positive-definite matrix M = G' W^-2 G (equalities are handled
//! through a small Schur complement on A M^-1 A').
//!
//! Data is Ruiz-equilibrated before the iteration starts; termination is
//! measured against the original (unscaled) problem so reported residuals
//! can be audited externally.

use crate::cones::{jordan_div, jordan_mul, ConeDims, NtScaling, SocScaling};
use crate::linalg::{dot, inf_norm, Cholesky, SymMat};
use crate::program::StandardForm;

#[derive(Debug, Clone)]
pub struct IpmSettings {
    /// Feasibility and relative-gap tolerance.
    pub tol: f64,
    /// Certificate tolerance for infeasibility/unboundedness detection.
    pub infeas_tol: f64,
    pub max_iter: usize,
    /// Static regularization added to the condensed system's diagonal.
    pub static_reg: f64,
    /// Fraction of the step to the cone boundary taken per iteration.
    pub step_fraction: f64,
    pub equil_rounds: usize,
    /// Print one line per iteration to stderr (debugging aid).
    pub verbose: bool,
}

impl Default for IpmSettings {
    fn default() -> Self {
        IpmSettings {
            tol: 1e-7,
            infeas_tol: 1e-8,
            max_iter: 120,
            static_reg: 1e-12,
            step_fraction: 0.99,
            equil_rounds: 10,
            verbose: std::env::var_os("VHETNET_IPM_VERBOSE").is_some(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    Numerical,
}

#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub status: IpmStatus,
    /// Primal point (original units, already divided by tau). For
    /// `DualInfeasible` this is the unboundedness certificate instead.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    /// Primal objective c'x of the minimization form.
    pub pcost: f64,
    pub dcost: f64,
    pub pres: f64,
    pub dres: f64,
    pub relgap: f64,
    pub iterations: usize,
}

struct Scaling {
    d: Vec<f64>,
    e_a: Vec<f64>,
    e_g: Vec<f64>,
    cost: f64,
}

/// Ruiz equilibration; rows of one second-order cone share a single scale so
/// cone membership is preserved.
fn equilibrate(sf: &StandardForm, rounds: usize) -> (StandardForm, Scaling) {
    let n = sf.c.len();
    let p = sf.a.n_rows;
    let m = sf.g.n_rows;
    let mut work = sf.clone();
    let mut d = vec![1.0; n];
    let mut e_a = vec![1.0; p];
    let mut e_g = vec![1.0; m];

    for _ in 0..rounds {
        let mut col = vec![0.0f64; n];
        for mat in [&work.a, &work.g] {
            for i in 0..mat.n_rows {
                let (cols, vals) = mat.row(i);
                for (c, v) in cols.iter().zip(vals) {
                    col[*c] = col[*c].max(v.abs());
                }
            }
        }
        let mut ra = work.a.row_inf_norms();
        let mut rg = work.g.row_inf_norms();
        // uniform scale inside each cone block
        for (off, dim) in work.dims.soc_blocks() {
            let mx = rg[off..off + dim].iter().fold(0.0f64, |a, b| a.max(*b));
            for v in &mut rg[off..off + dim] {
                *v = mx;
            }
        }
        let fix = |v: f64| if v > 1e-12 { 1.0 / v.sqrt() } else { 1.0 };
        let dc: Vec<f64> = col.iter().map(|&v| fix(v)).collect();
        for v in &mut ra {
            *v = fix(*v);
        }
        for v in &mut rg {
            *v = fix(*v);
        }
        work.a.scale(&ra, &dc);
        work.g.scale(&rg, &dc);
        for j in 0..n {
            d[j] *= dc[j];
        }
        for i in 0..p {
            e_a[i] *= ra[i];
        }
        for i in 0..m {
            e_g[i] *= rg[i];
        }
        let done = dc.iter().chain(&ra).chain(&rg).all(|v| (v - 1.0).abs() < 0.05);
        if done {
            break;
        }
    }
    for j in 0..n {
        work.c[j] = sf.c[j] * d[j];
    }
    let cost = 1.0 / inf_norm(&work.c).max(1.0);
    for v in &mut work.c {
        *v *= cost;
    }
    for i in 0..p {
        work.b[i] = sf.b[i] * e_a[i];
    }
    for i in 0..m {
        work.h[i] = sf.h[i] * e_g[i];
    }
    (work, Scaling { d, e_a, e_g, cost })
}

/// One factorization of the condensed KKT system for a fixed NT scaling.
struct KktFactor<'a> {
    sf: &'a StandardForm,
    scaling: &'a NtScaling,
    chol: Cholesky,
    /// v_k = M^-1 a_k for each equality row, and the Cholesky factor of
    /// S = A M^-1 A'.
    eq_basis: Vec<Vec<f64>>,
    schur: Option<Cholesky>,
}

impl<'a> KktFactor<'a> {
    fn new(sf: &'a StandardForm, scaling: &'a NtScaling, reg: f64) -> Option<Self> {
        let n = sf.c.len();
        let dims = &sf.dims;
        let mut m = SymMat::zeros(n);
        // orthant rows: weight z/s = 1/w^2
        for i in 0..dims.nonneg {
            let w = scaling.w_nn[i];
            let (cols, vals) = sf.g.row(i);
            m.rank1_sparse(cols, vals, 1.0 / (w * w));
        }
        // SOC blocks: G' H^-1 G = eta^-2 (2 gg' - g0 g0' + sum_r>0 gr gr'),
        // with g = G_block' (J wbar)
        let mut gv = vec![0.0f64; n];
        let mut support: Vec<usize> = Vec::new();
        for (k, (off, dim)) in dims.soc_blocks().enumerate() {
            let sc: &SocScaling = &scaling.socs[k];
            let inv_eta2 = 1.0 / (sc.eta * sc.eta);
            for idx in support.drain(..) {
                gv[idx] = 0.0;
            }
            for r in 0..dim {
                let (cols, vals) = sf.g.row(off + r);
                let sign = if r == 0 { -1.0 } else { 1.0 };
                m.rank1_sparse(cols, vals, sign * inv_eta2);
                let coef = if r == 0 { sc.wbar[0] } else { -sc.wbar[r] };
                for (c, v) in cols.iter().zip(vals) {
                    if gv[*c] == 0.0 {
                        support.push(*c);
                    }
                    gv[*c] += coef * v;
                }
            }
            support.sort_unstable();
            support.dedup();
            m.rank1_dense_support(&support, &gv, 2.0 * inv_eta2);
        }
        let diag_scale = (0..n).map(|j| m.data[j * n + j]).fold(0.0f64, f64::max).max(1.0);
        let chol = Cholesky::factor(m, reg * diag_scale).ok()?;

        let p = sf.a.n_rows;
        let (eq_basis, schur) = if p > 0 {
            let mut basis = Vec::with_capacity(p);
            for k in 0..p {
                let mut ak = vec![0.0; n];
                let (cols, vals) = sf.a.row(k);
                for (c, v) in cols.iter().zip(vals) {
                    ak[*c] = *v;
                }
                chol.solve_in_place(&mut ak);
                basis.push(ak);
            }
            let mut s = SymMat::zeros(p);
            for k in 0..p {
                for l in 0..=k {
                    s.add(k, l, sf.a.row_dot(k, &basis[l]));
                }
            }
            let sd = (0..p).map(|j| s.data[j * p + j]).fold(0.0f64, f64::max).max(1.0);
            let schur = Cholesky::factor(s, reg * sd).ok()?;
            (basis, Some(schur))
        } else {
            (Vec::new(), None)
        };
        Some(KktFactor { sf, scaling, chol, eq_basis, schur })
    }

    /// Solve [0 A' G'; A 0 0; G 0 -W^2] (x, y, z) = (u1, u2, u3)
    /// with iterative refinement against the uncondensed system (this also
    /// repairs rounding incurred while forming G' W^-2 G).
    fn solve(&self, u1: &[f64], u2: &[f64], u3: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (mut x, mut y, mut z) = self.solve_raw(u1, u2, u3);
        let n = x.len();
        let p = y.len();
        let mm = z.len();
        let scale = inf_norm(u1).max(inf_norm(u2)).max(inf_norm(u3)).max(1.0);
        let mut prev_res = f64::INFINITY;
        for _ in 0..6 {
            let (r1, r2, r3) = self.residual(&x, &y, &z, u1, u2, u3);
            let res = inf_norm(&r1).max(inf_norm(&r2)).max(inf_norm(&r3));
            if res <= 1e-13 * scale || res >= 0.9 * prev_res {
                break;
            }
            prev_res = res;
            let (dx, dy, dz) = self.solve_raw(&r1, &r2, &r3);
            for j in 0..n {
                x[j] += dx[j];
            }
            for k in 0..p {
                y[k] += dy[k];
            }
            for i in 0..mm {
                z[i] += dz[i];
            }
        }
        (x, y, z)
    }

    fn solve_raw(&self, u1: &[f64], u2: &[f64], u3: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let sf = self.sf;
        let n = sf.c.len();
        let mut hz = vec![0.0; sf.g.n_rows];
        self.scaling.apply_h_inv(&sf.dims, u3, &mut hz);
        let mut rhs = u1.to_vec();
        sf.g.mul_transpose_acc(&hz, 1.0, &mut rhs);
        self.chol.solve_in_place(&mut rhs);
        let mut x = rhs;
        let p = sf.a.n_rows;
        let mut y = vec![0.0; p];
        if let Some(schur) = &self.schur {
            let mut r = vec![0.0; p];
            sf.a.mul_vec(&x, &mut r);
            for k in 0..p {
                r[k] -= u2[k];
            }
            schur.solve_in_place(&mut r);
            y = r;
            for (k, vk) in self.eq_basis.iter().enumerate() {
                let yk = y[k];
                if yk != 0.0 {
                    for j in 0..n {
                        x[j] -= yk * vk[j];
                    }
                }
            }
        }
        // z = W^-2 (G x - u3)
        let mut gx = vec![0.0; sf.g.n_rows];
        sf.g.mul_vec(&x, &mut gx);
        for i in 0..gx.len() {
            gx[i] -= u3[i];
        }
        let mut z = vec![0.0; sf.g.n_rows];
        self.scaling.apply_h_inv(&sf.dims, &gx, &mut z);
        (x, y, z)
    }

    fn residual(
        &self,
        x: &[f64],
        y: &[f64],
        z: &[f64],
        u1: &[f64],
        u2: &[f64],
        u3: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let sf = self.sf;
        let mut r1 = u1.to_vec();
        sf.a.mul_transpose_acc(y, -1.0, &mut r1);
        sf.g.mul_transpose_acc(z, -1.0, &mut r1);
        let mut r2 = vec![0.0; sf.a.n_rows];
        sf.a.mul_vec(x, &mut r2);
        for k in 0..r2.len() {
            r2[k] = u2[k] - r2[k];
        }
        let mut r3 = vec![0.0; sf.g.n_rows];
        sf.g.mul_vec(x, &mut r3);
        let mut hz = vec![0.0; sf.g.n_rows];
        self.scaling.apply_h(&sf.dims, z, &mut hz);
        for i in 0..r3.len() {
            r3[i] = u3[i] - (r3[i] - hz[i]);
        }
        (r1, r2, r3)
    }
}

fn identity_scaling(dims: &ConeDims) -> NtScaling {
    let socs = dims
        .socs
        .iter()
        .map(|&d| {
            let mut wbar = vec![0.0; d];
            wbar[0] = 1.0;
            SocScaling { eta: 1.0, wbar }
        })
        .collect();
    NtScaling { w_nn: vec![1.0; dims.nonneg], socs, lambda: vec![0.0; dims.total()] }
}

struct Candidate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    pcost: f64,
    dcost: f64,
    pres: f64,
    dres: f64,
    relgap: f64,
}

/// Evaluate the tau-normalized candidate against the original data.
fn evaluate(orig: &StandardForm, sc: &Scaling, x: &[f64], y: &[f64], z: &[f64], s: &[f64], tau: f64) -> Candidate {
    let n = orig.c.len();
    let p = orig.a.n_rows;
    let m = orig.g.n_rows;
    let xo: Vec<f64> = (0..n).map(|j| sc.d[j] * x[j] / tau).collect();
    let so: Vec<f64> = (0..m).map(|i| s[i] / (sc.e_g[i] * tau)).collect();
    let yo: Vec<f64> = (0..p).map(|k| sc.e_a[k] * y[k] / (sc.cost * tau)).collect();
    let zo: Vec<f64> = (0..m).map(|i| sc.e_g[i] * z[i] / (sc.cost * tau)).collect();

    // residual norms relative to the magnitude of the participating terms
    // (backward-error style, same convention as the external KKT checks)
    let mut ax = vec![0.0; p];
    orig.a.mul_vec(&xo, &mut ax);
    let pres_eq = if p == 0 {
        0.0
    } else {
        (0..p).map(|k| (ax[k] - orig.b[k]).abs()).fold(0.0f64, f64::max)
            / inf_norm(&orig.b).max(inf_norm(&ax)).max(1.0)
    };
    let mut gx = vec![0.0; m];
    orig.g.mul_vec(&xo, &mut gx);
    let pres_in = (0..m)
        .map(|i| (gx[i] + so[i] - orig.h[i]).abs())
        .fold(0.0f64, f64::max)
        / inf_norm(&orig.h).max(inf_norm(&gx)).max(inf_norm(&so)).max(1.0);
    let mut aty = vec![0.0; n];
    orig.a.mul_transpose_acc(&yo, 1.0, &mut aty);
    let mut gtz = vec![0.0; n];
    orig.g.mul_transpose_acc(&zo, 1.0, &mut gtz);
    let dres_scale = inf_norm(&orig.c).max(inf_norm(&aty)).max(inf_norm(&gtz)).max(1.0);
    let dres = (0..n)
        .map(|j| (orig.c[j] + aty[j] + gtz[j]).abs())
        .fold(0.0f64, f64::max)
        / dres_scale;

    let pcost = dot(&orig.c, &xo);
    let dcost = -dot(&orig.b, &yo) - dot(&orig.h, &zo);
    let gap = dot(&so, &zo).max(0.0);
    let relgap = gap / pcost.abs().min(dcost.abs()).max(1.0);

    Candidate { x: xo, y: yo, z: zo, s: so, pcost, dcost, pres: pres_eq.max(pres_in), dres, relgap }
}

pub fn solve_standard(orig: &StandardForm, settings: &IpmSettings) -> IpmSolution {
    let n = orig.c.len();
    let p = orig.a.n_rows;
    let m = orig.g.n_rows;
    assert!(m > 0, "standard form must contain at least one cone row");
    let dims = orig.dims.clone();
    debug_assert_eq!(dims.total(), m);

    let (sf, sc) = equilibrate(orig, settings.equil_rounds);
    let degree = dims.degree() as f64;

    // -- initialization: two solves with the identity scaling ---------------
    let id = identity_scaling(&dims);
    let mut reg = settings.static_reg;
    let factor0 = loop {
        match KktFactor::new(&sf, &id, reg) {
            Some(f) => break Some(f),
            None => {
                reg *= 100.0;
                if reg > 1e-2 {
                    break None;
                }
            }
        }
    };
    let Some(factor0) = factor0 else {
        return numerical_failure(orig, &sc, n, p, m);
    };
    let zeros_n = vec![0.0; n];
    let zeros_p = vec![0.0; p];
    let zeros_m = vec![0.0; m];
    let (x1, _, z1) = factor0.solve(&zeros_n, &sf.b, &sf.h);
    let neg_c: Vec<f64> = sf.c.iter().map(|v| -v).collect();
    let (_, yd, zd) = factor0.solve(&neg_c, &zeros_p, &zeros_m);

    let mut x = x1;
    let mut s: Vec<f64> = z1.iter().map(|v| -v).collect();
    dims.shift_to_interior(&mut s);
    let mut y = yd;
    let mut z = zd;
    dims.shift_to_interior(&mut z);
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let mut best: Option<(f64, Candidate, usize)> = None;
    let mut tiny_steps = 0usize;

    for iter in 0..settings.max_iter {
        // residuals of the embedding (scaled space)
        let mut rx: Vec<f64> = sf.c.iter().map(|v| v * tau).collect();
        sf.a.mul_transpose_acc(&y, 1.0, &mut rx);
        sf.g.mul_transpose_acc(&z, 1.0, &mut rx);
        let mut ry = vec![0.0; p];
        sf.a.mul_vec(&x, &mut ry);
        for k in 0..p {
            ry[k] -= sf.b[k] * tau;
        }
        let mut rz = vec![0.0; m];
        sf.g.mul_vec(&x, &mut rz);
        for i in 0..m {
            rz[i] += s[i] - sf.h[i] * tau;
        }
        let rtau = dot(&sf.c, &x) + dot(&sf.b, &y) + dot(&sf.h, &z) + kappa;
        let mu = (dot(&s, &z) + tau * kappa) / (degree + 1.0);

        if !(tau > 0.0) || !tau.is_finite() || !mu.is_finite() {
            break;
        }
        // termination against original data
        let cand = evaluate(orig, &sc, &x, &y, &z, &s, tau);
        let score = cand.pres.max(cand.dres).max(cand.relgap);
        if score.is_finite() && best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, cand, iter));
        }
        if best.is_none() {
            break;
        }
        if settings.verbose {
            let c = &best.as_ref().unwrap().1;
            eprintln!(
                "it {iter:3} score {score:9.2e} best(pres {:9.2e} dres {:9.2e} rgap {:9.2e}) mu {mu:9.2e} tau {tau:9.2e} kappa {kappa:9.2e}",
                c.pres, c.dres, c.relgap
            );
        }
        let cand = &best.as_ref().unwrap().1;
        if cand.pres <= settings.tol && cand.dres <= settings.tol && cand.relgap <= settings.tol {
            let c = &best.as_ref().unwrap().1;
            return IpmSolution {
                status: IpmStatus::Optimal,
                x: c.x.clone(),
                y: c.y.clone(),
                z: c.z.clone(),
                s: c.s.clone(),
                pcost: c.pcost,
                dcost: c.dcost,
                pres: c.pres,
                dres: c.dres,
                relgap: c.relgap,
                iterations: iter,
            };
        }
        // infeasibility certificates (not tau-normalized)
        let yc: Vec<f64> = (0..p).map(|k| sc.e_a[k] * y[k] / sc.cost).collect();
        let zc: Vec<f64> = (0..m).map(|i| sc.e_g[i] * z[i] / sc.cost).collect();
        let by_hz = -(dot(&orig.b, &yc) + dot(&orig.h, &zc));
        if by_hz > settings.tol {
            let mut v = vec![0.0; n];
            orig.a.mul_transpose_acc(&yc, 1.0, &mut v);
            orig.g.mul_transpose_acc(&zc, 1.0, &mut v);
            if inf_norm(&v) <= settings.infeas_tol * by_hz {
                return IpmSolution {
                    status: IpmStatus::PrimalInfeasible,
                    x: vec![0.0; n],
                    y: yc.iter().map(|v| v / by_hz).collect(),
                    z: zc.iter().map(|v| v / by_hz).collect(),
                    s: vec![0.0; m],
                    pcost: f64::NAN,
                    dcost: f64::NAN,
                    pres: f64::NAN,
                    dres: f64::NAN,
                    relgap: f64::NAN,
                    iterations: iter,
                };
            }
        }
        let xc: Vec<f64> = (0..n).map(|j| sc.d[j] * x[j]).collect();
        let sc_s: Vec<f64> = (0..m).map(|i| s[i] / sc.e_g[i]).collect();
        let neg_cx = -dot(&orig.c, &xc);
        if neg_cx > settings.tol {
            let mut av = vec![0.0; p];
            orig.a.mul_vec(&xc, &mut av);
            let mut gv = vec![0.0; m];
            orig.g.mul_vec(&xc, &mut gv);
            for i in 0..m {
                gv[i] += sc_s[i];
            }
            if inf_norm(&av).max(inf_norm(&gv)) <= settings.infeas_tol * neg_cx {
                return IpmSolution {
                    status: IpmStatus::DualInfeasible,
                    x: xc.iter().map(|v| v / neg_cx).collect(),
                    y: vec![0.0; p],
                    z: vec![0.0; m],
                    s: sc_s.iter().map(|v| v / neg_cx).collect(),
                    pcost: f64::NAN,
                    dcost: f64::NAN,
                    pres: f64::NAN,
                    dres: f64::NAN,
                    relgap: f64::NAN,
                    iterations: iter,
                };
            }
        }
        if mu.abs() < 1e-18 {
            break;
        }

        // NT scaling and factorization
        let Some(scaling) = NtScaling::compute(&dims, &s, &z) else {
            break;
        };
        let mut reg = settings.static_reg;
        let factor = loop {
            match KktFactor::new(&sf, &scaling, reg) {
                Some(f) => break Some(f),
                None => {
                    reg *= 100.0;
                    if reg > 1e-2 {
                        break None;
                    }
                }
            }
        };
        let Some(factor) = factor else { break };

        // constant solve shared by predictor and corrector
        let (xc2, yc2, zc2) = factor.solve(&neg_c, &sf.b, &sf.h);
        let denom = dot(&sf.c, &xc2) + dot(&sf.b, &yc2) + dot(&sf.h, &zc2) - kappa / tau;
        if denom.abs() < 1e-300 || !denom.is_finite() {
            break;
        }

        let lambda = &scaling.lambda;
        let mut lam_lam = vec![0.0; m];
        jordan_mul(&dims, lambda, lambda, &mut lam_lam);

        let solve_direction = |ds_target: &[f64],
                               bx: &[f64],
                               by: &[f64],
                               bz: &[f64],
                               btau: f64,
                               bkappa: f64|
         -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64) {
            // W(lambda \ ds)
            let mut lam_inv_ds = vec![0.0; m];
            jordan_div(&dims, lambda, ds_target, &mut lam_inv_ds);
            let mut w_lam_inv_ds = vec![0.0; m];
            scaling.apply(&dims, &lam_inv_ds, &mut w_lam_inv_ds);
            let bz2: Vec<f64> = (0..m).map(|i| bz[i] - w_lam_inv_ds[i]).collect();
            let (xr, yr, zr) = factor.solve(bx, by, &bz2);
            let dtau = (btau - bkappa / tau - (dot(&sf.c, &xr) + dot(&sf.b, &yr) + dot(&sf.h, &zr))) / denom;
            let dx: Vec<f64> = (0..n).map(|j| xr[j] + dtau * xc2[j]).collect();
            let dy: Vec<f64> = (0..p).map(|k| yr[k] + dtau * yc2[k]).collect();
            let dz: Vec<f64> = (0..m).map(|i| zr[i] + dtau * zc2[i]).collect();
            // ds = W(lambda \ ds_target) - W^2 dz
            let mut h_dz = vec![0.0; m];
            scaling.apply_h(&dims, &dz, &mut h_dz);
            let ds: Vec<f64> = (0..m).map(|i| w_lam_inv_ds[i] - h_dz[i]).collect();
            let dkappa = (bkappa - kappa * dtau) / tau;
            (dx, dy, dz, ds, dtau, dkappa)
        };

        // predictor (affine)
        let ds_aff: Vec<f64> = lam_lam.iter().map(|v| -v).collect();
        let bx: Vec<f64> = rx.iter().map(|v| -v).collect();
        let by: Vec<f64> = ry.iter().map(|v| -v).collect();
        let bz: Vec<f64> = rz.iter().map(|v| -v).collect();
        let (adx, _ady, adz, ads, adtau, adkappa) =
            solve_direction(&ds_aff, &bx, &by, &bz, -rtau, -tau * kappa);

        let mut alpha = dims.step_to_boundary(&s, &ads, 1.0);
        alpha = alpha.min(dims.step_to_boundary(&z, &adz, 1.0));
        if adtau < 0.0 {
            alpha = alpha.min(-tau / adtau);
        }
        if adkappa < 0.0 {
            alpha = alpha.min(-kappa / adkappa);
        }
        let alpha_aff = alpha.min(1.0);
        let sigma = ((1.0 - alpha_aff).powi(3)).clamp(0.0, 1.0);

        // corrector (combined)
        let mut wi_ds = vec![0.0; m];
        scaling.apply_inv(&dims, &ads, &mut wi_ds);
        let mut w_dz = vec![0.0; m];
        scaling.apply(&dims, &adz, &mut w_dz);
        let mut corr = vec![0.0; m];
        jordan_mul(&dims, &wi_ds, &w_dz, &mut corr);
        let unit = dims.unit();
        let smu = sigma * mu;
        let ds_comb: Vec<f64> = (0..m).map(|i| -lam_lam[i] - corr[i] + smu * unit[i]).collect();
        let r_scale = 1.0 - sigma;
        let bx: Vec<f64> = rx.iter().map(|v| -r_scale * v).collect();
        let by: Vec<f64> = ry.iter().map(|v| -r_scale * v).collect();
        let bz: Vec<f64> = rz.iter().map(|v| -r_scale * v).collect();
        let bkappa = -(tau * kappa + adtau * adkappa - smu);
        let (dx, dy, dz, ds, dtau, dkappa) =
            solve_direction(&ds_comb, &bx, &by, &bz, -r_scale * rtau, bkappa);
        let _ = adx;

        let finite = dx.iter().chain(&dz).chain(&ds).all(|v| v.is_finite())
            && dtau.is_finite()
            && dkappa.is_finite();
        if !finite {
            break;
        }
        let mut amax = dims.step_to_boundary(&s, &ds, f64::INFINITY);
        amax = amax.min(dims.step_to_boundary(&z, &dz, f64::INFINITY));
        if dtau < 0.0 {
            amax = amax.min(-tau / dtau);
        }
        if dkappa < 0.0 {
            amax = amax.min(-kappa / dkappa);
        }
        let step = (settings.step_fraction * amax).min(1.0);
        if step <= 1e-7 {
            tiny_steps += 1;
            if tiny_steps >= 3 {
                break;
            }
        } else {
            tiny_steps = 0;
        }

        for j in 0..n {
            x[j] += step * dx[j];
        }
        for k in 0..p {
            y[k] += step * dy[k];
        }
        for i in 0..m {
            z[i] += step * dz[i];
            s[i] += step * ds[i];
        }
        tau += step * dtau;
        kappa += step * dkappa;
    }

    // out of iterations or numerical trouble: return the best candidate
    let Some((_, c, _)) = best else {
        return numerical_failure(orig, &sc, n, p, m);
    };
    let status = if c.pres.max(c.dres).max(c.relgap) <= 100.0 * settings.tol {
        IpmStatus::MaxIter
    } else {
        IpmStatus::Numerical
    };
    IpmSolution {
        status,
        x: c.x,
        y: c.y,
        z: c.z,
        s: c.s,
        pcost: c.pcost,
        dcost: c.dcost,
        pres: c.pres,
        dres: c.dres,
        relgap: c.relgap,
        iterations: settings.max_iter,
    }
}

fn numerical_failure(orig: &StandardForm, sc: &Scaling, n: usize, p: usize, m: usize) -> IpmSolution {
    let _ = (orig, sc);
    IpmSolution {
        status: IpmStatus::Numerical,
        x: vec![0.0; n],
        y: vec![0.0; p],
        z: vec![0.0; m],
        s: vec![0.0; m],
        pcost: f64::NAN,
        dcost: f64::NAN,
        pres: f64::NAN,
        dres: f64::NAN,
        relgap: f64::NAN,
        iterations: 0,
    }
}
