//! Symmetric cone toolbox: nonnegative orthant and second-order cones.
//!
//! Slack and dual vectors are stored as one flat slice with the nonnegative
//! block first and then each second-order cone contiguously. Nesterov-Todd
//! scalings are kept in the factored form W = eta * (hyperbolic Householder),
//! so every product with W, W^-1 or W^-2 is a dense O(dim) operation and the
//! normal-equations assembly only ever sees a diagonal plus one rank-1 term
//! per cone.

/// Dimensions of the product cone: `nonneg` scalar inequalities followed by
/// second-order cones of the listed sizes (each >= 2).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConeDims {
    pub nonneg: usize,
    pub socs: Vec<usize>,
}

impl ConeDims {
    pub fn total(&self) -> usize {
        self.nonneg + self.socs.iter().sum::<usize>()
    }

    /// Barrier degree used to normalize the complementarity gap
    /// (1 per scalar inequality, 1 per second-order cone).
    pub fn degree(&self) -> usize {
        self.nonneg + self.socs.len()
    }

    /// (offset, dim) of each second-order cone block.
    pub fn soc_blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut off = self.nonneg;
        self.socs.iter().map(move |&d| {
            let cur = off;
            off += d;
            (cur, d)
        })
    }

    /// Unit element e of the product cone (1 on the orthant, (1,0,..) per cone).
    pub fn unit(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.total()];
        for v in e.iter_mut().take(self.nonneg) {
            *v = 1.0;
        }
        for (off, _) in self.soc_blocks() {
            e[off] = 1.0;
        }
        e
    }

    /// Largest violation of cone membership: <= 0 means strictly inside.
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for &x in &v[..self.nonneg] {
            worst = worst.max(-x);
        }
        for (off, dim) in self.soc_blocks() {
            let head = v[off];
            let tail = norm2(&v[off + 1..off + dim]);
            worst = worst.max(tail - head);
        }
        if worst == f64::NEG_INFINITY {
            0.0
        } else {
            worst
        }
    }

    /// Shift v into the interior: v + (1 + alpha) e whenever it is not
    /// already strictly inside.
    pub fn shift_to_interior(&self, v: &mut [f64]) {
        let alpha = self.max_violation(v);
        if alpha >= -1e-8 {
            let step = 1.0 + alpha;
            for x in v.iter_mut().take(self.nonneg) {
                *x += step;
            }
            for (off, _) in self.soc_blocks() {
                v[off] += step;
            }
        }
    }

    /// Largest step t such that v + t dv stays in the cone (capped at `cap`).
    pub fn step_to_boundary(&self, v: &[f64], dv: &[f64], cap: f64) -> f64 {
        let mut t = cap;
        for i in 0..self.nonneg {
            if dv[i] < 0.0 {
                t = t.min(-v[i] / dv[i]);
            }
        }
        for (off, dim) in self.soc_blocks() {
            t = t.min(soc_step_to_boundary(&v[off..off + dim], &dv[off..off + dim]));
        }
        t.max(0.0)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest step keeping u + t du inside one second-order cone; u must be
/// strictly inside. Solves the quadratic (u0+t d0)^2 - |u1+t d1|^2 = 0 for
/// the smallest positive root.
fn soc_step_to_boundary(u: &[f64], du: &[f64]) -> f64 {
    let (u0, u1) = (u[0], &u[1..]);
    let (d0, d1) = (du[0], &du[1..]);
    let a = d0 * d0 - d1.iter().map(|x| x * x).sum::<f64>();
    let b = 2.0 * (u0 * d0 - u1.iter().zip(d1).map(|(x, y)| x * y).sum::<f64>());
    let c = u0 * u0 - u1.iter().map(|x| x * x).sum::<f64>();
    debug_assert!(c >= 0.0);
    // smallest positive root of a t^2 + b t + c = 0, if any
    let root = if a.abs() < 1e-300 {
        if b < 0.0 {
            -c / b
        } else {
            return f64::INFINITY;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            // no real crossing; exits only if the head eventually goes negative,
            // which cannot happen with the norm constraint intact
            return f64::INFINITY;
        }
        let sq = disc.sqrt();
        // numerically stable pair of roots
        let q = -0.5 * (b + b.signum() * sq);
        let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
        let mut best = f64::INFINITY;
        for r in [r1, r2] {
            if r > 0.0 && r < best {
                best = r;
            }
        }
        best
    };
    root.max(0.0)
}

/// Nesterov-Todd scaling of one second-order cone.
#[derive(Debug, Clone)]
pub struct SocScaling {
    pub eta: f64,
    /// Hyperbolic-normalized scaling point: wbar0^2 - |wbar1|^2 = 1.
    pub wbar: Vec<f64>,
}

impl SocScaling {
    fn compute(s: &[f64], z: &[f64]) -> Option<Self> {
        let res_s = jordan_det(s);
        let res_z = jordan_det(z);
        if !(res_s > 0.0) || !(res_z > 0.0) {
            return None;
        }
        let (rs, rz) = (res_s.sqrt(), res_z.sqrt());
        let dim = s.len();
        let mut wbar = vec![0.0; dim];
        let sz: f64 = s.iter().zip(z).map(|(a, b)| a * b).sum();
        let gamma = (0.5 * (1.0 + sz / (rs * rz))).sqrt();
        let c = 1.0 / (2.0 * gamma);
        wbar[0] = c * (s[0] / rs + z[0] / rz);
        for i in 1..dim {
            wbar[i] = c * (s[i] / rs - z[i] / rz);
        }
        let eta = (rs / rz).sqrt();
        Some(SocScaling { eta, wbar })
    }

    /// W v (symmetric scaling matrix).
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let w = &self.wbar;
        let v0 = v[0];
        let dot1: f64 = w[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum();
        out[0] = self.eta * (w[0] * v0 + dot1);
        let coef = self.eta * (v0 + dot1 / (1.0 + w[0]));
        for i in 1..v.len() {
            out[i] = self.eta * v[i] + coef * w[i];
        }
    }

    /// W^-1 v.
    pub fn apply_inv(&self, v: &[f64], out: &mut [f64]) {
        let w = &self.wbar;
        let v0 = v[0];
        let dot1: f64 = w[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum();
        let inv_eta = 1.0 / self.eta;
        out[0] = inv_eta * (w[0] * v0 - dot1);
        let coef = inv_eta * (-v0 + dot1 / (1.0 + w[0]));
        for i in 1..v.len() {
            out[i] = inv_eta * v[i] + coef * w[i];
        }
    }

    /// W^-2 v = H^-1 v where H = eta^2 (2 wbar wbar^T - J).
    pub fn apply_h_inv(&self, v: &[f64], out: &mut [f64]) {
        // H^-1 = eta^-2 (2 (J wbar)(J wbar)^T - J)
        let w = &self.wbar;
        let inv_eta2 = 1.0 / (self.eta * self.eta);
        // t = (J wbar)^T v = w0 v0 - w1.v1
        let dot1: f64 = w[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum();
        let t = w[0] * v[0] - dot1;
        out[0] = inv_eta2 * (2.0 * t * w[0] - v[0]);
        for i in 1..v.len() {
            out[i] = inv_eta2 * (-2.0 * t * w[i] + v[i]);
        }
    }

    /// W^2 v = H v.
    pub fn apply_h(&self, v: &[f64], out: &mut [f64]) {
        let w = &self.wbar;
        let eta2 = self.eta * self.eta;
        let t: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
        out[0] = eta2 * (2.0 * t * w[0] - v[0]);
        for i in 1..v.len() {
            out[i] = eta2 * (2.0 * t * w[i] + v[i]);
        }
    }
}

/// x0^2 - |x1|^2 (Jordan determinant of a second-order cone element).
pub fn jordan_det(x: &[f64]) -> f64 {
    x[0] * x[0] - x[1..].iter().map(|v| v * v).sum::<f64>()
}

/// Nesterov-Todd scaling for the full product cone.
#[derive(Debug, Clone)]
pub struct NtScaling {
    /// Per-coordinate w_i = sqrt(s_i / z_i) on the orthant block.
    pub w_nn: Vec<f64>,
    pub socs: Vec<SocScaling>,
    /// Scaled point lambda = W z = W^-T s.
    pub lambda: Vec<f64>,
}

impl NtScaling {
    /// Compute from a strictly feasible primal-dual pair. Returns None when
    /// either point has drifted out of the interior numerically.
    pub fn compute(dims: &ConeDims, s: &[f64], z: &[f64]) -> Option<Self> {
        let mut w_nn = vec![0.0; dims.nonneg];
        let mut lambda = vec![0.0; dims.total()];
        for i in 0..dims.nonneg {
            if !(s[i] > 0.0) || !(z[i] > 0.0) {
                return None;
            }
            w_nn[i] = (s[i] / z[i]).sqrt();
            lambda[i] = (s[i] * z[i]).sqrt();
        }
        let mut socs = Vec::with_capacity(dims.socs.len());
        for (off, dim) in dims.soc_blocks() {
            let sc = SocScaling::compute(&s[off..off + dim], &z[off..off + dim])?;
            sc.apply(&z[off..off + dim], &mut lambda[off..off + dim]);
            socs.push(sc);
        }
        Some(NtScaling { w_nn, socs, lambda })
    }

    /// out = W v.
    pub fn apply(&self, dims: &ConeDims, v: &[f64], out: &mut [f64]) {
        for i in 0..dims.nonneg {
            out[i] = self.w_nn[i] * v[i];
        }
        for (k, (off, dim)) in dims.soc_blocks().enumerate() {
            self.socs[k].apply(&v[off..off + dim], &mut out[off..off + dim]);
        }
    }

    /// out = W^-1 v (W is symmetric, so this is also W^-T).
    pub fn apply_inv(&self, dims: &ConeDims, v: &[f64], out: &mut [f64]) {
        for i in 0..dims.nonneg {
            out[i] = v[i] / self.w_nn[i];
        }
        for (k, (off, dim)) in dims.soc_blocks().enumerate() {
            self.socs[k].apply_inv(&v[off..off + dim], &mut out[off..off + dim]);
        }
    }

    /// out = W^-2 v.
    pub fn apply_h_inv(&self, dims: &ConeDims, v: &[f64], out: &mut [f64]) {
        for i in 0..dims.nonneg {
            out[i] = v[i] / (self.w_nn[i] * self.w_nn[i]);
        }
        for (k, (off, dim)) in dims.soc_blocks().enumerate() {
            self.socs[k].apply_h_inv(&v[off..off + dim], &mut out[off..off + dim]);
        }
    }

    /// out = W^2 v.
    pub fn apply_h(&self, dims: &ConeDims, v: &[f64], out: &mut [f64]) {
        for i in 0..dims.nonneg {
            out[i] = v[i] * self.w_nn[i] * self.w_nn[i];
        }
        for (k, (off, dim)) in dims.soc_blocks().enumerate() {
            self.socs[k].apply_h(&v[off..off + dim], &mut out[off..off + dim]);
        }
    }
}

/// Jordan product u o v per cone block.
pub fn jordan_mul(dims: &ConeDims, u: &[f64], v: &[f64], out: &mut [f64]) {
    for i in 0..dims.nonneg {
        out[i] = u[i] * v[i];
    }
    for (off, dim) in dims.soc_blocks() {
        let (ub, vb) = (&u[off..off + dim], &v[off..off + dim]);
        let dot: f64 = ub.iter().zip(vb).map(|(a, b)| a * b).sum();
        out[off] = dot;
        for i in 1..dim {
            out[off + i] = ub[0] * vb[i] + vb[0] * ub[i];
        }
    }
}

/// Jordan division out = u^-1 o w per cone block (solve u o out = w).
pub fn jordan_div(dims: &ConeDims, u: &[f64], w: &[f64], out: &mut [f64]) {
    for i in 0..dims.nonneg {
        out[i] = w[i] / u[i];
    }
    for (off, dim) in dims.soc_blocks() {
        let (ub, wb) = (&u[off..off + dim], &w[off..off + dim]);
        let det = jordan_det(ub);
        let dot1: f64 = ub[1..].iter().zip(&wb[1..]).map(|(a, b)| a * b).sum();
        let x0 = (ub[0] * wb[0] - dot1) / det;
        out[off] = x0;
        for i in 1..dim {
            out[off + i] = (wb[i] - x0 * ub[i]) / ub[0];
        }
    }
}
