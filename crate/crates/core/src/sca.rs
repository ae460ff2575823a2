//! Successive convex approximation for the joint user-association and
//! beamforming max-min-SINR design.
//!
//! Each iteration assembles a mixed-integer SOCP: the SINR constraint is
//! split through slack variables (an interference bound beta_u per UE and
//! real/imaginary signal components p_{b,u}, q_{b,u}), the resulting
//! quadratic-over-linear lower bound is replaced by its first-order Taylor
//! expansion around the previous iterate, the HAPS backhaul constraint is
//! linearized through eta_u = a_{haps,u} * gamma_m with big-M rows, and the
//! binary association column sums are kept as linear rows. The subproblem is
//! solved by branch-and-bound and its optimal slacks become the next
//! expansion point.
//!
//! Inside the subproblem, channels are normalized by the noise standard
//! deviation (so the interference bound reads beta >= ||..||^2 + 1); SINR-type
//! quantities are invariant under this scaling and the solver sees a far
//! smaller dynamic range. `ScaState` stores the physical-unit values.

use std::time::Instant;

use serde::Serialize;

use crate::channel::ChannelSet;
use crate::mat::{inner_h, norm_sq, CMat, Mat};
use crate::netmodel::{sinr, Association, Beamforming, Solution};
use crate::params::{GammaMaxPolicy, ParamError, SystemParams};
use vhetnet_solver::{
    solve_misocp, AffExpr, BinaryStrategy as SolverStrategy, ConicProgram, MisocpOptions,
    ProgramError, SolveReport, SolveStatus,
};

#[derive(Debug, Clone, PartialEq)]
pub enum AssociationMode {
    Single,
    Multi,
    Fixed(Association),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryStrategy {
    BranchAndBound,
    RelaxRound,
}

#[derive(Debug, Clone)]
pub struct JubdOptions {
    /// Stop when |gamma^(n) - gamma^(n-1)| <= tol * max(1, gamma^(n)).
    pub tol: f64,
    pub max_iter: usize,
    pub association_mode: AssociationMode,
    pub binary_strategy: BinaryStrategy,
}

impl Default for JubdOptions {
    fn default() -> Self {
        JubdOptions {
            tol: 1e-4,
            max_iter: 10,
            association_mode: AssociationMode::Single,
            binary_strategy: BinaryStrategy::BranchAndBound,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ScaError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("expansion point beta[{0}] must be positive")]
    BadExpansionPoint(usize),
    #[error("subproblem infeasible at iteration {iteration}; the initial point construction guarantees feasibility, so this signals a bug or bad parameters")]
    SubproblemInfeasible { iteration: usize },
    #[error("subproblem solver failed at iteration {iteration} with status {status}")]
    SolverFailure { iteration: usize, status: &'static str },
    #[error("fixed association shape {got:?} does not match {expected:?}")]
    FixedAssociationShape { got: (usize, usize), expected: (usize, usize) },
}

/// Expansion point and bookkeeping of one SCA run (physical units).
#[derive(Debug, Clone)]
pub struct ScaState {
    pub iteration: usize,
    /// Interference-plus-noise bounds (W), >= noise_var.
    pub beta: Vec<f64>,
    /// Real parts of the serving inner products (sqrt W).
    pub p: Mat<f64>,
    /// Imaginary parts (sqrt W).
    pub q: Mat<f64>,
    /// SINR lower bounds of the last subproblem.
    pub alpha: Vec<f64>,
    /// eta_u = a_{haps,u} * gamma_m of the last subproblem.
    pub eta: Vec<f64>,
    /// Last subproblem objective.
    pub gamma_m: f64,
    /// Big-M upper bound on the achievable minimum SINR.
    pub gamma_max: f64,
    /// Subproblem objectives; entry 0 is the initial point's true min-SINR.
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub gamma_m: f64,
    pub wall_time_s: f64,
    pub status: String,
    pub bnb_nodes: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ScaTrace {
    pub rows: Vec<TraceRow>,
    pub objective_history: Vec<f64>,
    pub converged: bool,
}

impl ScaTrace {
    /// CSV export; `header_comment` lines are prefixed with '#'.
    pub fn to_csv(&self, header_comment: &str) -> String {
        let mut out = String::new();
        for line in header_comment.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("iteration,gamma_m,wall_time_s,status,bnb_nodes\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{:.6},{},{}\n",
                r.iteration, r.gamma_m, r.wall_time_s, r.status, r.bnb_nodes
            ));
        }
        out
    }
}

/// Variable layout of one subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemLayout {
    pub stations: usize,
    pub ues: usize,
    pub n_antennas: Vec<usize>,
    pub has_haps: bool,
    w_offsets: Vec<usize>,
    a_offset: usize,
    alpha_offset: usize,
    beta_offset: usize,
    p_offset: usize,
    q_offset: usize,
    eta_offset: usize,
    pub gamma_idx: usize,
    pub n_vars: usize,
}

impl SubproblemLayout {
    fn new(channels: &ChannelSet) -> Self {
        let stations = channels.station_count();
        let ues = channels.ue_count();
        let n_antennas: Vec<usize> = (0..stations).map(|b| channels.n_antennas(b)).collect();
        let mut off = 0;
        let w_offsets: Vec<usize> = n_antennas
            .iter()
            .map(|&n| {
                let cur = off;
                off += 2 * n * ues;
                cur
            })
            .collect();
        let a_offset = off;
        off += stations * ues;
        let alpha_offset = off;
        off += ues;
        let beta_offset = off;
        off += ues;
        let p_offset = off;
        off += stations * ues;
        let q_offset = off;
        off += stations * ues;
        let has_haps = channels.haps.is_some();
        let eta_offset = off;
        if has_haps {
            off += ues;
        }
        let gamma_idx = off;
        off += 1;
        SubproblemLayout {
            stations,
            ues,
            n_antennas,
            has_haps,
            w_offsets,
            a_offset,
            alpha_offset,
            beta_offset,
            p_offset,
            q_offset,
            eta_offset,
            gamma_idx,
            n_vars: off,
        }
    }

    pub fn w_re(&self, b: usize, u: usize, r: usize) -> usize {
        self.w_offsets[b] + 2 * (u * self.n_antennas[b] + r)
    }

    pub fn w_im(&self, b: usize, u: usize, r: usize) -> usize {
        self.w_re(b, u, r) + 1
    }

    pub fn a(&self, b: usize, u: usize) -> usize {
        self.a_offset + b * self.ues + u
    }

    pub fn alpha(&self, u: usize) -> usize {
        self.alpha_offset + u
    }

    pub fn beta(&self, u: usize) -> usize {
        self.beta_offset + u
    }

    pub fn p(&self, b: usize, u: usize) -> usize {
        self.p_offset + b * self.ues + u
    }

    pub fn q(&self, b: usize, u: usize) -> usize {
        self.q_offset + b * self.ues + u
    }

    pub fn eta(&self, u: usize) -> usize {
        debug_assert!(self.has_haps);
        self.eta_offset + u
    }
}

/// Highest matched-filter receive power station per UE (ties to the lowest
/// index): argmax_b P_b ||h_u^b||^2.
fn max_power_choices(channels: &ChannelSet, params: &SystemParams) -> Vec<usize> {
    let stations = channels.station_count();
    (0..channels.ue_count())
        .map(|u| {
            (0..stations)
                .map(|b| channels.station_power(b, params) * norm_sq(&channels.station(b).col_vec(u)))
                .enumerate()
                .max_by(|(ia, a), (ib, b)| a.total_cmp(b).then_with(|| ib.cmp(&ia)))
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
        .collect()
}

/// Valid upper bound on any achievable min-SINR for this channel set: the
/// minimum SINR can never exceed the weakest UE's interference-free SNR
/// min_u sum_b P_b ||h_u^b||^2 / sigma_n^2 (each gamma_u is below its own
/// interference-free bound, and gamma_m is the smallest of them). Keeping
/// this big-M tight is what keeps the (15a)/(15b) rows well conditioned.
fn gamma_max_bound(channels: &ChannelSet, params: &SystemParams) -> f64 {
    match params.gamma_max_policy {
        GammaMaxPolicy::Fixed(v) => v,
        GammaMaxPolicy::InterferenceFreeBound => {
            let stations = channels.station_count();
            (0..channels.ue_count())
                .map(|u| {
                    (0..stations)
                        .map(|b| {
                            channels.station_power(b, params)
                                * norm_sq(&channels.station(b).col_vec(u))
                        })
                        .sum::<f64>()
                        / params.noise_var
                })
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Feasible starting point: max-received-power association, equal-power
/// matched-filter beams, interference bounds at equality, phase-aligned
/// (p real nonnegative, q zero) signal components.
pub fn initialize_state(
    channels: &ChannelSet,
    params: &SystemParams,
    options: &JubdOptions,
) -> Result<(ScaState, Association, Beamforming), ScaError> {
    let stations = channels.station_count();
    let ues = channels.ue_count();

    let assoc = match &options.association_mode {
        AssociationMode::Fixed(a) => {
            let got = (a.a.rows(), a.a.cols());
            if got != (stations, ues) {
                return Err(ScaError::FixedAssociationShape { got, expected: (stations, ues) });
            }
            a.clone()
        }
        _ => Association::from_choices(stations, &max_power_choices(channels, params)),
    };

    let mut w = Beamforming::zeros(channels);
    for b in 0..stations {
        let served: Vec<usize> = (0..ues).filter(|&u| assoc.a[(b, u)] == 1).collect();
        if served.is_empty() {
            continue;
        }
        let per_beam = channels.station_power(b, params) / served.len() as f64;
        for &u in &served {
            let h = channels.station(b).col_vec(u);
            let norm = norm_sq(&h).sqrt();
            if norm == 0.0 {
                continue;
            }
            let scale = per_beam.sqrt() / norm;
            let beam: Vec<_> = h.iter().map(|z| z * scale).collect();
            w.w[b].set_col(u, &beam);
        }
    }

    let mut beta = vec![params.noise_var; ues];
    let mut p = Mat::zeros(stations, ues);
    let q = Mat::zeros(stations, ues);
    for u in 0..ues {
        for b in 0..stations {
            let h = channels.station(b).col_vec(u);
            for k in 0..ues {
                if k == u {
                    continue;
                }
                beta[u] += inner_h(&h, &w.w[b].col_vec(k)).norm_sqr();
            }
            // matched-filter beams have real nonnegative inner products
            p[(b, u)] = inner_h(&h, &w.w[b].col_vec(u)).re;
        }
    }

    let gammas = sinr(channels, &w, params);
    let gamma_m = gammas.iter().copied().fold(f64::INFINITY, f64::min);
    let gamma_max = gamma_max_bound(channels, params);
    let eta = (0..ues)
        .map(|u| {
            if channels.haps.is_some() && assoc.a[(stations - 1, u)] == 1 {
                gamma_m
            } else {
                0.0
            }
        })
        .collect();

    let state = ScaState {
        iteration: 0,
        beta,
        p,
        q,
        alpha: gammas,
        eta,
        gamma_m,
        gamma_max,
        objective_history: vec![gamma_m],
    };
    Ok((state, assoc, w))
}

/// Right-hand side of the Taylor surrogate for UE `u`, evaluated exactly as
/// the first-order expansion of sum_b (p^2 + q^2) / beta around
/// (p_n, q_n, beta_n).
pub fn surrogate_rhs(
    p_n: &Mat<f64>,
    q_n: &Mat<f64>,
    beta_n: &[f64],
    p: &Mat<f64>,
    q: &Mat<f64>,
    beta: &[f64],
    u: usize,
) -> Result<f64, ScaError> {
    let bn = beta_n[u];
    if !(bn > 0.0) {
        return Err(ScaError::BadExpansionPoint(u));
    }
    let mut acc = 0.0;
    for b in 0..p_n.rows() {
        let (pn, qn) = (p_n[(b, u)], q_n[(b, u)]);
        acc += 2.0 * pn / bn * (p[(b, u)] - pn);
        acc += 2.0 * qn / bn * (q[(b, u)] - qn);
        acc += (pn * pn + qn * qn) / bn * (1.0 - (beta[u] - bn) / bn);
    }
    Ok(acc)
}

/// Backhaul right-hand side 2^(R/F) - 1 with the exponent handled in the log
/// domain: beyond 2^60 the bound cannot bind (sum eta <= U * gamma_max always
/// holds), so it is replaced by an equivalent inactive cap.
fn backhaul_rhs(params: &SystemParams, ues: usize, gamma_max: f64) -> (f64, bool) {
    let exponent = params.r_backhaul / params.bandwidth_f;
    if exponent <= 60.0 {
        let rhs = 2f64.powf(exponent) - 1.0;
        (rhs, rhs >= ues as f64 * gamma_max)
    } else {
        let cap = (2f64.powi(60) - 1.0).min(ues as f64 * gamma_max);
        (cap, true)
    }
}

/// Assemble the convex (binary-relaxed) subproblem at the current expansion
/// point. Returns the program and the variable layout used to read back the
/// solution.
pub fn build_subproblem(
    channels: &ChannelSet,
    params: &SystemParams,
    state: &ScaState,
    options: &JubdOptions,
) -> Result<(ConicProgram, SubproblemLayout), ScaError> {
    let layout = SubproblemLayout::new(channels);
    let stations = layout.stations;
    let ues = layout.ues;
    let sigma = params.noise_var.sqrt();
    let gamma_max = state.gamma_max;

    // noise-normalized channel matrices
    let h_norm: Vec<CMat> = (0..stations)
        .map(|b| {
            let m = channels.station(b);
            CMat::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)] / sigma)
        })
        .collect();

    let mut prog = ConicProgram::new();

    // variables (order fixed by the layout)
    for b in 0..stations {
        for u in 0..ues {
            for r in 0..layout.n_antennas[b] {
                prog.add_var(format!("w_re[{b}][{u}][{r}]"), None, None);
                prog.add_var(format!("w_im[{b}][{u}][{r}]"), None, None);
            }
        }
    }
    for b in 0..stations {
        for u in 0..ues {
            let j = prog.add_binary(format!("a[{b}][{u}]"));
            debug_assert_eq!(j, layout.a(b, u));
            let pw = channels.station_power(b, params) * norm_sq(&channels.station(b).col_vec(u));
            prog.set_branch_priority(j, pw);
        }
    }
    for u in 0..ues {
        let j = prog.add_var(format!("alpha[{u}]"), None, None);
        debug_assert_eq!(j, layout.alpha(u));
    }
    for u in 0..ues {
        // beta is normalized by the noise power inside the program; the
        // interference cone already enforces beta >= 1, so an explicit bound
        // is only needed when that cone degenerates away (single UE). A
        // duplicated active bound makes the dual face degenerate.
        let lower = (ues == 1).then_some(1.0);
        let j = prog.add_var(format!("beta[{u}]"), lower, None);
        debug_assert_eq!(j, layout.beta(u));
    }
    // p, q need lower bounds: the rows p <= Re(h^H w), q <= Im(h^H w) cap
    // them from above (Cauchy-Schwarz keeps |Re|, |Im| below sqrt(P)||h~||),
    // but nothing else stops a negative-coefficient surrogate from driving
    // them to -infinity
    for b in 0..stations {
        let p_b = channels.station_power(b, params);
        for u in 0..ues {
            let cap = p_b.sqrt() * norm_sq(&h_norm[b].col_vec(u)).sqrt();
            let j = prog.add_var(format!("p[{b}][{u}]"), Some(-cap), None);
            debug_assert_eq!(j, layout.p(b, u));
        }
    }
    for b in 0..stations {
        let p_b = channels.station_power(b, params);
        for u in 0..ues {
            let cap = p_b.sqrt() * norm_sq(&h_norm[b].col_vec(u)).sqrt();
            let j = prog.add_var(format!("q[{b}][{u}]"), Some(-cap), None);
            debug_assert_eq!(j, layout.q(b, u));
        }
    }
    if layout.has_haps {
        for u in 0..ues {
            let j = prog.add_var(format!("eta[{u}]"), Some(0.0), Some(gamma_max));
            debug_assert_eq!(j, layout.eta(u));
        }
    }
    let gamma = prog.add_var("gamma_m", Some(0.0), Some(gamma_max));
    debug_assert_eq!(gamma, layout.gamma_idx);
    debug_assert_eq!(prog.n_vars(), layout.n_vars);
    prog.set_objective(gamma, 1.0);

    // fixed association: pin the binaries, no cardinality rows needed
    match &options.association_mode {
        AssociationMode::Fixed(assoc) => {
            for b in 0..stations {
                for u in 0..ues {
                    prog.fix_var(layout.a(b, u), assoc.a[(b, u)] as f64);
                }
            }
        }
        AssociationMode::Single => {
            for u in 0..ues {
                let terms = (0..stations).map(|b| (layout.a(b, u), 1.0)).collect();
                prog.add_eq(terms, 1.0);
            }
        }
        AssociationMode::Multi => {
            for u in 0..ues {
                let terms = (0..stations).map(|b| (layout.a(b, u), 1.0)).collect();
                prog.add_ge(terms, 1.0);
            }
        }
    }

    // alpha_u >= gamma_m
    for u in 0..ues {
        prog.add_ge(vec![(layout.alpha(u), 1.0), (gamma, -1.0)], 0.0);
    }

    // Taylor surrogate rows (normalized units)
    for u in 0..ues {
        let beta_hat = (state.beta[u] / params.noise_var).max(1.0);
        let mut coeff_p = vec![0.0; stations];
        let mut coeff_q = vec![0.0; stations];
        let mut c_total = 0.0;
        for b in 0..stations {
            let ph = state.p[(b, u)] / sigma;
            let qh = state.q[(b, u)] / sigma;
            coeff_p[b] = 2.0 * ph / beta_hat;
            coeff_q[b] = 2.0 * qh / beta_hat;
            c_total += (ph * ph + qh * qh) / beta_hat;
        }
        // degenerate expansion point: re-seed with a minimum-power matched
        // filter towards the strongest station so the surrogate can move
        let bound_u: f64 = (0..stations)
            .map(|b| channels.station_power(b, params) * norm_sq(&h_norm[b].col_vec(u)))
            .sum();
        if c_total < 1e-12 * bound_u.max(1.0) {
            let b_star = max_power_choices(channels, params)[u];
            let ph = (1e-6 * channels.station_power(b_star, params)).sqrt()
                * norm_sq(&h_norm[b_star].col_vec(u)).sqrt();
            coeff_p[b_star] = 2.0 * ph / beta_hat;
            c_total = ph * ph / beta_hat;
        }
        // expanded surrogate row: the -2C from the (p - p_hat, q - q_hat)
        // terms cancels the +2C of the beta term, leaving
        //   alpha_u + (C/beta_hat) beta_u - sum_b cp_b p_b - sum_b cq_b q_b <= 0
        // (tight at the expansion point: alpha <= 2C - C = C)
        let mut terms = vec![(layout.alpha(u), 1.0), (layout.beta(u), c_total / beta_hat)];
        for b in 0..stations {
            if coeff_p[b] != 0.0 {
                terms.push((layout.p(b, u), -coeff_p[b]));
            }
            if coeff_q[b] != 0.0 {
                terms.push((layout.q(b, u), -coeff_q[b]));
            }
        }
        prog.add_le(terms, 0.0);
    }

    // p, q below the real/imaginary parts of h^H w
    for b in 0..stations {
        for u in 0..ues {
            let h = h_norm[b].col_vec(u);
            let mut re_terms = vec![(layout.p(b, u), 1.0)];
            let mut im_terms = vec![(layout.q(b, u), 1.0)];
            for (r, hr) in h.iter().enumerate() {
                re_terms.push((layout.w_re(b, u, r), -hr.re));
                re_terms.push((layout.w_im(b, u, r), -hr.im));
                im_terms.push((layout.w_im(b, u, r), -hr.re));
                im_terms.push((layout.w_re(b, u, r), hr.im));
            }
            prog.add_le(re_terms, 0.0);
            prog.add_le(im_terms, 0.0);
        }
    }

    // interference bound: beta_u - 1 >= sum of squared cross inner products
    // (with a single UE there are no cross terms and the beta >= 1 bound
    // already covers the degenerate cone)
    for u in 0..ues {
        let mut exprs = Vec::new();
        let mut head = AffExpr::constant(-1.0);
        head.push(layout.beta(u), 1.0);
        exprs.push(head);
        exprs.push(AffExpr::constant(0.5));
        for b in 0..stations {
            let h = h_norm[b].col_vec(u);
            for k in 0..ues {
                if k == u {
                    continue;
                }
                let mut re = AffExpr::constant(0.0);
                let mut im = AffExpr::constant(0.0);
                for (r, hr) in h.iter().enumerate() {
                    re.push(layout.w_re(b, k, r), hr.re);
                    re.push(layout.w_im(b, k, r), hr.im);
                    im.push(layout.w_im(b, k, r), hr.re);
                    im.push(layout.w_re(b, k, r), -hr.im);
                }
                exprs.push(re);
                exprs.push(im);
            }
        }
        if exprs.len() > 2 {
            prog.add_rsoc(exprs);
        }
    }

    // per-beam power gated by the association: ||w_u^b||^2 <= P_b a_{b,u}
    for b in 0..stations {
        let p_b = channels.station_power(b, params);
        for u in 0..ues {
            let mut exprs = vec![AffExpr::scaled_var(layout.a(b, u), p_b), AffExpr::constant(0.5)];
            for r in 0..layout.n_antennas[b] {
                exprs.push(AffExpr::var(layout.w_re(b, u, r)));
                exprs.push(AffExpr::var(layout.w_im(b, u, r)));
            }
            prog.add_rsoc(exprs);
        }
    }

    // per-station power: ||W^b||_F <= sqrt(P_b)
    for b in 0..stations {
        let p_b = channels.station_power(b, params);
        let mut exprs = vec![AffExpr::constant(p_b.sqrt())];
        for u in 0..ues {
            for r in 0..layout.n_antennas[b] {
                exprs.push(AffExpr::var(layout.w_re(b, u, r)));
                exprs.push(AffExpr::var(layout.w_im(b, u, r)));
            }
        }
        prog.add_soc(exprs);
    }

    // backhaul linearization (HAPS tier only)
    if layout.has_haps {
        let haps = stations - 1;
        for u in 0..ues {
            // eta_u <= gamma_max a_{haps,u}
            prog.add_le(vec![(layout.eta(u), 1.0), (layout.a(haps, u), -gamma_max)], 0.0);
            // gamma_m - eta_u >= 0
            prog.add_ge(vec![(gamma, 1.0), (layout.eta(u), -1.0)], 0.0);
            // gamma_m - eta_u <= gamma_max (1 - a_{haps,u})
            prog.add_le(
                vec![(gamma, 1.0), (layout.eta(u), -1.0), (layout.a(haps, u), gamma_max)],
                gamma_max,
            );
        }
        let (rhs, _inactive) = backhaul_rhs(params, ues, gamma_max);
        let terms = (0..ues).map(|u| (layout.eta(u), 1.0)).collect();
        prog.add_le(terms, rhs);
    }

    Ok((prog, layout))
}

/// Values read back from a solved subproblem (physical units).
#[derive(Debug, Clone)]
pub struct SubproblemPoint {
    pub w: Beamforming,
    pub a: Association,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    pub gamma_m: f64,
}

pub fn extract_point(x: &[f64], layout: &SubproblemLayout, channels: &ChannelSet) -> SubproblemPoint {
    let sigma_sq = channels.params.noise_var;
    let stations = layout.stations;
    let ues = layout.ues;
    let mut w = Beamforming::zeros(channels);
    for b in 0..stations {
        for u in 0..ues {
            for r in 0..layout.n_antennas[b] {
                w.w[b][(r, u)] =
                    num_complex::Complex64::new(x[layout.w_re(b, u, r)], x[layout.w_im(b, u, r)]);
            }
        }
    }
    let mut a = Association::zeros(stations, ues);
    for b in 0..stations {
        for u in 0..ues {
            a.a[(b, u)] = (x[layout.a(b, u)] >= 0.5) as u8;
        }
    }
    SubproblemPoint {
        w,
        a,
        alpha: (0..ues).map(|u| x[layout.alpha(u)]).collect(),
        beta: (0..ues).map(|u| x[layout.beta(u)] * sigma_sq).collect(),
        eta: if layout.has_haps {
            (0..ues).map(|u| x[layout.eta(u)]).collect()
        } else {
            vec![0.0; ues]
        },
        gamma_m: x[layout.gamma_idx],
    }
}

/// Fold a solved subproblem into the state: the optimal beta becomes the next
/// interference expansion point and (p, q) are canonicalized to the exact
/// real/imaginary parts of h^H w at the returned beams (an optimal-face
/// representative; entries with zero surrogate coefficient are otherwise
/// solver-arbitrary and a raw copy can poison later surrogates).
pub fn update_state(state: &mut ScaState, point: &SubproblemPoint, channels: &ChannelSet) {
    let stations = layout_dims(channels).0;
    let ues = layout_dims(channels).1;
    state.beta.clone_from(&point.beta);
    for b in 0..stations {
        let m = channels.station(b);
        for u in 0..ues {
            let ip = inner_h(&m.col_vec(u), &point.w.w[b].col_vec(u));
            state.p[(b, u)] = ip.re;
            state.q[(b, u)] = ip.im;
        }
    }
    state.alpha.clone_from(&point.alpha);
    state.eta.clone_from(&point.eta);
    state.gamma_m = point.gamma_m;
    state.objective_history.push(point.gamma_m);
    state.iteration += 1;
}

fn layout_dims(channels: &ChannelSet) -> (usize, usize) {
    (channels.station_count(), channels.ue_count())
}

fn hint_assignment(layout: &SubproblemLayout, assoc: &Association) -> Vec<(usize, u8)> {
    let mut out = Vec::with_capacity(layout.stations * layout.ues);
    for b in 0..layout.stations {
        for u in 0..layout.ues {
            out.push((layout.a(b, u), assoc.a[(b, u)]));
        }
    }
    out
}

fn status_str(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::NodeLimit => "node_limit",
        SolveStatus::Numerical => "numerical",
    }
}

/// Run the iterative joint design to convergence (or the iteration cap) and
/// return the final beams, association, true SINRs and the trace.
pub fn run_jubd(
    channels: &ChannelSet,
    params: &SystemParams,
    options: &JubdOptions,
) -> Result<Solution, ScaError> {
    params.validate()?;
    let (mut state, a0, w0) = initialize_state(channels, params, options)?;
    let mut best_w = w0;
    let mut best_a = a0;
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut converged = false;

    for n in 1..=options.max_iter {
        let t0 = Instant::now();
        let (prog, layout) = build_subproblem(channels, params, &state, options)?;
        let mopts = MisocpOptions {
            socp_tol: params.solver_tol,
            node_limit: params.bnb_node_limit,
            strategy: match options.binary_strategy {
                BinaryStrategy::BranchAndBound => SolverStrategy::BranchAndBound,
                BinaryStrategy::RelaxRound => SolverStrategy::RelaxRound,
            },
            hint: Some(hint_assignment(&layout, &best_a)),
            ..MisocpOptions::default()
        };
        let rep: SolveReport = solve_misocp(&prog, &mopts)?;
        let elapsed = t0.elapsed().as_secs_f64();
        match rep.status {
            SolveStatus::Optimal | SolveStatus::NodeLimit if rep.x.is_some() => {}
            SolveStatus::Infeasible => return Err(ScaError::SubproblemInfeasible { iteration: n }),
            other => {
                return Err(ScaError::SolverFailure { iteration: n, status: status_str(other) })
            }
        }
        let point = extract_point(rep.x.as_ref().unwrap(), &layout, channels);

        // exact SCA never descends (the previous optimum stays feasible);
        // a decrease is solver noise, so keep the previous point and stop
        if point.gamma_m < state.gamma_m {
            rows.push(TraceRow {
                iteration: n,
                gamma_m: state.gamma_m,
                wall_time_s: elapsed,
                status: "stalled".into(),
                bnb_nodes: rep.bnb_nodes,
            });
            converged = true;
            break;
        }

        update_state(&mut state, &point, channels);
        best_w = point.w;
        best_a = point.a;
        rows.push(TraceRow {
            iteration: n,
            gamma_m: point.gamma_m,
            wall_time_s: elapsed,
            status: status_str(rep.status).into(),
            bnb_nodes: rep.bnb_nodes,
        });

        let hist = &state.objective_history;
        let delta = (hist[hist.len() - 1] - hist[hist.len() - 2]).abs();
        if delta <= options.tol * hist[hist.len() - 1].max(1.0) {
            converged = true;
            break;
        }
    }

    let gamma = sinr(channels, &best_w, params);
    let gamma_m = gamma.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Solution {
        w: best_w,
        a: best_a,
        gamma,
        gamma_m,
        trace: ScaTrace {
            rows,
            objective_history: state.objective_history.clone(),
            converged,
        },
    })
}
