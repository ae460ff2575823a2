//! Decision variables, SINR/spectral-efficiency evaluation and the
//! feasibility checker for the joint association + beamforming design.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::mat::{inner_h, norm_sq, CMat, Mat};
use crate::params::SystemParams;
use crate::sca::ScaTrace;

#[derive(Debug, Clone, thiserror::Error)]
pub enum NetModelError {
    #[error("SINR must be nonnegative, got {0}")]
    NegativeSinr(f64),
}

/// Binary user-association matrix, stations x UEs (HAPS last when present).
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub a: Mat<u8>,
}

impl Association {
    pub fn zeros(stations: usize, ues: usize) -> Self {
        Association { a: Mat::zeros(stations, ues) }
    }

    /// Single association from a per-UE station choice.
    pub fn from_choices(stations: usize, choices: &[usize]) -> Self {
        let mut a = Mat::zeros(stations, choices.len());
        for (u, &b) in choices.iter().enumerate() {
            a[(b, u)] = 1;
        }
        Association { a }
    }

    pub fn column_sum(&self, u: usize) -> usize {
        self.a.column(u).map(|&v| v as usize).sum()
    }

    /// Station serving UE u (lowest index when several).
    pub fn serving_station(&self, u: usize) -> Option<usize> {
        (0..self.a.rows()).find(|&b| self.a[(b, u)] == 1)
    }

    pub fn haps_count(&self, channels: &ChannelSet) -> usize {
        if channels.haps.is_none() {
            return 0;
        }
        let row = self.a.rows() - 1;
        (0..self.a.cols()).map(|u| self.a[(row, u)] as usize).sum()
    }

    pub fn rows_vec(&self) -> Vec<Vec<u8>> {
        (0..self.a.rows()).map(|b| self.a.row(b).to_vec()).collect()
    }
}

/// Per-station beamforming matrices W^b (antennas x UEs), HAPS last.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamforming {
    pub w: Vec<CMat>,
}

impl Beamforming {
    pub fn zeros(channels: &ChannelSet) -> Self {
        let w = (0..channels.station_count())
            .map(|b| CMat::zeros(channels.n_antennas(b), channels.ue_count()))
            .collect();
        Beamforming { w }
    }

    pub fn beam(&self, b: usize, u: usize) -> Vec<Complex64> {
        self.w[b].col_vec(u)
    }

    pub fn beam_power(&self, b: usize, u: usize) -> f64 {
        self.w[b].column(u).map(|z| z.norm_sqr()).sum()
    }

    pub fn station_power(&self, b: usize) -> f64 {
        norm_sq(self.w[b].data())
    }
}

/// Converged design point returned by the iterative algorithm.
#[derive(Debug, Clone)]
pub struct Solution {
    pub w: Beamforming,
    pub a: Association,
    /// True per-UE SINRs recomputed from (channels, w).
    pub gamma: Vec<f64>,
    /// min_u gamma[u].
    pub gamma_m: f64,
    pub trace: ScaTrace,
}

/// Serializable view of a solution (beamformers optional).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionJson {
    pub association: Vec<Vec<u8>>,
    pub sinr: Vec<f64>,
    pub spectral_efficiency: Vec<f64>,
    pub gamma_m: f64,
    pub min_se: f64,
    pub beam_power_w: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beamformers_re_im: Option<Vec<Vec<f64>>>,
}

impl Solution {
    pub fn to_json(&self, include_beamformers: bool) -> SolutionJson {
        let b_count = self.w.w.len();
        let u_count = self.gamma.len();
        SolutionJson {
            association: self.a.rows_vec(),
            sinr: self.gamma.clone(),
            spectral_efficiency: self.gamma.iter().map(|&g| (1.0 + g).log2()).collect(),
            gamma_m: self.gamma_m,
            min_se: (1.0 + self.gamma_m).log2(),
            beam_power_w: (0..b_count)
                .map(|b| (0..u_count).map(|u| self.w.beam_power(b, u)).collect())
                .collect(),
            converged: self.trace.converged,
            iterations: self.trace.rows.len(),
            beamformers_re_im: include_beamformers.then(|| {
                self.w
                    .w
                    .iter()
                    .map(|m| m.data().iter().flat_map(|z| [z.re, z.im]).collect())
                    .collect()
            }),
        }
    }
}

/// Eq.-style SINR: desired power summed over all stations, interference over
/// all stations and all other UEs' beams.
pub fn sinr(channels: &ChannelSet, w: &Beamforming, params: &SystemParams) -> Vec<f64> {
    let stations = channels.station_count();
    let ues = channels.ue_count();
    (0..ues)
        .map(|u| {
            let mut desired = 0.0;
            let mut interference = 0.0;
            for b in 0..stations {
                let h = channels.station(b).col_vec(u);
                for k in 0..ues {
                    let pow = inner_h(&h, &w.w[b].col_vec(k)).norm_sqr();
                    if k == u {
                        desired += pow;
                    } else {
                        interference += pow;
                    }
                }
            }
            desired / (interference + params.noise_var)
        })
        .collect()
}

/// log2(1 + gamma) in bit/s/Hz.
pub fn spectral_efficiency(gamma: f64) -> Result<f64, NetModelError> {
    if gamma < 0.0 {
        return Err(NetModelError::NegativeSinr(gamma));
    }
    Ok((1.0 + gamma).log2())
}

/// Sum rate carried by the HAPS: sum_u a_{haps,u} F log2(1 + gamma_u).
pub fn backhaul_load(a: &Association, gamma: &[f64], channels: &ChannelSet, params: &SystemParams) -> f64 {
    if channels.haps.is_none() {
        return 0.0;
    }
    let row = a.a.rows() - 1;
    gamma
        .iter()
        .enumerate()
        .filter(|&(u, _)| a.a[(row, u)] == 1)
        .map(|(_, &g)| params.bandwidth_f * (1.0 + g).log2())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityMode {
    SingleAssociation,
    MultiAssociation,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintReport {
    pub name: &'static str,
    pub satisfied: bool,
    /// Worst violation relative to the constraint's natural scale.
    pub worst_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub constraints: Vec<ConstraintReport>,
    pub feasible: bool,
}

pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Check every constraint of the design problem on a complete solution.
/// Violations are scaled by the constraint's natural magnitude (P_b for the
/// power constraints, R_BH for the backhaul, 1 for association counts).
pub fn check_feasibility(
    sol: &Solution,
    channels: &ChannelSet,
    params: &SystemParams,
    mode: FeasibilityMode,
) -> FeasibilityReport {
    let stations = channels.station_count();
    let ues = channels.ue_count();
    let mut constraints = Vec::new();

    // (8b) per-beam power gated by association
    let mut worst = 0.0f64;
    for b in 0..stations {
        let p_b = channels.station_power(b, params);
        for u in 0..ues {
            let cap = p_b * sol.a.a[(b, u)] as f64;
            worst = worst.max((sol.w.beam_power(b, u) - cap) / p_b);
        }
    }
    constraints.push(ConstraintReport {
        name: "beam_power_gated_by_association",
        satisfied: worst <= FEASIBILITY_TOL,
        worst_violation: worst.max(0.0),
    });

    // (8c) HAPS backhaul
    let load = backhaul_load(&sol.a, &sol.gamma, channels, params);
    let viol = (load - params.r_backhaul) / params.r_backhaul;
    constraints.push(ConstraintReport {
        name: "haps_backhaul_rate",
        satisfied: viol <= FEASIBILITY_TOL,
        worst_violation: viol.max(0.0),
    });

    // (8d) per-station total power
    let mut worst = 0.0f64;
    for b in 0..stations {
        let p_b = channels.station_power(b, params);
        worst = worst.max((sol.w.station_power(b) - p_b) / p_b);
    }
    constraints.push(ConstraintReport {
        name: "station_total_power",
        satisfied: worst <= FEASIBILITY_TOL,
        worst_violation: worst.max(0.0),
    });

    // (8f) association cardinality
    let mut worst = 0.0f64;
    for u in 0..ues {
        let sum = sol.a.column_sum(u) as f64;
        let v = match mode {
            FeasibilityMode::SingleAssociation => (sum - 1.0).abs(),
            FeasibilityMode::MultiAssociation => (1.0 - sum).max(0.0),
        };
        worst = worst.max(v);
    }
    constraints.push(ConstraintReport {
        name: "association_cardinality",
        satisfied: worst <= FEASIBILITY_TOL,
        worst_violation: worst,
    });

    // (8g) binariness holds by construction of the u8 matrix
    let binary_ok = sol.a.a.data().iter().all(|&v| v <= 1);
    constraints.push(ConstraintReport {
        name: "association_binary",
        satisfied: binary_ok,
        worst_violation: if binary_ok { 0.0 } else { 1.0 },
    });

    let feasible = constraints.iter().all(|c| c.satisfied);
    FeasibilityReport { constraints, feasible }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_channel_set;
    use crate::geometry::generate_topology;
    use crate::rng::stream_rng;
    use crate::sca::ScaTrace;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn tiny_channels(stations_mbs: usize, ues: usize) -> ChannelSet {
        let mut p = SystemParams::table1();
        p.n_mbs_v = 2;
        p.n_mbs_h = 1;
        p.n_haps_v = 2;
        p.n_haps_h = 1;
        let topo = generate_topology(&p, stations_mbs, ues, 3).unwrap();
        build_channel_set(&topo, &p, &mut stream_rng(8)).unwrap()
    }

    #[test]
    fn single_user_unit_case() {
        let mut cs = tiny_channels(1, 1);
        cs.haps = None;
        let p = {
            let mut p = cs.params.clone();
            p.noise_var = 1.0;
            p
        };
        // craft h and w so that |h^H w|^2 = 1
        let mut w = Beamforming::zeros(&cs);
        let h = cs.mbs[0].col_vec(0);
        let hn = norm_sq(&h).sqrt();
        let beam: Vec<Complex64> = h.iter().map(|z| z / hn / hn).collect();
        w.w[0].set_col(0, &beam);
        let g = sinr(&cs, &w, &p);
        assert_relative_eq!(g[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn orthogonal_channels_no_cross_interference() {
        let mut cs = tiny_channels(1, 2);
        cs.haps = None;
        let e0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let e1 = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        cs.mbs[0].set_col(0, &e0);
        cs.mbs[0].set_col(1, &e1);
        let p = cs.params.clone();
        let pw = p.p_max_mbs / 2.0;
        let mut w = Beamforming::zeros(&cs);
        let b0: Vec<Complex64> = e0.iter().map(|z| z * pw.sqrt()).collect();
        let b1: Vec<Complex64> = e1.iter().map(|z| z * pw.sqrt()).collect();
        w.w[0].set_col(0, &b0);
        w.w[0].set_col(1, &b1);
        let g = sinr(&cs, &w, &p);
        for u in 0..2 {
            assert_relative_eq!(g[u], pw / p.noise_var, max_relative = 1e-12);
        }
    }

    /// Independent textbook evaluation of the SINR formula on a random
    /// 2-station / 3-UE instance.
    #[test]
    fn sinr_matches_independent_evaluation() {
        let cs = tiny_channels(1, 3); // 1 MBS + HAPS = 2 stations
        let p = cs.params.clone();
        let mut rng = stream_rng(77);
        let mut w = Beamforming::zeros(&cs);
        for b in 0..cs.station_count() {
            for u in 0..3 {
                let n = cs.n_antennas(b);
                let col: Vec<Complex64> = (0..n)
                    .map(|_| {
                        use rand::Rng;
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                            * 1e-3
                    })
                    .collect();
                w.w[b].set_col(u, &col);
            }
        }
        let got = sinr(&cs, &w, &p);
        // independent route: explicit complex arithmetic, no shared helpers
        for u in 0..3 {
            let mut desired = 0.0;
            let mut interf = 0.0;
            for b in 0..cs.station_count() {
                let hmat = cs.station(b);
                for k in 0..3 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for r in 0..cs.n_antennas(b) {
                        acc += hmat[(r, u)].conj() * w.w[b][(r, k)];
                    }
                    let pow = acc.re * acc.re + acc.im * acc.im;
                    if k == u {
                        desired += pow;
                    } else {
                        interf += pow;
                    }
                }
            }
            let expect = desired / (interf + p.noise_var);
            assert_relative_eq!(got[u], expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn spectral_efficiency_anchors() {
        assert_eq!(spectral_efficiency(0.0).unwrap(), 0.0);
        assert_eq!(spectral_efficiency(1.0).unwrap(), 1.0);
        assert_eq!(spectral_efficiency(3.0).unwrap(), 2.0);
        assert!(spectral_efficiency(-0.1).is_err());
    }

    #[test]
    fn backhaul_anchors() {
        let cs = tiny_channels(1, 16);
        let p = cs.params.clone();
        let stations = cs.station_count();
        // nobody on HAPS
        let a = Association::from_choices(stations, &vec![0; 16]);
        assert_eq!(backhaul_load(&a, &vec![1.0; 16], &cs, &p), 0.0);
        // one UE on HAPS at gamma = 1, F = 1 MHz -> 1e6 bit/s
        let mut choices = vec![0; 16];
        choices[3] = 1;
        let a = Association::from_choices(stations, &choices);
        assert_relative_eq!(backhaul_load(&a, &vec![1.0; 16], &cs, &p), 1e6);
        // all 16 on HAPS at gamma = 1000: 16e6 log2(1001), far below 20 Gb/s
        let a = Association::from_choices(stations, &vec![1; 16]);
        let load = backhaul_load(&a, &vec![1e3; 16], &cs, &p);
        assert_relative_eq!(load, 1.594756201413759e8, max_relative = 1e-12);
        assert!(load < p.r_backhaul);
    }

    #[test]
    fn feasibility_flags_power_violation() {
        let cs = tiny_channels(2, 2);
        let p = cs.params.clone();
        let stations = cs.station_count();
        let mut w = Beamforming::zeros(&cs);
        // all-zero beams with a valid association: feasible
        let a = Association::from_choices(stations, &[0, 1]);
        let sol = Solution {
            w: w.clone(),
            a: a.clone(),
            gamma: vec![0.0, 0.0],
            gamma_m: 0.0,
            trace: ScaTrace::default(),
        };
        let rep = check_feasibility(&sol, &cs, &p, FeasibilityMode::SingleAssociation);
        assert!(rep.feasible, "{rep:?}");

        // now blow the station power budget by 1%
        let scale = (1.01 * p.p_max_mbs / 2.0).sqrt();
        let n = cs.n_antennas(0);
        let col: Vec<Complex64> =
            (0..n).map(|_| Complex64::new((scale * scale / n as f64).sqrt(), 0.0)).collect();
        w.w[0].set_col(0, &col);
        w.w[0].set_col(1, &col);
        let sol = Solution { w, a, gamma: vec![0.0, 0.0], gamma_m: 0.0, trace: ScaTrace::default() };
        let rep = check_feasibility(&sol, &cs, &p, FeasibilityMode::SingleAssociation);
        let station = rep
            .constraints
            .iter()
            .find(|c| c.name == "station_total_power")
            .unwrap();
        assert!(!station.satisfied);
        assert_relative_eq!(station.worst_violation, 0.01, max_relative = 1e-9);
    }
}
