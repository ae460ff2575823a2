//! System-wide physical and algorithmic constants.

use serde::{Deserialize, Serialize};

/// Speed of light in vacuum (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Choice of the big-M constant bounding the achievable minimum SINR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMaxPolicy {
    /// max_u sum_b P_b ||h_u^b||^2 / sigma_n^2, a valid per-topology bound.
    InterferenceFreeBound,
    Fixed(f64),
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ParamError {
    #[error("{name} must be strictly positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be at least 1, got {value}")]
    CountTooSmall { name: &'static str, value: usize },
    #[error("{name} must lie in (0, 1), got {value}")]
    NotUnitInterval { name: &'static str, value: f64 },
}

/// All physical and algorithmic constants of a simulation run.
///
/// Antenna element spacings `d_x`, `d_y` are expressed in wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// Carrier frequency (Hz).
    pub f_c: f64,
    /// Shadowing standard deviation (dB).
    pub sigma_xi: f64,
    /// Rician factor (linear power ratio).
    pub rician_k: f64,
    pub n_mbs_v: usize,
    pub n_mbs_h: usize,
    pub n_haps_v: usize,
    pub n_haps_h: usize,
    /// HAPS element spacing along x, in wavelengths.
    pub d_x: f64,
    /// HAPS element spacing along y, in wavelengths.
    pub d_y: f64,
    /// MBS maximum transmit power (W).
    pub p_max_mbs: f64,
    /// HAPS maximum transmit power (W).
    pub p_max_haps: f64,
    /// Per-UE allocated bandwidth (Hz).
    pub bandwidth_f: f64,
    /// HAPS backhaul rate (bit/s).
    pub r_backhaul: f64,
    /// Receiver noise variance (W).
    pub noise_var: f64,
    /// Side of the square service area (m).
    pub area_side: f64,
    /// HAPS altitude (m).
    pub haps_altitude: f64,
    /// MBS antenna height (m).
    pub mbs_height: f64,
    pub gamma_max_policy: GammaMaxPolicy,
    /// SCA relative-improvement stopping tolerance.
    pub sca_tol: f64,
    pub sca_max_iter: usize,
    /// Interior-point feasibility/gap tolerance.
    pub solver_tol: f64,
    pub bnb_node_limit: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::table1()
    }
}

impl SystemParams {
    /// Full-scale parameter set: 2.545 GHz carrier, 8 dB shadowing, K = 10,
    /// 4x4 MBS / 8x8 HAPS arrays at lambda/2 spacing, 43/52 dBm transmit
    /// power, 1 MHz per UE, 20 Gbit/s backhaul, -100 dBm noise, 4 km square
    /// area, 20 km HAPS altitude.
    pub fn table1() -> Self {
        SystemParams {
            f_c: 2.545e9,
            sigma_xi: 8.0,
            rician_k: 10.0,
            n_mbs_v: 4,
            n_mbs_h: 4,
            n_haps_v: 8,
            n_haps_h: 8,
            d_x: 0.5,
            d_y: 0.5,
            p_max_mbs: dbm_to_watt(43.0),
            p_max_haps: dbm_to_watt(52.0),
            bandwidth_f: 1e6,
            r_backhaul: 20e9,
            noise_var: dbm_to_watt(-100.0),
            area_side: 4000.0,
            haps_altitude: 20_000.0,
            mbs_height: 25.0,
            gamma_max_policy: GammaMaxPolicy::InterferenceFreeBound,
            sca_tol: 1e-4,
            sca_max_iter: 10,
            // channel coefficients leave ~3 orders of magnitude inside each
            // subproblem even after noise normalization; 1e-6 is the reliable
            // interior-point accuracy in original units at that range and is
            // the same regime the feasibility checker certifies against
            solver_tol: 1e-6,
            bnb_node_limit: 200,
        }
    }

    /// Reduced antenna counts keeping every mechanism intact while the
    /// branch-and-bound trees stay small (2x2 MBS, 4x4 HAPS).
    pub fn desk_scale() -> Self {
        SystemParams {
            n_mbs_v: 2,
            n_mbs_h: 2,
            n_haps_v: 4,
            n_haps_h: 4,
            ..Self::table1()
        }
    }

    pub fn n_mbs(&self) -> usize {
        self.n_mbs_v * self.n_mbs_h
    }

    pub fn n_haps(&self) -> usize {
        self.n_haps_v * self.n_haps_h
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("f_c", self.f_c),
            ("sigma_xi", self.sigma_xi),
            ("rician_k", self.rician_k),
            ("d_x", self.d_x),
            ("d_y", self.d_y),
            ("p_max_mbs", self.p_max_mbs),
            ("p_max_haps", self.p_max_haps),
            ("bandwidth_f", self.bandwidth_f),
            ("r_backhaul", self.r_backhaul),
            ("noise_var", self.noise_var),
            ("area_side", self.area_side),
            ("haps_altitude", self.haps_altitude),
            ("mbs_height", self.mbs_height),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ParamError::NotPositive { name, value });
            }
        }
        let counts = [
            ("n_mbs_v", self.n_mbs_v),
            ("n_mbs_h", self.n_mbs_h),
            ("n_haps_v", self.n_haps_v),
            ("n_haps_h", self.n_haps_h),
            ("sca_max_iter", self.sca_max_iter),
            ("bnb_node_limit", self.bnb_node_limit),
        ];
        for (name, value) in counts {
            if value < 1 {
                return Err(ParamError::CountTooSmall { name, value });
            }
        }
        for (name, value) in [("sca_tol", self.sca_tol), ("solver_tol", self.solver_tol)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(ParamError::NotUnitInterval { name, value });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table1_matches_published_levels() {
        let p = SystemParams::table1();
        assert_relative_eq!(p.p_max_mbs, 19.952623149688797, max_relative = 1e-12);
        assert_relative_eq!(p.p_max_haps, 158.48931924611142, max_relative = 1e-12);
        assert_relative_eq!(p.noise_var, 1e-13, max_relative = 1e-12);
        assert_eq!(p.n_mbs(), 16);
        assert_eq!(p.n_haps(), 64);
        p.validate().unwrap();
    }

    #[test]
    fn validation_flags_bad_fields() {
        let mut p = SystemParams::table1();
        p.p_max_mbs = -1.0;
        assert!(matches!(p.validate(), Err(ParamError::NotPositive { name: "p_max_mbs", .. })));
        let mut p = SystemParams::table1();
        p.sca_tol = 1.5;
        assert!(matches!(p.validate(), Err(ParamError::NotUnitInterval { .. })));
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let err = serde_json::from_str::<SystemParams>(r#"{"frequency": 1.0}"#);
        assert!(err.is_err());
    }
}
