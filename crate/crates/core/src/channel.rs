//! Channel synthesis.
//!
//! Terrestrial links combine i.i.d. Rayleigh fading per element, one
//! log-normal shadowing gain per link and free-space path loss; HAPS links
//! are 3D Rician with a uniform-planar-array steering vector as the LoS
//! component. All randomness comes from a caller-supplied stream.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{LinkGeometry, NetworkTopology};
use crate::mat::CMat;
use crate::params::{SystemParams, SPEED_OF_LIGHT};

#[derive(Debug, Clone, thiserror::Error)]
pub enum ChannelError {
    #[error("free-space path loss requires d > 0 (no co-located transceivers)")]
    ZeroDistance,
    #[error("carrier frequency must be positive")]
    BadFrequency,
    #[error("geometry covers {got} stations, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// Free-space path loss (4 pi f_c d / c)^2, dimensionless.
pub fn fspl(f_c: f64, d: f64) -> Result<f64, ChannelError> {
    if !(f_c > 0.0) {
        return Err(ChannelError::BadFrequency);
    }
    if !(d > 0.0) {
        return Err(ChannelError::ZeroDistance);
    }
    let ratio = 4.0 * std::f64::consts::PI * f_c * d / SPEED_OF_LIGHT;
    Ok(ratio * ratio)
}

/// Circularly-symmetric complex normal with unit variance.
fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Terrestrial channel vector: h_r = rayleigh_r * shadow / sqrt(PL), with the
/// shadowing gain drawn once per link and shared by all elements.
pub fn mbs_channel(
    geometry: &LinkGeometry,
    b: usize,
    u: usize,
    params: &SystemParams,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>, ChannelError> {
    let shadow_db: f64 = rng.sample::<f64, _>(StandardNormal) * params.sigma_xi;
    mbs_channel_with_shadow(geometry, b, u, params, shadow_db, rng)
}

/// Same link model with the shadowing realization (in dB) pinned by the
/// caller.
pub fn mbs_channel_with_shadow(
    geometry: &LinkGeometry,
    b: usize,
    u: usize,
    params: &SystemParams,
    shadow_db: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>, ChannelError> {
    let pl = fspl(params.f_c, geometry.distance[(b, u)])?;
    let shadow = 10f64.powf(shadow_db / 10.0);
    let scale = shadow / pl.sqrt();
    Ok((0..params.n_mbs()).map(|_| complex_normal(rng) * scale).collect())
}

/// Planar-array response a(theta, phi) (x) b(theta, phi) with unit-modulus
/// entries; spacings are in wavelengths so the phase increments are
/// d_h = d_x cos(theta) sin(phi) and d_v = d_y cos(theta) cos(phi).
pub fn haps_steering(theta: f64, phi: f64, params: &SystemParams) -> Vec<Complex64> {
    let d_h = params.d_x * theta.cos() * phi.sin();
    let d_v = params.d_y * theta.cos() * phi.cos();
    let phase = |k: usize, d: f64| {
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * d)
    };
    let a: Vec<Complex64> = (0..params.n_haps_h).map(|k| phase(k, d_h)).collect();
    let b: Vec<Complex64> = (0..params.n_haps_v).map(|l| phase(l, d_v)).collect();
    let mut out = Vec::with_capacity(a.len() * b.len());
    for ak in &a {
        for bl in &b {
            out.push(ak * bl);
        }
    }
    out
}

/// HAPS channel vector: Rician mixture of the steering vector and i.i.d.
/// scattering, scaled by the free-space loss.
pub fn haps_channel(
    geometry: &LinkGeometry,
    u: usize,
    params: &SystemParams,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>, ChannelError> {
    let haps_row = geometry.distance.rows() - 1;
    let pl = fspl(params.f_c, geometry.distance[(haps_row, u)])?;
    let k = params.rician_k;
    let nlos_w = (1.0 / (1.0 + k)).sqrt();
    let los_w = (k / (1.0 + k)).sqrt();
    let inv_sqrt_pl = 1.0 / pl.sqrt();
    let los = haps_steering(geometry.elevation[u], geometry.azimuth[u], params);
    Ok(los
        .into_iter()
        .map(|l| (complex_normal(rng) * nlos_w + l * los_w) * inv_sqrt_pl)
        .collect())
}

/// Channel matrices of every station towards every UE (HAPS last).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub mbs: Vec<CMat>,
    pub haps: Option<CMat>,
    pub params: SystemParams,
    pub seed: u64,
}

impl ChannelSet {
    pub fn station_count(&self) -> usize {
        self.mbs.len() + self.haps.is_some() as usize
    }

    pub fn ue_count(&self) -> usize {
        self.mbs
            .first()
            .map(|m| m.cols())
            .or_else(|| self.haps.as_ref().map(|m| m.cols()))
            .unwrap_or(0)
    }

    pub fn station_is_haps(&self, b: usize) -> bool {
        self.haps.is_some() && b == self.mbs.len()
    }

    pub fn station(&self, b: usize) -> &CMat {
        if b < self.mbs.len() {
            &self.mbs[b]
        } else {
            self.haps.as_ref().expect("station index beyond MBS range requires a HAPS")
        }
    }

    pub fn station_power(&self, b: usize, params: &SystemParams) -> f64 {
        if self.station_is_haps(b) {
            params.p_max_haps
        } else {
            params.p_max_mbs
        }
    }

    pub fn n_antennas(&self, b: usize) -> usize {
        self.station(b).rows()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ChannelSetJson::from(self)).expect("serialization")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str::<ChannelSetJson>(s).map(ChannelSet::from)
    }
}

/// JSON form with interleaved re/im arrays per station matrix (row-major).
#[derive(Serialize, Deserialize)]
struct ChannelSetJson {
    params: SystemParams,
    seed: u64,
    ue_count: usize,
    mbs: Vec<MatJson>,
    haps: Option<MatJson>,
}

#[derive(Serialize, Deserialize)]
struct MatJson {
    antennas: usize,
    re_im: Vec<f64>,
}

impl From<&ChannelSet> for ChannelSetJson {
    fn from(cs: &ChannelSet) -> Self {
        let conv = |m: &CMat| MatJson {
            antennas: m.rows(),
            re_im: m.data().iter().flat_map(|z| [z.re, z.im]).collect(),
        };
        ChannelSetJson {
            params: cs.params.clone(),
            seed: cs.seed,
            ue_count: cs.ue_count(),
            mbs: cs.mbs.iter().map(conv).collect(),
            haps: cs.haps.as_ref().map(conv),
        }
    }
}

impl From<ChannelSetJson> for ChannelSet {
    fn from(j: ChannelSetJson) -> Self {
        let conv = |m: &MatJson| {
            let cols = if m.antennas == 0 { 0 } else { m.re_im.len() / 2 / m.antennas };
            let mut it = m.re_im.chunks_exact(2);
            CMat::from_fn(m.antennas, cols, |_, _| {
                let c = it.next().expect("re/im array length");
                Complex64::new(c[0], c[1])
            })
        };
        ChannelSet {
            mbs: j.mbs.iter().map(conv).collect(),
            haps: j.haps.as_ref().map(conv),
            params: j.params,
            seed: j.seed,
        }
    }
}

/// Synthesize all channel matrices for a topology. Draw order is fixed
/// (stations in order, UEs in order, HAPS last) so a seed pins the output.
pub fn build_channel_set(
    topology: &NetworkTopology,
    params: &SystemParams,
    rng: &mut impl Rng,
) -> Result<ChannelSet, ChannelError> {
    let geometry = crate::geometry::link_geometry(topology);
    let u_count = topology.ue_positions.len();
    if geometry.distance.rows() != topology.station_count() {
        return Err(ChannelError::DimensionMismatch {
            got: geometry.distance.rows(),
            expected: topology.station_count(),
        });
    }
    let mut mbs = Vec::with_capacity(topology.mbs_positions.len());
    for b in 0..topology.mbs_positions.len() {
        let mut m = CMat::zeros(params.n_mbs(), u_count);
        for u in 0..u_count {
            m.set_col(u, &mbs_channel(&geometry, b, u, params, rng)?);
        }
        mbs.push(m);
    }
    let haps = if topology.haps_position.is_some() {
        let mut m = CMat::zeros(params.n_haps(), u_count);
        for u in 0..u_count {
            m.set_col(u, &haps_channel(&geometry, u, params, rng)?);
        }
        Some(m)
    } else {
        None
    };
    Ok(ChannelSet { mbs, haps, params: params.clone(), seed: topology.seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_topology;
    use crate::mat::norm_sq;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;

    fn params() -> SystemParams {
        SystemParams::table1()
    }

    #[test]
    fn fspl_reference_value() {
        // (4 pi * 2.545e9 * 20000 / c)^2, independently evaluated
        let pl = fspl(2.545e9, 20_000.0).unwrap();
        assert_relative_eq!(pl, 4.552121936356429e12, max_relative = 1e-12);
        assert_relative_eq!(10.0 * pl.log10(), 126.582138868, epsilon = 1e-6);
    }

    #[test]
    fn fspl_quadratic_in_distance() {
        let p1 = fspl(2.545e9, 137.0).unwrap();
        let p2 = fspl(2.545e9, 274.0).unwrap();
        assert_relative_eq!(p2 / p1, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn fspl_unit_distance_gives_unity() {
        let d = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * 2.545e9);
        assert_relative_eq!(fspl(2.545e9, d).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn fspl_rejects_zero_distance() {
        assert!(matches!(fspl(1e9, 0.0), Err(ChannelError::ZeroDistance)));
    }

    #[test]
    fn steering_hand_computed_2x2_case() {
        // theta = 0, phi = 0, lambda/2 spacing: a = [1, 1], b = [1, -1]
        let mut p = params();
        p.n_haps_v = 2;
        p.n_haps_h = 2;
        let v = haps_steering(0.0, 0.0, &p);
        let expect = [(1.0, 0.0), (-1.0, 0.0), (1.0, 0.0), (-1.0, 0.0)];
        for (z, (re, im)) in v.iter().zip(expect) {
            assert_relative_eq!(z.re, re, epsilon = 1e-12);
            assert_relative_eq!(z.im, im, epsilon = 1e-12);
        }
    }

    #[test]
    fn steering_at_nadir_is_all_ones() {
        let v = haps_steering(std::f64::consts::FRAC_PI_2, -2.1, &params());
        for z in v {
            assert_relative_eq!(z.re, 1.0, epsilon = 1e-12);
            assert!(z.im.abs() < 1e-12);
        }
    }

    #[test]
    fn steering_norm_is_sqrt_n() {
        let p = params();
        for (theta, phi) in [(0.3, 1.0), (1.2, -3.0), (0.0, 0.0), (0.7, 3.1)] {
            let v = haps_steering(theta, phi, &p);
            assert_relative_eq!(norm_sq(&v), p.n_haps() as f64, max_relative = 1e-12);
        }
    }

    /// A 10 dB shadowing realization scales every element by exactly 10
    /// relative to the 0 dB draw from the same element stream.
    #[test]
    fn fixed_shadow_scales_exactly() {
        let mut p = params();
        p.n_mbs_v = 2;
        p.n_mbs_h = 1;
        let d_unit = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * p.f_c);
        let mut topo = generate_topology(&p, 1, 1, 0).unwrap();
        topo.mbs_positions[0] = [0.0, 0.0, d_unit];
        topo.ue_positions[0] = [0.0, 0.0, 0.0];
        let geom = crate::geometry::link_geometry(&topo);
        let h0 = mbs_channel_with_shadow(&geom, 0, 0, &p, 0.0, &mut stream_rng(9)).unwrap();
        let h10 = mbs_channel_with_shadow(&geom, 0, 0, &p, 10.0, &mut stream_rng(9)).unwrap();
        for (a, b) in h0.iter().zip(&h10) {
            assert_relative_eq!(b.norm(), 10.0 * a.norm(), max_relative = 1e-12);
        }
    }

    /// Rayleigh element second moment without shadowing or path loss is one.
    #[test]
    fn mbs_unit_second_moment() {
        let mut p = params();
        p.sigma_xi = 0.0; // disable shadowing (bypasses validate on purpose)
        p.n_mbs_v = 1;
        p.n_mbs_h = 1;
        // geometry with PL == 1
        let d_unit = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * p.f_c);
        let mut topo = generate_topology(&p, 1, 1, 0).unwrap();
        topo.mbs_positions[0] = [0.0, 0.0, d_unit];
        topo.ue_positions[0] = [0.0, 0.0, 0.0];
        let geom = crate::geometry::link_geometry(&topo);
        let mut rng = stream_rng(3);
        let mut acc = 0.0;
        let n = 200_000;
        for _ in 0..n {
            let h = mbs_channel(&geom, 0, 0, &p, &mut rng).unwrap();
            acc += norm_sq(&h);
        }
        let mean = acc / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "E|h|^2 = {mean}");
    }

    /// Shadowing second moment matches an independent Monte Carlo of the
    /// closed form E[10^(xi'/5)], xi' ~ N(0, sigma^2), within 3%.
    #[test]
    fn mbs_shadowing_second_moment() {
        let mut p = params();
        p.n_mbs_v = 1;
        p.n_mbs_h = 1;
        let d_unit = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * p.f_c);
        let mut topo = generate_topology(&p, 1, 1, 0).unwrap();
        topo.mbs_positions[0] = [0.0, 0.0, d_unit];
        topo.ue_positions[0] = [0.0, 0.0, 0.0];
        let geom = crate::geometry::link_geometry(&topo);

        // channel path: E|h|^2 = E[rayleigh^2] * E[xi^2] = E[xi^2]
        let mut rng = stream_rng(11);
        let n = 400_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let h = mbs_channel(&geom, 0, 0, &p, &mut rng).unwrap();
            acc += norm_sq(&h);
        }
        let measured = acc / n as f64;

        // independent Monte Carlo of the closed form with a different stream
        use rand::Rng as _;
        let mut rng2 = stream_rng(101);
        let mut acc2 = 0.0;
        for _ in 0..n {
            let x: f64 = rng2.sample::<f64, _>(rand_distr::StandardNormal) * p.sigma_xi;
            acc2 += 10f64.powf(x / 5.0);
        }
        let reference = acc2 / n as f64;
        let rel = (measured - reference).abs() / reference;
        assert!(rel < 0.03, "measured {measured:.1} vs reference {reference:.1} ({rel:.3})");
    }

    #[test]
    fn haps_pure_los_limit() {
        let mut p = params();
        p.rician_k = 1e12;
        let topo = generate_topology(&p, 0, 4, 21).unwrap();
        let geom = crate::geometry::link_geometry(&topo);
        let mut rng = stream_rng(5);
        for u in 0..4 {
            let h = haps_channel(&geom, u, &p, &mut rng).unwrap();
            let pl = fspl(p.f_c, geom.distance[(0, u)]).unwrap();
            let bar = haps_steering(geom.elevation[u], geom.azimuth[u], &p);
            for (hi, bi) in h.iter().zip(&bar) {
                let expect = bi / pl.sqrt();
                assert!((hi - expect).norm() / expect.norm() < 1e-4);
            }
        }
    }

    #[test]
    fn haps_mean_power_is_n_over_pl() {
        let p = params();
        let mut topo = generate_topology(&p, 0, 1, 2).unwrap();
        topo.ue_positions[0] = [500.0, 3000.0, 0.0];
        let geom = crate::geometry::link_geometry(&topo);
        let pl = fspl(p.f_c, geom.distance[(0, 0)]).unwrap();
        let mut rng = stream_rng(17);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += norm_sq(&haps_channel(&geom, 0, &p, &mut rng).unwrap());
        }
        let mean = acc / n as f64;
        let expect = p.n_haps() as f64 / pl;
        assert!(
            (mean - expect).abs() / expect < 0.02,
            "E||h||^2 = {mean:.3e}, expected {expect:.3e}"
        );
    }

    #[test]
    fn channel_set_shapes_and_determinism() {
        let mut p = params();
        p.n_mbs_v = 2;
        p.n_mbs_h = 2;
        let topo = generate_topology(&p, 2, 3, 7).unwrap();
        let cs1 = build_channel_set(&topo, &p, &mut stream_rng(42)).unwrap();
        let cs2 = build_channel_set(&topo, &p, &mut stream_rng(42)).unwrap();
        assert_eq!(cs1, cs2);
        assert_eq!(cs1.station_count(), 3);
        assert_eq!(cs1.mbs[0].rows(), 4);
        assert_eq!(cs1.mbs[0].cols(), 3);
        assert_eq!(cs1.haps.as_ref().unwrap().rows(), 64);

        // HAPS-only degenerate composition
        let solo = generate_topology(&p, 0, 3, 7).unwrap();
        let cs = build_channel_set(&solo, &p, &mut stream_rng(1)).unwrap();
        assert_eq!(cs.station_count(), 1);
        assert!(cs.station_is_haps(0));

        // JSON round trip
        let back = ChannelSet::from_json(&cs1.to_json()).unwrap();
        assert_eq!(back, cs1);
    }
}
