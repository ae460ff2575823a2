//! Network layout generation and per-link geometry.
//!
//! Base stations sit on a deterministic near-square grid (perfect squares map
//! to a sqrt(B) x sqrt(B) grid of cell centers, k^2+1 adds the area center,
//! anything else fills a floor(sqrt(B))-row grid row-major), the HAPS hovers
//! over the area center, and UEs are dropped i.i.d. uniformly on the square.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mat::Mat;
use crate::params::SystemParams;
use crate::rng::stream_rng;

#[derive(Debug, Clone, thiserror::Error)]
pub enum GeometryError {
    #[error("u_count must be at least 1")]
    NoUes,
    #[error("area side must be strictly positive, got {0}")]
    BadArea(f64),
}

/// Positions in meters; UEs on the ground plane (z = 0), HAPS last station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub mbs_positions: Vec<[f64; 3]>,
    /// `None` models a standalone terrestrial network without the HAPS tier.
    pub haps_position: Option<[f64; 3]>,
    pub ue_positions: Vec<[f64; 3]>,
    pub seed: u64,
}

impl NetworkTopology {
    pub fn station_count(&self) -> usize {
        self.mbs_positions.len() + self.haps_position.is_some() as usize
    }

    pub fn station_position(&self, b: usize) -> [f64; 3] {
        if b < self.mbs_positions.len() {
            self.mbs_positions[b]
        } else {
            self.haps_position.expect("station index beyond MBS range requires a HAPS")
        }
    }

    /// Drop the HAPS tier (standalone terrestrial scenarios).
    pub fn without_haps(mut self) -> Self {
        self.haps_position = None;
        self
    }
}

/// Per-link distances plus HAPS-frame elevation/azimuth angles per UE.
#[derive(Debug, Clone)]
pub struct LinkGeometry {
    /// station x UE distances (m); rows follow `NetworkTopology` station order.
    pub distance: Mat<f64>,
    /// Elevation of each UE seen from the HAPS, in [0, pi/2]; empty without HAPS.
    pub elevation: Vec<f64>,
    /// Azimuth in the HAPS array frame, in [-pi, pi); 0 by convention at nadir.
    pub azimuth: Vec<f64>,
}

/// Deterministic near-square grid of B cell centers over the area.
fn mbs_grid(b_count: usize, area: f64, height: f64) -> Vec<[f64; 3]> {
    if b_count == 0 {
        return Vec::new();
    }
    let root = (b_count as f64).sqrt().floor() as usize;
    let mut positions = Vec::with_capacity(b_count);
    let grid = |rows: usize, cols: usize, take: usize, out: &mut Vec<[f64; 3]>| {
        let dx = area / cols as f64;
        let dy = area / rows as f64;
        'outer: for i in 0..rows {
            for j in 0..cols {
                if out.len() == take {
                    break 'outer;
                }
                out.push([(j as f64 + 0.5) * dx, (i as f64 + 0.5) * dy, height]);
            }
        }
    };
    if root * root == b_count {
        grid(root, root, b_count, &mut positions);
    } else if root * root + 1 == b_count {
        grid(root, root, b_count - 1, &mut positions);
        positions.push([area / 2.0, area / 2.0, height]);
    } else {
        let cols = b_count.div_ceil(root);
        grid(root, cols, b_count, &mut positions);
    }
    positions
}

/// Generate a topology: MBS grid, HAPS over the center, uniform UE drops.
/// A pure function of (params, counts, seed).
pub fn generate_topology(
    params: &SystemParams,
    b_count: usize,
    u_count: usize,
    seed: u64,
) -> Result<NetworkTopology, GeometryError> {
    if u_count == 0 {
        return Err(GeometryError::NoUes);
    }
    if !(params.area_side > 0.0) {
        return Err(GeometryError::BadArea(params.area_side));
    }
    let area = params.area_side;
    let mut rng = stream_rng(seed);
    let ue_positions = (0..u_count)
        .map(|_| {
            let x = rng.random_range(0.0..area);
            let y = rng.random_range(0.0..area);
            [x, y, 0.0]
        })
        .collect();
    Ok(NetworkTopology {
        mbs_positions: mbs_grid(b_count, area, params.mbs_height),
        haps_position: Some([area / 2.0, area / 2.0, params.haps_altitude]),
        ue_positions,
        seed,
    })
}

/// Euclidean distances plus HAPS elevation/azimuth angles.
pub fn link_geometry(topology: &NetworkTopology) -> LinkGeometry {
    let stations = topology.station_count();
    let u_count = topology.ue_positions.len();
    let distance = Mat::from_fn(stations, u_count, |b, u| {
        let s = topology.station_position(b);
        let p = topology.ue_positions[u];
        let d = [s[0] - p[0], s[1] - p[1], s[2] - p[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    });
    let (elevation, azimuth) = match topology.haps_position {
        None => (Vec::new(), Vec::new()),
        Some(hp) => {
            let mut elev = Vec::with_capacity(u_count);
            let mut azim = Vec::with_capacity(u_count);
            for p in &topology.ue_positions {
                let dx = p[0] - hp[0];
                let dy = p[1] - hp[1];
                let horiz = (dx * dx + dy * dy).sqrt();
                let alt = hp[2] - p[2];
                elev.push(alt.atan2(horiz).clamp(0.0, std::f64::consts::FRAC_PI_2));
                // atan2(0, 0) = 0 gives the documented nadir convention
                let mut phi = dy.atan2(dx);
                if phi >= std::f64::consts::PI {
                    phi = -std::f64::consts::PI;
                }
                azim.push(phi);
            }
            (elev, azim)
        }
    };
    LinkGeometry { distance, elevation, azimuth }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> SystemParams {
        SystemParams::table1()
    }

    #[test]
    fn four_mbs_sit_at_quadrant_centers() {
        let topo = generate_topology(&params(), 4, 1, 7).unwrap();
        let mut xy: Vec<(f64, f64)> = topo.mbs_positions.iter().map(|p| (p[0], p[1])).collect();
        xy.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            xy,
            vec![(1000.0, 1000.0), (1000.0, 3000.0), (3000.0, 1000.0), (3000.0, 3000.0)]
        );
        assert!(topo.mbs_positions.iter().all(|p| p[2] == 25.0));
    }

    #[test]
    fn five_mbs_add_the_area_center() {
        let topo = generate_topology(&params(), 5, 1, 7).unwrap();
        assert_eq!(topo.mbs_positions.len(), 5);
        let center = topo.mbs_positions[4];
        assert_eq!((center[0], center[1]), (2000.0, 2000.0));
    }

    #[test]
    fn identical_seed_identical_topology() {
        let a = generate_topology(&params(), 4, 16, 1234).unwrap();
        let b = generate_topology(&params(), 4, 16, 1234).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ue_mean_matches_uniform_law() {
        // mean of 1e5 uniform draws on [0, 4000] is 2000 within 20 m
        // (20 m is ~5.5 standard errors)
        let topo = generate_topology(&params(), 0, 100_000, 99).unwrap();
        let mean_x: f64 =
            topo.ue_positions.iter().map(|p| p[0]).sum::<f64>() / topo.ue_positions.len() as f64;
        assert!((mean_x - 2000.0).abs() < 20.0, "mean x = {mean_x}");
    }

    #[test]
    fn nadir_ue_geometry() {
        let mut topo = generate_topology(&params(), 0, 1, 0).unwrap();
        topo.ue_positions[0] = [2000.0, 2000.0, 0.0];
        let geom = link_geometry(&topo);
        assert_relative_eq!(geom.distance[(0, 0)], 20_000.0);
        assert_relative_eq!(geom.elevation[0], std::f64::consts::FRAC_PI_2);
        assert_eq!(geom.azimuth[0], 0.0);
    }

    #[test]
    fn forty_five_degree_elevation_at_equal_legs() {
        let mut topo = generate_topology(&params(), 0, 1, 0).unwrap();
        topo.ue_positions[0] = [2000.0 + 20_000.0, 2000.0, 0.0];
        let geom = link_geometry(&topo);
        assert_relative_eq!(geom.elevation[0], std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
        assert_eq!(geom.azimuth[0], 0.0);
    }

    #[test]
    fn mbs_link_distance_is_pythagorean() {
        let mut topo = generate_topology(&params(), 1, 1, 0).unwrap();
        topo.mbs_positions[0] = [0.0, 0.0, 25.0];
        topo.ue_positions[0] = [1000.0, 0.0, 0.0];
        let geom = link_geometry(&topo);
        // sqrt(1000^2 + 25^2), evaluated independently
        assert_relative_eq!(geom.distance[(0, 0)], 1000.3124511871279, epsilon = 1e-9);
    }

    #[test]
    fn haps_distance_never_below_altitude() {
        let topo = generate_topology(&params(), 2, 64, 5).unwrap();
        let geom = link_geometry(&topo);
        let haps_row = topo.station_count() - 1;
        for u in 0..64 {
            assert!(geom.distance[(haps_row, u)] >= 20_000.0);
            assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&geom.elevation[u]));
            assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&geom.azimuth[u]));
        }
    }

    #[test]
    fn chi_square_uniformity_over_grid() {
        // 4x4 cells, 100 batches of 1600 UEs; chi2(15) 99th percentile = 30.5779
        const CRIT_99: f64 = 30.5779;
        let mut pass = 0;
        for batch in 0..100u64 {
            let topo = generate_topology(&params(), 0, 1600, 1000 + batch).unwrap();
            let mut counts = [0usize; 16];
            for p in &topo.ue_positions {
                let i = ((p[0] / 1000.0) as usize).min(3);
                let j = ((p[1] / 1000.0) as usize).min(3);
                counts[4 * i + j] += 1;
            }
            let expected = 100.0;
            let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            if chi2 < CRIT_99 {
                pass += 1;
            }
        }
        assert!(pass >= 95, "only {pass}/100 batches passed the uniformity test");
    }
}
