//! Monte Carlo experiment engine: the five comparison scenarios, CDFs of the
//! minimum spectral efficiency, HAPS-association histograms and small
//! enumeration oracles.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{build_channel_set, ChannelSet};
use crate::geometry::generate_topology;
use crate::mat::norm_sq;
use crate::netmodel::{Association, Solution};
use crate::params::SystemParams;
use crate::rng::{derived_seed, stream_rng, StreamPurpose};
use crate::sca::{run_jubd, AssociationMode, BinaryStrategy, JubdOptions, ScaError};

#[derive(Debug, Clone, thiserror::Error)]
pub enum HarnessError {
    #[error("brute-force oracle limited to U*(B+1) <= 8, got {0}")]
    OracleTooLarge(usize),
    #[error("empty sample set")]
    EmptySamples,
    #[error(transparent)]
    Sca(#[from] ScaError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
}

/// Association rule of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioAssociation {
    Single,
    Multi,
    FixedMaxSinr,
}

/// One of the five comparison scenarios.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioConfig {
    pub scenario_id: u8,
    /// Terrestrial stations only; the HAPS is extra when `include_haps`.
    pub mbs_count: usize,
    pub include_haps: bool,
    pub association_mode: ScenarioAssociation,
    pub topology_count: usize,
    pub ue_count: usize,
    pub params: SystemParams,
    pub seed: u64,
    #[serde(skip)]
    pub binary_strategy: BinaryStrategy,
}

impl ScenarioConfig {
    /// Scenario presets on a given MBS baseline `b`:
    /// 1 = b MBS + HAPS (joint design), 2 = b MBS + HAPS with max-receive
    /// association fixed, 3 = b MBS standalone, 4 = b+1 MBS standalone,
    /// 5 = b MBS + HAPS with multiple association.
    pub fn preset(
        scenario_id: u8,
        mbs_baseline: usize,
        params: SystemParams,
        ue_count: usize,
        topology_count: usize,
        seed: u64,
    ) -> Self {
        let (mbs_count, include_haps, association_mode) = match scenario_id {
            1 => (mbs_baseline, true, ScenarioAssociation::Single),
            2 => (mbs_baseline, true, ScenarioAssociation::FixedMaxSinr),
            3 => (mbs_baseline, false, ScenarioAssociation::Single),
            4 => (mbs_baseline + 1, false, ScenarioAssociation::Single),
            5 => (mbs_baseline, true, ScenarioAssociation::Multi),
            other => panic!("scenario id must be 1..=5, got {other}"),
        };
        ScenarioConfig {
            scenario_id,
            mbs_count,
            include_haps,
            association_mode,
            topology_count,
            ue_count,
            params,
            seed,
            binary_strategy: BinaryStrategy::BranchAndBound,
        }
    }
}

/// Aggregated outcome of one scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub scenario_id: u8,
    /// Minimum spectral efficiency (bit/s/Hz) per successful topology.
    pub min_se_samples: Vec<f64>,
    /// Empirical CDF of `min_se_samples`: (value, probability).
    pub cdf: Vec<(f64, f64)>,
    /// Histogram over 0..=U of UEs associated with the HAPS.
    pub haps_assoc_counts: Vec<usize>,
    /// SCA iterations per successful topology.
    pub convergence_iters: Vec<usize>,
    pub failures: usize,
    /// False when more than 1% of the topologies failed.
    pub valid: bool,
    pub total_runtime_s: f64,
    pub mean_runtime_s: f64,
    /// Per-topology records (indexed by topology).
    pub per_topology: Vec<TopologyRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TopologyRecord {
    pub index: usize,
    pub seed: u64,
    pub min_se: Option<f64>,
    pub haps_ues: Option<usize>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub runtime_s: f64,
    pub error: Option<String>,
}

/// Max matched-filter receive power association (the "maximum received SINR"
/// baseline: pre-beamforming interference is undefined, so the matched-filter
/// SNR P_b ||h_u^b||^2 / sigma_n^2 decides; ties go to the lowest index).
pub fn max_sinr_association(channels: &ChannelSet, params: &SystemParams) -> Association {
    let stations = channels.station_count();
    let choices: Vec<usize> = (0..channels.ue_count())
        .map(|u| {
            (0..stations)
                .map(|b| {
                    channels.station_power(b, params) * norm_sq(&channels.station(b).col_vec(u))
                        / params.noise_var
                })
                .enumerate()
                .max_by(|(ia, a), (ib, b)| a.total_cmp(b).then_with(|| ib.cmp(&ia)))
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
        .collect();
    Association::from_choices(stations, &choices)
}

/// Solve one topology under a scenario's rules.
pub fn solve_topology(config: &ScenarioConfig, index: usize) -> Result<Solution, HarnessError> {
    let topo_seed = derived_seed(config.seed, index as u64, StreamPurpose::Topology);
    let chan_seed = derived_seed(config.seed, index as u64, StreamPurpose::Channel);
    let topo = generate_topology(&config.params, config.mbs_count, config.ue_count, topo_seed)?;
    let topo = if config.include_haps { topo } else { topo.without_haps() };
    let channels = build_channel_set(&topo, &config.params, &mut stream_rng(chan_seed))?;
    let association_mode = match config.association_mode {
        ScenarioAssociation::Single => AssociationMode::Single,
        ScenarioAssociation::Multi => AssociationMode::Multi,
        ScenarioAssociation::FixedMaxSinr => {
            AssociationMode::Fixed(max_sinr_association(&channels, &config.params))
        }
    };
    let options = JubdOptions {
        tol: config.params.sca_tol,
        max_iter: config.params.sca_max_iter,
        association_mode,
        binary_strategy: config.binary_strategy,
    };
    Ok(run_jubd(&channels, &config.params, &options)?)
}

/// Run all topologies of a scenario (in parallel over the topology index; the
/// aggregation is keyed by index so the result is order-independent) and
/// aggregate the distributional statistics.
pub fn run_scenario(config: &ScenarioConfig) -> ScenarioResult {
    let t_start = std::time::Instant::now();
    let records: Vec<TopologyRecord> = (0..config.topology_count)
        .into_par_iter()
        .map(|i| {
            let t0 = std::time::Instant::now();
            let seed = derived_seed(config.seed, i as u64, StreamPurpose::Topology);
            match solve_topology(config, i) {
                Ok(sol) => {
                    let min_se = (1.0 + sol.gamma_m).log2();
                    let haps_ues = if config.include_haps {
                        let row = sol.a.a.rows() - 1;
                        (0..sol.a.a.cols()).map(|u| sol.a.a[(row, u)] as usize).sum()
                    } else {
                        0
                    };
                    TopologyRecord {
                        index: i,
                        seed,
                        min_se: Some(min_se),
                        haps_ues: Some(haps_ues),
                        iterations: Some(sol.trace.rows.len()),
                        converged: Some(sol.trace.converged),
                        runtime_s: t0.elapsed().as_secs_f64(),
                        error: None,
                    }
                }
                Err(e) => TopologyRecord {
                    index: i,
                    seed,
                    min_se: None,
                    haps_ues: None,
                    iterations: None,
                    converged: None,
                    runtime_s: t0.elapsed().as_secs_f64(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut min_se_samples = Vec::new();
    let mut convergence_iters = Vec::new();
    let mut haps_hist = vec![0usize; config.ue_count + 1];
    let mut failures = 0;
    for r in &records {
        match r.min_se {
            Some(se) => {
                min_se_samples.push(se);
                convergence_iters.push(r.iterations.unwrap_or(0));
                haps_hist[r.haps_ues.unwrap_or(0).min(config.ue_count)] += 1;
            }
            None => failures += 1,
        }
    }
    let total_runtime_s = t_start.elapsed().as_secs_f64();
    let cdf = empirical_cdf(&min_se_samples);
    let valid = (failures as f64) <= 0.01 * config.topology_count as f64;
    ScenarioResult {
        scenario_id: config.scenario_id,
        mean_runtime_s: total_runtime_s / config.topology_count.max(1) as f64,
        total_runtime_s,
        min_se_samples,
        cdf,
        haps_assoc_counts: haps_hist,
        convergence_iters,
        failures,
        valid,
        per_topology: records,
    }
}

fn empirical_cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n as f64))
        .collect()
}

/// Enumeration reference for tiny instances: best min-SINR over every
/// single-association pattern, each solved by the association-fixed
/// iterative design to convergence.
pub fn brute_force_oracle(channels: &ChannelSet, params: &SystemParams) -> Result<f64, HarnessError> {
    let stations = channels.station_count();
    let ues = channels.ue_count();
    if ues * stations > 8 {
        return Err(HarnessError::OracleTooLarge(ues * stations));
    }
    let mut best = f64::NEG_INFINITY;
    let patterns = stations.pow(ues as u32);
    for code in 0..patterns {
        let mut c = code;
        let choices: Vec<usize> = (0..ues)
            .map(|_| {
                let b = c % stations;
                c /= stations;
                b
            })
            .collect();
        let assoc = Association::from_choices(stations, &choices);
        let options = JubdOptions {
            tol: params.sca_tol,
            max_iter: params.sca_max_iter,
            association_mode: AssociationMode::Fixed(assoc),
            binary_strategy: BinaryStrategy::BranchAndBound,
        };
        let sol = run_jubd(channels, params, &options)?;
        if sol.gamma_m > best {
            best = sol.gamma_m;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct CdfSummary {
    pub sorted: Vec<f64>,
    /// Lower median (element n/2 - ... floor((n-1)/2) of the sorted samples).
    pub median: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Sorted CDF plus lower-median, mean and population standard deviation.
pub fn cdf_stats(samples: &[f64]) -> Result<CdfSummary, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let median = sorted[(n - 1) / 2];
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    Ok(CdfSummary { sorted, median, mean, std: var.sqrt() })
}
