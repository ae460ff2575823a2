//! Simulation and optimization toolkit for an integrated HAPS-terrestrial
//! network sharing one spectrum over an urban area: channel synthesis,
//! max-min-fairness joint user-association + MIMO-beamforming design via
//! successive convex approximation over mixed-integer SOCPs, and a Monte
//! Carlo scenario harness.

pub mod channel;
pub mod geometry;
pub mod harness;
pub mod mat;
pub mod netmodel;
pub mod params;
pub mod rng;
pub mod sca;

pub use channel::{build_channel_set, fspl, haps_channel, haps_steering, mbs_channel, ChannelSet};
pub use geometry::{generate_topology, link_geometry, LinkGeometry, NetworkTopology};
pub use harness::{
    brute_force_oracle, cdf_stats, max_sinr_association, run_scenario, ScenarioConfig,
    ScenarioResult,
};
pub use netmodel::{
    backhaul_load, check_feasibility, sinr, spectral_efficiency, Association, Beamforming,
    FeasibilityMode, FeasibilityReport, Solution,
};
pub use params::{GammaMaxPolicy, SystemParams};
pub use sca::{
    build_subproblem, initialize_state, run_jubd, surrogate_rhs, update_state, AssociationMode,
    BinaryStrategy, JubdOptions, ScaState, ScaTrace,
};
