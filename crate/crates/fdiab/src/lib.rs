//! Monte-Carlo simulator and optimization library for single-hop
//! full-duplex integrated access and backhaul (IAB) networks.
//!
//! The model: one donor base station (gNB) serves K user terminals plus a
//! wireless backhaul link to an IAB relay node; the relay serves K̃ further
//! user terminals in the same band. Everything transmits at once (network
//! full duplex), so uplink and downlink interfere across the whole
//! topology. The library draws random realizations of that network
//! (geometry, mmWave cluster channels, SVD/MRC beamforming), allocates
//! per-stream transmit powers by one of three strategies — a uniform
//! benchmark, max-min SINR fairness, and max-sum spectral efficiency, the
//! latter two via geometric programming on the `gp` crate — and aggregates
//! spectral-efficiency statistics (ECDFs, sweep means) over trials.
//!
//! Pipeline per trial:
//!
//! ```text
//! scenario::generate_topology
//!     → channel::build_channel_set
//!     → beamforming::{compute_precoders, compute_combiners, build_gain_table}
//!     → allocation::solve_allocation        (per strategy)
//!     → link_metrics::se_report
//!     → montecarlo aggregation
//! ```
//!
//! The `fdiab` binary front-ends [`montecarlo::run_campaign`] with a
//! `simulate` subcommand; see the README for the CLI and output formats.

pub mod allocation;
pub mod beamforming;
pub mod channel;
pub mod link_metrics;
pub mod linalg;
pub mod montecarlo;
pub mod scenario;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration (bad value, unknown key, failed validation).
    #[error("config error: {0}")]
    Config(String),
    /// Channel generation failure (degenerate geometry, bad link descriptor).
    #[error("channel error: {0}")]
    Channel(String),
    /// Beamforming failure (zero channel, dimension mismatch).
    #[error("beamforming error: {0}")]
    Beamforming(String),
    /// Power-allocation failure (degenerate gain table, oversize expansion).
    #[error("allocation error: {0}")]
    Allocation(String),
    /// Output-writing failure (nothing to write, bad path).
    #[error("output error: {0}")]
    Output(String),
    /// Error bubbled up from the geometric-programming layer.
    #[error(transparent)]
    Gp(#[from] gp::GpError),
    /// Filesystem error.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// JSON (de)serialization error.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
