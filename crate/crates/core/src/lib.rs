//! Generalized interference alignment (GIA) for stochastic MIMO wiretap networks.
//!
//! The crate samples Poisson network topologies with legitimate transmitter/receiver
//! pairs, jammers and eavesdroppers, builds feasible alignment sets with a
//! nearest-neighbour rule, designs transceivers that null the selected cross links,
//! and measures secrecy rate and secure degrees of freedom (sDoF) both by Monte Carlo
//! and by closed-form predictions.
//!
//! Module map:
//!
//! - [`geometry`]: topology sampling, connection densities, range queries.
//! - [`channel`]: cutoff pathloss and random MIMO channel generation.
//! - [`alignment`]: properness checks and the two-phase alignment set builder.
//! - [`transceiver`]: closed-form four-node strategies, the leakage solver,
//!   baselines, MMSE eavesdropper decoders and constraint verification.
//! - [`metrics`]: link rates, secrecy rates and dimension counting.
//! - [`analytics`]: moment bounds, the performance indicator and feasible regions.
//! - [`experiments`]: config-driven sweeps behind the `gia` binary.

pub mod alignment;
pub mod analytics;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod transceiver;

pub use error::{GiaError, Result};
