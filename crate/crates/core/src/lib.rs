//! Discrete-event simulator for LoRaWAN networks that combine 2.4 GHz end
//! devices, dual-radio relays and an EU868 gateway.
//!
//! The crate is organised bottom-up: [`phy`] holds LoRa timing and radio
//! tables, [`propagation`] the urban-macro channel, [`scenario`] seeded
//! deployments, [`links`] the per-run link budgets, [`protocol`] MAC
//! decisions, [`engine`] the event loop and [`metrics`] throughput, energy
//! and cross-run statistics.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod links;
pub mod metrics;
pub mod phy;
pub mod propagation;
pub mod protocol;
pub mod scenario;

pub use engine::{run, ReceptionOutcome, Transmission};
pub use error::{Error, Result};
pub use links::{LinkPowers, LinkTable, NodeRef};
pub use metrics::{aggregate, AggregateMetrics, RunDigest, RunMetrics, Summary};
pub use phy::{Band, BandId, CaptureTable, RadioParams, RadioProfile, SpreadingFactor};
pub use propagation::{BuildingGrid, LinkState, Position};
pub use scenario::{generate, Architecture, ExperimentConfig, LosModel, RunSeeds, Scenario};
