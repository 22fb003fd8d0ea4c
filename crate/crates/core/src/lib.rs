//! Differentially private federated clustering with random rebalancing.
//!
//! Clients pick a cluster (by loss or by model distance), train locally and
//! send a model update plus a one-hot cluster identifier. The server
//! privatizes identifiers, decodes them into groups, moves randomly drawn
//! clients from large groups into small ones so that every group holds at
//! least `B` updates, and releases one noisy mean per cluster. Enforcing the
//! lower bound on group size bounds the effective privacy noise of every
//! cluster model by `2 C_theta sigma_theta / B`.
//!
//! Modules:
//! - [`vecmath`]: vectors, clipping, Gaussian noise, deterministic streams
//! - [`privacy`]: RDP accountant and noise calibration
//! - [`datagen`]: synthetic mixtures of lines, CSV datasets, splits
//! - [`cluster_engine`]: identifiers, rebalancing, noisy aggregation
//! - [`fedsim`]: rounds and full experiments
//! - [`metrics`]: evaluation and bound calculators
//! - [`experiment`]: JSON configs, presets and the results CSV

pub mod cluster_engine;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod fedsim;
pub mod metrics;
pub mod model;
pub mod privacy;
pub mod studies;
pub mod vecmath;

pub use error::{Error, Result};
