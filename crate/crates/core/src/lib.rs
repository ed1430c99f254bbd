//! Deterministic discrete-event simulation of a quorum-replicated key-value
//! store, client-side consistency-latency tuning policies (fixed levels,
//! continuous partial quorums, artificial delays), and a client-centric
//! trace analyzer built on per-value Γ scores.
//!
//! The crate is organized bottom-up:
//!
//! - [`types`], [`rng`], [`trace`]: shared domain types, seeded randomness
//!   and trace persistence.
//! - [`kernel`]: the single-threaded event scheduler.
//! - [`netmodel`], [`store`], [`workload`], [`policy`]: the simulated system
//!   and its clients, wired together in [`sim`].
//! - [`gamma`], [`metrics`]: trace analysis.
//! - [`config`], [`experiment`]: experiment configuration, single runs and
//!   parameter sweeps.

pub mod config;
pub mod error;
pub mod experiment;
pub mod gamma;
pub mod kernel;
pub mod metrics;
pub mod netmodel;
pub mod par;
pub mod policy;
pub mod rng;
pub mod sim;
pub mod store;
pub mod trace;
pub mod types;
pub mod workload;

pub use error::{Error, Result};
pub use types::{ConsistencyLevel, OpKind, OperationRecord, SimTime};
