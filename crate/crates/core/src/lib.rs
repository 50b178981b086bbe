//! Algorithmic core of a federated-learning simulator for heterogeneous
//! electronic healthcare records.
//!
//! Events from differently-shaped hospital schemas are rendered as free text
//! ([`linearizer`]), tokenized with a shared byte-pair vocabulary, and fed to a
//! hierarchical GRU predictor ([`model`]). The [`fl`] module trains that model
//! under local, centralized and federated regimes (FedAvg, FedProx, FedBN,
//! FedPxN); [`synthdata`] produces non-i.i.d. synthetic clients and
//! [`metrics`] scores runs with AUPRC.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the `unifl` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod encode;
pub mod error;
pub mod fl;
pub mod linearizer;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synthdata;

pub use error::{Error, Result};
pub use model::Task;
