//! Seeded discrete-event simulator of superconducting nanowire single-photon
//! detectors and the QKD links built on them.
//!
//! The crate is layered bottom-up: [`detector`] models one device, [`optical`]
//! the sources and fiber, [`engine`] runs a session timeline into an
//! [`engine::EventLog`], [`qkd`] turns logs into sifted keys and key rates, and
//! [`analysis`] covers characterization and reporting. [`config`] loads the
//! TOML documents that parameterize all of it.

pub mod analysis;
pub mod config;
pub mod detector;
pub mod engine;
pub mod error;
pub mod optical;
pub mod qkd;
pub mod rng;
pub mod session;

pub use error::{ConfigError, Error, ModelError, Result};
