//! Differentially private (DP) and individually differentially private (iDP)
//! release of numeric microdata through individual-ranking microaggregation
//! and Laplace noise, together with the SSE information-loss evaluation.
//!
//! The usual pipeline is
//!
//! ```no_run
//! use idp_microagg::dataset::{load_csv, LoadOptions};
//! use idp_microagg::mechanisms::{MechanismConfig, Method};
//!
//! let data = load_csv("census.csv", &LoadOptions::default())?;
//! let release = MechanismConfig {
//!     method: Method::IdpCbls,
//!     epsilon: 0.1,
//!     k: 10,
//!     domains: None,
//!     weights: None,
//!     seed: 42,
//!     clamp: None,
//! }
//! .release(&data)?;
//! release.dataset.save_csv("masked.csv")?;
//! # Ok::<(), idp_microagg::Error>(())
//! ```

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod mechanisms;
pub mod microaggregation;
pub mod numeric;
pub mod sensitivity;

pub use error::{Error, Result};
