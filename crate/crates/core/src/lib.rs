//! Empirical mode decomposition (EMD, EEMD, CEEMD) with explicit boundary
//! handling, a per-component forecasting pipeline, and a benchmark harness
//! that measures how the end effect degrades real-time forecasts.
//!
//! ```
//! use emd_forecast::emd::{emd, reconstruct, SiftConfig};
//!
//! let x: Vec<f64> = (0..512)
//!     .map(|n| (n as f64 * 0.6).sin() + 0.3 * (n as f64 * 0.05).sin())
//!     .collect();
//! let d = emd(&x, &SiftConfig::default()).unwrap();
//! let back = reconstruct(&d).unwrap();
//! assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-9));
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod emd;
pub mod ensemble;
pub mod features;
pub mod io;
pub mod predict;
pub mod spectral;
mod error;
pub mod numeric;
pub mod pipeline;
pub mod series;

pub use error::{Error, Result};
