//! Non-binary hybrid LDPC codes over product groups of `(Z/2Z)^p`.
//!
//! A hybrid code mixes symbols of different group orders in one codeword.
//! Every nonzero entry of the parity-check matrix is a full-rank binary
//! linear map that *extends* a variable symbol into the group of its check
//! (and, in the decoder, *truncates* check messages back).
//!
//! The crate covers:
//!
//! - [`group_algebra`] and [`gf2_maps`]: group arithmetic and the linear maps.
//! - [`messages`]: probability / LDR message vectors and the Bhattacharyya
//!   style functionals used by the stability analysis.
//! - [`ensemble`]: the edge distribution `π(i, j, k, l)` and the stability
//!   parameters Ω and Δ.
//! - [`channel`]: BI-AWGN and an exactly enumerable discrete symmetric channel.
//! - [`code_builder`] and [`codec`]: finite-length construction, linear-time
//!   encoding and belief-propagation decoding.
//! - [`density_evolution`]: Monte-Carlo density evolution.
//! - [`cli`]: the command-line driver behind the `hybrid-ldpc` binary.

pub mod channel;
pub mod cli;
pub mod code_builder;
pub mod codec;
pub mod density_evolution;
pub mod ensemble;
mod error;
pub mod fmt;
pub mod gf2_maps;
pub mod group_algebra;
pub mod messages;
pub mod rng;
pub mod stats;
pub mod wht;

pub use error::{Error, Result};
pub use group_algebra::GroupSymbol;
pub use gf2_maps::LinearMap;
pub use messages::{LdrVector, ProbVector};

/// Largest supported group width (bits per symbol).
pub const MAX_WIDTH: u8 = 8;

/// Magnitude at which LDR / LLR entries are clamped (natural log units).
pub const LLR_CLAMP: f64 = 30.0;

/// Floor applied to probabilities before divisions and logarithms.
pub const PROB_FLOOR: f64 = 1e-30;
