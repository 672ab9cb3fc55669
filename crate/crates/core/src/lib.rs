//! Near-field variable-width beam coverage for extremely large
//! reconfigurable intelligent surfaces.
//!
//! The crate builds a cascaded line-of-sight channel from a multi-antenna BS
//! through one or more transmissive RIS panels to a planar UE region, and
//! designs panel phase profiles (codewords) that cover arbitrarily shaped
//! regions with a closed-form coordinate-descent solver. Codewords for every
//! (BS beam, region) pair form a codebook.
//!
//! Module map:
//! - [`geometry`]: panels, element layout, BS array, regions and sampling
//! - [`channel`]: link coefficients and the per-point cascade table
//! - [`solver`]: quantization, closed-form coordinate update, BCD / AWBCD
//! - [`metrics`]: SE, outage, CDF, heatmaps
//! - [`codebook`]: batch generation and the JSON codebook format
//! - [`config`] and [`cli`]: scenario files and the `xlris` command line

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod codebook;
pub mod config;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod solver;

pub use error::{Error, Result};
