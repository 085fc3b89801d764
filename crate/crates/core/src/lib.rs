//! Synthesis of non-uniformly exposed RAW bursts and a frame selection
//! network that picks the best base frame of a burst.
//!
//! Modules, bottom-up:
//!
//! - [`rng`], [`tensor_file`], [`image`]: shared carriers and plumbing.
//! - [`isp`]: invertible camera pipeline (gamma, gain, CCM, Bayer).
//! - [`degrade`]: gyro homography blur, downsampling, sensor noise.
//! - [`dataset`]: procedural scenes, burst synthesis, labeling, containers.
//! - [`autodiff`]: reverse-mode tape with the operators the network needs.
//! - [`fsn`]: the frame selection network, its trainer and checkpoints.
//! - [`eval`]: PSNR/SSIM, baseline selectors and comparison reports.

// `!(x > 0.0)` is the NaN-rejecting form used for argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod image;
pub mod isp;
pub mod kv;
pub mod rng;
pub mod tensor_file;
pub mod autodiff;
pub mod dataset;
pub mod degrade;
pub mod eval;
pub mod fsn;

pub use error::{NebiError, Result};
pub use image::{BayerPattern, ColorSpace, PackedRaw, PlanarImage};
pub use rng::Rng;
pub use tensor_file::{read_tensor, write_tensor, NdArray};
