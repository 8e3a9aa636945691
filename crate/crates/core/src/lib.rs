//! Complexity-guided mini-batch selection for image inpainting training.
//!
//! Samples are ranked by the ratio of their training loss to the distance of
//! their missingness complexity from a calibrated pivot, which keeps
//! low-complexity samples in play where plain loss-based selection would
//! starve them.

pub mod calibration;
pub mod complexity;
pub mod config;
pub mod error;
pub mod harness;
pub mod imaging;
pub mod quality;
pub mod selection;

pub use error::{Error, Result};
