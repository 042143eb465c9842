//! Periodic 2-D convolution in its spatial (CNN) and spectral (FNO)
//! parametrizations, exact conversion between the two, trigonometric
//! resampling, and a small image-classification harness for studying
//! resolution invariance.

pub mod cli;
pub mod conv;
pub mod convert;
pub mod error;
pub mod experiments;
pub mod grids;
pub mod nn;
pub mod resample;

pub use error::{Error, Result};
