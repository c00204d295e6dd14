//! Drift-adaptive streaming inference for frame streams.
//!
//! The pipeline has two phases. A lightweight domain detector converts
//! frames to grayscale, derives co-occurrence texture features, and votes
//! with a random forest over the trailing frames of each batch. When the
//! detected domain changes, the engine loads that domain's profile and
//! fine-tunes its checkpoint. Within a domain, the engine watches the
//! predicted label distribution and fine-tunes under importance weights
//! recovered from the classifier's confusion matrix, but only when the KL
//! divergence from the last adaptation says the shift is worth it.
//!
//! Start with [`engine::Engine`] and [`engine::run_replay`] for the full
//! loop, or use the pieces directly:
//!
//! ```
//! use edgema::frame::GrayFrame;
//! use edgema::features::{extract_features, FeatureGrid};
//!
//! let frame = GrayFrame::new(8, 8, (0..64).map(|i| (i * 4) as u8).collect())?;
//! let features = extract_features(&frame, &FeatureGrid::reduced(), 32)?;
//! assert_eq!(features.len(), 48);
//! # Ok::<(), edgema::Error>(())
//! ```
//!
//! The companion book under `book/` walks through each stage; its examples
//! are compiled and run as doctests.

pub mod boost;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod features;
pub mod forest;
pub mod frame;
pub mod glcm;
pub mod label_shift;
pub mod manifest;
pub mod model;
pub mod pnm;
pub mod synth;

mod util;

#[cfg(doctest)]
mod book;

pub use error::{Error, Result};
