//! Runs every code block of the book as a doctest, so the guide can never
//! drift from the library. mdBook itself cannot execute snippets against a
//! crate, so the chapters are included here and `cargo test --doc` does the
//! work.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/texture-features.md")]
mod texture_features {}

#[doc = include_str!("../../../book/src/feature-selection.md")]
mod feature_selection {}

#[doc = include_str!("../../../book/src/domain-detection.md")]
mod domain_detection {}

#[doc = include_str!("../../../book/src/label-shift.md")]
mod label_shift {}

#[doc = include_str!("../../../book/src/fine-tuning.md")]
mod fine_tuning {}

#[doc = include_str!("../../../book/src/stream-engine.md")]
mod stream_engine {}

#[doc = include_str!("../../../book/src/synthetic-data.md")]
mod synthetic_data {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
