//! The chapters of `book/` as doc comments, so `cargo test` runs every code
//! block against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/waves.md")]
pub mod waves {}
#[doc = include_str!("../../../book/src/ship_motion.md")]
pub mod ship_motion {}
#[doc = include_str!("../../../book/src/snippets.md")]
pub mod snippets {}
#[doc = include_str!("../../../book/src/lstm.md")]
pub mod lstm {}
#[doc = include_str!("../../../book/src/statistics.md")]
pub mod statistics {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
