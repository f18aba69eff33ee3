//! Benchmark-only crate; see `benches/hot_paths.rs`. Re-exports the library
//! under test so the bench target has a single dependency root.

pub use phrc_core::*;
