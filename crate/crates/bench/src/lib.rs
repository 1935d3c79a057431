//! Benchmark-only crate; see `benches/integrators.rs`.
