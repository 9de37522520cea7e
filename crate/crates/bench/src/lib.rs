//! Benchmarks for the estimation kernels live in `benches/`.
