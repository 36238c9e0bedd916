//! Criterion benchmarks for the boxcycle kernels; see `benches/`.
