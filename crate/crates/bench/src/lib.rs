//! Criterion benchmarks for the pricing kernels live in `benches/`.
