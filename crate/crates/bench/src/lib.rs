//! Criterion benchmarks for the coinlab kernels live in `benches/`.
