//! Criterion benchmarks for the solvers and grid audits; see `benches/`.
