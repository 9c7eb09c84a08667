//! Criterion benchmarks for gaugeweave; see `benches/`.
