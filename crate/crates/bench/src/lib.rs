//! Criterion benchmarks for the hot paths of `oae-core`; see `benches/`.
