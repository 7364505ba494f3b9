//! Criterion benchmarks for `kkut-core`; see `benches/`.
