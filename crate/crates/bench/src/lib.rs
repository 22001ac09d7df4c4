//! Criterion benchmarks for the myograph analysis stages; see `benches/`.
