//! Criterion benchmarks for `sicoop`; see `benches/`.
