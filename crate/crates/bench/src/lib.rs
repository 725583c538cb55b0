//! Criterion benchmarks for the buyer oracles and the consistency checkers
//! live in `benches/`.
