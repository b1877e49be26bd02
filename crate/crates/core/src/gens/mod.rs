//! Benchmark generators.

pub mod alp;
pub mod two_counter;
