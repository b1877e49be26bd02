//! Priced timed automata with nonlinear prices.

pub mod cli;
pub mod encode;
pub mod expr;
pub mod gens;
pub mod lipschitz;
pub mod model;
pub mod oracle;
pub mod parser;
pub mod pwl2lpta;
pub mod rational;
pub mod semantics;
pub mod solve;
