pub mod exact_arith;
pub mod free_series;
pub mod ratexpr;
pub mod paths;
pub mod report;
pub mod sampling;
pub mod stochastic;
pub mod automata;
pub mod commutative;
pub mod quasidet;
