//! Exact scalars, dense rational matrices, polynomials and rational
//! functions in a central variable `t`, and the calculus of the eigenvalue 1
//! through evaluation at `t = 1`.

mod matrix;
mod poly;
mod ratfun;
mod rational;

pub use matrix::QMatrix;
pub use poly::Poly;
pub use ratfun::{limit_matrix, multiplicity_of_one, OneEval, RatFun, RatFunMatrix};
pub use rational::{fmt_rational, int, is_nonnegative, one, parse_rational, q, zero, Rational};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("not evaluable at t = 1 (order of vanishing {order})")]
    NotEvaluableAtOne { order: i64 },
    #[error("singular matrix")]
    Singular,
}

/// `matrix_ratfun_inverse`: exact inverse over the field of rational functions.
pub fn matrix_ratfun_inverse(m: &RatFunMatrix) -> Result<RatFunMatrix, ArithError> {
    m.inverse()
}
