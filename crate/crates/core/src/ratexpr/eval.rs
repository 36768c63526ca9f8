//! Evaluation backends. Each backend realizes the expression in a concrete
//! ring: truncated series, exact `k×k` matrices, dual matrices (value and
//! λ-derivative), positive reals under a Bernoulli weighting, and matrices
//! over rational functions in a central `t`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rustc_hash::FxHashMap;
use thiserror::Error;

use super::{Node, RatExpr};
use crate::exact_arith::{ArithError, QMatrix, RatFun, RatFunMatrix, Rational};
use crate::free_series::{Alphabet, Letter, SeriesError, Substitution, TruncSeries};

/// Name of the central variable understood by [`eval_ratfun_t`].
pub const CENTRAL_T: &str = "t";

/// A backend failure, before the evaluator attaches the offending node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    NonzeroConstantTerm,
    ZeroConstantTerm,
    Singular,
    DivergentStar,
    NotPositive,
    UnknownLetter(String),
    Series(SeriesError),
}

#[derive(Clone, Error)]
pub enum EvalError {
    #[error("star of a series with nonzero constant term at `{}`", short(.0))]
    NonzeroConstantTerm(RatExpr),
    #[error("inverse of a series with zero constant term at `{}`", short(.0))]
    ZeroConstantTerm(RatExpr),
    #[error("singular inversion at `{}`", short(.0))]
    SingularInversion(RatExpr),
    #[error("divergent star at `{}`", short(.0))]
    DivergentStar(RatExpr),
    #[error("not a positive *-rational expression at `{}`", short(.0))]
    NotPositive(RatExpr),
    #[error("letter `{0}` has no value")]
    UnknownLetter(String),
    #[error(transparent)]
    Series(SeriesError),
}

impl fmt::Debug for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl EvalError {
    pub fn is_singular(&self) -> bool {
        matches!(self, EvalError::SingularInversion(_))
    }
}

fn short(e: &RatExpr) -> String {
    let s = e.render();
    if s.chars().count() > 120 {
        format!("{}…", s.chars().take(120).collect::<String>())
    } else {
        s
    }
}

impl Fault {
    fn at(self, e: &RatExpr) -> EvalError {
        match self {
            Fault::NonzeroConstantTerm => EvalError::NonzeroConstantTerm(e.clone()),
            Fault::ZeroConstantTerm => EvalError::ZeroConstantTerm(e.clone()),
            Fault::Singular => EvalError::SingularInversion(e.clone()),
            Fault::DivergentStar => EvalError::DivergentStar(e.clone()),
            Fault::NotPositive => EvalError::NotPositive(e.clone()),
            Fault::UnknownLetter(l) => EvalError::UnknownLetter(l),
            Fault::Series(s) => EvalError::Series(s),
        }
    }
}

impl From<SeriesError> for Fault {
    fn from(e: SeriesError) -> Self {
        match e {
            SeriesError::NonzeroConstantTerm => Fault::NonzeroConstantTerm,
            SeriesError::ZeroConstantTerm => Fault::ZeroConstantTerm,
            SeriesError::UnknownLetter(l) => Fault::UnknownLetter(l),
            other => Fault::Series(other),
        }
    }
}

/// A ring in which expressions can be realized.
pub trait Backend {
    type Value: Clone;
    fn atom(&self, l: &Letter) -> Result<Self::Value, Fault>;
    fn scalar(&self, c: &Rational) -> Result<Self::Value, Fault>;
    fn add(&self, x: &Self::Value, y: &Self::Value) -> Result<Self::Value, Fault>;
    fn mul(&self, x: &Self::Value, y: &Self::Value) -> Result<Self::Value, Fault>;
    fn star(&self, x: &Self::Value) -> Result<Self::Value, Fault>;
    fn inverse(&self, x: &Self::Value) -> Result<Self::Value, Fault>;
}

/// Evaluates `e` bottom-up, sharing work across repeated subexpressions.
pub fn evaluate<B: Backend>(e: &RatExpr, backend: &B) -> Result<B::Value, EvalError> {
    Evaluator::new(backend).eval(e)
}

/// Evaluator whose memo table survives across calls, so a family of
/// expressions built from shared parts is evaluated once per node.
pub struct Evaluator<'b, B: Backend> {
    backend: &'b B,
    // The expression is kept alive so its address cannot be reused.
    memo: FxHashMap<usize, (RatExpr, B::Value)>,
}

impl<'b, B: Backend> Evaluator<'b, B> {
    pub fn new(backend: &'b B) -> Self {
        Evaluator { backend, memo: FxHashMap::default() }
    }

    pub fn eval(&mut self, e: &RatExpr) -> Result<B::Value, EvalError> {
        if let Some((_, v)) = self.memo.get(&e.id()) {
            return Ok(v.clone());
        }
        let b = self.backend;
        let v = match e.node() {
            Node::Atom(l) => b.atom(l).map_err(|f| f.at(e))?,
            Node::Scalar(c) => b.scalar(c).map_err(|f| f.at(e))?,
            Node::Sum(cs) => {
                let mut acc: Option<B::Value> = None;
                for c in cs {
                    let v = self.eval(c)?;
                    acc = Some(match acc {
                        None => v,
                        Some(a) => b.add(&a, &v).map_err(|f| f.at(e))?,
                    });
                }
                match acc {
                    Some(v) => v,
                    None => b.scalar(&Rational::zero()).map_err(|f| f.at(e))?,
                }
            }
            Node::Product(cs) => {
                let mut acc: Option<B::Value> = None;
                for c in cs {
                    let v = self.eval(c)?;
                    acc = Some(match acc {
                        None => v,
                        Some(a) => b.mul(&a, &v).map_err(|f| f.at(e))?,
                    });
                }
                match acc {
                    Some(v) => v,
                    None => b.scalar(&Rational::one()).map_err(|f| f.at(e))?,
                }
            }
            Node::Star(c) => {
                let x = self.eval(c)?;
                b.star(&x).map_err(|f| f.at(e))?
            }
            Node::Inverse(c) => {
                let x = self.eval(c)?;
                b.inverse(&x).map_err(|f| f.at(e))?
            }
        };
        self.memo.insert(e.id(), (e.clone(), v.clone()));
        Ok(v)
    }
}

// ---------------------------------------------------------------- series

pub struct SeriesBackend<'a> {
    alphabet: Arc<Alphabet>,
    bound: usize,
    substitution: Option<&'a Substitution>,
}

impl<'a> SeriesBackend<'a> {
    /// Strict series semantics over `alphabet`.
    pub fn strict(alphabet: &Arc<Alphabet>, bound: usize) -> Self {
        SeriesBackend { alphabet: alphabet.clone(), bound, substitution: None }
    }

    /// Letters replaced by their images under `sigma`; see [`eval_series_substituted`].
    pub fn substituted(sigma: &'a Substitution, bound: usize) -> Self {
        SeriesBackend { alphabet: sigma.target().clone(), bound, substitution: Some(sigma) }
    }
}

impl Backend for SeriesBackend<'_> {
    type Value = TruncSeries;

    fn atom(&self, l: &Letter) -> Result<TruncSeries, Fault> {
        match self.substitution {
            Some(s) => Ok(s.image(l, self.bound)?),
            None => Ok(TruncSeries::letter(&self.alphabet, self.bound, l)?),
        }
    }

    fn scalar(&self, c: &Rational) -> Result<TruncSeries, Fault> {
        Ok(TruncSeries::constant(&self.alphabet, self.bound, c.clone()))
    }

    fn add(&self, x: &TruncSeries, y: &TruncSeries) -> Result<TruncSeries, Fault> {
        Ok(x.add(y)?)
    }

    fn mul(&self, x: &TruncSeries, y: &TruncSeries) -> Result<TruncSeries, Fault> {
        Ok(x.mul(y)?)
    }

    fn star(&self, x: &TruncSeries) -> Result<TruncSeries, Fault> {
        if self.substitution.is_some() && !x.constant_term().is_zero() {
            // x* = (1 - x)⁻¹, a power series as long as x(0) != 1.
            let one = TruncSeries::one(&self.alphabet, self.bound);
            return Ok(one.sub(x)?.inverse()?);
        }
        Ok(x.star()?)
    }

    fn inverse(&self, x: &TruncSeries) -> Result<TruncSeries, Fault> {
        Ok(x.inverse()?)
    }
}

/// Truncation at `bound` of the series denoted by `e` over `alphabet`.
/// Stars need zero constant term and inverses nonzero constant term.
pub fn eval_series(e: &RatExpr, alphabet: &Arc<Alphabet>, bound: usize) -> Result<TruncSeries, EvalError> {
    evaluate(e, &SeriesBackend::strict(alphabet, bound))
}

/// Evaluates `e` with every letter replaced by its affine image under
/// `sigma`, in the power series ring over the target alphabet. Here `x*`
/// means `(1 - x)⁻¹` and is defined whenever `x` has constant term `!= 1`.
///
/// Substituting at the expression level keeps truncation exact even when the
/// images carry constant terms.
pub fn eval_series_substituted(e: &RatExpr, sigma: &Substitution, bound: usize) -> Result<TruncSeries, EvalError> {
    evaluate(e, &SeriesBackend::substituted(sigma, bound))
}

// ---------------------------------------------------------------- matrices

/// Specialization of letters to `k×k` rational matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixAssignment {
    k: usize,
    blocks: BTreeMap<Letter, QMatrix>,
}

impl MatrixAssignment {
    pub fn new(k: usize) -> Self {
        MatrixAssignment { k, blocks: BTreeMap::new() }
    }

    /// Scalar (`k = 1`) assignment.
    pub fn scalars<'a, I: IntoIterator<Item = (&'a str, Rational)>>(values: I) -> Self {
        let mut a = Self::new(1);
        for (name, v) in values {
            a.set(name, QMatrix::scalar(1, &v));
        }
        a
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Panics if `m` is not `k×k`.
    pub fn set(&mut self, name: &str, m: QMatrix) {
        assert!(m.rows() == self.k && m.cols() == self.k, "block must be {0}×{0}", self.k);
        self.blocks.insert(Letter::new(name), m);
    }

    pub fn get(&self, l: &Letter) -> Option<&QMatrix> {
        self.blocks.get(l)
    }

    pub fn get_name(&self, name: &str) -> Option<&QMatrix> {
        self.blocks.get(&Letter::new(name))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Letter, &QMatrix)> {
        self.blocks.iter()
    }
}

pub struct MatrixBackend<'a> {
    pub assignment: &'a MatrixAssignment,
}

impl Backend for MatrixBackend<'_> {
    type Value = QMatrix;

    fn atom(&self, l: &Letter) -> Result<QMatrix, Fault> {
        self.assignment.get(l).cloned().ok_or_else(|| Fault::UnknownLetter(l.to_string()))
    }

    fn scalar(&self, c: &Rational) -> Result<QMatrix, Fault> {
        Ok(QMatrix::scalar(self.assignment.k, c))
    }

    fn add(&self, x: &QMatrix, y: &QMatrix) -> Result<QMatrix, Fault> {
        Ok(x + y)
    }

    fn mul(&self, x: &QMatrix, y: &QMatrix) -> Result<QMatrix, Fault> {
        Ok(x * y)
    }

    fn star(&self, x: &QMatrix) -> Result<QMatrix, Fault> {
        (&QMatrix::identity(self.assignment.k) - x).inverse().ok_or(Fault::Singular)
    }

    fn inverse(&self, x: &QMatrix) -> Result<QMatrix, Fault> {
        x.inverse().ok_or(Fault::Singular)
    }
}

/// Exact value of `e` under a matrix specialization; `x*` is `(I - x)⁻¹`.
pub fn eval_matrix(e: &RatExpr, assignment: &MatrixAssignment) -> Result<QMatrix, EvalError> {
    evaluate(e, &MatrixBackend { assignment })
}

// ---------------------------------------------------------------- dual

/// Pair `(value, λ-derivative)` of `k×k` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct DualMatrix {
    pub value: QMatrix,
    pub deriv: QMatrix,
}

pub struct DualBackend<'a> {
    pub assignment: &'a MatrixAssignment,
}

impl Backend for DualBackend<'_> {
    type Value = DualMatrix;

    fn atom(&self, l: &Letter) -> Result<DualMatrix, Fault> {
        let x = self.assignment.get(l).cloned().ok_or_else(|| Fault::UnknownLetter(l.to_string()))?;
        Ok(DualMatrix { value: x.clone(), deriv: x })
    }

    fn scalar(&self, c: &Rational) -> Result<DualMatrix, Fault> {
        let k = self.assignment.k;
        Ok(DualMatrix { value: QMatrix::scalar(k, c), deriv: QMatrix::zeros(k, k) })
    }

    fn add(&self, x: &DualMatrix, y: &DualMatrix) -> Result<DualMatrix, Fault> {
        Ok(DualMatrix { value: &x.value + &y.value, deriv: &x.deriv + &y.deriv })
    }

    fn mul(&self, x: &DualMatrix, y: &DualMatrix) -> Result<DualMatrix, Fault> {
        Ok(DualMatrix {
            value: &x.value * &y.value,
            deriv: &(&x.value * &y.deriv) + &(&x.deriv * &y.value),
        })
    }

    fn star(&self, x: &DualMatrix) -> Result<DualMatrix, Fault> {
        let s = (&QMatrix::identity(self.assignment.k) - &x.value).inverse().ok_or(Fault::Singular)?;
        let deriv = &(&s * &x.deriv) * &s;
        Ok(DualMatrix { value: s, deriv })
    }

    fn inverse(&self, x: &DualMatrix) -> Result<DualMatrix, Fault> {
        let v = x.value.inverse().ok_or(Fault::Singular)?;
        let deriv = -&(&(&v * &x.deriv) * &v);
        Ok(DualMatrix { value: v, deriv })
    }
}

/// Value and λ-derivative of `e` under a matrix specialization, computed in
/// the ring of dual numbers over `k×k` matrices.
pub fn eval_dual(e: &RatExpr, assignment: &MatrixAssignment) -> Result<DualMatrix, EvalError> {
    evaluate(e, &DualBackend { assignment })
}

// ---------------------------------------------------------------- Bernoulli

/// Positive weights on letters, extended multiplicatively to words.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliWeights {
    weights: BTreeMap<Letter, Rational>,
}

impl BernoulliWeights {
    /// Panics on a nonpositive weight.
    pub fn new<'a, I: IntoIterator<Item = (&'a str, Rational)>>(values: I) -> Self {
        let weights: BTreeMap<Letter, Rational> = values.into_iter().map(|(n, w)| (Letter::new(n), w)).collect();
        assert!(weights.values().all(Signed::is_positive), "Bernoulli weights must be positive");
        BernoulliWeights { weights }
    }

    pub fn get(&self, l: &Letter) -> Option<&Rational> {
        self.weights.get(l)
    }

    /// Total weight of the letters in `group`.
    pub fn group_sum(&self, group: &[&str]) -> Rational {
        group.iter().filter_map(|n| self.weights.get(&Letter::new(n))).sum()
    }

    pub fn as_assignment(&self) -> MatrixAssignment {
        MatrixAssignment::scalars(self.weights.iter().map(|(l, w)| (l.name(), w.clone())))
    }
}

pub struct BernoulliBackend<'a> {
    pub weights: &'a BernoulliWeights,
}

impl Backend for BernoulliBackend<'_> {
    type Value = Rational;

    fn atom(&self, l: &Letter) -> Result<Rational, Fault> {
        self.weights.get(l).cloned().ok_or_else(|| Fault::UnknownLetter(l.to_string()))
    }

    fn scalar(&self, c: &Rational) -> Result<Rational, Fault> {
        if c.is_negative() {
            return Err(Fault::NotPositive);
        }
        Ok(c.clone())
    }

    fn add(&self, x: &Rational, y: &Rational) -> Result<Rational, Fault> {
        Ok(x + y)
    }

    fn mul(&self, x: &Rational, y: &Rational) -> Result<Rational, Fault> {
        Ok(x * y)
    }

    fn star(&self, x: &Rational) -> Result<Rational, Fault> {
        if *x >= Rational::one() {
            return Err(Fault::DivergentStar);
        }
        Ok((Rational::one() - x).recip())
    }

    fn inverse(&self, _: &Rational) -> Result<Rational, Fault> {
        Err(Fault::NotPositive)
    }
}

/// `Σ_{w} π(w)·coeff(w)` for a positive *-rational expression; every star
/// must converge.
pub fn eval_bernoulli(e: &RatExpr, weights: &BernoulliWeights) -> Result<Rational, EvalError> {
    evaluate(e, &BernoulliBackend { weights })
}

// ---------------------------------------------------------------- ratfun in t

pub struct RatFunBackend<'a> {
    pub assignment: &'a MatrixAssignment,
}

impl Backend for RatFunBackend<'_> {
    type Value = RatFunMatrix;

    fn atom(&self, l: &Letter) -> Result<RatFunMatrix, Fault> {
        let k = self.assignment.k;
        if l.name() == CENTRAL_T {
            return Ok(RatFunMatrix::scalar(k, &RatFun::t()));
        }
        let m = self.assignment.get(l).ok_or_else(|| Fault::UnknownLetter(l.to_string()))?;
        Ok(RatFunMatrix::from_qmatrix(m))
    }

    fn scalar(&self, c: &Rational) -> Result<RatFunMatrix, Fault> {
        Ok(RatFunMatrix::scalar(self.assignment.k, &RatFun::constant(c.clone())))
    }

    fn add(&self, x: &RatFunMatrix, y: &RatFunMatrix) -> Result<RatFunMatrix, Fault> {
        Ok(x.add(y))
    }

    fn mul(&self, x: &RatFunMatrix, y: &RatFunMatrix) -> Result<RatFunMatrix, Fault> {
        Ok(x.mul(y))
    }

    fn star(&self, x: &RatFunMatrix) -> Result<RatFunMatrix, Fault> {
        let one_minus = RatFunMatrix::identity(self.assignment.k).add(&x.neg());
        self.inverse(&one_minus)
    }

    fn inverse(&self, x: &RatFunMatrix) -> Result<RatFunMatrix, Fault> {
        x.inverse().map_err(|e| match e {
            ArithError::Singular | ArithError::NotEvaluableAtOne { .. } => Fault::Singular,
        })
    }
}

/// Evaluates `e` with the letter [`CENTRAL_T`] as the central variable and
/// every other letter as a constant `k×k` block.
pub fn eval_ratfun_t(e: &RatExpr, assignment: &MatrixAssignment) -> Result<RatFunMatrix, EvalError> {
    evaluate(e, &RatFunBackend { assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::{int, q, Poly};
    use crate::ratexpr::{lambda_expr, parse};

    fn example1() -> MatrixAssignment {
        MatrixAssignment::scalars([("a", q(1, 2)), ("b", q(1, 2)), ("c", q(1, 3)), ("d", q(2, 3))])
    }

    fn scalar(m: QMatrix) -> Rational {
        assert_eq!(m.rows(), 1);
        m[(0, 0)].clone()
    }

    #[test]
    fn series_examples() {
        let alpha = Alphabet::new(["a", "b", "c", "d"]);
        let s = eval_series(&parse("b (d)^*").unwrap(), &alpha, 3).unwrap();
        assert_eq!(s.render(), "b + b.d + b.d.d");
        let s = eval_series(&parse("a + b (d)^* c").unwrap(), &alpha, 3).unwrap();
        assert_eq!(s.render(), "a + b.c + b.d.c");
        assert!(matches!(
            eval_series(&parse("(0)^-1").unwrap(), &alpha, 3),
            Err(EvalError::ZeroConstantTerm(_))
        ));
        assert!(matches!(
            eval_series(&parse("(1 + a)^*").unwrap(), &alpha, 3),
            Err(EvalError::NonzeroConstantTerm(_))
        ));
    }

    #[test]
    fn matrix_examples() {
        let a = example1();
        assert_eq!(scalar(eval_matrix(&parse("1 + b (d)^*").unwrap(), &a).unwrap()), q(5, 2));
        assert_eq!(scalar(eval_matrix(&parse("a + b (d)^* c").unwrap(), &a).unwrap()), int(1));
        let err = eval_matrix(&parse("((1) + (-1))^-1").unwrap(), &a).unwrap_err();
        assert!(err.is_singular());
    }

    #[test]
    fn dual_examples() {
        let a = example1();
        let d = eval_dual(&parse("a + b (d)^* c").unwrap(), &a).unwrap();
        assert_eq!(scalar(d.value), int(1));
        assert_eq!(scalar(d.deriv), q(5, 2));
        let d = eval_dual(&parse("a").unwrap(), &a).unwrap();
        assert_eq!(d.value, d.deriv);
        let d = eval_dual(&parse("3").unwrap(), &a).unwrap();
        assert_eq!(scalar(d.value), int(3));
        assert!(d.deriv.is_zero());
    }

    #[test]
    fn dual_matches_symbolic_lambda() {
        let a = example1();
        let e = parse("(1 + b (d)^*)^-1 a + c ((a)^* b)^-1").unwrap();
        let d = eval_dual(&e, &a).unwrap();
        assert_eq!(d.deriv, eval_matrix(&lambda_expr(&e), &a).unwrap());
    }

    #[test]
    fn bernoulli_examples() {
        let w = BernoulliWeights::new([("a", int(1)), ("b", q(1, 2)), ("d", q(2, 3))]);
        assert_eq!(eval_bernoulli(&parse("b (d)^*").unwrap(), &w).unwrap(), q(3, 2));
        assert!(matches!(eval_bernoulli(&parse("(a)^*").unwrap(), &w), Err(EvalError::DivergentStar(_))));
        assert_eq!(eval_bernoulli(&parse("1").unwrap(), &w).unwrap(), int(1));
        assert!(matches!(eval_bernoulli(&parse("(b)^-1").unwrap(), &w), Err(EvalError::NotPositive(_))));
        assert!(matches!(eval_bernoulli(&parse("a - b").unwrap(), &w), Err(EvalError::NotPositive(_))));
    }

    #[test]
    fn ratfun_examples() {
        let a = MatrixAssignment::scalars([("a", q(1, 2))]);
        let r = eval_ratfun_t(&parse("(t a)^*").unwrap(), &a).unwrap();
        let expected = RatFun::new(Poly::one(), Poly::new(vec![int(1), q(-1, 2)])).unwrap();
        assert_eq!(*r.get(0, 0), expected);
        let r = eval_ratfun_t(&parse("(t)^*").unwrap(), &a).unwrap();
        assert!(r.get(0, 0).eval_at_one().is_err());
    }

    #[test]
    fn substituted_series_sees_relations() {
        // a ↦ 1/2 - x, b ↦ 1/2 + x, c ↦ 1/3 + y, d ↦ 2/3 - y: a row-stochastic
        // point plus free perturbations. C_1 = a + b d* c - 1 vanishes.
        let src = Alphabet::new(["a", "b", "c", "d"]);
        let tgt = Alphabet::new(["x", "y"]);
        let mut sigma = Substitution::new(&src, &tgt);
        sigma.set("a", q(1, 2), &[("x", int(-1))]).unwrap();
        sigma.set("b", q(1, 2), &[("x", int(1))]).unwrap();
        sigma.set("c", q(1, 3), &[("y", int(1))]).unwrap();
        sigma.set("d", q(2, 3), &[("y", int(-1))]).unwrap();
        let r = eval_series_substituted(&parse("a + b (d)^* c - 1").unwrap(), &sigma, 4).unwrap();
        assert!(r.is_zero(), "{r}");
        // Without the relation on the second row the identity fails.
        sigma.set("d", q(1, 2), &[("y", int(-1))]).unwrap();
        let r = eval_series_substituted(&parse("a + b (d)^* c - 1").unwrap(), &sigma, 4).unwrap();
        assert!(!r.is_zero());
    }
}
