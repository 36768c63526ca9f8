//! Rational expressions over a finite alphabet: sums, products, stars and
//! inverses of letters and rational scalars.
//!
//! Expressions are immutable DAGs (`Arc` children), so builders can share
//! subexpressions freely and the evaluators memoize by node identity.

mod eval;
mod lambda;
mod parse;

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rustc_hash::FxHashMap;

use crate::exact_arith::{fmt_rational, int, Rational};
use crate::free_series::Letter;

pub use eval::{
    eval_bernoulli, eval_dual, eval_matrix, eval_ratfun_t, eval_series, eval_series_substituted, evaluate,
    Backend, BernoulliBackend, BernoulliWeights, DualBackend, Evaluator, MatrixBackend, RatFunBackend, SeriesBackend, DualMatrix, EvalError, Fault, MatrixAssignment, CENTRAL_T,
};
pub use lambda::lambda_expr;
pub use parse::{parse, SyntaxError};

#[derive(Debug, PartialEq)]
pub enum Node {
    Atom(Letter),
    Scalar(Rational),
    Sum(Vec<RatExpr>),
    Product(Vec<RatExpr>),
    Star(RatExpr),
    Inverse(RatExpr),
}

#[derive(Clone)]
pub struct RatExpr(Arc<Node>);

impl PartialEq for RatExpr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl RatExpr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    /// Identity of the shared node, used as a memoization key.
    pub fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn atom(name: &str) -> Self {
        RatExpr(Arc::new(Node::Atom(Letter::new(name))))
    }

    pub fn letter(l: &Letter) -> Self {
        RatExpr(Arc::new(Node::Atom(l.clone())))
    }

    pub fn scalar(c: Rational) -> Self {
        RatExpr(Arc::new(Node::Scalar(c)))
    }

    pub fn zero() -> Self {
        Self::scalar(Rational::zero())
    }

    pub fn one() -> Self {
        Self::scalar(Rational::one())
    }

    /// Raw sum node, no simplification.
    pub fn sum(children: Vec<RatExpr>) -> Self {
        RatExpr(Arc::new(Node::Sum(children)))
    }

    /// Raw product node, no simplification.
    pub fn product(children: Vec<RatExpr>) -> Self {
        RatExpr(Arc::new(Node::Product(children)))
    }

    pub fn star(child: RatExpr) -> Self {
        RatExpr(Arc::new(Node::Star(child)))
    }

    pub fn inverse(child: RatExpr) -> Self {
        RatExpr(Arc::new(Node::Inverse(child)))
    }

    pub fn as_scalar(&self) -> Option<&Rational> {
        match self.node() {
            Node::Scalar(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_scalar().is_some_and(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_scalar().is_some_and(One::is_one)
    }

    /// Sum dropping zero terms; collapses to the single term or to `0`.
    pub fn add_all(terms: Vec<RatExpr>) -> Self {
        let mut terms: Vec<RatExpr> = terms.into_iter().filter(|t| !t.is_zero()).collect();
        match terms.len() {
            0 => Self::zero(),
            1 => terms.pop().expect("one term"),
            _ => Self::sum(terms),
        }
    }

    /// Product dropping unit factors; any zero factor gives `0`.
    pub fn mul_all(factors: Vec<RatExpr>) -> Self {
        if factors.iter().any(RatExpr::is_zero) {
            return Self::zero();
        }
        let mut factors: Vec<RatExpr> = factors.into_iter().filter(|f| !f.is_one()).collect();
        match factors.len() {
            0 => Self::one(),
            1 => factors.pop().expect("one factor"),
            _ => Self::product(factors),
        }
    }

    /// `x*`, with `0* = 1`.
    pub fn star_of(x: RatExpr) -> Self {
        if x.is_zero() {
            Self::one()
        } else {
            Self::star(x)
        }
    }

    pub fn neg(x: RatExpr) -> Self {
        match x.as_scalar() {
            Some(c) => Self::scalar(-c),
            None => Self::product(vec![Self::scalar(int(-1)), x]),
        }
    }

    /// `x - y`.
    pub fn sub(x: RatExpr, y: RatExpr) -> Self {
        Self::add_all(vec![x, Self::neg(y)])
    }

    /// Number of distinct nodes in the DAG.
    pub fn size(&self) -> usize {
        fn walk(e: &RatExpr, seen: &mut FxHashMap<usize, ()>) {
            if seen.insert(e.id(), ()).is_some() {
                return;
            }
            match e.node() {
                Node::Atom(_) | Node::Scalar(_) => {}
                Node::Sum(cs) | Node::Product(cs) => cs.iter().for_each(|c| walk(c, seen)),
                Node::Star(c) | Node::Inverse(c) => walk(c, seen),
            }
        }
        let mut seen = FxHashMap::default();
        walk(self, &mut seen);
        seen.len()
    }

    /// Letters occurring in the expression, sorted by name.
    pub fn letters(&self) -> Vec<Letter> {
        fn walk(e: &RatExpr, seen: &mut FxHashMap<usize, ()>, out: &mut Vec<Letter>) {
            if seen.insert(e.id(), ()).is_some() {
                return;
            }
            match e.node() {
                Node::Atom(l) => out.push(l.clone()),
                Node::Scalar(_) => {}
                Node::Sum(cs) | Node::Product(cs) => cs.iter().for_each(|c| walk(c, seen, out)),
                Node::Star(c) | Node::Inverse(c) => walk(c, seen, out),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut FxHashMap::default(), &mut out);
        out.sort();
        out.dedup();
        out
    }

    /// Text form in the parser's grammar.
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s, Ctx::Top);
        s
    }

    fn render_into(&self, out: &mut String, ctx: Ctx) {
        match self.node() {
            Node::Atom(l) => out.push_str(l.name()),
            Node::Scalar(c) => {
                if c.is_negative() {
                    out.push('(');
                    out.push_str(&fmt_rational(c));
                    out.push(')');
                } else {
                    out.push_str(&fmt_rational(c));
                }
            }
            Node::Sum(cs) => {
                let paren = ctx != Ctx::Top;
                if paren {
                    out.push('(');
                }
                if cs.is_empty() {
                    out.push('0');
                }
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" + ");
                    }
                    c.render_into(out, Ctx::SumTerm);
                }
                if paren {
                    out.push(')');
                }
            }
            Node::Product(cs) => {
                let paren = ctx == Ctx::Factor;
                if paren {
                    out.push('(');
                }
                if cs.is_empty() {
                    out.push('1');
                }
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    c.render_into(out, Ctx::Factor);
                }
                if paren {
                    out.push(')');
                }
            }
            Node::Star(c) | Node::Inverse(c) => {
                out.push('(');
                c.render_into(out, Ctx::Top);
                out.push(')');
                out.push_str(if matches!(self.node(), Node::Star(_)) { "^*" } else { "^-1" });
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Top,
    SumTerm,
    Factor,
}

impl fmt::Debug for RatExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl fmt::Display for RatExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Rewrites every `x*` as `(1 - x)⁻¹`.
pub fn star_free(e: &RatExpr) -> RatExpr {
    fn go(e: &RatExpr, memo: &mut FxHashMap<usize, RatExpr>) -> RatExpr {
        if let Some(r) = memo.get(&e.id()) {
            return r.clone();
        }
        let r = match e.node() {
            Node::Atom(_) | Node::Scalar(_) => e.clone(),
            Node::Sum(cs) => RatExpr::sum(cs.iter().map(|c| go(c, memo)).collect()),
            Node::Product(cs) => RatExpr::product(cs.iter().map(|c| go(c, memo)).collect()),
            Node::Inverse(c) => RatExpr::inverse(go(c, memo)),
            Node::Star(c) => {
                let x = go(c, memo);
                RatExpr::inverse(RatExpr::sum(vec![RatExpr::one(), RatExpr::neg(x)]))
            }
        };
        memo.insert(e.id(), r.clone());
        r
    }
    go(e, &mut FxHashMap::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: &str) -> RatExpr {
        RatExpr::atom(n)
    }

    #[test]
    fn star_free_examples() {
        assert_eq!(
            star_free(&RatExpr::star(a("d"))),
            RatExpr::inverse(RatExpr::sum(vec![
                RatExpr::one(),
                RatExpr::product(vec![RatExpr::scalar(int(-1)), a("d")])
            ]))
        );
        assert_eq!(star_free(&a("a")), a("a"));
        let ss = star_free(&RatExpr::star(RatExpr::star(a("a"))));
        assert_eq!(ss.render(), "(1 + (-1) (1 + (-1) a)^-1)^-1");
    }

    #[test]
    fn rendering_matches_grammar() {
        let e = RatExpr::sum(vec![a("a"), RatExpr::product(vec![a("b"), RatExpr::star(a("d")), a("c")])]);
        assert_eq!(e.render(), "a + b (d)^* c");
        let e = RatExpr::inverse(RatExpr::sum(vec![RatExpr::one(), RatExpr::product(vec![a("b"), RatExpr::star(a("d"))])]));
        assert_eq!(e.render(), "(1 + b (d)^*)^-1");
    }

    #[test]
    fn smart_builders_simplify() {
        assert!(RatExpr::mul_all(vec![a("a"), RatExpr::zero()]).is_zero());
        assert_eq!(RatExpr::mul_all(vec![RatExpr::one(), a("a")]), a("a"));
        assert_eq!(RatExpr::add_all(vec![RatExpr::zero(), a("a")]), a("a"));
        assert!(RatExpr::star_of(RatExpr::zero()).is_one());
    }
}
