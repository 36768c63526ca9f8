use rustc_hash::FxHashMap;

use super::{Node, RatExpr};

/// Symbolic image under the derivation fixing every letter:
/// `λ(a) = a`, `λ(c) = 0`, Leibniz on products,
/// `λ(x⁻¹) = -x⁻¹·λ(x)·x⁻¹` and `λ(x*) = x*·λ(x)·x*`.
///
/// Subexpressions of the input are shared, not copied, in the result.
pub fn lambda_expr(e: &RatExpr) -> RatExpr {
    go(e, &mut FxHashMap::default())
}

fn go(e: &RatExpr, memo: &mut FxHashMap<usize, RatExpr>) -> RatExpr {
    if let Some(r) = memo.get(&e.id()) {
        return r.clone();
    }
    let r = match e.node() {
        Node::Atom(_) => e.clone(),
        Node::Scalar(_) => RatExpr::zero(),
        Node::Sum(cs) => {
            let terms: Vec<RatExpr> = cs.iter().map(|c| go(c, memo)).filter(|d| !d.is_zero()).collect();
            match terms.len() {
                0 => RatExpr::zero(),
                _ => RatExpr::sum(terms),
            }
        }
        Node::Product(cs) => {
            let mut terms = Vec::new();
            for (i, c) in cs.iter().enumerate() {
                let d = go(c, memo);
                if d.is_zero() {
                    continue;
                }
                let mut factors = cs.clone();
                factors[i] = d;
                terms.push(RatExpr::product(factors));
            }
            match terms.len() {
                0 => RatExpr::zero(),
                _ => RatExpr::sum(terms),
            }
        }
        Node::Inverse(c) => {
            let d = go(c, memo);
            if d.is_zero() {
                RatExpr::zero()
            } else {
                RatExpr::product(vec![RatExpr::scalar(crate::exact_arith::int(-1)), e.clone(), d, e.clone()])
            }
        }
        Node::Star(c) => {
            let d = go(c, memo);
            if d.is_zero() {
                RatExpr::zero()
            } else {
                RatExpr::product(vec![e.clone(), d, e.clone()])
            }
        }
    };
    memo.insert(e.id(), r.clone());
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::int;
    use crate::ratexpr::parse;

    fn a(n: &str) -> RatExpr {
        RatExpr::atom(n)
    }

    #[test]
    fn lambda_of_star_is_sandwich() {
        let ds = RatExpr::star(a("d"));
        assert_eq!(lambda_expr(&ds), RatExpr::product(vec![ds.clone(), a("d"), ds]));
    }

    #[test]
    fn lambda_of_word_is_leibniz_sum() {
        let ab = parse("a b").unwrap();
        assert_eq!(lambda_expr(&ab), RatExpr::sum(vec![ab.clone(), ab]));
    }

    #[test]
    fn lambda_of_inverse() {
        let inv = RatExpr::inverse(a("a"));
        assert_eq!(
            lambda_expr(&inv),
            RatExpr::product(vec![RatExpr::scalar(int(-1)), inv.clone(), a("a"), inv])
        );
    }

    #[test]
    fn lambda_of_scalar_is_zero() {
        assert!(lambda_expr(&parse("3").unwrap()).is_zero());
        assert_eq!(lambda_expr(&parse("1 + a").unwrap()), RatExpr::sum(vec![a("a")]));
    }
}
