//! Path series of a weighted digraph given as a grid of expressions.
//!
//! `matrix_star` eliminates one vertex at a time: for `M = [[a, r], [c, N]]`
//! with `s = a + r N* c`,
//!
//! ```text
//! M* = [[ s*,        s* r N*           ],
//!       [ N* c s*,   N* + N* c s* r N* ]]
//! ```
//!
//! The first-return code of a vertex and its prefix set are read off the
//! same decomposition with the vertex in the pivot position.

use crate::ratexpr::RatExpr;

pub type Grid = Vec<Vec<RatExpr>>;

fn dot(row: &[RatExpr], col: &[RatExpr]) -> RatExpr {
    RatExpr::add_all(row.iter().zip(col).map(|(x, y)| RatExpr::mul_all(vec![x.clone(), y.clone()])).collect())
}

/// Symbolic star of a square grid; entry `(i, j)` denotes all paths `i → j`.
pub fn matrix_star(m: &[Vec<RatExpr>]) -> Grid {
    let n = m.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![vec![RatExpr::star_of(m[0][0].clone())]];
    }
    let rest: Vec<usize> = (1..n).collect();
    let sub: Grid = rest.iter().map(|&i| rest.iter().map(|&j| m[i][j].clone()).collect()).collect();
    let ns = matrix_star(&sub);
    let r: Vec<RatExpr> = rest.iter().map(|&j| m[0][j].clone()).collect();
    let c: Vec<RatExpr> = rest.iter().map(|&i| m[i][0].clone()).collect();
    let m1 = n - 1;
    // r N* (row) and N* c (column).
    let rn: Vec<RatExpr> = (0..m1).map(|j| dot(&r, &(0..m1).map(|l| ns[l][j].clone()).collect::<Vec<_>>())).collect();
    let nc: Vec<RatExpr> = (0..m1).map(|i| dot(&ns[i], &c)).collect();
    let s = RatExpr::add_all(vec![m[0][0].clone(), dot(&rn, &c)]);
    let ss = RatExpr::star_of(s);
    let mut out = vec![vec![RatExpr::zero(); n]; n];
    out[0][0] = ss.clone();
    for j in 0..m1 {
        out[0][j + 1] = RatExpr::mul_all(vec![ss.clone(), rn[j].clone()]);
        out[j + 1][0] = RatExpr::mul_all(vec![nc[j].clone(), ss.clone()]);
    }
    for i in 0..m1 {
        let ncs = RatExpr::mul_all(vec![nc[i].clone(), ss.clone()]);
        for j in 0..m1 {
            out[i + 1][j + 1] =
                RatExpr::add_all(vec![ns[i][j].clone(), RatExpr::mul_all(vec![ncs.clone(), rn[j].clone()])]);
        }
    }
    out
}

/// Paths leaving and entering vertex `i` with no intermediate visit to `i`.
#[derive(Clone, Debug)]
pub struct FirstReturn {
    /// `C_i = a_ii + r_i N* c_i`.
    pub code: RatExpr,
    /// `P_i = 1 + Σ_j P_ij`, the proper prefixes of `C_i`.
    pub prefixes: RatExpr,
    /// `P_ij` for every `j`, with `P_ii = 1`.
    pub prefix_row: Vec<RatExpr>,
}

/// `C_i`, `P_i` and the row `(P_ij)_j` for vertex `i` (0-based).
pub fn first_return(m: &[Vec<RatExpr>], i: usize) -> FirstReturn {
    let n = m.len();
    assert!(i < n, "vertex out of range");
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let sub: Grid = others.iter().map(|&a| others.iter().map(|&b| m[a][b].clone()).collect()).collect();
    let ns = matrix_star(&sub);
    let r: Vec<RatExpr> = others.iter().map(|&j| m[i][j].clone()).collect();
    let c: Vec<RatExpr> = others.iter().map(|&j| m[j][i].clone()).collect();
    let m1 = others.len();
    let mut code_terms = vec![m[i][i].clone()];
    let mut prefix_terms = vec![RatExpr::one()];
    let mut row_terms: Vec<Vec<RatExpr>> = vec![Vec::new(); m1];
    for j in 0..m1 {
        for l in 0..m1 {
            code_terms.push(RatExpr::mul_all(vec![r[j].clone(), ns[j][l].clone(), c[l].clone()]));
            let p = RatExpr::mul_all(vec![r[j].clone(), ns[j][l].clone()]);
            prefix_terms.push(p.clone());
            row_terms[l].push(p);
        }
    }
    let mut prefix_row = vec![RatExpr::one(); n];
    for (l, &j) in others.iter().enumerate() {
        prefix_row[j] = RatExpr::add_all(std::mem::take(&mut row_terms[l]));
    }
    FirstReturn {
        code: RatExpr::add_all(code_terms),
        prefixes: RatExpr::add_all(prefix_terms),
        prefix_row,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratexpr::parse;

    fn grid2() -> Grid {
        vec![vec![RatExpr::atom("a"), RatExpr::atom("b")], vec![RatExpr::atom("c"), RatExpr::atom("d")]]
    }

    #[test]
    fn two_state_codes() {
        let m = grid2();
        let f1 = first_return(&m, 0);
        assert_eq!(f1.code, parse("a + b (d)^* c").unwrap());
        assert_eq!(f1.prefixes, parse("1 + b (d)^*").unwrap());
        let f2 = first_return(&m, 1);
        assert_eq!(f2.code, parse("d + c (a)^* b").unwrap());
        assert_eq!(f2.prefixes, parse("1 + c (a)^*").unwrap());
        assert_eq!(f2.prefix_row[0], parse("c (a)^*").unwrap());
        assert!(f2.prefix_row[1].is_one());
    }

    #[test]
    fn one_state() {
        let m = vec![vec![RatExpr::atom("a")]];
        let f = first_return(&m, 0);
        assert_eq!(f.code, RatExpr::atom("a"));
        assert!(f.prefixes.is_one());
        assert_eq!(matrix_star(&m)[0][0], parse("(a)^*").unwrap());
    }
}
