//! Quasideterminants `|A|_ij = a_ij - r_i (A^{ij})⁻¹ c_j` over any carrier
//! with partial inversion, their heredity rules, the right Cramer rule, and
//! the quasiminor identities of `S - I` for stochastic `S`.

use std::fmt::Debug;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

use crate::commutative::{principal_minors, qmatrix_grid};
use crate::exact_arith::{fmt_rational, int, QMatrix, RatFun, RatFunMatrix, Rational};
use crate::free_series::{Alphabet, TruncSeries};
use crate::ratexpr::{eval_series, Evaluator, MatrixAssignment, MatrixBackend};
use crate::report::{Check, Report, Tally};
use crate::sampling::{random_block, random_rational_matrix, trial_rng, MAX_RESAMPLES};
use crate::stochastic::{build_p, matrix_witness, series_witness, GenericMatrix, StochasticError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuasidetError {
    #[error("|A|_{{{},{}}} not defined: submatrix not invertible", .i + 1, .j + 1)]
    NotDefined { i: usize, j: usize },
    #[error("element not invertible")]
    NotInvertible,
    #[error("index out of range")]
    OutOfRange,
}

/// A ring whose elements may or may not be invertible.
pub trait DivisionContext {
    type Elem: Clone + PartialEq + Debug;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Option<Self::Elem>;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn render(&self, a: &Self::Elem) -> String;

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.add(a, &self.neg(b))
    }

    /// Matrix inverse. The default is Gauss-Jordan by left row operations,
    /// pivoting on the first invertible entry of each column.
    fn invert_matrix(&self, m: &[Vec<Self::Elem>]) -> Option<Vec<Vec<Self::Elem>>> {
        let n = m.len();
        let mut a: Vec<Vec<Self::Elem>> = m.to_vec();
        let mut b: Vec<Vec<Self::Elem>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { self.one() } else { self.zero() }).collect()).collect();
        for c in 0..n {
            let (r, pinv) = (c..n).find_map(|r| self.inv(&a[r][c]).map(|p| (r, p)))?;
            a.swap(c, r);
            b.swap(c, r);
            a[c] = a[c].iter().map(|x| self.mul(&pinv, x)).collect();
            b[c] = b[c].iter().map(|x| self.mul(&pinv, x)).collect();
            for r in 0..n {
                if r == c || self.is_zero(&a[r][c]) {
                    continue;
                }
                let f = a[r][c].clone();
                for j in 0..n {
                    let da = self.mul(&f, &a[c][j]);
                    a[r][j] = self.sub(&a[r][j], &da);
                    let db = self.mul(&f, &b[c][j]);
                    b[r][j] = self.sub(&b[r][j], &db);
                }
            }
        }
        Some(b)
    }

    fn mat_mul(&self, x: &[Vec<Self::Elem>], y: &[Vec<Self::Elem>]) -> Vec<Vec<Self::Elem>> {
        let cols = y.first().map_or(0, Vec::len);
        x.iter()
            .map(|row| {
                (0..cols)
                    .map(|j| row.iter().zip(y).fold(self.zero(), |s, (a, yr)| self.add(&s, &self.mul(a, &yr[j]))))
                    .collect()
            })
            .collect()
    }
}

pub type RingMatrix<E> = Vec<Vec<E>>;

pub struct RationalCtx;

impl DivisionContext for RationalCtx {
    type Elem = Rational;
    fn zero(&self) -> Rational {
        Rational::zero()
    }
    fn one(&self) -> Rational {
        Rational::one()
    }
    fn add(&self, a: &Rational, b: &Rational) -> Rational {
        a + b
    }
    fn neg(&self, a: &Rational) -> Rational {
        -a
    }
    fn mul(&self, a: &Rational, b: &Rational) -> Rational {
        a * b
    }
    fn inv(&self, a: &Rational) -> Option<Rational> {
        (!a.is_zero()).then(|| a.recip())
    }
    fn is_zero(&self, a: &Rational) -> bool {
        a.is_zero()
    }
    fn render(&self, a: &Rational) -> String {
        fmt_rational(a)
    }
}

/// `k×k` rational blocks. Matrices of blocks are inverted flattened, so a
/// block matrix is invertible here exactly when it is invertible over ℚ.
pub struct BlockCtx {
    pub k: usize,
}

impl DivisionContext for BlockCtx {
    type Elem = QMatrix;
    fn zero(&self) -> QMatrix {
        QMatrix::zeros(self.k, self.k)
    }
    fn one(&self) -> QMatrix {
        QMatrix::identity(self.k)
    }
    fn add(&self, a: &QMatrix, b: &QMatrix) -> QMatrix {
        a + b
    }
    fn neg(&self, a: &QMatrix) -> QMatrix {
        -a
    }
    fn mul(&self, a: &QMatrix, b: &QMatrix) -> QMatrix {
        a * b
    }
    fn inv(&self, a: &QMatrix) -> Option<QMatrix> {
        a.inverse()
    }
    fn is_zero(&self, a: &QMatrix) -> bool {
        a.is_zero()
    }
    fn render(&self, a: &QMatrix) -> String {
        format!("{a:?}")
    }
    fn invert_matrix(&self, m: &[Vec<QMatrix>]) -> Option<Vec<Vec<QMatrix>>> {
        let n = m.len();
        if n == 0 {
            return Some(Vec::new());
        }
        let inv = QMatrix::from_blocks(m).inverse()?;
        Some((0..n).map(|i| (0..n).map(|j| inv.block(i, j, self.k)).collect()).collect())
    }
}

/// Rational functions in the central variable `t`.
pub struct RatFunCtx;

impl DivisionContext for RatFunCtx {
    type Elem = RatFun;
    fn zero(&self) -> RatFun {
        RatFun::zero()
    }
    fn one(&self) -> RatFun {
        RatFun::one()
    }
    fn add(&self, a: &RatFun, b: &RatFun) -> RatFun {
        a + b
    }
    fn neg(&self, a: &RatFun) -> RatFun {
        -a
    }
    fn mul(&self, a: &RatFun, b: &RatFun) -> RatFun {
        a * b
    }
    fn inv(&self, a: &RatFun) -> Option<RatFun> {
        a.inverse()
    }
    fn is_zero(&self, a: &RatFun) -> bool {
        a.is_zero()
    }
    fn render(&self, a: &RatFun) -> String {
        a.to_string()
    }
    fn invert_matrix(&self, m: &[Vec<RatFun>]) -> Option<Vec<Vec<RatFun>>> {
        let n = m.len();
        let inv = RatFunMatrix::from_fn(n, |i, j| m[i][j].clone()).inverse().ok()?;
        Some((0..n).map(|i| (0..n).map(|j| inv.get(i, j).clone()).collect()).collect())
    }
}

/// Truncated series; invertible iff the constant term is nonzero.
pub struct SeriesCtx {
    pub alphabet: Arc<Alphabet>,
    pub bound: usize,
}

impl DivisionContext for SeriesCtx {
    type Elem = TruncSeries;
    fn zero(&self) -> TruncSeries {
        TruncSeries::zero(&self.alphabet, self.bound)
    }
    fn one(&self) -> TruncSeries {
        TruncSeries::one(&self.alphabet, self.bound)
    }
    fn add(&self, a: &TruncSeries, b: &TruncSeries) -> TruncSeries {
        a.add(b).expect("same ring")
    }
    fn neg(&self, a: &TruncSeries) -> TruncSeries {
        a.neg()
    }
    fn mul(&self, a: &TruncSeries, b: &TruncSeries) -> TruncSeries {
        a.mul(b).expect("same ring")
    }
    fn inv(&self, a: &TruncSeries) -> Option<TruncSeries> {
        a.inverse().ok()
    }
    fn is_zero(&self, a: &TruncSeries) -> bool {
        a.is_zero()
    }
    fn render(&self, a: &TruncSeries) -> String {
        a.render()
    }
}

/// Quasideterminant of the submatrix on rows `rows` and columns `cols`
/// (original labels), at labels `(i, j)`.
pub fn quasidet_sub<C: DivisionContext>(
    ctx: &C,
    a: &[Vec<C::Elem>],
    rows: &[usize],
    cols: &[usize],
    i: usize,
    j: usize,
) -> Result<C::Elem, QuasidetError> {
    if rows.len() != cols.len() || !rows.contains(&i) || !cols.contains(&j) {
        return Err(QuasidetError::OutOfRange);
    }
    let rs: Vec<usize> = rows.iter().copied().filter(|&r| r != i).collect();
    let cs: Vec<usize> = cols.iter().copied().filter(|&c| c != j).collect();
    if rs.is_empty() {
        return Ok(a[i][j].clone());
    }
    let sub: Vec<Vec<C::Elem>> = rs.iter().map(|&r| cs.iter().map(|&c| a[r][c].clone()).collect()).collect();
    let inv = ctx.invert_matrix(&sub).ok_or(QuasidetError::NotDefined { i, j })?;
    let ri: Vec<Vec<C::Elem>> = vec![cs.iter().map(|&c| a[i][c].clone()).collect()];
    let cj: Vec<Vec<C::Elem>> = rs.iter().map(|&r| vec![a[r][j].clone()]).collect();
    let corr = ctx.mat_mul(&ctx.mat_mul(&ri, &inv), &cj);
    Ok(ctx.sub(&a[i][j], &corr[0][0]))
}

/// `|A|_ij` (0-based).
pub fn quasidet<C: DivisionContext>(ctx: &C, a: &[Vec<C::Elem>], i: usize, j: usize) -> Result<C::Elem, QuasidetError> {
    let all: Vec<usize> = (0..a.len()).collect();
    quasidet_sub(ctx, a, &all, &all, i, j)
}

/// Entry `(j, i)` of `A⁻¹` as `|A|_ij⁻¹`.
pub fn inverse_entry<C: DivisionContext>(ctx: &C, a: &[Vec<C::Elem>], i: usize, j: usize) -> Result<C::Elem, QuasidetError> {
    let qd = quasidet(ctx, a, i, j)?;
    ctx.inv(&qd).ok_or(QuasidetError::NotInvertible)
}

/// Both sides defined with equal values, or both undefined.
fn same<C: DivisionContext>(
    ctx: &C,
    lhs: Result<C::Elem, QuasidetError>,
    rhs: Result<C::Elem, QuasidetError>,
) -> Result<(), (String, String)> {
    match (lhs, rhs) {
        (Ok(x), Ok(y)) if x == y => Ok(()),
        (Ok(x), Ok(y)) => Err((ctx.render(&ctx.sub(&x, &y)), format!("{} vs {}", ctx.render(&x), ctx.render(&y)))),
        (Err(_), Err(_)) => Ok(()),
        (Ok(_), Err(e)) | (Err(e), Ok(_)) => Err(("defined on one side only".into(), e.to_string())),
    }
}

fn record(t: &mut Tally, name: String, r: Result<(), (String, String)>) {
    t.record(match r {
        Ok(()) => Check::pass(name),
        Err((res, wit)) => Check::fail(name, res, wit),
    });
}

/// Parameters of the elementary transformations for [`check_heredity`].
#[derive(Clone, Debug)]
pub struct Heredity<E> {
    pub sigma: Vec<usize>,
    pub tau: Vec<usize>,
    /// Row `k` is multiplied on the left by `lambda`; then row `l` times
    /// `lambda` is added to row `k`.
    pub k: usize,
    pub l: usize,
    pub lambda: E,
    /// Column `k` is multiplied on the right by `mu`; then column `l` times
    /// `mu` is added to column `k`.
    pub mu: E,
}

/// Permutation, scaling and addition rules, each checked for every index
/// pair where the rule applies, in the defined-iff-defined sense.
pub fn check_heredity<C: DivisionContext>(ctx: &C, a: &[Vec<C::Elem>], h: &Heredity<C::Elem>) -> Report {
    let n = a.len();
    let mut r = Report::new("heredity").param("n", n);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let qd = |m: &[Vec<C::Elem>], i, j| quasidet(ctx, m, i, j);

    let mut b = a.to_vec();
    for i in 0..n {
        for j in 0..n {
            b[h.sigma[i]][h.tau[j]] = a[i][j].clone();
        }
    }
    let mut t = Tally::new("(i) permutation: |A|_pq = |B|_s(p)t(q)");
    for &(p, q) in &pairs {
        record(&mut t, format!("({},{})", p + 1, q + 1), same(ctx, qd(a, p, q), qd(&b, h.sigma[p], h.tau[q])));
    }
    r.push(t.finish());

    let mut b = a.to_vec();
    b[h.k] = a[h.k].iter().map(|x| ctx.mul(&h.lambda, x)).collect();
    let mut t = Tally::new("(ii) row scaling: |B|_kj = lambda |A|_kj, |B|_ij = |A|_ij otherwise");
    for &(i, j) in &pairs {
        let lhs = qd(&b, i, j);
        let rhs = qd(a, i, j).map(|x| if i == h.k { ctx.mul(&h.lambda, &x) } else { x });
        record(&mut t, format!("({},{})", i + 1, j + 1), same(ctx, lhs, rhs));
    }
    r.push(t.finish());

    let mut b = a.to_vec();
    for row in b.iter_mut() {
        row[h.k] = ctx.mul(&row[h.k], &h.mu);
    }
    let mut t = Tally::new("(ii) column scaling: |B|_ik = |A|_ik mu, |B|_ij = |A|_ij otherwise");
    for &(i, j) in &pairs {
        let lhs = qd(&b, i, j);
        let rhs = qd(a, i, j).map(|x| if j == h.k { ctx.mul(&x, &h.mu) } else { x });
        record(&mut t, format!("({},{})", i + 1, j + 1), same(ctx, lhs, rhs));
    }
    r.push(t.finish());

    if h.k != h.l {
        let mut b = a.to_vec();
        b[h.k] = (0..n).map(|j| ctx.add(&a[h.k][j], &ctx.mul(&h.lambda, &a[h.l][j]))).collect();
        let mut t = Tally::new("(iii) row addition: |B|_ij = |A|_ij for i other than the source row");
        for &(i, j) in pairs.iter().filter(|(i, _)| *i != h.l) {
            record(&mut t, format!("({},{})", i + 1, j + 1), same(ctx, qd(&b, i, j), qd(a, i, j)));
        }
        r.push(t.finish());

        let mut b = a.to_vec();
        for row in b.iter_mut() {
            row[h.k] = ctx.add(&row[h.k], &ctx.mul(&row[h.l], &h.mu));
        }
        let mut t = Tally::new("(iii) column addition: |B|_ij = |A|_ij for j other than the source column");
        for &(i, j) in pairs.iter().filter(|(_, j)| *j != h.l) {
            record(&mut t, format!("({},{})", i + 1, j + 1), same(ctx, qd(&b, i, j), qd(a, i, j)));
        }
        r.push(t.finish());
    }
    r
}

/// With `x = ξ B⁻¹`, checks `x_k |B|_kq = |B(ξ, k)|_kq` where `B(ξ, k)` has
/// row `k` replaced by `ξ`.
pub fn right_cramer<C: DivisionContext>(
    ctx: &C,
    b: &[Vec<C::Elem>],
    xi: &[C::Elem],
    k: usize,
    q: usize,
) -> Result<Check, QuasidetError> {
    if xi.len() != b.len() {
        return Err(QuasidetError::OutOfRange);
    }
    let binv = ctx.invert_matrix(b).ok_or(QuasidetError::NotInvertible)?;
    let x = ctx.mat_mul(&[xi.to_vec()], &binv).remove(0);
    right_cramer_with_solution(ctx, b, &x, k, q)
}

/// The same rule for a given solution `x`, with `ξ = x B`; `B` may be singular.
pub fn right_cramer_with_solution<C: DivisionContext>(
    ctx: &C,
    b: &[Vec<C::Elem>],
    x: &[C::Elem],
    k: usize,
    q: usize,
) -> Result<Check, QuasidetError> {
    let n = b.len();
    if k >= n || q >= n || x.len() != n {
        return Err(QuasidetError::OutOfRange);
    }
    let xi = ctx.mat_mul(&[x.to_vec()], b).remove(0);
    let lhs = ctx.mul(&x[k], &quasidet(ctx, b, k, q)?);
    let mut bx = b.to_vec();
    bx[k] = xi;
    let rhs = quasidet(ctx, &bx, k, q)?;
    let name = format!("x_{} |B|_{}{} = |B(xi,{})|_{}{}", k + 1, k + 1, q + 1, k + 1, k + 1, q + 1);
    Ok(match same(ctx, Ok(lhs), Ok(rhs)) {
        Ok(()) => Check::pass(name),
        Err((r, w)) => Check::fail(name, r, w),
    })
}

fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

fn invertible_scalar(rng: &mut impl Rng) -> Rational {
    let x = rng.gen_range(1..=4) * if rng.gen_bool(0.5) { 1 } else { -1 };
    Rational::new(x.into(), rng.gen_range(1..=3).into())
}

fn invertible_block(rng: &mut impl Rng, k: usize) -> QMatrix {
    loop {
        let m = random_block(rng, k);
        if m.inverse().is_some() {
            return m;
        }
    }
}

/// Definitions on random rational and block matrices: the commutative
/// ratio formula, inverse entries against direct inversion, heredity and
/// the right Cramer rule.
pub fn verify_quasidet_basics(max_n: usize, trials: usize, seed: u64) -> Report {
    let mut r = Report::new("quasidet-basics").with_seed(seed).param("max_n", max_n).param("trials", trials);
    let mut t_ratio = Tally::new("rational: |A|_ij = (-1)^(i+j) det A / det A^ij");
    let mut t_inv = Tally::new("rational: (A^-1)_ji = |A|_ij^-1");
    let mut t_binv = Tally::new("blocks k=2: (A^-1)_ji = |A|_ij^-1");
    let mut t_her = Tally::new("rational: heredity (i)-(iii)");
    let mut t_bher = Tally::new("blocks k=2: heredity (i)-(iii)");
    let mut t_cr = Tally::new("rational: right Cramer rule");
    let mut t_bcr = Tally::new("blocks k=2: right Cramer rule");
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        let n = 1 + trial % max_n.max(1);
        let tag = format!("trial {trial} n={n}");
        let m = random_rational_matrix(&mut rng, n, n);
        let a = qmatrix_grid(&m);
        let det = m.det();
        let inv = m.inverse();
        for i in 0..n {
            for j in 0..n {
                let minor = m.minor_matrix(i, j);
                let dm = if n == 1 { Rational::one() } else { minor.det() };
                let got = quasidet(&RationalCtx, &a, i, j);
                let name = format!("{tag} ({},{})", i + 1, j + 1);
                if dm.is_zero() {
                    t_ratio.record(Check::expect(name.clone(), got.is_err(), || ("defined with det A^ij = 0".into(), String::new())));
                } else {
                    let sign = if (i + j) % 2 == 0 { int(1) } else { int(-1) };
                    let want = sign * &det / &dm;
                    record(&mut t_ratio, name.clone(), same(&RationalCtx, got, Ok(want)));
                }
                if let Some(inv) = &inv {
                    let e = inverse_entry(&RationalCtx, &a, i, j);
                    let direct = &inv[(j, i)];
                    let res = match e {
                        Ok(v) => same(&RationalCtx, Ok(v), Ok(direct.clone())),
                        Err(_) if direct.is_zero() => Ok(()),
                        Err(e) => Err(("quasidet undefined for a nonzero entry".into(), e.to_string())),
                    };
                    record(&mut t_inv, name, res);
                }
            }
        }
        let h = Heredity {
            sigma: random_permutation(&mut rng, n),
            tau: random_permutation(&mut rng, n),
            k: 0,
            l: n - 1,
            lambda: invertible_scalar(&mut rng),
            mu: invertible_scalar(&mut rng),
        };
        let hr = check_heredity(&RationalCtx, &a, &h);
        t_her.record(if hr.all_pass() {
            Check::pass(&tag)
        } else {
            let f = hr.failures().next().expect("a failure").clone();
            Check::fail(&tag, f.residual, format!("{}: {}", f.name, f.witness.unwrap_or_default()))
        });
        let xi: Vec<Rational> = (0..n).map(|_| invertible_scalar(&mut rng)).collect();
        for k in 0..n {
            for q in 0..n {
                let name = format!("{tag} ({},{})", k + 1, q + 1);
                if let Ok(c) = right_cramer(&RationalCtx, &a, &xi, k, q) {
                    t_cr.record(Check { name, ..c });
                }
            }
        }

        let ctx = BlockCtx { k: 2 };
        let ab: Vec<Vec<QMatrix>> = (0..n).map(|_| (0..n).map(|_| random_block(&mut rng, 2)).collect()).collect();
        if let Some(binv) = ctx.invert_matrix(&ab) {
            for i in 0..n {
                for j in 0..n {
                    let name = format!("{tag} ({},{})", i + 1, j + 1);
                    let res = match inverse_entry(&ctx, &ab, i, j) {
                        Ok(v) => same(&ctx, Ok(v), Ok(binv[j][i].clone())),
                        Err(_) if binv[j][i].inverse().is_none() => Ok(()),
                        Err(e) => Err(("quasidet undefined for an invertible entry".into(), e.to_string())),
                    };
                    record(&mut t_binv, name, res);
                }
            }
        }
        let h = Heredity {
            sigma: random_permutation(&mut rng, n),
            tau: random_permutation(&mut rng, n),
            k: n - 1,
            l: 0,
            lambda: invertible_block(&mut rng, 2),
            mu: invertible_block(&mut rng, 2),
        };
        let hr = check_heredity(&ctx, &ab, &h);
        t_bher.record(if hr.all_pass() {
            Check::pass(&tag)
        } else {
            let f = hr.failures().next().expect("a failure").clone();
            Check::fail(&tag, f.residual, format!("{}: {}", f.name, f.witness.unwrap_or_default()))
        });
        let xi: Vec<QMatrix> = (0..n).map(|_| random_block(&mut rng, 2)).collect();
        for k in 0..n {
            for q in 0..n {
                let name = format!("{tag} ({},{})", k + 1, q + 1);
                if let Ok(c) = right_cramer(&ctx, &ab, &xi, k, q) {
                    t_bcr.record(Check { name, ..c });
                }
            }
        }
    }
    for t in [t_ratio, t_inv, t_binv, t_her, t_bher, t_cr, t_bcr] {
        let c = t.finish();
        // Random instances may all be singular for some check; that is not a failure.
        if c.residual == "no instances" {
            continue;
        }
        r.push(c);
    }
    r
}

/// One stochastic instance: `A = S - I` over `k×k` blocks and the vector
/// `x = (P_1⁻¹, …, P_n⁻¹)` evaluated under the same blocks.
pub struct StochasticInstance {
    pub a: Vec<Vec<QMatrix>>,
    pub x: Vec<QMatrix>,
}

pub fn stochastic_instance(g: &GenericMatrix, assign: &MatrixAssignment) -> Result<StochasticInstance, String> {
    let n = g.n();
    let k = assign.k();
    let a: Vec<Vec<QMatrix>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let s = assign.get(g.letter(i, j)).expect("assigned").clone();
                    if i == j {
                        &s - &QMatrix::identity(k)
                    } else {
                        s
                    }
                })
                .collect()
        })
        .collect();
    let backend = MatrixBackend { assignment: assign };
    let mut ev = Evaluator::new(&backend);
    let x = (0..n)
        .map(|i| {
            let p = ev.eval(&build_p(g, i).expect("vertex in range")).map_err(|e| e.to_string())?;
            p.inverse().ok_or_else(|| format!("P_{} singular", i + 1))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(StochasticInstance { a, x })
}

/// `x_i |A^{jj}|_ii` for all `i ≠ j` against `x_j |A^{ii}|_jj`. `Err` holds
/// the first mismatch.
pub fn quasiminor_mismatch(ctx: &BlockCtx, a: &[Vec<QMatrix>], x: &[QMatrix]) -> Result<Option<(String, String)>, QuasidetError> {
    let n = a.len();
    for i in 0..n {
        for j in i + 1..n {
            let keep = |d: usize| (0..n).filter(|&v| v != d).collect::<Vec<_>>();
            let lhs = ctx.mul(&x[i], &quasidet_sub(ctx, a, &keep(j), &keep(j), i, i)?);
            let rhs = ctx.mul(&x[j], &quasidet_sub(ctx, a, &keep(i), &keep(i), j, j)?);
            if lhs != rhs {
                let (res, wit) = matrix_witness(&(&lhs - &rhs));
                return Ok(Some((res, format!("(i,j)=({},{}) {wit}", i + 1, j + 1))));
            }
        }
    }
    Ok(None)
}

/// `|A^{pq}|_qp = -|A^{pp}|_qq`, the proportionality of
/// quasiminors along the eigenvector, the kernel equation it encodes, a
/// perturbation control, and at `k = 1` the commutative form `x_i m_j = x_j m_i`.
pub fn verify_retakh_identities(n: usize, k: usize, trials: usize, seed: u64) -> Result<Report, StochasticError> {
    let g = GenericMatrix::new(n)?;
    let ctx = BlockCtx { k };
    let mut r = Report::new("quasidet-stochastic").with_seed(seed).param("n", n).param("k", k).param("trials", trials);
    let mut t_l7 = Tally::new(format!("n={n} k={k}: |A^pq|_qp = -|A^pp|_qq"));
    let mut t_t8 = Tally::new(format!("n={n} k={k}: x_i |A^jj|_ii = x_j |A^ii|_jj"));
    let mut t_ker = Tally::new(format!("n={n} k={k}: x A = 0"));
    let mut t_pert = Tally::new(format!("n={n} k={k}: perturbed x breaks both"));
    let mut t_comm = Tally::new(format!("n={n} k=1: x_i m_j = x_j m_i"));
    let mut t_cr = Tally::new(format!("n={n} k={k}: right Cramer rule on S"));
    for trial in 0..trials {
        let tag = format!("trial {trial}");
        let mut rng = trial_rng(seed, ((k as u64) << 32) | trial as u64);
        let mut inst = Err(String::new());
        let mut assign = MatrixAssignment::new(k);
        for attempt in 0..=MAX_RESAMPLES {
            assign = g.stochastic_assignment_wide(k, &mut rng, None, attempt);
            inst = stochastic_instance(&g, &assign).and_then(|i| {
                // Every quasiminor used below must be defined.
                quasiminor_mismatch(&ctx, &i.a, &i.x).map_err(|e| e.to_string())?;
                Ok(i)
            });
            if inst.is_ok() {
                break;
            }
        }
        let inst = match inst {
            Ok(i) => i,
            Err(why) => {
                for t in [&mut t_l7, &mut t_t8, &mut t_ker, &mut t_pert, &mut t_cr] {
                    t.record(Check::not_evaluable(&tag, why.clone()));
                }
                continue;
            }
        };
        let a = &inst.a;

        let mut l7 = Ok(());
        'outer: for p in 0..n {
            for q in 0..n {
                if p == q {
                    continue;
                }
                let keep = |d: usize| (0..n).filter(|&v| v != d).collect::<Vec<_>>();
                let lhs = quasidet_sub(&ctx, a, &keep(p), &keep(q), q, p);
                let rhs = quasidet_sub(&ctx, a, &keep(p), &keep(p), q, q).map(|x| -&x);
                if let Err((res, w)) = same(&ctx, lhs, rhs) {
                    l7 = Err((res, format!("(p,q)=({},{}) {w}", p + 1, q + 1)));
                    break 'outer;
                }
            }
        }
        record(&mut t_l7, tag.clone(), l7);

        match quasiminor_mismatch(&ctx, a, &inst.x) {
            Ok(None) => t_t8.record(Check::pass(&tag)),
            Ok(Some((res, w))) => t_t8.record(Check::fail(&tag, res, w)),
            Err(e) => t_t8.record(Check::not_evaluable(&tag, e.to_string())),
        }

        let xa = ctx.mat_mul(&[inst.x.clone()], a);
        let bad = xa[0].iter().position(|m| !m.is_zero());
        t_ker.record(Check::expect(&tag, bad.is_none(), || {
            let j = bad.unwrap_or(0);
            let (res, w) = matrix_witness(&xa[0][j]);
            (res, format!("column {} {w}", j + 1))
        }));

        if n >= 2 {
            let mut y = inst.x.clone();
            y[0] = &y[0] + &QMatrix::identity(k);
            let ya = ctx.mat_mul(&[y.clone()], a);
            let kernel_broken = ya[0].iter().any(|m| !m.is_zero());
            let qm_broken = matches!(quasiminor_mismatch(&ctx, a, &y), Ok(Some(_)));
            t_pert.record(Check::expect(&tag, kernel_broken && qm_broken, || {
                (format!("kernel broken: {kernel_broken}, proportionality broken: {qm_broken}"), "x_1 + 1".into())
            }));
        }

        if k == 1 {
            let scal: Vec<Vec<Rational>> = a.iter().map(|row| row.iter().map(|m| m[(0, 0)].clone()).collect()).collect();
            let m = principal_minors(&scal);
            let x: Vec<Rational> = inst.x.iter().map(|v| v[(0, 0)].clone()).collect();
            let mut res = Ok(());
            for i in 0..n {
                for j in i + 1..n {
                    let d = &x[i] * &m[j] - &x[j] * &m[i];
                    if !d.is_zero() && res.is_ok() {
                        res = Err((fmt_rational(&d), format!("(i,j)=({},{})", i + 1, j + 1)));
                    }
                }
            }
            record(&mut t_comm, tag.clone(), res);
        }

        let s: Vec<Vec<QMatrix>> =
            (0..n).map(|i| (0..n).map(|j| assign.get(g.letter(i, j)).expect("assigned").clone()).collect()).collect();
        let x: Vec<QMatrix> = (0..n).map(|_| random_block(&mut rng, k)).collect();
        // Pairs where a quasideterminant is undefined fall outside the rule.
        let mut cr = Ok(());
        let mut defined = 0;
        for kk in 0..n {
            for q in 0..n {
                if let Ok(c) = right_cramer_with_solution(&ctx, &s, &x, kk, q) {
                    defined += 1;
                    if c.status != crate::report::Status::Pass && cr.is_ok() {
                        cr = Err((c.residual, c.name));
                    }
                }
            }
        }
        if defined == 0 {
            t_cr.record(Check::not_evaluable(&tag, "no defined pair"));
        } else {
            record(&mut t_cr, tag.clone(), cr);
        }
    }
    let mut all = vec![t_l7, t_t8, t_ker];
    if n >= 2 {
        all.push(t_pert);
    }
    if k == 1 {
        all.push(t_comm);
    }
    all.push(t_cr);
    for t in all {
        r.push(t.finish());
    }
    Ok(r)
}

/// `1 + Σ a_{k i_1} a_{i_1 i_2} ⋯ a_{i_{s-1} i_s}` over paths from `k` that
/// never return to `k`, truncated at `bound`.
pub fn avoiding_path_series(g: &GenericMatrix, k: usize, bound: usize) -> TruncSeries {
    let alpha = g.alphabet();
    let n = g.n();
    let mut words: Vec<String> = vec!["1".into()];
    let mut stack: Vec<(usize, String, usize)> = vec![(k, String::new(), 0)];
    while let Some((v, w, len)) = stack.pop() {
        if len == bound {
            continue;
        }
        for u in (0..n).filter(|&u| u != k) {
            let l = g.letter(v, u).name();
            let w2 = if w.is_empty() { l.to_string() } else { format!("{w}.{l}") };
            words.push(w2.clone());
            stack.push((u, w2, len + 1));
        }
    }
    let terms: Vec<(&str, Rational)> = words.iter().map(|w| (w.as_str(), Rational::one())).collect();
    TruncSeries::from_terms(&alpha, bound, &terms).expect("letters of the alphabet")
}

/// The path sum above equals `P_k` as a series, for every `k`.
pub fn verify_thm6_series(n: usize, bound: usize) -> Result<Report, StochasticError> {
    let g = GenericMatrix::new(n)?;
    let alpha = g.alphabet();
    let mut r = Report::new("thm6").param("n", n).param("degree", bound);
    for k in 0..n {
        let dfs = avoiding_path_series(&g, k, bound);
        let p = eval_series(&build_p(&g, k)?, &alpha, bound).expect("positive expression");
        let d = dfs.sub(&p).expect("same ring");
        r.push(Check::expect(format!("x_{}^-1 = P_{}", k + 1, k + 1), d.is_zero(), || series_witness(&d)));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::q;
    use crate::stochastic::example1_assignment;

    fn m22() -> Vec<Vec<Rational>> {
        vec![vec![int(1), int(2)], vec![int(3), int(4)]]
    }

    #[test]
    fn small_quasidets() {
        let a = m22();
        assert_eq!(quasidet(&RationalCtx, &a, 0, 0).unwrap(), q(-1, 2));
        assert_eq!(inverse_entry(&RationalCtx, &a, 0, 0).unwrap(), int(-2));
        // |A|_12 = a_12 - a_11 a_21⁻¹ a_22
        assert_eq!(quasidet(&RationalCtx, &a, 0, 1).unwrap(), int(2) - q(4, 3));
        assert_eq!(quasidet(&RationalCtx, &[vec![int(5)]], 0, 0).unwrap(), int(5));
        let sing = vec![vec![int(0), int(1)], vec![int(1), int(0)]];
        assert_eq!(quasidet(&RationalCtx, &sing, 0, 0), Err(QuasidetError::NotDefined { i: 0, j: 0 }));
    }

    #[test]
    fn cramer_examples() {
        let c = right_cramer(&RationalCtx, &m22(), &[int(4), int(6)], 0, 0).unwrap();
        assert_eq!(c.status, crate::report::Status::Pass);
        let id = vec![vec![int(1), int(0)], vec![int(0), int(1)]];
        assert_eq!(right_cramer(&RationalCtx, &id, &[int(3), int(7)], 1, 1).unwrap().status, crate::report::Status::Pass);
    }

    #[test]
    fn series_context_agrees_with_rationals_on_constants() {
        let alpha = Alphabet::new(["x"]);
        let ctx = SeriesCtx { alphabet: alpha.clone(), bound: 3 };
        let x = TruncSeries::letter(&alpha, 3, &alpha.letters()[0].clone()).unwrap();
        let c = |v: i64| TruncSeries::constant(&alpha, 3, int(v));
        let a = vec![vec![c(1).add(&x).unwrap(), c(2)], vec![c(3), c(4)]];
        let qd = quasidet(&ctx, &a, 0, 0).unwrap();
        // 1 + x - 2·4⁻¹·3
        assert_eq!(qd, c(1).add(&x).unwrap().sub(&TruncSeries::constant(&alpha, 3, q(3, 2))).unwrap());
        let ctx_t = RatFunCtx;
        let a_t = vec![vec![RatFun::t(), RatFun::one()], vec![RatFun::one(), RatFun::t()]];
        let qd = quasidet(&ctx_t, &a_t, 0, 0).unwrap();
        assert_eq!(&qd * &RatFun::t(), &(&RatFun::t() * &RatFun::t()) - &RatFun::one());
    }

    #[test]
    fn example1_quasiminors() {
        let g = GenericMatrix::new(2).unwrap();
        let inst = stochastic_instance(&g, &example1_assignment()).unwrap();
        let ctx = BlockCtx { k: 1 };
        let x: Vec<Rational> = inst.x.iter().map(|m| m[(0, 0)].clone()).collect();
        assert_eq!(x, vec![q(2, 5), q(3, 5)]);
        let a11 = quasidet_sub(&ctx, &inst.a, &[0], &[0], 0, 0).unwrap();
        let a22 = quasidet_sub(&ctx, &inst.a, &[1], &[1], 1, 1).unwrap();
        assert_eq!((a11[(0, 0)].clone(), a22[(0, 0)].clone()), (q(-1, 2), q(-1, 3)));
        assert_eq!(&x[0] * &a11[(0, 0)], q(-1, 5));
        assert_eq!(&x[1] * &a22[(0, 0)], q(-1, 5));
        assert_eq!(quasiminor_mismatch(&ctx, &inst.a, &inst.x), Ok(None));
    }

    #[test]
    fn basics_pass() {
        let r = verify_quasidet_basics(4, 8, 3);
        assert!(r.all_pass(), "{}", r.to_json());
    }

    #[test]
    fn retakh_small() {
        for (n, k) in [(2, 1), (3, 1), (2, 2), (3, 2)] {
            let r = verify_retakh_identities(n, k, 3, 5).unwrap();
            assert!(r.all_pass(), "{}", r.to_json());
        }
    }

    #[test]
    fn thm6() {
        let g = GenericMatrix::new(2).unwrap();
        let s = avoiding_path_series(&g, 0, 3);
        let want = TruncSeries::from_terms(
            &g.alphabet(),
            3,
            &[("1", int(1)), ("b", int(1)), ("b.d", int(1)), ("b.d.d", int(1))],
        )
        .unwrap();
        assert_eq!(s, want);
        assert!(verify_thm6_series(1, 4).unwrap().all_pass());
        assert!(verify_thm6_series(3, 5).unwrap().all_pass());
    }
}
