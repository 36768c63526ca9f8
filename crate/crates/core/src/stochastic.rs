//! Generic noncommutative stochastic matrices: first-return codes `C_i`, their
//! prefix sets `P_i`, and checks that `(P_1⁻¹, …, P_n⁻¹)` is a left eigenvector.
//!
//! Two oracles test identities that live in the free field modulo the row
//! relations `Σ_j a_ij = 1`:
//!
//! * series: letters are moved to a positive stochastic base point,
//!   `a_ij ↦ 1/n + x_ij` off the diagonal and `a_ii ↦ 1/n - Σ_j x_ij`, and the
//!   expression is expanded as a power series in the free letters `x_ij`;
//! * matrix: letters become random `k×k` blocks with block rows summing to `I`.

use std::sync::Arc;

use num_traits::Zero;
use rand::Rng;
use thiserror::Error;

use crate::exact_arith::{fmt_rational, int, parse_rational, q, QMatrix, Rational};
use crate::free_series::{Alphabet, Letter, Substitution, TruncSeries};
use crate::paths::{first_return, matrix_star, Grid};
use crate::ratexpr::{
    eval_ratfun_t, lambda_expr, DualBackend, EvalError, Evaluator, MatrixAssignment, MatrixBackend, RatExpr,
    SeriesBackend, CENTRAL_T,
};
use crate::report::{Check, Report, Tally};
use crate::sampling::{random_block_wide, stationary_distribution, trial_rng, MAX_RESAMPLES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StochasticError {
    #[error("matrix size must be at least 1")]
    EmptyMatrix,
    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),
    #[error("block size must be at least 1")]
    EmptyBlock,
}

/// The generic `n×n` matrix of distinct letters. For `n = 2` the letters are
/// `a b / c d`, otherwise `a_ij` with 1-based indices.
#[derive(Clone, Debug)]
pub struct GenericMatrix {
    n: usize,
    letters: Vec<Vec<Letter>>,
}

impl GenericMatrix {
    pub fn new(n: usize) -> Result<Self, StochasticError> {
        if n == 0 {
            return Err(StochasticError::EmptyMatrix);
        }
        let letters = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let name = if n == 2 {
                            ["a", "b", "c", "d"][2 * i + j].to_string()
                        } else if n <= 9 {
                            format!("a_{}{}", i + 1, j + 1)
                        } else {
                            format!("a_{}_{}", i + 1, j + 1)
                        };
                        Letter::new(&name)
                    })
                    .collect()
            })
            .collect();
        Ok(GenericMatrix { n, letters })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn letter(&self, i: usize, j: usize) -> &Letter {
        &self.letters[i][j]
    }

    /// All letters, row-major.
    pub fn alphabet(&self) -> Arc<Alphabet> {
        Alphabet::new(self.letters.iter().flatten().map(|l| l.name().to_string()))
    }

    pub fn grid(&self) -> Grid {
        self.letters.iter().map(|row| row.iter().map(RatExpr::letter).collect()).collect()
    }

    fn free_name(&self, i: usize, j: usize) -> String {
        format!("x_{}", self.letters[i][j].name())
    }

    /// Elimination of the diagonal around the base point `1/n`, as described
    /// in the module docs. With `break_row = Some(r)` the diagonal letter of
    /// row `r` receives an extra free letter `y`, so that row is no longer
    /// constrained.
    pub fn elimination(&self, break_row: Option<usize>) -> Substitution {
        let n = self.n;
        let mut names: Vec<String> =
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| self.free_name(i, j)).collect();
        if break_row.is_some() {
            names.push("y".into());
        }
        let target = Alphabet::new(names);
        let mut sigma = Substitution::new(&self.alphabet(), &target);
        let p = q(1, n as i64);
        for i in 0..n {
            let mut diag: Vec<(String, Rational)> = Vec::new();
            for j in (0..n).filter(|&j| j != i) {
                let x = self.free_name(i, j);
                sigma.set(self.letters[i][j].name(), p.clone(), &[(x.as_str(), int(1))]).expect("letter exists");
                diag.push((x, int(-1)));
            }
            if break_row == Some(i) {
                diag.push(("y".into(), int(1)));
            }
            let lin: Vec<(&str, Rational)> = diag.iter().map(|(s, c)| (s.as_str(), c.clone())).collect();
            sigma.set(self.letters[i][i].name(), p.clone(), &lin).expect("letter exists");
        }
        sigma
    }

    /// Random stochastic block assignment: off-diagonal blocks uniform, each
    /// diagonal block solved from its row relation. `break_row` adds `I/3` to
    /// that row's diagonal block.
    pub fn stochastic_assignment(&self, k: usize, rng: &mut impl Rng, break_row: Option<usize>) -> MatrixAssignment {
        self.stochastic_assignment_wide(k, rng, break_row, 0)
    }

    /// As [`GenericMatrix::stochastic_assignment`], drawing from the range of resample `attempt`.
    pub fn stochastic_assignment_wide(
        &self,
        k: usize,
        rng: &mut impl Rng,
        break_row: Option<usize>,
        attempt: usize,
    ) -> MatrixAssignment {
        let mut a = MatrixAssignment::new(k);
        for i in 0..self.n {
            let mut diag = QMatrix::identity(k);
            for j in (0..self.n).filter(|&j| j != i) {
                let x = random_block_wide(rng, k, attempt);
                diag = &diag - &x;
                a.set(self.letters[i][j].name(), x);
            }
            if break_row == Some(i) {
                diag = &diag + &QMatrix::scalar(k, &q(1, 3));
            }
            a.set(self.letters[i][i].name(), diag);
        }
        a
    }

    /// Assembles the `nk×nk` block matrix of an assignment.
    pub fn block_matrix(&self, a: &MatrixAssignment) -> QMatrix {
        let blocks: Vec<Vec<QMatrix>> = self
            .letters
            .iter()
            .map(|row| row.iter().map(|l| a.get(l).expect("assigned").clone()).collect())
            .collect();
        QMatrix::from_blocks(&blocks)
    }
}

/// `C_i`, `P_i` and `(P_ij)` for every vertex.
#[derive(Clone, Debug)]
pub struct PathSystem {
    pub c: Vec<RatExpr>,
    pub p: Vec<RatExpr>,
    pub pmat: Grid,
}

pub fn build_c(g: &GenericMatrix, i: usize) -> Result<RatExpr, StochasticError> {
    check_vertex(g, i)?;
    Ok(first_return(&g.grid(), i).code)
}

pub fn build_p(g: &GenericMatrix, i: usize) -> Result<RatExpr, StochasticError> {
    check_vertex(g, i)?;
    Ok(first_return(&g.grid(), i).prefixes)
}

pub fn build_pmat(g: &GenericMatrix) -> Grid {
    let m = g.grid();
    (0..g.n).map(|i| first_return(&m, i).prefix_row).collect()
}

pub fn build_path_system(g: &GenericMatrix) -> PathSystem {
    let m = g.grid();
    let fr: Vec<_> = (0..g.n).map(|i| first_return(&m, i)).collect();
    PathSystem {
        c: fr.iter().map(|f| f.code.clone()).collect(),
        p: fr.iter().map(|f| f.prefixes.clone()).collect(),
        pmat: fr.into_iter().map(|f| f.prefix_row).collect(),
    }
}

fn check_vertex(g: &GenericMatrix, i: usize) -> Result<(), StochasticError> {
    if i >= g.n {
        return Err(StochasticError::VertexOutOfRange(i));
    }
    Ok(())
}

/// The expressions that must vanish in the stochastic free field.
struct Thm1Residuals {
    c_minus_one: Vec<RatExpr>,
    sum_inverse_minus_one: RatExpr,
    lambda_minus_p: Vec<RatExpr>,
    eigen: Vec<RatExpr>,
}

fn thm1_residuals(g: &GenericMatrix, ps: &PathSystem) -> Thm1Residuals {
    let n = g.n;
    let inv: Vec<RatExpr> = ps.p.iter().map(|p| RatExpr::inverse(p.clone())).collect();
    Thm1Residuals {
        c_minus_one: ps.c.iter().map(|c| RatExpr::sub(c.clone(), RatExpr::one())).collect(),
        sum_inverse_minus_one: RatExpr::sub(RatExpr::add_all(inv.clone()), RatExpr::one()),
        lambda_minus_p: (0..n).map(|i| RatExpr::sub(lambda_expr(&ps.c[i]), ps.p[i].clone())).collect(),
        eigen: (0..n)
            .map(|j| {
                let lhs = RatExpr::add_all(
                    (0..n).map(|i| RatExpr::mul_all(vec![inv[i].clone(), RatExpr::letter(g.letter(i, j))])).collect(),
                );
                RatExpr::sub(lhs, inv[j].clone())
            })
            .collect(),
    }
}

pub(crate) fn series_witness(s: &TruncSeries) -> (String, String) {
    match s.sorted_terms().first() {
        Some((w, c)) => {
            let word = s.alphabet().render_word(w);
            (format!("{} nonzero terms", s.len()), format!("{}: {}", if word.is_empty() { "1".into() } else { word }, fmt_rational(c)))
        }
        None => ("0".into(), String::new()),
    }
}

pub(crate) fn matrix_witness(m: &QMatrix) -> (String, String) {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if !m[(i, j)].is_zero() {
                return (format!("{m}"), format!("entry ({}, {}) = {}", i + 1, j + 1, fmt_rational(&m[(i, j)])));
            }
        }
    }
    ("0".into(), String::new())
}

fn series_check(name: String, r: Result<TruncSeries, EvalError>) -> Check {
    match r {
        Ok(s) => Check::expect(name, s.is_zero(), || series_witness(&s)),
        Err(e) => Check::not_evaluable(name, e.to_string()),
    }
}

#[derive(Clone, Debug)]
pub struct Thm1Config {
    pub n: usize,
    pub bound: usize,
    pub ks: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Leaves the diagonal of this row unconstrained (negative control).
    pub break_row: Option<usize>,
    /// Runs the series oracle.
    pub series: bool,
}

impl Thm1Config {
    pub fn new(n: usize, bound: usize, ks: Vec<usize>, trials: usize, seed: u64) -> Self {
        Thm1Config { n, bound, ks, trials, seed, break_row: None, series: true }
    }
}

/// Checks `C_i = 1`, `Σ P_i⁻¹ = 1`, `λ(C_i) = P_i` and
/// `(P_1⁻¹, …, P_n⁻¹)·S = (P_1⁻¹, …, P_n⁻¹)` through both oracles.
pub fn verify_thm1(cfg: &Thm1Config) -> Result<Report, StochasticError> {
    let g = GenericMatrix::new(cfg.n)?;
    if cfg.ks.contains(&0) {
        return Err(StochasticError::EmptyBlock);
    }
    let ps = build_path_system(&g);
    let res = thm1_residuals(&g, &ps);
    let mut report = Report::new("thm1")
        .with_seed(cfg.seed)
        .param("n", cfg.n)
        .param("degree", cfg.bound)
        .param("k", cfg.ks.clone())
        .param("trials", cfg.trials);
    if let Some(r) = cfg.break_row {
        report = report.param("break_row", r + 1);
    }

    if cfg.series {
        let sigma = g.elimination(cfg.break_row);
        let backend = SeriesBackend::substituted(&sigma, cfg.bound);
        let mut ev = Evaluator::new(&backend);
        for i in 0..cfg.n {
            report.push(series_check(format!("series: C_{} = 1", i + 1), ev.eval(&res.c_minus_one[i])));
        }
        report.push(series_check("series: sum P_i^-1 = 1".into(), ev.eval(&res.sum_inverse_minus_one)));
        for i in 0..cfg.n {
            report.push(series_check(format!("series: lambda(C_{0}) = P_{0}", i + 1), ev.eval(&res.lambda_minus_p[i])));
        }
        for j in 0..cfg.n {
            report.push(series_check(format!("series: eigenvector column {}", j + 1), ev.eval(&res.eigen[j])));
        }
    }

    for &k in &cfg.ks {
        let mut t_c = Tally::new(format!("matrix k={k}: C_i = 1"));
        let mut t_sum = Tally::new(format!("matrix k={k}: sum P_i^-1 = 1"));
        let mut t_lam = Tally::new(format!("matrix k={k}: lambda(C_i) = P_i"));
        let mut t_dual = Tally::new(format!("matrix k={k}: dual lambda(C_i) = P_i"));
        let mut t_eig = Tally::new(format!("matrix k={k}: eigenvector"));
        let mut t_stat = Tally::new("matrix k=1: P_i^-1 = stationary law");
        for trial in 0..cfg.trials {
            let tag = format!("trial {trial}");
            let mut rng = trial_rng(cfg.seed, ((k as u64) << 32) | trial as u64);
            let mut outcome = None;
            let mut last_err = String::new();
            for attempt in 0..=MAX_RESAMPLES {
                let a = g.stochastic_assignment_wide(k, &mut rng, cfg.break_row, attempt);
                match thm1_matrix_trial(&g, &ps, &res, &a) {
                    Ok(v) => {
                        outcome = Some((a, v));
                        break;
                    }
                    Err(e) => last_err = e.to_string(),
                }
            }
            let Some((a, v)) = outcome else {
                for t in [&mut t_c, &mut t_sum, &mut t_lam, &mut t_dual, &mut t_eig] {
                    t.record(Check::not_evaluable(tag.clone(), last_err.clone()));
                }
                continue;
            };
            let all_zero = |ms: &[QMatrix]| ms.iter().find(|m| !m.is_zero()).cloned();
            let rec = |t: &mut Tally, ms: &[QMatrix]| match all_zero(ms) {
                None => t.record(Check::pass(tag.clone())),
                Some(m) => {
                    let (r, w) = matrix_witness(&m);
                    t.record(Check::fail(tag.clone(), r, w))
                }
            };
            rec(&mut t_c, &v.c_minus_one);
            rec(&mut t_sum, std::slice::from_ref(&v.sum_inverse_minus_one));
            rec(&mut t_lam, &v.lambda_minus_p);
            rec(&mut t_dual, &v.dual_minus_p);
            rec(&mut t_eig, &v.eigen);
            if k == 1 && cfg.break_row.is_none() {
                let m = g.block_matrix(&a);
                match stationary_distribution(&m) {
                    Some(pi) => {
                        let ok = pi.iter().zip(&v.inverses).all(|(x, y)| *x == y[(0, 0)]);
                        t_stat.record(Check::expect(tag.clone(), ok, || {
                            (
                                "P_i^-1 differs from the stationary law".into(),
                                v.inverses.iter().map(|m| fmt_rational(&m[(0, 0)])).collect::<Vec<_>>().join(", "),
                            )
                        }));
                    }
                    None => t_stat.record(Check::not_evaluable(tag.clone(), "eigenvalue 1 not simple")),
                }
            }
        }
        for t in [t_c, t_sum, t_lam, t_dual, t_eig] {
            report.push(t.finish());
        }
        if k == 1 && cfg.break_row.is_none() {
            report.push(t_stat.finish());
        }
    }
    Ok(report)
}

struct Thm1Values {
    c_minus_one: Vec<QMatrix>,
    sum_inverse_minus_one: QMatrix,
    lambda_minus_p: Vec<QMatrix>,
    dual_minus_p: Vec<QMatrix>,
    eigen: Vec<QMatrix>,
    inverses: Vec<QMatrix>,
}

fn thm1_matrix_trial(
    g: &GenericMatrix,
    ps: &PathSystem,
    res: &Thm1Residuals,
    a: &MatrixAssignment,
) -> Result<Thm1Values, EvalError> {
    let mb = MatrixBackend { assignment: a };
    let mut ev = Evaluator::new(&mb);
    let db = DualBackend { assignment: a };
    let mut dv = Evaluator::new(&db);
    let n = g.n;
    let mut out = Thm1Values {
        c_minus_one: Vec::new(),
        sum_inverse_minus_one: ev.eval(&res.sum_inverse_minus_one)?,
        lambda_minus_p: Vec::new(),
        dual_minus_p: Vec::new(),
        eigen: Vec::new(),
        inverses: Vec::new(),
    };
    for i in 0..n {
        out.c_minus_one.push(ev.eval(&res.c_minus_one[i])?);
        out.lambda_minus_p.push(ev.eval(&res.lambda_minus_p[i])?);
        let d = dv.eval(&ps.c[i])?;
        out.dual_minus_p.push(&d.deriv - &ev.eval(&ps.p[i])?);
        out.eigen.push(ev.eval(&res.eigen[i])?);
        out.inverses.push(ev.eval(&RatExpr::inverse(ps.p[i].clone()))?);
    }
    Ok(out)
}

/// Checks `(C_1 - 1, …, C_n - 1)ᵗ = (P_ij)(M - 1)γ` and `M* = D(C_i*)(P_ij)` in
/// the free algebra up to `bound`. `M*` is computed independently by the
/// fixed-point iteration `S ← I + M·S`.
pub fn verify_fundamental_identity(n: usize, bound: usize) -> Result<Report, StochasticError> {
    let g = GenericMatrix::new(n)?;
    let alpha = g.alphabet();
    let ps = build_path_system(&g);
    let mut report = Report::new("fundamental").param("n", n).param("degree", bound);
    let backend = SeriesBackend::strict(&alpha, bound);
    let mut ev = Evaluator::new(&backend);
    let grid = g.grid();

    for i in 0..n {
        let rhs = RatExpr::add_all(
            (0..n)
                .map(|j| {
                    let row_sum_minus_one = RatExpr::sub(RatExpr::add_all(grid[j].clone()), RatExpr::one());
                    RatExpr::mul_all(vec![ps.pmat[i][j].clone(), row_sum_minus_one])
                })
                .collect(),
        );
        let residual = RatExpr::sub(RatExpr::sub(ps.c[i].clone(), RatExpr::one()), rhs);
        report.push(series_check(format!("C_{} - 1 = (P_ij)(M - 1)gamma", i + 1), ev.eval(&residual)));
    }

    let letters: Vec<Vec<TruncSeries>> = (0..n)
        .map(|i| (0..n).map(|j| TruncSeries::letter(&alpha, bound, g.letter(i, j)).expect("letter")).collect())
        .collect();
    let one = TruncSeries::one(&alpha, bound);
    let zero = TruncSeries::zero(&alpha, bound);
    let ident = |i: usize, j: usize| if i == j { one.clone() } else { zero.clone() };
    let mut s: Vec<Vec<TruncSeries>> = (0..n).map(|i| (0..n).map(|j| ident(i, j)).collect()).collect();
    for _ in 0..bound {
        s = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut acc = ident(i, j);
                        for (l, row) in s.iter().enumerate() {
                            acc = acc.add(&letters[i][l].mul(&row[j]).expect("same ring")).expect("same ring");
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
    }
    for i in 0..n {
        let cs = RatExpr::star_of(ps.c[i].clone());
        for j in 0..n {
            let name = format!("(M*)_{}{} = C_{}* P_{}{}", i + 1, j + 1, i + 1, i + 1, j + 1);
            let e = RatExpr::mul_all(vec![cs.clone(), ps.pmat[i][j].clone()]);
            report.push(match ev.eval(&e) {
                Ok(v) => {
                    let d = v.sub(&s[i][j]).expect("same ring");
                    Check::expect(name, d.is_zero(), || series_witness(&d))
                }
                Err(e) => Check::not_evaluable(name, e.to_string()),
            });
        }
    }
    Ok(report)
}

/// `α_i`, the value at `t = 1` of `(1 - t)((tS)*)_{1i}`, computed from the
/// symbolic star of `tS` over rational functions in `t`.
pub fn alpha_vector(g: &GenericMatrix, a: &MatrixAssignment) -> Result<Vec<QMatrix>, AlphaError> {
    let t = RatExpr::atom(CENTRAL_T);
    let ts: Grid = g.grid().into_iter().map(|row| row.into_iter().map(|x| RatExpr::mul_all(vec![t.clone(), x])).collect()).collect();
    let star = matrix_star(&ts);
    let one_minus_t = RatExpr::sub(RatExpr::one(), t);
    let mut out = Vec::new();
    for e in &star[0] {
        let v = eval_ratfun_t(&RatExpr::mul_all(vec![one_minus_t.clone(), e.clone()]), a).map_err(AlphaError::Eval)?;
        out.push(v.eval_at_one().map_err(|_| AlphaError::NotEvaluableAtOne)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Error)]
pub enum AlphaError {
    #[error(transparent)]
    Eval(EvalError),
    #[error("(1 - t)(tS)* is not evaluable at t = 1")]
    NotEvaluableAtOne,
}

/// `α_i P_i = α_j P_j` and `Σ α_i = α_1 P_1` on seeded stochastic assignments,
/// with `α` also compared against the limit `(1 - t)(I - tS)⁻¹` of the block matrix.
pub fn verify_alpha(n: usize, ks: &[usize], trials: usize, seed: u64) -> Result<Report, StochasticError> {
    let g = GenericMatrix::new(n)?;
    let ps = build_path_system(&g);
    let mut report = Report::new("alpha").with_seed(seed).param("n", n).param("k", ks.to_vec()).param("trials", trials);
    for &k in ks {
        if k == 0 {
            return Err(StochasticError::EmptyBlock);
        }
        let mut t_eq = Tally::new(format!("k={k}: alpha_i P_i = alpha_j P_j"));
        let mut t_sum = Tally::new(format!("k={k}: sum alpha_i = alpha_1 P_1"));
        let mut t_lim = Tally::new(format!("k={k}: alpha = first block row of the limit matrix"));
        for trial in 0..trials {
            let tag = format!("trial {trial}");
            let mut rng = trial_rng(seed, ((k as u64) << 32) | trial as u64);
            let mut done = None;
            let mut why = String::new();
            for attempt in 0..=MAX_RESAMPLES {
                let a = g.stochastic_assignment_wide(k, &mut rng, None, attempt);
                let p: Result<Vec<QMatrix>, _> = ps.p.iter().map(|p| crate::ratexpr::eval_matrix(p, &a)).collect();
                match (p, alpha_vector(&g, &a)) {
                    (Ok(p), Ok(al)) => {
                        done = Some((a, p, al));
                        break;
                    }
                    (Err(e), _) => why = e.to_string(),
                    (_, Err(e)) => why = e.to_string(),
                }
            }
            let Some((a, p, al)) = done else {
                for t in [&mut t_eq, &mut t_sum, &mut t_lim] {
                    t.record(Check::not_evaluable(tag.clone(), why.clone()));
                }
                continue;
            };
            let ap: Vec<QMatrix> = al.iter().zip(&p).map(|(x, y)| x * y).collect();
            let bad = ap.iter().position(|m| *m != ap[0]);
            t_eq.record(Check::expect(tag.clone(), bad.is_none(), || {
                let j = bad.unwrap_or(0);
                ("alpha_i P_i not constant".into(), format!("alpha_1 P_1 = {}, alpha_{} P_{} = {}", ap[0], j + 1, j + 1, ap[j]))
            }));
            let sum = al.iter().skip(1).fold(al[0].clone(), |s, x| &s + x);
            t_sum.record(Check::expect(tag.clone(), sum == ap[0], || matrix_witness(&(&sum - &ap[0]))));
            match crate::exact_arith::limit_matrix(&g.block_matrix(&a)) {
                Ok(lim) => {
                    let row: Vec<QMatrix> = (0..n).map(|j| lim.block(0, j, k)).collect();
                    t_lim.record(Check::expect(tag.clone(), row == al, || ("limit differs".into(), format!("{lim}"))));
                }
                Err(e) => t_lim.record(Check::not_evaluable(tag.clone(), e.to_string())),
            }
        }
        for t in [t_eq, t_sum, t_lim] {
            report.push(t.finish());
        }
    }
    Ok(report)
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(serde::Deserialize)]
struct ScalarFixture {
    entries: Vec<Vec<String>>,
}

/// Reads `{"entries": [["1/2", "1/2"], ["1/3", "2/3"]]}`: a square
/// row-stochastic matrix of rationals, one value per letter of the generic matrix.
pub fn parse_scalar_fixture(text: &str) -> Result<(GenericMatrix, MatrixAssignment), FixtureError> {
    let f: ScalarFixture = serde_json::from_str(text)?;
    let n = f.entries.len();
    let g = GenericMatrix::new(n).map_err(|e| FixtureError::Invalid(e.to_string()))?;
    let mut values = Vec::with_capacity(n * n);
    for (i, row) in f.entries.iter().enumerate() {
        if row.len() != n {
            return Err(FixtureError::Invalid(format!("row {} has {} entries, expected {n}", i + 1, row.len())));
        }
        let row: Vec<Rational> = row
            .iter()
            .map(|x| parse_rational(x).ok_or_else(|| FixtureError::Invalid(format!("bad rational {x:?}"))))
            .collect::<Result<_, _>>()?;
        if row.iter().sum::<Rational>() != int(1) {
            return Err(FixtureError::Invalid(format!("row {} does not sum to 1", i + 1)));
        }
        values.extend(row.into_iter().enumerate().map(|(j, v)| (i, j, v)));
    }
    let a = MatrixAssignment::scalars(values.iter().map(|(i, j, v)| (g.letter(*i, *j).name(), v.clone())));
    Ok((g, a))
}

/// The same checks at one given assignment, with `P_i⁻¹` and `α` reported.
pub fn verify_point(g: &GenericMatrix, a: &MatrixAssignment) -> Report {
    let ps = build_path_system(g);
    let res = thm1_residuals(g, &ps);
    let mut report = Report::new("point").param("n", g.n).param("k", a.k());
    let v = match thm1_matrix_trial(g, &ps, &res, a) {
        Ok(v) => v,
        Err(e) => {
            report.push(Check::not_evaluable("point: evaluation", e.to_string()));
            return report;
        }
    };
    let show = |ms: &[QMatrix]| -> Vec<String> { ms.iter().map(|m| if a.k() == 1 { fmt_rational(&m[(0, 0)]) } else { m.to_string() }).collect() };
    report = report.param("P_inverse", show(&v.inverses));
    let check = |name: &str, ms: &[QMatrix]| match ms.iter().find(|m| !m.is_zero()) {
        None => Check::pass(name),
        Some(m) => {
            let (r, w) = matrix_witness(m);
            Check::fail(name, r, w)
        }
    };
    report.push(check("point: C_i = 1", &v.c_minus_one));
    report.push(check("point: sum P_i^-1 = 1", std::slice::from_ref(&v.sum_inverse_minus_one)));
    report.push(check("point: lambda(C_i) = P_i", &v.lambda_minus_p));
    report.push(check("point: dual lambda(C_i) = P_i", &v.dual_minus_p));
    report.push(check("point: eigenvector", &v.eigen));
    if a.k() == 1 {
        report.push(match stationary_distribution(&g.block_matrix(a)) {
            Some(pi) => {
                let ok = pi.iter().zip(&v.inverses).all(|(x, y)| *x == y[(0, 0)]);
                Check::expect("point: P_i^-1 = stationary law", ok, || {
                    ("differs".into(), pi.iter().map(fmt_rational).collect::<Vec<_>>().join(", "))
                })
            }
            None => Check::not_evaluable("point: P_i^-1 = stationary law", "eigenvalue 1 not simple"),
        });
    }
    match alpha_vector(g, a) {
        Ok(al) => {
            report = report.param("alpha", show(&al));
            let p: Vec<QMatrix> = v.inverses.iter().map(|m| m.inverse().expect("inverse of an inverse")).collect();
            let ap: Vec<QMatrix> = al.iter().zip(&p).map(|(x, y)| x * y).collect();
            report.push(Check::expect("point: alpha_i P_i = alpha_j P_j", ap.iter().all(|m| *m == ap[0]), || {
                ("alpha_i P_i not constant".into(), show(&ap).join(", "))
            }));
            if a.k() == 1 {
                report.push(Check::expect("point: alpha = (P_i^-1)", al == v.inverses, || ("differs".into(), show(&al).join(", "))));
            }
        }
        Err(e) => report.push(Check::not_evaluable("point: alpha", e.to_string())),
    }
    report
}

/// The scalar specialization `a = b = 1/2`, `c = 1/3`, `d = 2/3` of the
/// 2-vertex generic matrix.
pub fn example1_assignment() -> MatrixAssignment {
    MatrixAssignment::scalars([("a", q(1, 2)), ("b", q(1, 2)), ("c", q(1, 3)), ("d", q(2, 3))])
}

/// True when every entry of a 1×1 result list equals the given scalars.
pub fn scalars_of(ms: &[QMatrix]) -> Vec<Rational> {
    ms.iter().map(|m| m[(0, 0)].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratexpr::{eval_matrix, eval_series, parse};

    #[test]
    fn example1_fixture() {
        let text = r#"{"entries": [["1/2", "1/2"], ["1/3", "2/3"]]}"#;
        let (g, a) = parse_scalar_fixture(text).unwrap();
        let r = verify_point(&g, &a);
        assert!(r.all_pass(), "{}", r.to_json());
        assert_eq!(r.parameters["P_inverse"], serde_json::json!(["2/5", "3/5"]));
        assert_eq!(r.parameters["alpha"], serde_json::json!(["2/5", "3/5"]));
        assert!(parse_scalar_fixture(r#"{"entries": [["1/2", "1/3"], ["1/3", "2/3"]]}"#).is_err());
        assert!(parse_scalar_fixture("{").is_err());
    }

    #[test]
    fn example1_closed_forms() {
        let g = GenericMatrix::new(2).unwrap();
        assert_eq!(build_c(&g, 0).unwrap(), parse("a + b (d)^* c").unwrap());
        assert_eq!(build_p(&g, 0).unwrap(), parse("1 + b (d)^*").unwrap());
        assert_eq!(build_p(&g, 1).unwrap(), parse("1 + c (a)^*").unwrap());
        assert_eq!(build_c(&GenericMatrix::new(1).unwrap(), 0).unwrap(), parse("a_11").unwrap());
        let a = example1_assignment();
        let p: Vec<Rational> = (0..2).map(|i| eval_matrix(&build_p(&g, i).unwrap(), &a).unwrap()[(0, 0)].clone()).collect();
        assert_eq!(p, vec![q(5, 2), q(5, 3)]);
    }

    #[test]
    fn alpha_example1() {
        let g = GenericMatrix::new(2).unwrap();
        let al = scalars_of(&alpha_vector(&g, &example1_assignment()).unwrap());
        assert_eq!(al, vec![q(2, 5), q(3, 5)]);
    }

    #[test]
    fn thm1_small() {
        let r = verify_thm1(&Thm1Config::new(2, 4, vec![1, 2], 3, 11)).unwrap();
        assert!(r.all_pass(), "{}", r.to_json());
        let mut cfg = Thm1Config::new(2, 3, vec![1], 2, 11);
        cfg.break_row = Some(1);
        let r = verify_thm1(&cfg).unwrap();
        assert_eq!(r.find("series: eigenvector column 1").unwrap().status, crate::report::Status::Fail);
        assert_eq!(r.find("matrix k=1: eigenvector").unwrap().status, crate::report::Status::Fail);
    }

    #[test]
    fn fundamental_n2() {
        let r = verify_fundamental_identity(2, 4).unwrap();
        assert!(r.all_pass(), "{}", r.to_json());
        let r = verify_fundamental_identity(1, 3).unwrap();
        assert!(r.all_pass(), "{}", r.to_json());
    }

    #[test]
    fn code_series_n2() {
        let g = GenericMatrix::new(2).unwrap();
        let s = eval_series(&build_c(&g, 0).unwrap(), &g.alphabet(), 3).unwrap();
        assert_eq!(s.render(), "a + b.c + b.d.c");
    }

    #[test]
    fn alpha_n3_blocks() {
        let r = verify_alpha(3, &[1, 2], 2, 5).unwrap();
        assert!(r.all_pass(), "{}", r.to_json());
    }
}
