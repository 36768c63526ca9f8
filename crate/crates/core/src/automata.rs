//! Unambiguous automata given by 0/1 transition matrices `μa`.
//!
//! The weighted matrix `M = Σ_a a·μa` plays the role of the generic matrix of
//! the stochastic module, with the single relation `Σ_a a = 1` in place of the
//! row relations.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

use crate::exact_arith::{fmt_rational, int, limit_matrix, q, QMatrix, Rational};
use crate::free_series::{Alphabet, Letter, Substitution};
use crate::paths::{first_return, matrix_star, Grid};
use crate::ratexpr::{
    eval_bernoulli, eval_ratfun_t, eval_series, lambda_expr, BernoulliWeights, DualBackend, EvalError, Evaluator,
    MatrixAssignment, MatrixBackend, RatExpr, SeriesBackend, CENTRAL_T,
};
use crate::report::{Check, Report, Tally};
use crate::sampling::{random_block_wide, random_distribution, trial_rng, MAX_RESAMPLES};
use crate::stochastic::{matrix_witness, series_witness};

pub const DEFAULT_MONOID_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("monoid exceeds {0} elements")]
    MonoidTooLarge(usize),
    #[error("automaton is ambiguous")]
    Ambiguous,
    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),
    #[error("automaton has no letters")]
    NoLetters,
}

/// Square matrix with entries in `{0, 1}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BoolMat {
    n: usize,
    bits: Vec<u8>,
}

impl BoolMat {
    pub fn zeros(n: usize) -> Self {
        BoolMat { n, bits: vec![0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.bits[i * n + i] = 1;
        }
        m
    }

    /// Panics on a ragged matrix or an entry other than 0 or 1.
    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let n = rows.len();
        let mut bits = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            assert!(r.iter().all(|&x| x <= 1), "entries must be 0 or 1");
            bits.extend_from_slice(r);
        }
        BoolMat { n, bits }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.bits[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        assert!(v <= 1);
        self.bits[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<u8> {
        self.bits[i * self.n..(i + 1) * self.n].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<u8> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    /// Product over the integers clamped to `{0, 1}`, and whether some entry
    /// counted two or more paths.
    pub fn mul_checked(&self, other: &BoolMat) -> (BoolMat, bool) {
        let n = self.n;
        let mut out = BoolMat::zeros(n);
        let mut ambiguous = false;
        for i in 0..n {
            for j in 0..n {
                let s: u32 = (0..n).map(|l| u32::from(self.get(i, l) & other.get(l, j))).sum();
                ambiguous |= s >= 2;
                out.bits[i * n + j] = u8::from(s > 0);
            }
        }
        (out, ambiguous)
    }

    /// Distinct nonzero rows.
    pub fn distinct_rows(&self) -> Vec<Vec<u8>> {
        let mut rows: Vec<Vec<u8>> = (0..self.n).map(|i| self.row(i)).filter(|r| r.iter().any(|&x| x == 1)).collect();
        rows.sort();
        rows.dedup();
        rows
    }

    pub fn rank(&self) -> usize {
        self.distinct_rows().len()
    }

    pub fn to_qmatrix(&self) -> QMatrix {
        QMatrix::from_fn(self.n, self.n, |i, j| int(i64::from(self.get(i, j))))
    }
}

impl fmt::Debug for BoolMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> =
            (0..self.n).map(|i| self.row(i).iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ")).collect();
        write!(f, "[{}]", rows.join("; "))
    }
}

#[derive(Clone, Debug)]
pub struct Automaton {
    n: usize,
    letters: Vec<Letter>,
    mats: Vec<BoolMat>,
}

impl Automaton {
    pub fn new(n: usize, letters: Vec<(&str, BoolMat)>) -> Result<Self, AutomatonError> {
        if letters.is_empty() {
            return Err(AutomatonError::NoLetters);
        }
        let (names, mats): (Vec<_>, Vec<_>) = letters.into_iter().map(|(l, m)| (Letter::new(l), m)).unzip();
        assert!(mats.iter().all(|m| m.n == n), "all matrices must be {n}×{n}");
        Ok(Automaton { n, letters: names, mats })
    }

    /// Reads `states <n>` followed by blocks `letter <name>` of `n` rows of
    /// `n` digits. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, AutomatonError> {
        let err = |line: usize, message: &str| AutomatonError::Parse { line, message: message.to_string() };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, first) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let n: usize = first
            .strip_prefix("states")
            .and_then(|s| s.trim().parse().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| err(ln, "expected `states <n>` with n > 0"))?;
        let mut letters: Vec<(String, BoolMat)> = Vec::new();
        while let Some((ln, l)) = lines.next() {
            let name = l
                .strip_prefix("letter")
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| err(ln, "expected `letter <name>`"))?;
            let ok_name = name.chars().next().is_some_and(|c| c.is_ascii_lowercase())
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !ok_name || name == CENTRAL_T {
                return Err(err(ln, "invalid letter name"));
            }
            if letters.iter().any(|(x, _)| x == name) {
                return Err(err(ln, "duplicate letter"));
            }
            let mut rows = Vec::with_capacity(n);
            for _ in 0..n {
                let (ln, row) = lines.next().ok_or_else(|| err(ln, "missing matrix rows"))?;
                let r: Vec<u8> = row
                    .split_whitespace()
                    .map(|x| match x {
                        "0" => Ok(0),
                        "1" => Ok(1),
                        _ => Err(err(ln, "entries must be 0 or 1")),
                    })
                    .collect::<Result<_, _>>()?;
                if r.len() != n {
                    return Err(err(ln, &format!("expected {n} entries")));
                }
                rows.push(r);
            }
            letters.push((name.to_string(), BoolMat::from_rows(&rows)));
        }
        Automaton::new(n, letters.iter().map(|(l, m)| (l.as_str(), m.clone())).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("states {}\n", self.n);
        for (l, m) in self.letters.iter().zip(&self.mats) {
            s.push_str(&format!("letter {}\n", l.name()));
            for i in 0..self.n {
                let row: Vec<String> = m.row(i).iter().map(|b| b.to_string()).collect();
                s.push_str(&row.join(" "));
                s.push('\n');
            }
        }
        s
    }

    /// The three-state automaton over `{a, b, c}` used as the running example.
    pub fn example2() -> Self {
        let m = |rows: [[u8; 3]; 3]| BoolMat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
        Automaton::new(
            3,
            vec![
                ("a", m([[0, 1, 0], [1, 0, 1], [0, 0, 0]])),
                ("b", m([[0, 0, 1], [1, 0, 1], [1, 0, 0]])),
                ("c", m([[1, 0, 1], [1, 0, 1], [0, 0, 0]])),
            ],
        )
        .expect("letters present")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn matrix(&self, letter: usize) -> &BoolMat {
        &self.mats[letter]
    }

    pub fn matrix_mut(&mut self, letter: usize) -> &mut BoolMat {
        &mut self.mats[letter]
    }

    pub fn alphabet(&self) -> Arc<Alphabet> {
        Alphabet::new(self.letters.iter().map(|l| l.name().to_string()))
    }

    /// `μ(w)` for a word given as letter indices.
    pub fn mu(&self, word: &[usize]) -> BoolMat {
        word.iter().fold(BoolMat::identity(self.n), |acc, &a| acc.mul_checked(&self.mats[a]).0)
    }

    /// `M_ij = Σ {a : (μa)_ij = 1}`.
    pub fn weighted_grid(&self) -> Grid {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        RatExpr::add_all(
                            self.letters
                                .iter()
                                .zip(&self.mats)
                                .filter(|(_, m)| m.get(i, j) == 1)
                                .map(|(l, _)| RatExpr::letter(l))
                                .collect(),
                        )
                    })
                    .collect()
            })
            .collect()
    }

    /// `Σ_a X_a ⊗ μa` for an assignment of `k×k` blocks.
    pub fn block_matrix(&self, a: &MatrixAssignment) -> QMatrix {
        let k = a.k();
        let blocks: Vec<Vec<QMatrix>> = (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        self.letters
                            .iter()
                            .zip(&self.mats)
                            .filter(|(_, m)| m.get(i, j) == 1)
                            .fold(QMatrix::zeros(k, k), |acc, (l, _)| &acc + a.get(l).expect("assigned"))
                    })
                    .collect()
            })
            .collect();
        QMatrix::from_blocks(&blocks)
    }

    fn word_text(&self, w: &[usize]) -> String {
        if w.is_empty() {
            "1".into()
        } else {
            w.iter().map(|&a| self.letters[a].name()).collect::<Vec<_>>().join(".")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Structure {
    pub unambiguous: bool,
    pub complete: bool,
    pub transitive: bool,
}

#[derive(Clone, Debug)]
pub struct MonoidElement {
    pub matrix: BoolMat,
    /// Shortest word (as letter indices) reaching this element.
    pub witness: Vec<usize>,
    pub rank: usize,
}

#[derive(Clone, Debug)]
pub struct Monoid {
    pub elements: Vec<MonoidElement>,
    pub min_rank: usize,
    /// Indices into `elements` of the minimal ideal.
    pub ideal: Vec<usize>,
    pub max_rows: Vec<Vec<u8>>,
    pub max_cols: Vec<Vec<u8>>,
    /// Word whose integer image has an entry at least 2, if any.
    pub ambiguity_witness: Option<Vec<usize>>,
}

impl Monoid {
    pub fn contains(&self, m: &BoolMat) -> bool {
        self.elements.iter().any(|e| e.matrix == *m)
    }
}

fn maximal(vectors: Vec<Vec<u8>>) -> Vec<Vec<u8>> {
    let mut v = vectors;
    v.retain(|r| r.iter().any(|&x| x == 1));
    v.sort();
    v.dedup();
    let le = |x: &[u8], y: &[u8]| x.iter().zip(y).all(|(a, b)| a <= b);
    v.iter().filter(|r| !v.iter().any(|s| s != *r && le(r, s))).cloned().collect()
}

/// Breadth-first closure of `μA*` under right multiplication by generators,
/// starting from the identity. Ambiguity is recorded, not fatal.
pub fn monoid_closure(aut: &Automaton, cap: usize) -> Result<Monoid, AutomatonError> {
    let mut index: HashMap<BoolMat, usize> = HashMap::new();
    let mut elements = vec![MonoidElement { matrix: BoolMat::identity(aut.n), witness: Vec::new(), rank: aut.n }];
    index.insert(elements[0].matrix.clone(), 0);
    let mut queue = VecDeque::from([0usize]);
    let mut ambiguity_witness = None;
    while let Some(e) = queue.pop_front() {
        for (a, g) in aut.mats.iter().enumerate() {
            let (m, amb) = elements[e].matrix.mul_checked(g);
            let mut w = elements[e].witness.clone();
            w.push(a);
            if amb && ambiguity_witness.is_none() {
                ambiguity_witness = Some(w.clone());
            }
            if index.contains_key(&m) {
                continue;
            }
            if elements.len() >= cap {
                return Err(AutomatonError::MonoidTooLarge(cap));
            }
            index.insert(m.clone(), elements.len());
            let rank = m.rank();
            elements.push(MonoidElement { matrix: m, witness: w, rank });
            queue.push_back(elements.len() - 1);
        }
    }
    let min_rank = elements.iter().map(|e| e.rank).min().unwrap_or(0);
    let ideal = (0..elements.len()).filter(|&i| elements[i].rank == min_rank).collect();
    let max_rows = maximal(elements.iter().flat_map(|e| (0..aut.n).map(|i| e.matrix.row(i))).collect());
    let max_cols = maximal(elements.iter().flat_map(|e| (0..aut.n).map(|j| e.matrix.col(j))).collect());
    Ok(Monoid { elements, min_rank, ideal, max_rows, max_cols, ambiguity_witness })
}

pub fn check_structure(aut: &Automaton, cap: usize) -> Result<Structure, AutomatonError> {
    let mon = monoid_closure(aut, cap)?;
    Ok(structure_of(aut, &mon))
}

fn structure_of(aut: &Automaton, mon: &Monoid) -> Structure {
    let n = aut.n;
    let adj = |i: usize, j: usize| aut.mats.iter().any(|m| m.get(i, j) == 1);
    let reach = |from: usize, forward: bool| {
        let mut seen = vec![false; n];
        seen[from] = true;
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            for w in 0..n {
                let e = if forward { adj(v, w) } else { adj(w, v) };
                if e && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    Structure {
        unambiguous: mon.ambiguity_witness.is_none(),
        complete: !mon.elements.iter().any(|e| e.matrix.is_zero()),
        transitive: reach(0, true) && reach(0, false),
    }
}

/// Structure checks plus, for every minimal-ideal element `y` and maximal
/// column `c`, `R·c = 1` where `R` sums the distinct nonzero rows of `y`.
pub fn check_prop1(aut: &Automaton, mon: &Monoid) -> Report {
    let mut r = Report::new("prop1").param("states", aut.n).param("monoid_size", mon.elements.len());
    let s = structure_of(aut, mon);
    r.push(Check::expect("unambiguous", s.unambiguous, || {
        ("integer product has an entry >= 2".into(), aut.word_text(mon.ambiguity_witness.as_deref().unwrap_or(&[])))
    }));
    r.push(Check::expect("complete", s.complete, || ("zero matrix in the monoid".into(), String::new())));
    r.push(Check::expect("transitive", s.transitive, || ("graph not strongly connected".into(), String::new())));
    let mut t = Tally::new("R c = 1 for ideal elements and maximal columns");
    for &e in &mon.ideal {
        let y = &mon.elements[e];
        let rows = y.matrix.distinct_rows();
        for c in &mon.max_cols {
            let rc: u32 = rows.iter().map(|row| row.iter().zip(c).map(|(x, y)| u32::from(x & y)).sum::<u32>()).sum();
            t.record(Check::expect(aut.word_text(&y.witness), rc == 1, || {
                (format!("R c = {rc}"), format!("column {c:?}"))
            }));
        }
    }
    r.push(t.finish());
    r
}

/// `C_i` and `P_i` from the weighted matrix.
pub fn build_code_exprs(aut: &Automaton, i: usize) -> Result<(RatExpr, RatExpr), AutomatonError> {
    if i >= aut.n {
        return Err(AutomatonError::VertexOutOfRange(i));
    }
    let f = first_return(&aut.weighted_grid(), i);
    Ok((f.code, f.prefixes))
}

/// Elimination of `Σ_a a = 1` around the uniform point: every letter but the
/// last maps to `1/|A| + x_a`, the last to `1/|A| - Σ x_a`.
pub fn probabilistic_elimination(aut: &Automaton) -> Substitution {
    let m = aut.letters.len();
    let free: Vec<String> = aut.letters[..m - 1].iter().map(|l| format!("x_{}", l.name())).collect();
    let target = Alphabet::new(free.clone());
    let mut sigma = Substitution::new(&aut.alphabet(), &target);
    let p = q(1, m as i64);
    for (l, x) in aut.letters.iter().zip(&free) {
        sigma.set(l.name(), p.clone(), &[(x.as_str(), int(1))]).expect("letter exists");
    }
    let last: Vec<(&str, Rational)> = free.iter().map(|x| (x.as_str(), int(-1))).collect();
    sigma.set(aut.letters[m - 1].name(), p, &last).expect("letter exists");
    sigma
}

/// Random blocks with `Σ_a X_a = I`; the last letter is solved for.
pub fn probabilistic_assignment(aut: &Automaton, k: usize, rng: &mut impl Rng, attempt: usize) -> MatrixAssignment {
    let mut a = MatrixAssignment::new(k);
    let mut rest = QMatrix::identity(k);
    let m = aut.letters.len();
    for l in &aut.letters[..m - 1] {
        let x = random_block_wide(rng, k, attempt);
        rest = &rest - &x;
        a.set(l.name(), x);
    }
    a.set(aut.letters[m - 1].name(), rest);
    a
}

pub fn uniform_weights(aut: &Automaton) -> BernoulliWeights {
    let p = q(1, aut.letters.len() as i64);
    BernoulliWeights::new(aut.letters.iter().map(|l| (l.name(), p.clone())))
}

#[derive(Clone, Debug)]
pub struct Thm2Config {
    pub bound: usize,
    pub ks: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub cap: usize,
}

impl Thm2Config {
    pub fn new(bound: usize, ks: Vec<usize>, trials: usize, seed: u64) -> Self {
        Thm2Config { bound, ks, trials, seed, cap: DEFAULT_MONOID_CAP }
    }
}

struct Exprs {
    c: Vec<RatExpr>,
    p: Vec<RatExpr>,
    lambda_c: Vec<RatExpr>,
    inv: Vec<RatExpr>,
    /// `(1 - t)((tM)*)_ii`.
    resolvent_diag: Vec<RatExpr>,
}

fn exprs(aut: &Automaton) -> Exprs {
    let grid = aut.weighted_grid();
    let fr: Vec<_> = (0..aut.n).map(|i| first_return(&grid, i)).collect();
    let t = RatExpr::atom(CENTRAL_T);
    let tm: Grid =
        grid.iter().map(|row| row.iter().map(|x| RatExpr::mul_all(vec![t.clone(), x.clone()])).collect()).collect();
    let star = matrix_star(&tm);
    let omt = RatExpr::sub(RatExpr::one(), t);
    Exprs {
        c: fr.iter().map(|f| f.code.clone()).collect(),
        p: fr.iter().map(|f| f.prefixes.clone()).collect(),
        lambda_c: fr.iter().map(|f| lambda_expr(&f.code)).collect(),
        inv: fr.iter().map(|f| RatExpr::inverse(f.prefixes.clone())).collect(),
        resolvent_diag: (0..aut.n).map(|i| RatExpr::mul_all(vec![omt.clone(), star[i][i].clone()])).collect(),
    }
}

/// Values of the five items under one specialization, as `k×k` matrices.
struct Items {
    c: Vec<QMatrix>,
    lambda_c: Vec<QMatrix>,
    inv: Vec<QMatrix>,
    resolvent_diag: Option<Vec<QMatrix>>,
    limit: Option<QMatrix>,
    x_mat: QMatrix,
}

fn item_checks(aut: &Automaton, mon: &Monoid, v: &Items, k: usize) -> Vec<(&'static str, Result<(), (String, String)>)> {
    let n = aut.n;
    let id = QMatrix::identity(k);
    let first_nonzero = |ms: Vec<QMatrix>| -> Result<(), (String, String)> {
        match ms.iter().find(|m| !m.is_zero()) {
            None => Ok(()),
            Some(m) => Err(matrix_witness(m)),
        }
    };
    let mut out = Vec::new();
    out.push(("(i) C_i = 1", first_nonzero(v.c.iter().map(|c| c - &id).collect())));
    // (ii): diagonal blocks of the limit equal λ(C_i)⁻¹.
    let lam_inv: Option<Vec<QMatrix>> = v.lambda_c.iter().map(QMatrix::inverse).collect();
    let ii = match (&lam_inv, &v.resolvent_diag) {
        (Some(li), Some(rd)) => {
            let mut diffs: Vec<QMatrix> = li.iter().zip(rd).map(|(a, b)| a - b).collect();
            if let Some(lim) = &v.limit {
                diffs.extend((0..n).map(|i| &lim.block(i, i, k) - &rd[i]));
            }
            first_nonzero(diffs)
        }
        (None, _) => Err(("lambda(C_i) singular".into(), String::new())),
        (_, None) => Err(("(1 - t)(tM)* not evaluable at t = 1".into(), String::new())),
    };
    out.push(("(ii) diag of (1 - t)(tM)* at 1 = lambda(C_i)^-1", ii));
    // (iii): x M = x with x = (P_1⁻¹, …, P_n⁻¹).
    let x = QMatrix::from_fn(k, n * k, |r, c| v.inv[c / k][(r, c % k)].clone());
    let xm = &x * &v.x_mat;
    out.push(("(iii) x M = x", first_nonzero(vec![&xm - &x])));
    let sum = v.inv.iter().fold(QMatrix::zeros(k, k), |s, y| &s + y);
    out.push(("(iv) sum P_i^-1 = 1", first_nonzero(vec![&sum - &id])));
    let col_val = |c: &[u8]| {
        (0..n).filter(|&i| c[i] == 1).fold(QMatrix::zeros(k, k), |s, i| &s + &v.inv[i])
    };
    let vals: Vec<QMatrix> = mon.max_cols.iter().map(|c| col_val(c)).collect();
    out.push(("(v) x l = x l' for maximal columns", first_nonzero(vals.iter().map(|y| y - &vals[0]).collect())));
    out
}

fn items_under(aut: &Automaton, e: &Exprs, a: &MatrixAssignment) -> Result<Items, String> {
    let mb = MatrixBackend { assignment: a };
    let mut ev = Evaluator::new(&mb);
    let db = DualBackend { assignment: a };
    let mut dv = Evaluator::new(&db);
    let mut it = Items {
        c: Vec::new(),
        lambda_c: Vec::new(),
        inv: Vec::new(),
        resolvent_diag: None,
        limit: None,
        x_mat: aut.block_matrix(a),
    };
    let s = |e: EvalError| e.to_string();
    for i in 0..aut.n {
        it.c.push(ev.eval(&e.c[i]).map_err(s)?);
        let d = dv.eval(&e.c[i]).map_err(s)?;
        let sym = ev.eval(&e.lambda_c[i]).map_err(s)?;
        if sym != d.deriv {
            return Err(format!("dual and symbolic lambda(C_{}) disagree", i + 1));
        }
        it.lambda_c.push(d.deriv);
        it.inv.push(ev.eval(&e.inv[i]).map_err(s)?);
    }
    let rd: Result<Vec<QMatrix>, String> = e
        .resolvent_diag
        .iter()
        .map(|x| eval_ratfun_t(x, a).map_err(s)?.eval_at_one().map_err(|e| e.to_string()))
        .collect();
    // A singular λ(C_i) means eigenvalue 1 is not simple at this point: resample.
    if let Some(i) = it.lambda_c.iter().position(|m| m.inverse().is_none()) {
        return Err(format!("lambda(C_{}) singular", i + 1));
    }
    it.resolvent_diag = Some(rd?);
    it.limit = limit_matrix(&it.x_mat).ok();
    Ok(it)
}

/// Items (i)–(v) under scalar Bernoulli weights (uniform, then random),
/// under random blocks with `Σ_a X_a = I`, and, for (i), (iii), (iv) and
/// `P_1 = …`, through the series elimination oracle.
pub fn verify_thm2(aut: &Automaton, cfg: &Thm2Config) -> Result<Report, AutomatonError> {
    let mon = monoid_closure(aut, cfg.cap)?;
    let mut report = Report::new("thm2")
        .with_seed(cfg.seed)
        .param("states", aut.n)
        .param("letters", aut.letters.iter().map(|l| l.name().to_string()).collect::<Vec<_>>())
        .param("degree", cfg.bound)
        .param("k", cfg.ks.clone())
        .param("trials", cfg.trials);
    let s = structure_of(aut, &mon);
    report.push(Check::expect("structure: unambiguous, complete, transitive", s.unambiguous && s.complete && s.transitive, || {
        (format!("{s:?}"), aut.word_text(mon.ambiguity_witness.as_deref().unwrap_or(&[])))
    }));
    if !(s.unambiguous && s.complete) {
        return Ok(report);
    }
    let e = exprs(aut);

    // Scalar Bernoulli weights: positive *-rational values certify convergence.
    let names = ["(i) C_i = 1", "(ii) diag of (1 - t)(tM)* at 1 = lambda(C_i)^-1", "(iii) x M = x", "(iv) sum P_i^-1 = 1", "(v) x l = x l' for maximal columns"];
    let mut tallies: Vec<Tally> = names.iter().map(|n| Tally::new(format!("bernoulli: {n}"))).collect();
    let mut t_conv = Tally::new("bernoulli: C_i, P_i, lambda(C_i) converge");
    for trial in 0..=cfg.trials {
        let w = if trial == 0 {
            uniform_weights(aut)
        } else {
            let mut rng = trial_rng(cfg.seed, trial as u64);
            let p = random_distribution(&mut rng, aut.letters.len());
            BernoulliWeights::new(aut.letters.iter().map(|l| l.name()).zip(p))
        };
        let tag = if trial == 0 { "uniform".to_string() } else { format!("trial {trial}") };
        let conv: Result<Vec<_>, _> = (0..aut.n)
            .map(|i| {
                Ok::<_, EvalError>((
                    eval_bernoulli(&e.c[i], &w)?,
                    eval_bernoulli(&e.p[i], &w)?,
                    eval_bernoulli(&e.lambda_c[i], &w)?,
                ))
            })
            .collect();
        match conv {
            Ok(_) => t_conv.record(Check::pass(tag.clone())),
            Err(err) => t_conv.record(Check::fail(tag.clone(), err.to_string(), String::new())),
        }
        match items_under(aut, &e, &w.as_assignment()) {
            Ok(v) => {
                for (t, (_, r)) in tallies.iter_mut().zip(item_checks(aut, &mon, &v, 1)) {
                    t.record(match r {
                        Ok(()) => Check::pass(tag.clone()),
                        Err((res, wit)) => Check::fail(tag.clone(), res, wit),
                    });
                }
            }
            Err(why) => tallies.iter_mut().for_each(|t| t.record(Check::not_evaluable(tag.clone(), why.clone()))),
        }
    }
    report.push(t_conv.finish());
    report.checks.extend(tallies.into_iter().map(Tally::finish));

    for &k in &cfg.ks {
        let mut tallies: Vec<Tally> = names.iter().map(|n| Tally::new(format!("matrix k={k}: {n}"))).collect();
        for trial in 0..cfg.trials {
            let tag = format!("trial {trial}");
            let mut rng = trial_rng(cfg.seed, ((k as u64) << 32) | trial as u64);
            let mut got = Err(String::new());
            for attempt in 0..=MAX_RESAMPLES {
                let a = probabilistic_assignment(aut, k, &mut rng, attempt);
                got = items_under(aut, &e, &a);
                if got.is_ok() {
                    break;
                }
            }
            match got {
                Ok(v) => {
                    for (t, (_, r)) in tallies.iter_mut().zip(item_checks(aut, &mon, &v, k)) {
                        t.record(match r {
                            Ok(()) => Check::pass(tag.clone()),
                            Err((res, wit)) => Check::fail(tag.clone(), res, wit),
                        });
                    }
                }
                Err(why) => tallies.iter_mut().for_each(|t| t.record(Check::not_evaluable(tag.clone(), why.clone()))),
            }
        }
        report.checks.extend(tallies.into_iter().map(Tally::finish));
    }

    if aut.letters.len() >= 2 {
        let sigma = probabilistic_elimination(aut);
        let backend = SeriesBackend::substituted(&sigma, cfg.bound);
        let mut ev = Evaluator::new(&backend);
        let mut check = |name: String, x: RatExpr| {
            report.push(match ev.eval(&x) {
                Ok(s) => Check::expect(name, s.is_zero(), || series_witness(&s)),
                Err(err) => Check::not_evaluable(name, err.to_string()),
            });
        };
        for i in 0..aut.n {
            check(format!("series: C_{} = 1", i + 1), RatExpr::sub(e.c[i].clone(), RatExpr::one()));
        }
        check("series: sum P_i^-1 = 1".into(), RatExpr::sub(RatExpr::add_all(e.inv.clone()), RatExpr::one()));
        let grid = aut.weighted_grid();
        for j in 0..aut.n {
            let lhs = RatExpr::add_all(
                (0..aut.n).map(|i| RatExpr::mul_all(vec![e.inv[i].clone(), grid[i][j].clone()])).collect(),
            );
            check(format!("series: x M = x, column {}", j + 1), RatExpr::sub(lhs, e.inv[j].clone()));
        }
        for (ci, c) in mon.max_cols.iter().enumerate().skip(1) {
            let val = |c: &[u8]| RatExpr::add_all((0..aut.n).filter(|&i| c[i] == 1).map(|i| e.inv[i].clone()).collect());
            check(format!("series: x l_1 = x l_{}", ci + 1), RatExpr::sub(val(&mon.max_cols[0]), val(c)));
        }
    }
    Ok(report)
}

/// Checks `A* = S·C_i*·P + F` as series up to `bound`, and `1 = S α P` under
/// `weights`, where `α = λ(C_i)⁻¹` is the weighted mean length of `C_i`, inverted.
pub fn check_code_decomposition(
    aut: &Automaton,
    i: usize,
    s: &RatExpr,
    p: &RatExpr,
    f: &RatExpr,
    bound: usize,
    weights: &BernoulliWeights,
) -> Result<Report, AutomatonError> {
    let (c, _) = build_code_exprs(aut, i)?;
    let alpha = aut.alphabet();
    let mut report = Report::new("code-decomposition")
        .param("vertex", i + 1)
        .param("degree", bound)
        .param("S", s.render())
        .param("P", p.render())
        .param("F", f.render());
    let all = RatExpr::star(RatExpr::add_all(aut.letters.iter().map(RatExpr::letter).collect()));
    let rhs = RatExpr::add_all(vec![RatExpr::mul_all(vec![s.clone(), RatExpr::star_of(c.clone()), p.clone()]), f.clone()]);
    let backend = SeriesBackend::strict(&alpha, bound);
    let mut ev = Evaluator::new(&backend);
    report.push(match (ev.eval(&all), ev.eval(&rhs)) {
        (Ok(x), Ok(y)) => {
            let d = x.sub(&y).expect("same ring");
            Check::expect("A* = S C* P + F", d.is_zero(), || series_witness(&d))
        }
        (Err(e), _) | (_, Err(e)) => Check::not_evaluable("A* = S C* P + F", e.to_string()),
    });
    let name = "1 = S alpha P";
    report.push(match (eval_bernoulli(s, weights), eval_bernoulli(p, weights), eval_bernoulli(&lambda_expr(&c), weights)) {
        (Ok(sv), Ok(pv), Ok(lv)) if !lv.is_zero() => {
            let v = &sv / &lv * &pv;
            Check::expect(name, v.is_one(), || (format!("S alpha P = {}", fmt_rational(&v)), format!("alpha = {}", fmt_rational(&lv.recip()))))
        }
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => Check::not_evaluable(name, e.to_string()),
        _ => Check::not_evaluable(name, "lambda(C) has weight 0"),
    });
    Ok(report)
}

/// Series of `P_i` and of `C_i` truncated at `bound` in the free algebra.
pub fn code_series(aut: &Automaton, i: usize, bound: usize) -> Result<(crate::free_series::TruncSeries, crate::free_series::TruncSeries), AutomatonError> {
    let (c, p) = build_code_exprs(aut, i)?;
    let alpha = aut.alphabet();
    let cs = eval_series(&c, &alpha, bound).expect("positive expression");
    let ps = eval_series(&p, &alpha, bound).expect("positive expression");
    Ok((cs, ps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_series::TruncSeries;
    use crate::ratexpr::{eval_series_substituted, parse};

    const EX2: &str = "states 3\nletter a\n0 1 0\n1 0 1\n0 0 0\nletter b\n0 0 1\n1 0 1\n1 0 0\nletter c\n1 0 1\n1 0 1\n0 0 0\n";

    #[test]
    fn parse_roundtrip() {
        let a = Automaton::parse(EX2).unwrap();
        assert_eq!(a.to_text(), EX2);
        assert_eq!(a.to_text(), Automaton::example2().to_text());
        assert!(Automaton::parse("states 2\nletter a\n0 1\n").is_err());
        assert!(Automaton::parse("states 1\nletter a\n2\n").is_err());
        assert!(Automaton::parse("").is_err());
    }

    #[test]
    fn example2_monoid() {
        let a = Automaton::example2();
        let mon = monoid_closure(&a, DEFAULT_MONOID_CAP).unwrap();
        let s = structure_of(&a, &mon);
        assert_eq!(s, Structure { unambiguous: true, complete: true, transitive: true });
        let ba = BoolMat::from_rows(&[vec![0, 0, 0], vec![0, 1, 0], vec![0, 1, 0]]);
        assert_eq!(a.mu(&[1, 0]), ba);
        assert!(mon.contains(&ba));
        assert_eq!(mon.max_rows, vec![vec![0, 1, 0], vec![1, 0, 1]]);
        assert_eq!(mon.max_cols, vec![vec![0, 1, 1], vec![1, 1, 0]]);
        assert!(check_prop1(&a, &mon).all_pass());
    }

    #[test]
    fn ambiguity_and_incompleteness() {
        let ones = BoolMat::from_rows(&[vec![1, 1], vec![1, 1]]);
        let a = Automaton::new(2, vec![("a", ones)]).unwrap();
        assert!(!check_structure(&a, 100).unwrap().unambiguous);
        let z = Automaton::new(1, vec![("a", BoolMat::zeros(1))]).unwrap();
        assert!(!check_structure(&z, 100).unwrap().complete);
    }

    #[test]
    fn example2_codes() {
        let a = Automaton::example2();
        let alpha = a.alphabet();
        let (c1, p1) = code_series(&a, 0, 6).unwrap();
        let big_a = parse("a + b + c").unwrap();
        let expect_p = parse("1 + a + a (a + b + c) + b + c").unwrap();
        assert_eq!(p1, eval_series(&expect_p, &alpha, 6).unwrap());
        let fact = parse("(1 + a) (a + b + c - 1) (1 + b)").unwrap();
        let c1_minus = c1.sub(&TruncSeries::one(&alpha, 6)).unwrap();
        assert_eq!(c1_minus, eval_series(&fact, &alpha, 6).unwrap());
        let from_graph = parse("c + a (a + b + c) (1 + b) + (b + c) b").unwrap();
        assert_eq!(c1, eval_series(&from_graph, &alpha, 6).unwrap());
        let _ = big_a;
        let sigma = probabilistic_elimination(&a);
        let (_, p3) = build_code_exprs(&a, 2).unwrap();
        let (_, p1e) = build_code_exprs(&a, 0).unwrap();
        let d = eval_series_substituted(&RatExpr::sub(p1e, p3), &sigma, 6).unwrap();
        assert!(d.is_zero(), "{d}");
    }

    #[test]
    fn example2_scalar_values() {
        let a = Automaton::example2();
        let w = uniform_weights(&a);
        let p: Vec<Rational> = (0..3).map(|i| eval_bernoulli(&build_code_exprs(&a, i).unwrap().1, &w).unwrap()).collect();
        assert_eq!(p, vec![q(7, 3), int(7), q(7, 3)]);
    }

    #[test]
    fn example2_thm2() {
        let r = verify_thm2(&Automaton::example2(), &Thm2Config::new(5, vec![1, 2], 3, 7)).unwrap();
        assert!(r.all_pass(), "{}", r.to_json());
    }

    #[test]
    fn one_state_code() {
        let one = BoolMat::from_rows(&[vec![1]]);
        let a = Automaton::new(1, vec![("a", one.clone()), ("b", one)]).unwrap();
        let (c, p) = build_code_exprs(&a, 0).unwrap();
        assert_eq!(c, parse("a + b").unwrap());
        assert!(p.is_one());
    }

    #[test]
    fn decompositions() {
        let loop1 = Automaton::new(1, vec![("a", BoolMat::from_rows(&[vec![1]]))]).unwrap();
        let w = uniform_weights(&loop1);
        let r = check_code_decomposition(&loop1, 0, &RatExpr::one(), &RatExpr::one(), &RatExpr::zero(), 5, &w).unwrap();
        assert!(r.all_pass(), "{}", r.to_json());

        let m = |rows: [[u8; 2]; 2]| BoolMat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
        let parity = Automaton::new(2, vec![("a", m([[0, 1], [1, 0]])), ("b", m([[1, 0], [0, 1]]))]).unwrap();
        let (c1, p1) = build_code_exprs(&parity, 0).unwrap();
        assert_eq!(c1, parse("b + a (b)^* a").unwrap());
        let w = uniform_weights(&parity);
        let r = check_code_decomposition(&parity, 0, &RatExpr::one(), &p1, &RatExpr::zero(), 6, &w).unwrap();
        assert!(r.all_pass(), "{}", r.to_json());

        let suffix = Automaton::new(2, vec![("b", m([[0, 1], [1, 0]])), ("c", m([[1, 1], [0, 0]]))]).unwrap();
        let w = uniform_weights(&suffix);
        let r = check_code_decomposition(&suffix, 0, &parse("1 + b").unwrap(), &RatExpr::one(), &RatExpr::zero(), 6, &w)
            .unwrap();
        assert!(r.all_pass(), "{}", r.to_json());

        let r = check_code_decomposition(&parity, 0, &RatExpr::one(), &p1, &parse("a b").unwrap(), 6, &w).unwrap();
        let bad = r.find("A* = S C* P + F").unwrap();
        assert_eq!(bad.status, crate::report::Status::Fail);
        assert_eq!(bad.witness.as_deref(), Some("a.b: -1"));
    }

    #[test]
    fn corrupted_entry_is_ambiguous() {
        let mut a = Automaton::example2();
        a.matrix_mut(0).set(0, 0, 1);
        assert!(!check_structure(&a, DEFAULT_MONOID_CAP).unwrap().unambiguous);
    }
}
