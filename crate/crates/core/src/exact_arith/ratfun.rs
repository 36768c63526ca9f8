use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use super::matrix::QMatrix;
use super::poly::Poly;
use super::rational::Rational;
use super::ArithError;

/// Rational function `num / den` in the central variable `t`, kept in lowest
/// terms with a monic denominator.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RatFun {
    num: Poly,
    den: Poly,
}

/// Result of evaluating a rational function at `t = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneEval {
    /// Exponent of `(1 - t)` in the reduced fraction; `None` for the zero
    /// function.
    pub vanishing_order: Option<i64>,
    pub value: Rational,
}

impl RatFun {
    /// Builds and normalizes `num / den`. Fails when `den` is zero.
    pub fn new(num: Poly, den: Poly) -> Result<Self, ArithError> {
        if den.is_zero() {
            return Err(ArithError::Singular);
        }
        if num.is_zero() {
            return Ok(Self::zero());
        }
        let g = Poly::gcd(&num, &den);
        let num = num.exact_div(&g).expect("gcd divides numerator");
        let den = den.exact_div(&g).expect("gcd divides denominator");
        let lead = den.leading().expect("nonzero denominator").recip();
        Ok(RatFun { num: num.scale(&lead), den: den.scale(&lead) })
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFun { num: p, den: Poly::one() }
    }

    pub fn constant(c: Rational) -> Self {
        Self::from_poly(Poly::constant(c))
    }

    pub fn zero() -> Self {
        Self::from_poly(Poly::zero())
    }

    pub fn one() -> Self {
        Self::from_poly(Poly::one())
    }

    pub fn t() -> Self {
        Self::from_poly(Poly::t())
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn inverse(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        Self::new(self.den.clone(), self.num.clone()).ok()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        RatFun { num: self.num.scale(c), den: self.den.clone() }
    }

    /// Value at `t = 1` after writing the function as `(1 - t)^n·Q/R` with
    /// `Q(1), R(1) != 0`: `Q(1)/R(1)` when `n = 0`, `0` when `n > 0`.
    pub fn eval_at_one(&self) -> Result<OneEval, ArithError> {
        if self.is_zero() {
            return Ok(OneEval { vanishing_order: None, value: Rational::zero() });
        }
        let (nu, q) = self.num.split_one_minus_t();
        let (de, r) = self.den.split_one_minus_t();
        let order = nu as i64 - de as i64;
        if order < 0 {
            return Err(ArithError::NotEvaluableAtOne { order });
        }
        let value = if order == 0 {
            q.eval(&Rational::one()) / r.eval(&Rational::one())
        } else {
            Rational::zero()
        };
        Ok(OneEval { vanishing_order: Some(order), value })
    }
}

impl Add<&RatFun> for &RatFun {
    type Output = RatFun;
    fn add(self, rhs: &RatFun) -> RatFun {
        if self.den == rhs.den {
            return RatFun::new(&self.num + &rhs.num, self.den.clone()).expect("nonzero denominator");
        }
        let num = &(&self.num * &rhs.den) + &(&rhs.num * &self.den);
        RatFun::new(num, &self.den * &rhs.den).expect("nonzero denominator")
    }
}

impl Sub<&RatFun> for &RatFun {
    type Output = RatFun;
    fn sub(self, rhs: &RatFun) -> RatFun {
        self + &(-rhs)
    }
}

impl Neg for &RatFun {
    type Output = RatFun;
    fn neg(self) -> RatFun {
        RatFun { num: -&self.num, den: self.den.clone() }
    }
}

impl Mul<&RatFun> for &RatFun {
    type Output = RatFun;
    fn mul(self, rhs: &RatFun) -> RatFun {
        if self.is_zero() || rhs.is_zero() {
            return RatFun::zero();
        }
        RatFun::new(&self.num * &rhs.num, &self.den * &rhs.den).expect("nonzero denominator")
    }
}

impl fmt::Debug for RatFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for RatFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

/// Square matrix with rational-function entries.
#[derive(Clone, PartialEq, Eq)]
pub struct RatFunMatrix {
    n: usize,
    entries: Vec<RatFun>,
}

impl RatFunMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> RatFun) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        RatFunMatrix { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { RatFun::one() } else { RatFun::zero() })
    }

    /// `c·I`.
    pub fn scalar(n: usize, c: &RatFun) -> Self {
        Self::from_fn(n, |i, j| if i == j { c.clone() } else { RatFun::zero() })
    }

    pub fn from_qmatrix(m: &QMatrix) -> Self {
        assert!(m.is_square());
        Self::from_fn(m.rows(), |i, j| RatFun::constant(m[(i, j)].clone()))
    }

    /// `I - t·M`.
    pub fn one_minus_t_times(m: &QMatrix) -> Self {
        let t = RatFun::t();
        Self::from_fn(m.rows(), |i, j| {
            let tm = t.scale(&m[(i, j)]);
            if i == j {
                &RatFun::one() - &tm
            } else {
                -&tm
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &RatFun {
        &self.entries[i * self.n + j]
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        Self::from_fn(self.n, |i, j| self.get(i, j) + rhs.get(i, j))
    }

    pub fn neg(&self) -> Self {
        Self::from_fn(self.n, |i, j| -self.get(i, j))
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        Self::from_fn(self.n, |i, j| {
            let mut acc = RatFun::zero();
            for l in 0..self.n {
                let (a, b) = (self.get(i, l), rhs.get(l, j));
                if !a.is_zero() && !b.is_zero() {
                    acc = &acc + &(a * b);
                }
            }
            acc
        })
    }

    pub fn scale(&self, c: &RatFun) -> Self {
        Self::from_fn(self.n, |i, j| c * self.get(i, j))
    }

    /// Entrywise value at `t = 1`.
    pub fn eval_at_one(&self) -> Result<QMatrix, ArithError> {
        let mut out = QMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(i, j)] = self.get(i, j).eval_at_one()?.value;
            }
        }
        Ok(out)
    }

    /// Exact inverse by fraction-free Gauss-Jordan elimination on the
    /// polynomial matrix obtained by clearing row denominators.
    pub fn inverse(&self) -> Result<Self, ArithError> {
        let n = self.n;
        if n == 0 {
            return Ok(self.clone());
        }
        // Row i scaled by the lcm of its denominators: D·M is polynomial and
        // M⁻¹ = (D·M)⁻¹·D.
        let mut row_scale = Vec::with_capacity(n);
        let mut aug: Vec<Vec<Poly>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut l = Poly::one();
            for j in 0..n {
                let d = self.get(i, j).den();
                let g = Poly::gcd(&l, d);
                l = (&l * d).exact_div(&g).expect("gcd divides product");
            }
            let mut row: Vec<Poly> = (0..n)
                .map(|j| {
                    let e = self.get(i, j);
                    &e.num * &l.exact_div(&e.den).expect("lcm divisible by denominator")
                })
                .collect();
            row.extend((0..n).map(|j| if i == j { Poly::one() } else { Poly::zero() }));
            aug.push(row);
            row_scale.push(l);
        }

        let mut prev = Poly::one();
        for k in 0..n {
            let Some(p) = (k..n).find(|&r| !aug[r][k].is_zero()) else {
                return Err(ArithError::Singular);
            };
            aug.swap(k, p);
            let pivot = aug[k][k].clone();
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = aug[i][k].clone();
                for j in 0..2 * n {
                    if j == k {
                        continue;
                    }
                    let v = &(&pivot * &aug[i][j]) - &(&f * &aug[k][j]);
                    aug[i][j] = v.exact_div(&prev).expect("fraction-free step divides exactly");
                }
                aug[i][k] = Poly::zero();
            }
            prev = pivot;
        }
        // Every diagonal entry now equals the same ±det(D·M), and the right
        // half holds that multiple of the inverse.
        let d = aug[n - 1][n - 1].clone();
        let inv_dm = Self::from_fn(n, |i, j| {
            debug_assert_eq!(aug[i][i], d);
            RatFun::new(aug[i][n + j].clone(), d.clone()).expect("nonzero determinant")
        });
        Ok(Self::from_fn(n, |i, j| inv_dm.get(i, j) * &RatFun::from_poly(row_scale[j].clone())))
    }
}

impl fmt::Debug for RatFunMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
            write!(f, "{}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Multiplicity of the eigenvalue 1: the largest nullity among the powers
/// `(I - M)^k`, `k = 1..dim`.
pub fn multiplicity_of_one(m: &QMatrix) -> usize {
    assert!(m.is_square(), "multiplicity_of_one needs a square matrix");
    let n = m.rows();
    let base = &QMatrix::identity(n) - m;
    let mut power = QMatrix::identity(n);
    let mut best = 0;
    for _ in 0..n {
        power = &power * &base;
        let nullity = power.nullity();
        if nullity == best && best > 0 {
            break;
        }
        best = best.max(nullity);
    }
    best
}

/// Value at `t = 1` of `(1 - t)(I - tM)⁻¹`. Its rows are fixed by `M`; it is
/// zero when 1 is not an eigenvalue.
pub fn limit_matrix(m: &QMatrix) -> Result<QMatrix, ArithError> {
    assert!(m.is_square(), "limit_matrix needs a square matrix");
    let inv = RatFunMatrix::one_minus_t_times(m).inverse()?;
    let one_minus_t = RatFun::from_poly(Poly::one_minus_t());
    inv.scale(&one_minus_t).eval_at_one()
}
