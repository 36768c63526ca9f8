use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use super::rational::{fmt_rational, Rational};

/// Univariate polynomial in the central variable `t`, coefficients indexed
/// by degree. The leading coefficient is never zero; the zero polynomial
/// has no coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    coeffs: Vec<Rational>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(vec![c])
    }

    /// The variable `t`.
    pub fn t() -> Self {
        Self::new(vec![Rational::zero(), Rational::one()])
    }

    /// `1 - t`.
    pub fn one_minus_t() -> Self {
        Self::new(vec![Rational::one(), -Rational::one()])
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&Rational> {
        self.coeffs.last()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Poly { coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    pub fn monic(&self) -> Self {
        match self.leading() {
            Some(l) => self.scale(&l.recip()),
            None => Self::zero(),
        }
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * t + c)
    }

    /// Euclidean division; panics on a zero divisor.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lead_inv = divisor.coeffs[dd].recip();
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut quot = vec![Rational::zero(); rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let c = &rem[k + dd] * &lead_inv;
            if c.is_zero() {
                continue;
            }
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= &c * d;
            }
            quot[k] = c;
        }
        rem.truncate(dd);
        (Poly::new(quot), Poly::new(rem))
    }

    /// Quotient of a division known to be exact.
    pub fn exact_div(&self, divisor: &Poly) -> Option<Poly> {
        let (q, r) = self.div_rem(divisor);
        r.is_zero().then_some(q)
    }

    /// Monic greatest common divisor; `gcd(0, 0) = 0`.
    pub fn gcd(a: &Poly, b: &Poly) -> Poly {
        let (mut a, mut b) = (a.clone(), b.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r.monic();
        }
        a.monic()
    }

    /// Splits off the factor `(1 - t)^n` with `n` maximal; returns `(n, rest)`
    /// where `rest(1) != 0`. Panics on the zero polynomial.
    pub fn split_one_minus_t(&self) -> (usize, Poly) {
        assert!(!self.is_zero(), "zero polynomial has no finite order at t = 1");
        let mut n = 0;
        let mut p = self.clone();
        let divisor = Poly::one_minus_t();
        loop {
            match p.exact_div(&divisor) {
                Some(quot) => {
                    p = quot;
                    n += 1;
                }
                None => return (n, p),
            }
        }
    }
}

impl Add<&Poly> for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let z = Rational::zero();
        Poly::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&z) + rhs.coeffs.get(i).unwrap_or(&z))
                .collect(),
        )
    }
}

impl Sub<&Poly> for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

impl Mul<&Poly> for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => fmt_rational(c),
                1 => format!("{}*t", fmt_rational(c)),
                _ => format!("{}*t^{}", fmt_rational(c), i),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::rational::{int, q};

    fn p(cs: &[i64]) -> Poly {
        Poly::new(cs.iter().map(|&c| int(c)).collect())
    }

    #[test]
    fn division_reconstructs() {
        let a = p(&[1, -3, 0, 2]);
        let b = p(&[2, 1]);
        let (quot, rem) = a.div_rem(&b);
        assert_eq!(&(&quot * &b) + &rem, a);
        assert!(rem.degree().unwrap_or(0) < 1);
    }

    #[test]
    fn gcd_is_monic_common_factor() {
        let f = p(&[1, -1]); // 1 - t
        let a = &f * &p(&[2, 1]);
        let b = &f * &p(&[3, 0, 1]);
        assert_eq!(Poly::gcd(&a, &b), p(&[-1, 1]));
    }

    #[test]
    fn order_at_one() {
        let f = &(&Poly::one_minus_t() * &Poly::one_minus_t()) * &p(&[1, 1]);
        let (n, rest) = f.split_one_minus_t();
        assert_eq!(n, 2);
        assert_eq!(rest, p(&[1, 1]));
        assert_eq!(p(&[2, -1]).split_one_minus_t().0, 0);
        assert_eq!(p(&[2, -1]).eval(&q(1, 2)), q(3, 2));
    }
}
