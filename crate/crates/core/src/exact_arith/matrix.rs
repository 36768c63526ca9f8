use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_traits::{One, Zero};

use super::rational::{fmt_rational, Rational};

/// Dense row-major matrix of exact rationals.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl QMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QMatrix { rows, cols, entries: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    /// `c·I` of size `n`.
    pub fn scalar(n: usize, c: &Rational) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c.clone();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        QMatrix { rows: r, cols: c, entries: rows.into_iter().flatten().collect() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        QMatrix { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        QMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| x * c).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        assert!(self.is_square());
        let mut acc = Self::identity(self.rows);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Deletes row `i` and column `j`.
    pub fn minor_matrix(&self, i: usize, j: usize) -> Self {
        let rows: Vec<usize> = (0..self.rows).filter(|&r| r != i).collect();
        let cols: Vec<usize> = (0..self.cols).filter(|&c| c != j).collect();
        self.select(&rows, &cols)
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])].clone())
    }

    /// Block `(bi, bj)` when the matrix is viewed as a grid of `k×k` blocks.
    pub fn block(&self, bi: usize, bj: usize, k: usize) -> Self {
        Self::from_fn(k, k, |i, j| self[(bi * k + i, bj * k + j)].clone())
    }

    /// Assembles a square grid of equally sized square blocks.
    pub fn from_blocks(blocks: &[Vec<QMatrix>]) -> Self {
        let n = blocks.len();
        let k = blocks.first().and_then(|r| r.first()).map_or(0, QMatrix::rows);
        let mut m = Self::zeros(n * k, n * k);
        for (bi, row) in blocks.iter().enumerate() {
            assert_eq!(row.len(), n);
            for (bj, b) in row.iter().enumerate() {
                assert!(b.rows == k && b.cols == k, "block size mismatch");
                for i in 0..k {
                    for j in 0..k {
                        m[(bi * k + i, bj * k + j)] = b[(i, j)].clone();
                    }
                }
            }
        }
        m
    }

    /// Reduced row echelon form and the pivot columns.
    pub fn rref(&self) -> (Self, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m[(i, c)].is_zero()) else {
                continue;
            };
            m.swap_rows(r, p);
            let inv = m[(r, c)].recip();
            for j in c..m.cols {
                let v = &m[(r, j)] * &inv;
                m[(r, j)] = v;
            }
            for i in 0..m.rows {
                if i != r && !m[(i, c)].is_zero() {
                    let f = m[(i, c)].clone();
                    for j in c..m.cols {
                        let v = &m[(r, j)] * &f;
                        m[(i, j)] -= v;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Dimension of the right kernel.
    pub fn nullity(&self) -> usize {
        self.cols - self.rank()
    }

    /// Basis of `{x : x·M = 0}` as row vectors.
    pub fn left_kernel(&self) -> Vec<Vec<Rational>> {
        let t = self.transpose();
        let (r, pivots) = t.rref();
        let free: Vec<usize> = (0..t.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Rational::zero(); t.cols];
                v[f] = Rational::one();
                for (row, &p) in pivots.iter().enumerate() {
                    v[p] = -r[(row, f)].clone();
                }
                v
            })
            .collect()
    }

    pub fn inverse(&self) -> Option<Self> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut aug = Self::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = Rational::one();
        }
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        Some(r.select(&(0..n).collect::<Vec<_>>(), &(n..2 * n).collect::<Vec<_>>()))
    }

    /// Determinant by exact elimination.
    pub fn det(&self) -> Rational {
        assert!(self.is_square());
        let mut m = self.clone();
        let n = m.rows;
        let mut det = Rational::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !m[(i, c)].is_zero()) else {
                return Rational::zero();
            };
            if p != c {
                m.swap_rows(p, c);
                det = -det;
            }
            let piv = m[(c, c)].clone();
            det *= &piv;
            for i in c + 1..n {
                if m[(i, c)].is_zero() {
                    continue;
                }
                let f = &m[(i, c)] / &piv;
                for j in c..n {
                    let v = &m[(c, j)] * &f;
                    m[(i, j)] -= v;
                }
            }
        }
        det
    }

    pub fn row_vector(v: &[Rational]) -> Self {
        Self::from_rows(vec![v.to_vec()])
    }

    pub fn column_vector(v: &[Rational]) -> Self {
        Self::from_fn(v.len(), 1, |i, _| v[i].clone())
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.entries.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl Index<(usize, usize)> for QMatrix {
    type Output = Rational;
    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        debug_assert!(i < self.rows && j < self.cols);
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for QMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.entries[i * self.cols + j]
    }
}

impl<'a> Add<&'a QMatrix> for &'a QMatrix {
    type Output = QMatrix;
    fn add(self, rhs: &QMatrix) -> QMatrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "dimension mismatch");
        QMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a QMatrix> for &'a QMatrix {
    type Output = QMatrix;
    fn sub(self, rhs: &QMatrix) -> QMatrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "dimension mismatch");
        QMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a QMatrix> for &'a QMatrix {
    type Output = QMatrix;
    fn mul(self, rhs: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch");
        let mut out = QMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = &self[(i, l)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = &rhs[(l, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }
}

impl Neg for &QMatrix {
    type Output = QMatrix;
    fn neg(self) -> QMatrix {
        QMatrix { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|x| -x).collect() }
    }
}

impl fmt::Debug for QMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for QMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row(i).iter().map(fmt_rational).collect();
            write!(f, "{}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::rational::{int, q};

    #[test]
    fn inverse_and_det_of_2x2() {
        let a = QMatrix::from_rows(vec![vec![int(1), int(2)], vec![int(3), int(4)]]);
        assert_eq!(a.det(), int(-2));
        let inv = a.inverse().unwrap();
        assert_eq!(inv, QMatrix::from_rows(vec![vec![int(-2), int(1)], vec![q(3, 2), q(-1, 2)]]));
        assert_eq!(&a * &inv, QMatrix::identity(2));
    }

    #[test]
    fn singular_has_no_inverse() {
        let a = QMatrix::from_rows(vec![vec![int(1), int(2)], vec![int(2), int(4)]]);
        assert!(a.inverse().is_none());
        assert_eq!(a.rank(), 1);
        assert_eq!(a.nullity(), 1);
    }

    #[test]
    fn left_kernel_of_stochastic_generator() {
        let m = QMatrix::from_rows(vec![vec![q(-1, 2), q(1, 2)], vec![q(1, 3), q(-1, 3)]]);
        let k = m.left_kernel();
        assert_eq!(k.len(), 1);
        let x = QMatrix::row_vector(&k[0]);
        assert!((&x * &m).is_zero());
    }

    #[test]
    fn blocks_roundtrip() {
        let m = QMatrix::from_fn(4, 4, |i, j| int((i * 4 + j) as i64));
        let blocks: Vec<Vec<QMatrix>> =
            (0..2).map(|bi| (0..2).map(|bj| m.block(bi, bj, 2)).collect()).collect();
        assert_eq!(QMatrix::from_blocks(&blocks), m);
    }
}
