//! Seeded random specializations. Every trial owns its own ChaCha stream,
//! so trial `i` draws the same values whatever order trials run in.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exact_arith::{q, QMatrix, Rational};

/// Resamples allowed after a singular inversion.
pub const MAX_RESAMPLES: usize = 5;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `k×k` block with entries uniform in `{-2, ..., 2}/3`.
pub fn random_block(rng: &mut impl Rng, k: usize) -> QMatrix {
    random_block_wide(rng, k, 0)
}

/// Block for resample number `attempt`: numerators range over
/// `{-(2 + 2·attempt), ..., 2 + 2·attempt}`, so repeated draws leave the small
/// value set where scalar specializations hit singular stars most often.
pub fn random_block_wide(rng: &mut impl Rng, k: usize, attempt: usize) -> QMatrix {
    let r = 2 + 2 * attempt as i64;
    QMatrix::from_fn(k, k, |_, _| q(rng.gen_range(-r..=r), 3))
}

/// Random positive probability vector of length `n` with small denominators.
pub fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    let w: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=5)).collect();
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| q(x, total)).collect()
}

/// Random row-stochastic `n×n` matrix with positive entries.
pub fn random_stochastic(rng: &mut impl Rng, n: usize) -> QMatrix {
    let rows = (0..n).map(|_| random_distribution(rng, n)).collect();
    QMatrix::from_rows(rows)
}

/// Random rational matrix with entries in `{-3..3}/den` for `den` in `1..=3`.
pub fn random_rational_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> QMatrix {
    QMatrix::from_fn(rows, cols, |_, _| q(rng.gen_range(-3..=3), rng.gen_range(1..=3)))
}

/// Stationary law of an irreducible stochastic matrix by a linear solve of
/// `x(M - I) = 0, Σx = 1`.
pub fn stationary_distribution(m: &QMatrix) -> Option<Vec<Rational>> {
    let n = m.rows();
    let a = m - &QMatrix::identity(n);
    let ker = a.left_kernel();
    if ker.len() != 1 {
        return None;
    }
    let v = &ker[0];
    let s: Rational = v.iter().sum();
    if s.is_zero() {
        return None;
    }
    Some(v.iter().map(|x| x / &s).collect())
}

pub fn is_row_stochastic(m: &QMatrix) -> bool {
    (0..m.rows()).all(|i| m.row(i).iter().sum::<Rational>().is_one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = random_block(&mut trial_rng(7, 0), 3);
        assert_eq!(a, random_block(&mut trial_rng(7, 0), 3));
        assert_ne!(a, random_block(&mut trial_rng(7, 1), 3));
    }

    #[test]
    fn stationary_of_example() {
        let m = QMatrix::from_rows(vec![vec![q(1, 2), q(1, 2)], vec![q(1, 3), q(2, 3)]]);
        assert_eq!(stationary_distribution(&m).unwrap(), vec![q(2, 5), q(3, 5)]);
        assert!(is_row_stochastic(&random_stochastic(&mut trial_rng(1, 1), 4)));
    }
}
