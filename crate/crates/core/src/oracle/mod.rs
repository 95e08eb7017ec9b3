//! Exact reference values the simulations are checked against.
//!
//! Everything here is computed in exact rational arithmetic; conversion to
//! floating point happens only when a value is reported or compared with a
//! Monte-Carlo estimate.

mod chain;
mod rational;
mod timeopt;

use num_bigint::BigUint;
use num_traits::One;
use thiserror::Error;

pub use chain::{expected_absorption_steps, ChainError, SparseChain};
pub use rational::ExactRational;
pub use timeopt::{
    timeopt_exact_expected, timeopt_exact_expected_given_ones, timeopt_lumped_state_count, TIMEOPT_EXACT_MAX_N,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("exact solve is intractable for n = {n} (supported up to {max})")]
    Intractable { n: u64, max: u64 },
    #[error("result for n = {n} does not fit in 64 bits")]
    Overflow { n: u64 },
    #[error("linear system is singular: {0}")]
    Singular(String),
}

fn require_positive(n: u64, what: &str) -> Result<(), OracleError> {
    if n == 0 {
        Err(OracleError::InvalidArgument(format!("{what} must be at least 1")))
    } else {
        Ok(())
    }
}

/// Row `C(m, 0), C(m, 1), …, C(m, m)` of Pascal's triangle.
fn binomial_row(m: u64) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(m as usize + 1);
    let mut cur = BigUint::one();
    row.push(cur.clone());
    for k in 0..m {
        cur = cur * BigUint::from(m - k) / BigUint::from(k + 1);
        row.push(cur.clone());
    }
    row
}

/// Expected number of BST interactions for the always-flip protocol to turn a
/// population of `n` equally marked agents into the opposite marking:
/// `u_n = 2^(n-1) · Σ_{k=0}^{n-1} 1 / C(n-1, k)`.
pub fn flip_expected_closed_form(n: u64) -> Result<ExactRational, OracleError> {
    require_positive(n, "n")?;
    let sum: ExactRational = binomial_row(n - 1).into_iter().map(|b| ExactRational::from(b).recip()).sum();
    let scale = ExactRational::from(BigUint::one() << (n - 1) as usize);
    Ok(&scale * &sum)
}

/// Hitting times `t_0, …, t_n` of the always-flip protocol, where `t_k` is the
/// expected number of BST interactions before every agent carries mark 0,
/// starting from `k` agents marked 1. Solved as the tridiagonal system
/// `t_k = 1 + (k/n) t_{k-1} + ((n-k)/n) t_{k+1}`, `t_n = 1 + t_{n-1}`.
pub fn flip_hitting_times(n: u64) -> Result<Vec<ExactRational>, OracleError> {
    require_positive(n, "n")?;
    let size = n as usize;
    let nn = ExactRational::from(n);
    let mut sub = vec![ExactRational::zero(); size];
    let mut diag = vec![ExactRational::one(); size];
    let mut sup = vec![ExactRational::zero(); size];
    let rhs = vec![ExactRational::one(); size];
    // unknown index i holds t_{i+1}
    for k in 1..n {
        let i = (k - 1) as usize;
        if k >= 2 {
            sub[i] = -(&ExactRational::from(k) / &nn);
        }
        sup[i] = -(&ExactRational::from(n - k) / &nn);
    }
    if n >= 2 {
        sub[size - 1] = -ExactRational::one();
    }
    diag[size - 1] = ExactRational::one();
    let mut t = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    t.insert(0, ExactRational::zero());
    Ok(t)
}

/// `t_n` from [`flip_hitting_times`]; an independent route to
/// [`flip_expected_closed_form`].
pub fn flip_expected_recurrence(n: u64) -> Result<ExactRational, OracleError> {
    let mut t = flip_hitting_times(n)?;
    Ok(t.pop().expect("n >= 1 gives a non-empty solution"))
}

/// Thomas algorithm over exact rationals. `sub[0]` and `sup[last]` are ignored.
fn solve_tridiagonal(
    sub: &[ExactRational],
    diag: &[ExactRational],
    sup: &[ExactRational],
    rhs: &[ExactRational],
) -> Result<Vec<ExactRational>, OracleError> {
    let m = diag.len();
    let mut c_prime = Vec::with_capacity(m);
    let mut d_prime = Vec::with_capacity(m);
    for i in 0..m {
        let (pivot, d) = if i == 0 {
            (diag[0].clone(), rhs[0].clone())
        } else {
            (&diag[i] - &(&sub[i] * &c_prime[i - 1]), &rhs[i] - &(&sub[i] * &d_prime[i - 1]))
        };
        if pivot.is_zero() {
            return Err(OracleError::Singular(format!("zero pivot at row {i}")));
        }
        c_prime.push(&sup[i] / &pivot);
        d_prime.push(&d / &pivot);
    }
    let mut x = vec![ExactRational::zero(); m];
    x[m - 1] = d_prime[m - 1].clone();
    for i in (0..m - 1).rev() {
        x[i] = &d_prime[i] - &(&c_prime[i] * &x[i + 1]);
    }
    Ok(x)
}

/// `k`-th term (1-based) of the Gros sequence `U_n = U_{n-1}, n, U_{n-1}`:
/// one plus the number of trailing zero bits of `k`.
pub fn gros_term(k: u64) -> u32 {
    debug_assert!(k >= 1, "Gros sequence is indexed from 1");
    k.trailing_zeros() + 1
}

/// Number of terms of `U_n`, `2^n - 1`.
pub fn gros_length(n: u32) -> Result<u64, OracleError> {
    require_positive(u64::from(n), "n")?;
    if n > 64 {
        return Err(OracleError::Overflow { n: u64::from(n) });
    }
    Ok(((1u128 << n) - 1) as u64)
}

/// All of `U_n`, generated term by term from [`gros_term`].
pub fn gros_sequence(n: u32) -> Result<Vec<u32>, OracleError> {
    const MAX: u32 = 24;
    if n > MAX {
        return Err(OracleError::Intractable { n: u64::from(n), max: u64::from(MAX) });
    }
    let len = gros_length(n)?;
    Ok((1..=len).map(gros_term).collect())
}

/// `n · H_n`, the coupon-collector bound on BST interactions for any
/// non-guessing two-state counting protocol.
pub fn harmonic_bound(n: u64) -> Result<ExactRational, OracleError> {
    require_positive(n, "n")?;
    let h: ExactRational = (1..=n).map(|l| ExactRational::new(1, l)).sum();
    Ok(&ExactRational::from(n) * &h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> ExactRational {
        ExactRational::new(n, d)
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(flip_expected_closed_form(1).unwrap(), q(1, 1));
        assert_eq!(flip_expected_closed_form(2).unwrap(), q(4, 1));
        assert_eq!(flip_expected_closed_form(3).unwrap(), q(10, 1));
        assert_eq!(flip_expected_closed_form(4).unwrap(), q(64, 3));
        assert!(flip_expected_closed_form(0).is_err());
    }

    #[test]
    fn recurrence_examples() {
        assert_eq!(flip_expected_recurrence(1).unwrap(), q(1, 1));
        assert_eq!(flip_expected_recurrence(2).unwrap(), q(4, 1));
        let t = flip_hitting_times(3).unwrap();
        assert_eq!(t, vec![q(0, 1), q(7, 1), q(9, 1), q(10, 1)]);
    }

    #[test]
    fn closed_form_matches_recurrence() {
        for n in 1..=24 {
            assert_eq!(flip_expected_closed_form(n).unwrap(), flip_expected_recurrence(n).unwrap(), "n = {n}");
        }
    }

    #[test]
    fn flip_sandwich() {
        for n in 8..=40u64 {
            let u = flip_expected_closed_form(n).unwrap();
            let pow = ExactRational::from(BigUint::one() << n as usize);
            assert!(u >= pow, "n = {n}");
            let upper = &pow * &(&ExactRational::one() + &ExactRational::new(8, n));
            assert!(u <= upper, "n = {n}");
        }
    }

    #[test]
    fn gros_examples() {
        assert_eq!(gros_term(1), 1);
        assert_eq!(gros_term(4), 3);
        assert_eq!(gros_term(7), 1);
        assert_eq!(gros_length(1).unwrap(), 1);
        assert_eq!(gros_length(3).unwrap(), 7);
        assert_eq!(gros_length(10).unwrap(), 1023);
        assert_eq!(gros_length(64).unwrap(), u64::MAX);
        assert!(matches!(gros_length(65), Err(OracleError::Overflow { .. })));
        assert_eq!(gros_sequence(3).unwrap(), vec![1, 2, 1, 3, 1, 2, 1]);
    }

    #[test]
    fn harmonic_examples() {
        assert_eq!(harmonic_bound(1).unwrap(), q(1, 1));
        assert_eq!(harmonic_bound(3).unwrap(), q(11, 2));
        // H_10 = 7381/2520
        assert_eq!(harmonic_bound(10).unwrap(), q(7381, 2520) * q(10, 1));
        assert_eq!(harmonic_bound(10).unwrap(), q(7381, 252));
    }

    #[test]
    fn harmonic_envelope() {
        for n in [100u64, 250, 1000] {
            let h = harmonic_bound(n).unwrap().to_f64() / n as f64;
            let gap = h - (n as f64).ln();
            assert!(gap > 0.577 && gap < 0.583, "n = {n}: {gap}");
        }
    }
}
