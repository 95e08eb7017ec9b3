//! Exact expected convergence time of the phased protocol for tiny populations.
//!
//! Under BST-only scheduling the next agent is uniform, and the BST only looks
//! at its mark. The process lumped to `(number of 1-marked agents, BST record)`
//! is therefore a Markov chain; it is absorbed the first time `c = n`.

use std::collections::{HashMap, VecDeque};

use super::chain::{expected_absorption_steps, SparseChain};
use super::{binomial_row, ExactRational, OracleError};
use crate::protocols::{streak_threshold, timeopt_step, TimeOptBst};

/// Largest population the exact solver accepts.
pub const TIMEOPT_EXACT_MAX_N: u64 = 4;

type Lumped = (u64, TimeOptBst);

struct LumpedChain {
    chain: SparseChain,
    index: HashMap<Lumped, usize>,
    states: Vec<Lumped>,
}

fn cnt_cap(n: u64) -> u64 {
    streak_threshold(n).ceil() as u64 + 1
}

fn build(n: u64) -> Result<LumpedChain, OracleError> {
    if n == 0 {
        return Err(OracleError::InvalidArgument("n must be at least 1".into()));
    }
    if n > TIMEOPT_EXACT_MAX_N {
        return Err(OracleError::Intractable { n, max: TIMEOPT_EXACT_MAX_N });
    }
    let cap = cnt_cap(n);
    let mut index: HashMap<Lumped, usize> = HashMap::new();
    let mut states: Vec<Lumped> = Vec::new();
    let mut edges: Vec<(usize, usize, ExactRational)> = Vec::new();
    let mut queue = VecDeque::new();
    for ones in 0..=n {
        let s = (ones, TimeOptBst::new());
        index.insert(s, states.len());
        states.push(s);
        queue.push_back(s);
    }
    while let Some(state @ (ones, bst)) = queue.pop_front() {
        let from = index[&state];
        for (mark, weight) in [(0u8, n - ones), (1u8, ones)] {
            if weight == 0 {
                continue;
            }
            let (next_bst, next_mark) = timeopt_step(bst, mark);
            if next_bst.c == n {
                continue;
            }
            debug_assert!(next_bst.cnt <= cap, "streak counter exceeded its cap");
            let next_ones = ones - u64::from(mark) + u64::from(next_mark);
            let next = (next_ones, next_bst);
            let to = *index.entry(next).or_insert_with(|| {
                states.push(next);
                queue.push_back(next);
                states.len() - 1
            });
            edges.push((from, to, ExactRational::new(weight, n)));
        }
    }
    let mut chain = SparseChain::with_states(states.len());
    for (from, to, p) in &edges {
        chain.add_transition(*from, *to, p);
    }
    Ok(LumpedChain { chain, index, states })
}

fn solve(n: u64) -> Result<(LumpedChain, Vec<ExactRational>), OracleError> {
    let lumped = build(n)?;
    // longest streaks first: each streak chain then collapses without fill-in
    let mut order: Vec<usize> = (0..lumped.states.len()).collect();
    order.sort_by_key(|&i| {
        let (ones, bst) = lumped.states[i];
        (std::cmp::Reverse(bst.cnt), std::cmp::Reverse(bst.c), ones, bst)
    });
    let values = expected_absorption_steps(&lumped.chain, &order).map_err(|e| OracleError::Singular(e.to_string()))?;
    Ok((lumped, values))
}

/// Expected BST interactions to reach `c = n` from a fresh BST when exactly
/// `ones` agents start with mark 1.
pub fn timeopt_exact_expected_given_ones(n: u64, ones: u64) -> Result<ExactRational, OracleError> {
    if ones > n {
        return Err(OracleError::InvalidArgument(format!("{ones} marked agents out of {n}")));
    }
    let (lumped, values) = solve(n)?;
    Ok(values[lumped.index[&(ones, TimeOptBst::new())]].clone())
}

/// Expected BST interactions to reach `c = n`, averaged over all `2^n`
/// initial mark vectors, under BST-only scheduling.
pub fn timeopt_exact_expected(n: u64) -> Result<ExactRational, OracleError> {
    let (lumped, values) = solve(n)?;
    let weights = binomial_row(n);
    let total = ExactRational::from(1u64 << n);
    let mut acc = ExactRational::zero();
    for (ones, w) in weights.into_iter().enumerate() {
        let e = &values[lumped.index[&(ones as u64, TimeOptBst::new())]];
        acc = acc + &ExactRational::from(w) * e;
    }
    Ok(&acc / &total)
}

/// Number of transient lumped states (diagnostics).
pub fn timeopt_lumped_state_count(n: u64) -> Result<usize, OracleError> {
    Ok(build(n)?.states.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_agent_is_deterministic() {
        // mark 0: converted on the first meeting.
        assert_eq!(timeopt_exact_expected_given_ones(1, 0).unwrap(), ExactRational::from(1));
        // mark 1: six streak steps, one phase switch, then the conversion.
        assert_eq!(timeopt_exact_expected_given_ones(1, 1).unwrap(), ExactRational::from(8));
        assert_eq!(timeopt_exact_expected(1).unwrap(), ExactRational::new(9, 2));
    }

    #[test]
    fn rejects_large_n() {
        assert_eq!(timeopt_exact_expected(5), Err(OracleError::Intractable { n: 5, max: 4 }));
        assert!(timeopt_exact_expected(0).is_err());
    }

    #[test]
    fn small_values_are_finite_and_ordered() {
        let e2 = timeopt_exact_expected(2).unwrap();
        let e3 = timeopt_exact_expected(3).unwrap();
        assert!(e2 > ExactRational::from(2));
        assert!(e3 > e2);
    }
}
