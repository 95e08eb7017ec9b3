//! Expected absorption times of a finite Markov chain, solved exactly by
//! sparse Gaussian elimination over rationals.
//!
//! Only transient states are stored. Probability mass that leaves the stored
//! states is absorbed. Each row reads
//! `E[i] = 1 + Σ_j P(i, j) E[j]`.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use super::ExactRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("state {0} never reaches absorption")]
    NotAbsorbing(usize),
    #[error("elimination order must be a permutation of the {0} states")]
    BadOrder(usize),
}

#[derive(Debug, Clone, Default)]
pub struct SparseChain {
    rows: Vec<BTreeMap<usize, BigRational>>,
}

impl SparseChain {
    pub fn with_states(count: usize) -> Self {
        SparseChain { rows: vec![BTreeMap::new(); count] }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Adds `p` to the transition probability `from -> to` (both transient).
    pub fn add_transition(&mut self, from: usize, to: usize, p: &ExactRational) {
        let entry = self.rows[from].entry(to).or_insert_with(BigRational::zero);
        *entry += p.as_big_rational();
    }
}

/// Expected number of steps to absorption from every transient state.
///
/// States are eliminated in `order`; a good order (states late in a
/// chain first) keeps the fill-in small.
pub fn expected_absorption_steps(chain: &SparseChain, order: &[usize]) -> Result<Vec<ExactRational>, ChainError> {
    let m = chain.rows.len();
    if order.len() != m || order.iter().collect::<BTreeSet<_>>().len() != m || order.iter().any(|&i| i >= m) {
        return Err(ChainError::BadOrder(m));
    }
    let mut rows = chain.rows.clone();
    let mut consts: Vec<BigRational> = vec![BigRational::one(); m];
    let mut preds: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    for (i, row) in rows.iter().enumerate() {
        for &j in row.keys() {
            if j != i {
                preds[j].insert(i);
            }
        }
    }
    let mut eliminated = vec![false; m];
    for &x in order {
        let mut row = std::mem::take(&mut rows[x]);
        let mut a = std::mem::replace(&mut consts[x], BigRational::zero());
        if let Some(w) = row.remove(&x) {
            let rest = BigRational::one() - w;
            if rest.is_zero() {
                return Err(ChainError::NotAbsorbing(x));
            }
            let factor = rest.recip();
            a *= &factor;
            for v in row.values_mut() {
                *v *= &factor;
            }
        }
        let users: Vec<usize> = std::mem::take(&mut preds[x]).into_iter().filter(|&y| !eliminated[y]).collect();
        for y in users {
            let Some(w_yx) = rows[y].remove(&x) else { continue };
            consts[y] += &w_yx * &a;
            for (&t, w) in &row {
                let entry = rows[y].entry(t).or_insert_with(BigRational::zero);
                *entry += &w_yx * w;
                if t != y {
                    preds[t].insert(y);
                }
            }
        }
        for &t in row.keys() {
            preds[t].remove(&x);
        }
        eliminated[x] = true;
        rows[x] = row;
        consts[x] = a;
    }
    // each stored row now references only states eliminated after it
    let mut value: Vec<Option<BigRational>> = vec![None; m];
    for &x in order.iter().rev() {
        let mut v = consts[x].clone();
        for (&t, w) in &rows[x] {
            let vt = value[t].as_ref().expect("later state already solved");
            v += w * vt;
        }
        value[x] = Some(v);
    }
    Ok(value.into_iter().map(|v| ExactRational::from(v.expect("all states solved"))).collect())
}
