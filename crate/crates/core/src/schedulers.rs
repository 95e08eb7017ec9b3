//! Interaction schedulers for the two fairness regimes.
//!
//! * [`SchedulerKind::UniformPair`]: probabilistic fairness over all
//!   `C(n+1, 2)` unordered pairs, BST included.
//! * [`SchedulerKind::BstOnly`]: only the BST interactions of the former. The
//!   bit protocols have no mobile-mobile rules, so this gives the same law for
//!   every BST-side metric.
//! * [`SchedulerKind::RoundRobin`]: a fixed cycle through all pairs, a simple
//!   weakly fair witness.
//! * [`SchedulerKind::WeakAdversarial`]: the slow weakly fair execution for the
//!   naming protocol. The BST only meets sink agents, and homonyms are reduced
//!   whenever no sink agent is left.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Configuration, InteractionPair, MobileState};
use crate::protocols::{ProtocolId, SINK};

/// Identifier of the generator behind every seeded scheduler, recorded in
/// output metadata.
pub const RNG_ALGORITHM: &str = "chacha8-splitmix64";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchedulerError {
    #[error("scheduler {kind} cannot drive protocol {protocol}")]
    IncompatibleProtocol { kind: SchedulerKind, protocol: ProtocolId },
    #[error("scheduler {kind} needs {expected} states")]
    IncompatibleConfiguration { kind: SchedulerKind, expected: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchedulerKind {
    #[serde(rename = "uniform")]
    UniformPair,
    #[serde(rename = "bst")]
    BstOnly,
    #[serde(rename = "roundrobin")]
    RoundRobin,
    #[serde(rename = "adversarial")]
    WeakAdversarial,
}

impl SchedulerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::UniformPair => "uniform",
            SchedulerKind::BstOnly => "bst",
            SchedulerKind::RoundRobin => "roundrobin",
            SchedulerKind::WeakAdversarial => "adversarial",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedulerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(SchedulerKind::UniformPair),
            "bst" => Ok(SchedulerKind::BstOnly),
            "roundrobin" => Ok(SchedulerKind::RoundRobin),
            "adversarial" => Ok(SchedulerKind::WeakAdversarial),
            other => Err(format!("unknown scheduler `{other}` (expected uniform, bst, roundrobin or adversarial)")),
        }
    }
}

/// SplitMix64 finaliser, used to derive independent seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of child stream `index` of `base`.
pub fn split_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index.wrapping_add(0x6A09_E667_F3BC_C909)))
}

/// Number of unordered pairs among the BST and `n` mobiles.
pub fn pair_count(n: usize) -> u64 {
    let m = n as u64 + 1;
    m * (m - 1) / 2
}

/// The `index`-th pair of the round-robin cycle: `(BST, 0) … (BST, n-1)`, then
/// `(0, 1), (0, 2), …, (n-2, n-1)`.
pub fn pair_at(n: usize, index: u64) -> InteractionPair {
    let n64 = n as u64;
    if index < n64 {
        return InteractionPair::Bst(index as usize);
    }
    let mut rest = index - n64;
    let mut i = 0u64;
    loop {
        let row = n64 - 1 - i;
        if rest < row {
            return InteractionPair::Mobiles(i as usize, (i + 1 + rest) as usize);
        }
        rest -= row;
        i += 1;
    }
}

/// Single-owner pair source.
#[derive(Debug, Clone)]
pub struct Scheduler {
    kind: SchedulerKind,
    seed: u64,
    rng: ChaCha8Rng,
    cursor: u64,
    scratch: Vec<usize>,
}

impl Scheduler {
    pub fn new(kind: SchedulerKind, seed: u64) -> Self {
        Scheduler { kind, seed, rng: ChaCha8Rng::seed_from_u64(seed), cursor: 0, scratch: Vec::new() }
    }

    pub fn kind(&self) -> SchedulerKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn check_compatible(&self, protocol: ProtocolId) -> Result<(), SchedulerError> {
        if self.kind == SchedulerKind::WeakAdversarial && protocol != ProtocolId::GrosNaming {
            return Err(SchedulerError::IncompatibleProtocol { kind: self.kind, protocol });
        }
        Ok(())
    }

    pub fn next_pair(&mut self, config: &Configuration) -> Result<InteractionPair, SchedulerError> {
        let n = config.n();
        debug_assert!(n >= 1);
        Ok(match self.kind {
            SchedulerKind::BstOnly => InteractionPair::Bst(self.rng.random_range(0..n)),
            SchedulerKind::UniformPair => {
                // agent n stands for the BST
                let a = self.rng.random_range(0..=n);
                let mut b = self.rng.random_range(0..n);
                if b >= a {
                    b += 1;
                }
                match (a == n, b == n) {
                    (true, _) => InteractionPair::Bst(b),
                    (_, true) => InteractionPair::Bst(a),
                    _ => InteractionPair::Mobiles(a, b),
                }
            }
            SchedulerKind::RoundRobin => {
                let pair = pair_at(n, self.cursor);
                self.cursor = (self.cursor + 1) % pair_count(n);
                pair
            }
            SchedulerKind::WeakAdversarial => self.adversarial(config)?,
        })
    }

    fn adversarial(&mut self, config: &Configuration) -> Result<InteractionPair, SchedulerError> {
        let wrong =
            || SchedulerError::IncompatibleConfiguration { kind: SchedulerKind::WeakAdversarial, expected: "name" };
        let mobiles = config.mobiles();
        // first sink agent, if any
        for (i, m) in mobiles.iter().enumerate() {
            match m {
                MobileState::Name(SINK) => return Ok(InteractionPair::Bst(i)),
                MobileState::Name(_) => {}
                MobileState::Bit(_) => return Err(wrong()),
            }
        }
        // lexicographically smallest homonym pair (i, j)
        const NONE: usize = usize::MAX;
        let mut best: Option<(usize, usize)> = None;
        for (j, m) in mobiles.iter().enumerate() {
            let MobileState::Name(s) = *m else { return Err(wrong()) };
            let s = s as usize;
            if s >= self.scratch.len() {
                self.scratch.resize(s + 1, NONE);
            }
            let first = self.scratch[s];
            if first == NONE {
                self.scratch[s] = j;
            } else if best.is_none_or(|(bi, _)| first < bi) {
                best = Some((first, j));
            }
        }
        for m in mobiles {
            if let MobileState::Name(s) = *m {
                self.scratch[s as usize] = NONE;
            }
        }
        // silent: any pair will do
        Ok(best.map_or(InteractionPair::Bst(0), |(i, j)| InteractionPair::Mobiles(i, j)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adversary_feeds_sink_agents_to_bst() {
        let config = Configuration::with_names(4, &[0, 0, 1]).unwrap();
        let mut s = Scheduler::new(SchedulerKind::WeakAdversarial, 0);
        assert_eq!(s.next_pair(&config).unwrap(), InteractionPair::Bst(0));
    }

    #[test]
    fn adversary_reduces_homonyms() {
        let config = Configuration::with_names(4, &[1, 1, 2]).unwrap();
        let mut s = Scheduler::new(SchedulerKind::WeakAdversarial, 0);
        assert_eq!(s.next_pair(&config).unwrap(), InteractionPair::Mobiles(0, 1));
        let config = Configuration::with_names(4, &[1, 2, 2, 1]).unwrap();
        assert_eq!(s.next_pair(&config).unwrap(), InteractionPair::Mobiles(0, 3));
        let config = Configuration::with_names(5, &[3, 1, 2, 2, 1]).unwrap();
        assert_eq!(s.next_pair(&config).unwrap(), InteractionPair::Mobiles(1, 4));
    }

    #[test]
    fn adversary_rejects_bits() {
        let config = Configuration::with_marks(ProtocolId::Flip, &[0, 1]).unwrap();
        let mut s = Scheduler::new(SchedulerKind::WeakAdversarial, 0);
        assert!(s.next_pair(&config).is_err());
        assert!(s.check_compatible(ProtocolId::Flip).is_err());
        assert!(s.check_compatible(ProtocolId::GrosNaming).is_ok());
    }

    #[test]
    fn bst_only_is_reproducible() {
        let config = Configuration::with_marks(ProtocolId::Flip, &[0; 4]).unwrap();
        let mut a = Scheduler::new(SchedulerKind::BstOnly, 99);
        let mut b = Scheduler::new(SchedulerKind::BstOnly, 99);
        let xs: Vec<_> = (0..200).map(|_| a.next_pair(&config).unwrap()).collect();
        let ys: Vec<_> = (0..200).map(|_| b.next_pair(&config).unwrap()).collect();
        assert_eq!(xs, ys);
        assert!(xs.iter().all(|p| matches!(p, InteractionPair::Bst(i) if *i < 4)));
    }

    #[test]
    fn bst_only_marginal_is_uniform() {
        // chi-square with 3 degrees of freedom; 16.27 is the 10^-3 upper quantile
        let n = 4;
        let config = Configuration::with_marks(ProtocolId::Flip, &[0; 4]).unwrap();
        let mut s = Scheduler::new(SchedulerKind::BstOnly, 2024);
        let draws = 1_000_000u64;
        let mut counts = vec![0u64; n];
        for _ in 0..draws {
            let InteractionPair::Bst(i) = s.next_pair(&config).unwrap() else { panic!("non-BST pair") };
            counts[i] += 1;
        }
        let expected = draws as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn uniform_pair_covers_all_pairs_evenly() {
        // 10 pairs for n = 4; chi-square with 9 degrees of freedom, 27.88 at 10^-3
        let n = 4;
        let config = Configuration::with_marks(ProtocolId::Flip, &[0; 4]).unwrap();
        let mut s = Scheduler::new(SchedulerKind::UniformPair, 5);
        let total = pair_count(n) as usize;
        let index_of = |p: InteractionPair| {
            (0..total as u64).position(|k| {
            let q = pair_at(n, k);
            q == p || matches!((p, q), (InteractionPair::Mobiles(a, b), InteractionPair::Mobiles(c, d)) if a == d && b == c)
        })
        };
        let draws = 200_000u64;
        let mut counts = vec![0u64; total];
        for _ in 0..draws {
            counts[index_of(s.next_pair(&config).unwrap()).unwrap()] += 1;
        }
        let expected = draws as f64 / total as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 27.88, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn round_robin_cycle_is_complete() {
        for n in 1..7usize {
            let config = Configuration::with_marks(ProtocolId::Flip, &vec![0; n]).unwrap();
            let mut s = Scheduler::new(SchedulerKind::RoundRobin, 0);
            let cycle = pair_count(n) as usize;
            // start at an arbitrary offset; any window of one cycle covers every pair once
            for _ in 0..(n + 2) {
                s.next_pair(&config).unwrap();
            }
            let mut seen = std::collections::HashSet::new();
            for _ in 0..cycle {
                let p = match s.next_pair(&config).unwrap() {
                    InteractionPair::Mobiles(i, j) => InteractionPair::Mobiles(i.min(j), i.max(j)),
                    p => p,
                };
                assert!(seen.insert(p), "pair {p} repeated within a cycle");
            }
            assert_eq!(seen.len(), cycle);
        }
    }

    #[test]
    fn split_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| split_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(split_seed(7, 0), split_seed(8, 0));
    }
}
