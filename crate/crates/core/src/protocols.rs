//! The three counting protocols, written as pure transition functions.
//!
//! Two protocols work on one-bit mobile agents and differ only in how the
//! base station (BST) decides whether to flip the mark of the agent it meets:
//!
//! * [`flip_step`] always flips, and keeps `c0`/`c1` as lower bounds on the
//!   number of agents carrying each mark. Convergence takes `Θ(2^n)` BST
//!   interactions in expectation.
//! * [`timeopt_step`] alternates phases. In a `b` phase the BST only flips
//!   `b`-marked agents, and it switches phase after seeing a streak of
//!   `6 (c ln c + 1)` agents of the other mark while `c_b = 0`. Convergence
//!   takes `O(n log n)` BST interactions in expectation.
//!
//! The third protocol names agents under weak fairness: the BST hands out
//! names from the Gros sequence to agents in the sink state `0`, and two
//! agents sharing a nonzero name collapse back to the sink.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::gros_term;

/// The sink state `m` of the naming protocol.
pub const SINK: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    /// The BST ran past the last name representable with `p` states.
    #[error("naming step {k} exceeds the name space of P = {p} states (population too large)")]
    NameOverflow { k: u64, p: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProtocolId {
    #[serde(rename = "timeopt")]
    TimeOpt,
    #[serde(rename = "flip")]
    Flip,
    #[serde(rename = "gros")]
    GrosNaming,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 3] = [ProtocolId::TimeOpt, ProtocolId::Flip, ProtocolId::GrosNaming];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolId::TimeOpt => "timeopt",
            ProtocolId::Flip => "flip",
            ProtocolId::GrosNaming => "gros",
        }
    }

    /// Whether mobile agents hold a single mark bit (as opposed to a name).
    pub fn uses_bits(self) -> bool {
        !matches!(self, ProtocolId::GrosNaming)
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "timeopt" => Ok(ProtocolId::TimeOpt),
            "flip" => Ok(ProtocolId::Flip),
            "gros" => Ok(ProtocolId::GrosNaming),
            other => Err(format!("unknown protocol `{other}` (expected timeopt, flip or gros)")),
        }
    }
}

/// Base-station record of the phased protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct TimeOptBst {
    pub c0: u64,
    pub c1: u64,
    pub c: u64,
    /// Length of the current streak of non-phase agents seen while `c_phase = 0`.
    pub cnt: u64,
    pub phase: u8,
}

impl TimeOptBst {
    pub fn new() -> Self {
        Self::default()
    }

    /// `c_b` for mark `b`.
    pub fn count(&self, b: u8) -> u64 {
        if b == 0 {
            self.c0
        } else {
            self.c1
        }
    }

    fn count_mut(&mut self, b: u8) -> &mut u64 {
        if b == 0 {
            &mut self.c0
        } else {
            &mut self.c1
        }
    }
}

/// Base-station record of the always-flip protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FlipBst {
    pub c0: u64,
    pub c1: u64,
    pub c: u64,
}

impl FlipBst {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, b: u8) -> u64 {
        if b == 0 {
            self.c0
        } else {
            self.c1
        }
    }

    fn count_mut(&mut self, b: u8) -> &mut u64 {
        if b == 0 {
            &mut self.c0
        } else {
            &mut self.c1
        }
    }
}

/// Base-station record of the naming protocol: the 1-based index of the next
/// Gros-sequence term to hand out, and the state bound `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GrosBst {
    pub k: u64,
    pub p: u32,
}

impl GrosBst {
    /// Fresh BST for a protocol with `p` mobile states (names `1..p`, sink `0`).
    pub fn new(p: u32) -> Self {
        GrosBst { k: 1, p }
    }
}

/// Streak length after which the phased protocol leaves the current phase,
/// `6 (c ln c + 1)` with `0 ln 0 = 0`.
pub fn streak_threshold(c_b: u64) -> f64 {
    if c_b <= 1 {
        6.0
    } else {
        let x = c_b as f64;
        6.0 * (x * x.ln() + 1.0)
    }
}

/// One BST interaction of the phased protocol with an agent marked `b`.
/// Returns the new BST record and the agent's new mark.
pub fn timeopt_step(bst: TimeOptBst, b: u8) -> (TimeOptBst, u8) {
    debug_assert!(b <= 1);
    let mut next = bst;
    let mut mark = b;
    if mark == next.phase {
        next.cnt = 0;
        let cb = next.count_mut(mark);
        if *cb > 0 {
            *cb -= 1;
        }
        mark = 1 - mark;
        *next.count_mut(mark) += 1;
    } else if next.cnt as f64 >= streak_threshold(next.count(mark)) {
        next.cnt = 0;
        next.phase = 1 - next.phase;
    } else if next.count(next.phase) == 0 {
        next.cnt += 1;
    }
    next.c = next.c0 + next.c1;
    (next, mark)
}

/// One BST interaction of the always-flip protocol with an agent marked `b`.
pub fn flip_step(bst: FlipBst, b: u8) -> (FlipBst, u8) {
    debug_assert!(b <= 1);
    let mut next = bst;
    let cb = next.count_mut(b);
    if *cb > 0 {
        *cb -= 1;
    }
    let mark = 1 - b;
    *next.count_mut(mark) += 1;
    next.c = next.c0 + next.c1;
    (next, mark)
}

/// BST meets an agent holding name `s`. Agents in the sink receive the next
/// Gros term; named agents are left alone.
pub fn gros_bst_step(bst: GrosBst, s: u32) -> Result<(GrosBst, u32), ProtocolError> {
    if s != SINK {
        return Ok((bst, s));
    }
    let name = gros_term(bst.k);
    if name > bst.p.saturating_sub(1) {
        return Err(ProtocolError::NameOverflow { k: bst.k, p: bst.p });
    }
    Ok((GrosBst { k: bst.k + 1, p: bst.p }, name))
}

/// Two mobile agents meet. Homonyms collapse to the sink in one transition.
pub fn gros_mobile_step(s1: u32, s2: u32) -> (u32, u32) {
    if s1 == s2 && s1 != SINK {
        (SINK, SINK)
    } else {
        (s1, s2)
    }
}
