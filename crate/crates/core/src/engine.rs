//! Configurations, single interactions and whole executions.
//!
//! Mobile agents are indexed so a scheduler can address them; the protocol
//! step functions only ever see states, never indices.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocols::{
    flip_step, gros_bst_step, gros_mobile_step, timeopt_step, FlipBst, GrosBst, ProtocolError, ProtocolId, TimeOptBst,
    SINK,
};
use crate::schedulers::{Scheduler, SchedulerError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid interaction pair {pair:?} for a population of {n}")]
    InvalidPair { pair: InteractionPair, n: usize },
    #[error("protocol {protocol} cannot act on {found} states")]
    TagMismatch { protocol: ProtocolId, found: &'static str },
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("invalid stop condition: {0}")]
    InvalidStop(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MobileState {
    Bit(u8),
    /// Name `0` is the sink.
    Name(u32),
}

impl MobileState {
    pub fn tag_name(&self) -> &'static str {
        match self {
            MobileState::Bit(_) => "bit",
            MobileState::Name(_) => "name",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BstState {
    TimeOpt(TimeOptBst),
    Flip(FlipBst),
    Gros(GrosBst),
}

impl BstState {
    /// Initial BST for `protocol`; `p` is only read by the naming protocol.
    pub fn initial(protocol: ProtocolId, p: u32) -> Self {
        match protocol {
            ProtocolId::TimeOpt => BstState::TimeOpt(TimeOptBst::new()),
            ProtocolId::Flip => BstState::Flip(FlipBst::new()),
            ProtocolId::GrosNaming => BstState::Gros(GrosBst::new(p)),
        }
    }

    pub fn protocol(&self) -> ProtocolId {
        match self {
            BstState::TimeOpt(_) => ProtocolId::TimeOpt,
            BstState::Flip(_) => ProtocolId::Flip,
            BstState::Gros(_) => ProtocolId::GrosNaming,
        }
    }

    /// Size estimate `c` of the counting protocols.
    pub fn estimate(&self) -> Option<u64> {
        match self {
            BstState::TimeOpt(b) => Some(b.c),
            BstState::Flip(b) => Some(b.c),
            BstState::Gros(_) => None,
        }
    }

    /// `(c0, c1)` of the counting protocols.
    pub fn mark_counts(&self) -> Option<(u64, u64)> {
        match self {
            BstState::TimeOpt(b) => Some((b.c0, b.c1)),
            BstState::Flip(b) => Some((b.c0, b.c1)),
            BstState::Gros(_) => None,
        }
    }
}

/// BST state plus the ordered states of the `n` mobile agents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    bst: BstState,
    mobiles: Vec<MobileState>,
}

impl Configuration {
    pub fn new(bst: BstState, mobiles: Vec<MobileState>) -> Result<Self, EngineError> {
        if mobiles.is_empty() {
            return Err(EngineError::InvalidConfiguration("population must have at least one mobile agent".into()));
        }
        let protocol = bst.protocol();
        for (i, m) in mobiles.iter().enumerate() {
            match (m, &bst) {
                (MobileState::Bit(b), BstState::TimeOpt(_) | BstState::Flip(_)) => {
                    if *b > 1 {
                        return Err(EngineError::InvalidConfiguration(format!("agent {i} has mark {b}")));
                    }
                }
                (MobileState::Name(s), BstState::Gros(g)) => {
                    if *s >= g.p {
                        return Err(EngineError::InvalidConfiguration(format!(
                            "agent {i} has name {s}, outside 0..{}",
                            g.p
                        )));
                    }
                }
                _ => return Err(EngineError::TagMismatch { protocol, found: m.tag_name() }),
            }
        }
        if let BstState::Gros(g) = bst {
            if g.p < 2 || g.k == 0 {
                return Err(EngineError::InvalidConfiguration(format!(
                    "naming BST needs P >= 2 and k >= 1, got {g:?}"
                )));
            }
        }
        Ok(Configuration { bst, mobiles })
    }

    /// Fresh BST of a bit protocol with the given marks.
    pub fn with_marks(protocol: ProtocolId, marks: &[u8]) -> Result<Self, EngineError> {
        if !protocol.uses_bits() {
            return Err(EngineError::TagMismatch { protocol, found: "bit" });
        }
        Self::new(BstState::initial(protocol, 0), marks.iter().map(|&b| MobileState::Bit(b)).collect())
    }

    /// Fresh naming BST with bound `p` and the given names.
    pub fn with_names(p: u32, names: &[u32]) -> Result<Self, EngineError> {
        Self::new(BstState::Gros(GrosBst::new(p)), names.iter().map(|&s| MobileState::Name(s)).collect())
    }

    pub fn bst(&self) -> &BstState {
        &self.bst
    }

    pub fn mobiles(&self) -> &[MobileState] {
        &self.mobiles
    }

    pub fn n(&self) -> usize {
        self.mobiles.len()
    }

    pub fn protocol(&self) -> ProtocolId {
        self.bst.protocol()
    }

    /// Marks of a bit configuration.
    pub fn marks(&self) -> Option<Vec<u8>> {
        self.mobiles
            .iter()
            .map(|m| match m {
                MobileState::Bit(b) => Some(*b),
                MobileState::Name(_) => None,
            })
            .collect()
    }

    /// Names of a naming configuration.
    pub fn names(&self) -> Option<Vec<u32>> {
        self.mobiles
            .iter()
            .map(|m| match m {
                MobileState::Name(s) => Some(*s),
                MobileState::Bit(_) => None,
            })
            .collect()
    }

    pub fn ones(&self) -> usize {
        self.mobiles.iter().filter(|m| matches!(m, MobileState::Bit(1))).count()
    }
}

/// Either the BST with one mobile agent (BST always first), or two distinct
/// mobile agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InteractionPair {
    Bst(usize),
    Mobiles(usize, usize),
}

impl fmt::Display for InteractionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InteractionPair::Bst(i) => write!(f, "(BST, {i})"),
            InteractionPair::Mobiles(i, j) => write!(f, "({i}, {j})"),
        }
    }
}

/// What one interaction did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepEffect {
    pub non_null: bool,
    pub involved_bst: bool,
}

/// Successor configuration of a single interaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub config: Configuration,
    pub non_null: bool,
    pub involved_bst: bool,
}

fn check_pair(pair: InteractionPair, n: usize) -> Result<(), EngineError> {
    let ok = match pair {
        InteractionPair::Bst(i) => i < n,
        InteractionPair::Mobiles(i, j) => i < n && j < n && i != j,
    };
    if ok {
        Ok(())
    } else {
        Err(EngineError::InvalidPair { pair, n })
    }
}

fn mismatch(protocol: ProtocolId, m: &MobileState) -> EngineError {
    EngineError::TagMismatch { protocol, found: m.tag_name() }
}

/// Applies `protocol`'s rule to `pair` in place. On error `config` is unchanged.
pub fn apply_in_place(
    protocol: ProtocolId,
    config: &mut Configuration,
    pair: InteractionPair,
) -> Result<StepEffect, EngineError> {
    check_pair(pair, config.mobiles.len())?;
    if config.bst.protocol() != protocol {
        return Err(EngineError::TagMismatch { protocol, found: config.bst.protocol().as_str() });
    }
    match pair {
        InteractionPair::Bst(i) => {
            let agent = config.mobiles[i];
            let non_null = match (&mut config.bst, agent) {
                (BstState::TimeOpt(bst), MobileState::Bit(b)) => {
                    let (next, nb) = timeopt_step(*bst, b);
                    let changed = next != *bst || nb != b;
                    *bst = next;
                    config.mobiles[i] = MobileState::Bit(nb);
                    changed
                }
                (BstState::Flip(bst), MobileState::Bit(b)) => {
                    let (next, nb) = flip_step(*bst, b);
                    let changed = next != *bst || nb != b;
                    *bst = next;
                    config.mobiles[i] = MobileState::Bit(nb);
                    changed
                }
                (BstState::Gros(bst), MobileState::Name(s)) => {
                    let (next, ns) = gros_bst_step(*bst, s)?;
                    let changed = next != *bst || ns != s;
                    *bst = next;
                    config.mobiles[i] = MobileState::Name(ns);
                    changed
                }
                (_, other) => return Err(mismatch(protocol, &other)),
            };
            Ok(StepEffect { non_null, involved_bst: true })
        }
        InteractionPair::Mobiles(i, j) => {
            let (a, b) = (config.mobiles[i], config.mobiles[j]);
            let non_null = match (protocol, a, b) {
                // no mobile-mobile rules: null by default
                (ProtocolId::TimeOpt | ProtocolId::Flip, MobileState::Bit(_), MobileState::Bit(_)) => false,
                (ProtocolId::GrosNaming, MobileState::Name(s1), MobileState::Name(s2)) => {
                    let (t1, t2) = gros_mobile_step(s1, s2);
                    config.mobiles[i] = MobileState::Name(t1);
                    config.mobiles[j] = MobileState::Name(t2);
                    (t1, t2) != (s1, s2)
                }
                (ProtocolId::GrosNaming, MobileState::Bit(_), _) | (_, MobileState::Name(_), _) => {
                    return Err(mismatch(protocol, &a))
                }
                (_, _, other) => return Err(mismatch(protocol, &other)),
            };
            Ok(StepEffect { non_null, involved_bst: false })
        }
    }
}

/// Pure form of [`apply_in_place`].
pub fn apply_interaction(
    protocol: ProtocolId,
    config: &Configuration,
    pair: InteractionPair,
) -> Result<Interaction, EngineError> {
    let mut next = config.clone();
    let effect = apply_in_place(protocol, &mut next, pair)?;
    Ok(Interaction { config: next, non_null: effect.non_null, involved_bst: effect.involved_bst })
}

fn bits_silent(bst: &BstState, has_zero: bool, has_one: bool) -> bool {
    [(0u8, has_zero), (1u8, has_one)].into_iter().filter(|&(_, present)| present).all(|(b, _)| match bst {
        BstState::TimeOpt(s) => timeopt_step(*s, b) == (*s, b),
        BstState::Flip(s) => flip_step(*s, b) == (*s, b),
        BstState::Gros(_) => false,
    })
}

/// True iff every possible pair is a null transition.
pub fn is_silent(protocol: ProtocolId, config: &Configuration) -> bool {
    if config.protocol() != protocol {
        return false;
    }
    match config.bst {
        BstState::Gros(g) => {
            let mut seen = vec![false; g.p as usize];
            for m in &config.mobiles {
                let MobileState::Name(s) = *m else { return false };
                if s == SINK || seen[s as usize] {
                    return false;
                }
                seen[s as usize] = true;
            }
            true
        }
        _ => {
            let ones = config.ones();
            bits_silent(&config.bst, ones < config.n(), ones > 0)
        }
    }
}

/// Brute-force [`is_silent`]: tries every unordered pair.
pub fn is_silent_exhaustive(protocol: ProtocolId, config: &Configuration) -> bool {
    let n = config.n();
    let bst_pairs = (0..n).map(InteractionPair::Bst);
    let mobile_pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| InteractionPair::Mobiles(i, j)));
    bst_pairs.chain(mobile_pairs).all(|pair| match apply_interaction(protocol, config, pair) {
        Ok(step) => !step.non_null,
        // a rule that fires but cannot complete (name overflow) is not a null transition
        Err(_) => false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopKind {
    /// Stop at the first interaction after which the BST estimate equals `n`.
    CountReachesN,
    /// Stop at the first configuration from which no pair is non-null.
    Silence,
    /// Run until the limit, with no convergence predicate.
    MaxInteractions,
}

/// Which counter the run budget applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitMetric {
    Interactions,
    BstInteractions,
    NonNull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limit {
    pub metric: LimitMetric,
    pub bound: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopCondition {
    pub kind: StopKind,
    pub limit: Limit,
}

impl StopCondition {
    pub fn new(kind: StopKind, metric: LimitMetric, bound: u64) -> Result<Self, EngineError> {
        if bound == 0 {
            return Err(EngineError::InvalidStop("budget must be positive".into()));
        }
        Ok(StopCondition { kind, limit: Limit { metric, bound } })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunOutcome {
    Converged,
    /// The budget ran out before the convergence predicate held.
    BudgetExhausted,
    /// A `MaxInteractions` run used its whole budget.
    Completed,
}

/// Per-execution metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub total_interactions: u64,
    pub bst_interactions: u64,
    pub non_null_transitions: u64,
    pub converged_at_interaction: Option<u64>,
    pub converged_at_bst_interaction: Option<u64>,
    pub converged_at_non_null: Option<u64>,
    /// BST estimate `c`; for the naming protocol, the number of distinct names held.
    pub final_c: u64,
    /// Phase switches of the phased protocol.
    pub phase_switches: u64,
    /// Steps at which a soundness invariant failed (see [`Execution`]).
    pub invariant_violations: u64,
    pub outcome: RunOutcome,
}

impl RunRecord {
    pub fn converged(&self) -> bool {
        self.outcome == RunOutcome::Converged
    }
}

/// Incremental multiset of names, for O(1) silence detection.
#[derive(Debug, Clone)]
struct NameCensus {
    counts: Vec<u32>,
    zeros: usize,
    repeated: usize,
}

impl NameCensus {
    fn new(p: u32, mobiles: &[MobileState]) -> Self {
        let mut census = NameCensus { counts: vec![0; p as usize], zeros: 0, repeated: 0 };
        for m in mobiles {
            if let MobileState::Name(s) = m {
                census.add(*s);
            }
        }
        census
    }

    fn add(&mut self, s: u32) {
        if s == SINK {
            self.zeros += 1;
            return;
        }
        let c = &mut self.counts[s as usize];
        *c += 1;
        if *c == 2 {
            self.repeated += 1;
        }
    }

    fn remove(&mut self, s: u32) {
        if s == SINK {
            self.zeros -= 1;
            return;
        }
        let c = &mut self.counts[s as usize];
        if *c == 2 {
            self.repeated -= 1;
        }
        *c -= 1;
    }

    fn silent(&self) -> bool {
        self.zeros == 0 && self.repeated == 0
    }

    fn distinct_names(&self) -> u64 {
        self.counts.iter().filter(|&&c| c > 0).count() as u64
    }
}

/// A running execution: the configuration plus metrics and soundness checks.
///
/// For the bit protocols every step checks that `c` never decreases, that
/// `c <= n`, that `c_b <= n_b` for both marks, and (phased protocol) that the
/// phase being left has `c_phase = 0`. Failures are counted in
/// [`RunRecord::invariant_violations`].
#[derive(Debug, Clone)]
pub struct Execution {
    protocol: ProtocolId,
    config: Configuration,
    total: u64,
    bst_interactions: u64,
    non_null: u64,
    phase_switches: u64,
    violations: u64,
    ones: usize,
    census: Option<NameCensus>,
}

impl Execution {
    pub fn new(protocol: ProtocolId, config: Configuration) -> Result<Self, EngineError> {
        if config.protocol() != protocol {
            return Err(EngineError::TagMismatch { protocol, found: config.protocol().as_str() });
        }
        let census = match config.bst {
            BstState::Gros(g) => Some(NameCensus::new(g.p, &config.mobiles)),
            _ => None,
        };
        let ones = config.ones();
        Ok(Execution {
            protocol,
            config,
            total: 0,
            bst_interactions: 0,
            non_null: 0,
            phase_switches: 0,
            violations: 0,
            ones,
            census,
        })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    pub fn protocol(&self) -> ProtocolId {
        self.protocol
    }

    pub fn interactions(&self) -> u64 {
        self.total
    }

    pub fn bst_interactions(&self) -> u64 {
        self.bst_interactions
    }

    pub fn non_null_transitions(&self) -> u64 {
        self.non_null
    }

    pub fn invariant_violations(&self) -> u64 {
        self.violations
    }

    pub fn phase_switches(&self) -> u64 {
        self.phase_switches
    }

    /// Number of 1-marked agents (bit protocols).
    pub fn ones(&self) -> usize {
        self.ones
    }

    pub fn is_silent(&self) -> bool {
        match &self.census {
            Some(c) => c.silent(),
            None => {
                let n = self.config.n();
                bits_silent(&self.config.bst, self.ones < n, self.ones > 0)
            }
        }
    }

    pub fn estimate(&self) -> u64 {
        match &self.census {
            Some(c) => c.distinct_names(),
            None => self.config.bst.estimate().unwrap_or(0),
        }
    }

    fn metric(&self, metric: LimitMetric) -> u64 {
        match metric {
            LimitMetric::Interactions => self.total,
            LimitMetric::BstInteractions => self.bst_interactions,
            LimitMetric::NonNull => self.non_null,
        }
    }

    pub fn step(&mut self, pair: InteractionPair) -> Result<StepEffect, EngineError> {
        let before_bst = self.config.bst;
        let before = match pair {
            InteractionPair::Bst(i) => [self.config.mobiles.get(i).copied(), None],
            InteractionPair::Mobiles(i, j) => {
                [self.config.mobiles.get(i).copied(), self.config.mobiles.get(j).copied()]
            }
        };
        let effect = apply_in_place(self.protocol, &mut self.config, pair)?;
        self.total += 1;
        if effect.involved_bst {
            self.bst_interactions += 1;
        }
        if !effect.non_null {
            return Ok(effect);
        }
        self.non_null += 1;
        let idx = match pair {
            InteractionPair::Bst(i) => [Some(i), None],
            InteractionPair::Mobiles(i, j) => [Some(i), Some(j)],
        };
        for (slot, old) in idx.into_iter().zip(before) {
            let (Some(i), Some(old)) = (slot, old) else { continue };
            let new = self.config.mobiles[i];
            match (old, new, self.census.as_mut()) {
                (MobileState::Bit(a), MobileState::Bit(b), _) if a != b => {
                    if b == 1 {
                        self.ones += 1;
                    } else {
                        self.ones -= 1;
                    }
                }
                (MobileState::Name(a), MobileState::Name(b), Some(census)) if a != b => {
                    census.remove(a);
                    census.add(b);
                }
                _ => {}
            }
        }
        self.check_invariants(&before_bst);
        Ok(effect)
    }

    fn check_invariants(&mut self, before: &BstState) {
        let after = self.config.bst;
        let (Some(c_before), Some(c_after), Some((c0, c1))) =
            (before.estimate(), after.estimate(), after.mark_counts())
        else {
            return;
        };
        let n = self.config.n() as u64;
        let n1 = self.ones as u64;
        let n0 = n - n1;
        let mut ok = c_after >= c_before && c_after <= n && c0 <= n0 && c1 <= n1;
        if let (BstState::TimeOpt(b), BstState::TimeOpt(a)) = (before, &after) {
            if a.phase != b.phase {
                self.phase_switches += 1;
                ok &= a.count(b.phase) == 0;
            }
        }
        if !ok {
            self.violations += 1;
        }
    }

    fn predicate(&self, kind: StopKind) -> bool {
        match kind {
            StopKind::CountReachesN => self.config.bst.estimate() == Some(self.config.n() as u64),
            StopKind::Silence => self.is_silent(),
            StopKind::MaxInteractions => false,
        }
    }

    fn record(&self, outcome: RunOutcome) -> RunRecord {
        let converged = outcome == RunOutcome::Converged;
        RunRecord {
            total_interactions: self.total,
            bst_interactions: self.bst_interactions,
            non_null_transitions: self.non_null,
            converged_at_interaction: converged.then_some(self.total),
            converged_at_bst_interaction: converged.then_some(self.bst_interactions),
            converged_at_non_null: converged.then_some(self.non_null),
            final_c: self.estimate(),
            phase_switches: self.phase_switches,
            invariant_violations: self.violations,
            outcome,
        }
    }

    /// Drives the execution with `scheduler` until `stop` says so.
    pub fn run(&mut self, scheduler: &mut Scheduler, stop: &StopCondition) -> Result<RunRecord, EngineError> {
        if stop.limit.bound == 0 {
            return Err(EngineError::InvalidStop("budget must be positive".into()));
        }
        if stop.kind == StopKind::CountReachesN && self.config.bst.estimate().is_none() {
            return Err(EngineError::InvalidStop(format!("{} has no size estimate; use Silence", self.protocol)));
        }
        if self.predicate(stop.kind) {
            return Ok(self.record(RunOutcome::Converged));
        }
        loop {
            let pair = scheduler.next_pair(&self.config)?;
            let effect = self.step(pair)?;
            // a null step cannot make the predicate true
            if effect.non_null && self.predicate(stop.kind) {
                return Ok(self.record(RunOutcome::Converged));
            }
            if self.metric(stop.limit.metric) >= stop.limit.bound {
                let outcome = if stop.kind == StopKind::MaxInteractions {
                    RunOutcome::Completed
                } else {
                    RunOutcome::BudgetExhausted
                };
                return Ok(self.record(outcome));
            }
        }
    }
}

/// Runs `protocol` from `config` under `scheduler` until `stop`.
pub fn run(
    protocol: ProtocolId,
    scheduler: &mut Scheduler,
    config: Configuration,
    stop: &StopCondition,
) -> Result<(Configuration, RunRecord), EngineError> {
    scheduler.check_compatible(protocol)?;
    let mut exec = Execution::new(protocol, config)?;
    let record = exec.run(scheduler, stop)?;
    Ok((exec.into_config(), record))
}
