//! Monte-Carlo harness: seeded trial batches, summaries, sweeps over `n`, and
//! the targeted estimators behind the convergence claims.
//!
//! Every trial derives its own seeds from the batch seed and its index, so a
//! batch gives the same records whatever the thread count. Summaries are
//! accumulated in exact integer arithmetic for the same reason.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    BstState, Configuration, EngineError, Execution, InteractionPair, Limit, LimitMetric, RunRecord, StopCondition,
    StopKind,
};
use crate::oracle::{flip_expected_closed_form, OracleError};
use crate::protocols::{GrosBst, ProtocolId, TimeOptBst};
use crate::schedulers::{split_seed, Scheduler, SchedulerKind};

/// Largest population for which [`sweep_worst_unnamed`] enumerates starts.
pub const WORST_UNNAMED_MAX_N: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid batch: {0}")]
    InvalidSpec(String),
    #[error("none of the {trials} trials converged within the budget")]
    AllTrialsTruncated { trials: u64 },
    #[error("n = {n} is beyond the enumerable range (max {max})")]
    Intractable { n: usize, max: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// How trial configurations are initialised. Marks for the bit protocols,
/// names for the naming protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitPolicy {
    AllZero,
    AllOne,
    UniformRandomMarks,
    /// Naming protocol only: names `1..n-1` once each plus one sink agent.
    /// Its reduced name set is `{1, …, n-1}`, the start that needs the whole
    /// Gros sequence when `P = n + 1`.
    WorstCaseUnnamed,
    ExplicitVector(Vec<u32>),
}

impl InitPolicy {
    pub fn label(&self) -> String {
        match self {
            InitPolicy::AllZero => "zeros".into(),
            InitPolicy::AllOne => "ones".into(),
            InitPolicy::UniformRandomMarks => "random".into(),
            InitPolicy::WorstCaseUnnamed => "worst".into(),
            InitPolicy::ExplicitVector(v) => {
                let items: Vec<String> = v.iter().map(u32::to_string).collect();
                format!("vector={}", items.join(","))
            }
        }
    }
}

impl fmt::Display for InitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for InitPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zeros" => Ok(InitPolicy::AllZero),
            "ones" => Ok(InitPolicy::AllOne),
            "random" => Ok(InitPolicy::UniformRandomMarks),
            "worst" => Ok(InitPolicy::WorstCaseUnnamed),
            other => {
                let Some(list) = other.strip_prefix("vector=") else {
                    return Err(format!("unknown init `{other}` (expected zeros, ones, random, worst or vector=...)"));
                };
                list.split(',')
                    .map(|x| x.trim().parse::<u32>().map_err(|e| format!("bad vector entry `{x}`: {e}")))
                    .collect::<Result<Vec<_>, _>>()
                    .map(InitPolicy::ExplicitVector)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBatchSpec {
    pub protocol: ProtocolId,
    pub n: usize,
    pub trials: u64,
    pub scheduler: SchedulerKind,
    pub seed: u64,
    pub init: InitPolicy,
    pub stop: StopKind,
    /// `None` picks [`default_budget`].
    pub budget: Option<Limit>,
    /// State bound of the naming protocol; `None` means `n + 1`.
    pub p: Option<u32>,
}

impl TrialBatchSpec {
    /// Batch with the protocol's natural stop predicate and default budget.
    pub fn new(
        protocol: ProtocolId,
        n: usize,
        trials: u64,
        scheduler: SchedulerKind,
        init: InitPolicy,
        seed: u64,
    ) -> Self {
        let stop = if protocol == ProtocolId::GrosNaming { StopKind::Silence } else { StopKind::CountReachesN };
        TrialBatchSpec { protocol, n, trials, scheduler, seed, init, stop, budget: None, p: None }
    }

    pub fn state_bound(&self) -> u32 {
        self.p.unwrap_or(self.n as u32 + 1)
    }

    pub fn stop_condition(&self) -> Result<StopCondition, ExperimentError> {
        let limit = match self.budget {
            Some(l) => l,
            None => default_budget(self.protocol, self.n)?,
        };
        Ok(StopCondition::new(self.stop, limit.metric, limit.bound)?)
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidSpec(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.scheduler == SchedulerKind::WeakAdversarial && self.protocol != ProtocolId::GrosNaming {
            return bad("the adversarial scheduler only drives the naming protocol".into());
        }
        if self.init == InitPolicy::WorstCaseUnnamed && self.protocol != ProtocolId::GrosNaming {
            return bad("init `worst` only applies to the naming protocol".into());
        }
        if self.protocol == ProtocolId::GrosNaming {
            let p = self.state_bound();
            if p < 2 {
                return bad(format!("P = {p} leaves no names"));
            }
            if self.init == InitPolicy::WorstCaseUnnamed && (p as usize) < self.n {
                return bad(format!("init `worst` needs P >= n, got P = {p}"));
            }
        }
        if let InitPolicy::ExplicitVector(v) = &self.init {
            if v.len() != self.n {
                return bad(format!("vector has {} entries but n = {}", v.len(), self.n));
            }
        }
        Ok(())
    }
}

/// Default run budget, an order of magnitude or more above the expected
/// convergence time:
/// * always-flip: `64 u_n` BST interactions;
/// * phased: `64 (6 (n ln n + 1) + n ln (n + 1))` BST interactions;
/// * naming: `16 · 2^n` non-null transitions.
pub fn default_budget(protocol: ProtocolId, n: usize) -> Result<Limit, ExperimentError> {
    let nf = n as f64;
    Ok(match protocol {
        ProtocolId::Flip => {
            let u = flip_expected_closed_form(n as u64)?.to_f64();
            Limit { metric: LimitMetric::BstInteractions, bound: saturating_bound(64.0 * u) }
        }
        ProtocolId::TimeOpt => {
            let streak = 6.0 * (nf * nf.max(1.0).ln() + 1.0);
            Limit {
                metric: LimitMetric::BstInteractions,
                bound: saturating_bound(64.0 * (streak + nf * (nf + 1.0).ln())),
            }
        }
        ProtocolId::GrosNaming => {
            let bound = if n >= 59 { u64::MAX } else { 16u64 << n };
            Limit { metric: LimitMetric::NonNull, bound }
        }
    })
}

fn saturating_bound(x: f64) -> u64 {
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        (x.ceil() as u64).max(1)
    }
}

/// Start configuration of one trial.
pub fn initial_configuration(spec: &TrialBatchSpec, rng: &mut impl Rng) -> Result<Configuration, ExperimentError> {
    let n = spec.n;
    let config = if spec.protocol.uses_bits() {
        let marks: Vec<u8> = match &spec.init {
            InitPolicy::AllZero => vec![0; n],
            InitPolicy::AllOne => vec![1; n],
            InitPolicy::UniformRandomMarks => (0..n).map(|_| rng.random_range(0..=1u8)).collect(),
            InitPolicy::ExplicitVector(v) => v
                .iter()
                .map(|&b| u8::try_from(b).ok().filter(|&b| b <= 1))
                .collect::<Option<Vec<u8>>>()
                .ok_or_else(|| ExperimentError::InvalidSpec("marks must be 0 or 1".into()))?,
            InitPolicy::WorstCaseUnnamed => {
                return Err(ExperimentError::InvalidSpec("init `worst` only applies to the naming protocol".into()))
            }
        };
        Configuration::with_marks(spec.protocol, &marks)?
    } else {
        let p = spec.state_bound();
        let names: Vec<u32> = match &spec.init {
            InitPolicy::AllZero => vec![0; n],
            InitPolicy::AllOne => vec![1; n],
            InitPolicy::UniformRandomMarks => (0..n).map(|_| rng.random_range(0..p)).collect(),
            InitPolicy::WorstCaseUnnamed => worst_unnamed_start(n),
            InitPolicy::ExplicitVector(v) => v.clone(),
        };
        Configuration::new(
            BstState::Gros(GrosBst::new(p)),
            names.into_iter().map(crate::engine::MobileState::Name).collect(),
        )?
    };
    Ok(config)
}

/// Names `1, …, n-1` followed by one sink agent.
pub fn worst_unnamed_start(n: usize) -> Vec<u32> {
    (1..n as u32).chain(std::iter::once(0)).collect()
}

/// Runs trial `index` of `spec`.
pub fn run_trial(spec: &TrialBatchSpec, index: u64) -> Result<RunRecord, ExperimentError> {
    let trial_seed = split_seed(spec.seed, index);
    let mut init_rng = ChaCha8Rng::seed_from_u64(split_seed(trial_seed, 1));
    let config = initial_configuration(spec, &mut init_rng)?;
    let mut scheduler = Scheduler::new(spec.scheduler, split_seed(trial_seed, 0));
    scheduler.check_compatible(spec.protocol).map_err(EngineError::from)?;
    let stop = spec.stop_condition()?;
    let mut exec = Execution::new(spec.protocol, config)?;
    Ok(exec.run(&mut scheduler, &stop)?)
}

/// Order-independent accumulator of one integer metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MetricAccumulator {
    count: u64,
    sum: u128,
    sum_sq: u128,
    min: u64,
    max: u64,
}

impl MetricAccumulator {
    pub fn push(&mut self, x: u64) {
        if self.count == 0 {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        self.count += 1;
        self.sum += u128::from(x);
        self.sum_sq += u128::from(x) * u128::from(x);
    }

    pub fn merge(mut self, other: Self) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn summary(&self) -> MetricSummary {
        if self.count == 0 {
            return MetricSummary::default();
        }
        let n = self.count as f64;
        let mean = self.sum as f64 / n;
        let stddev = if self.count > 1 {
            // exact numerator N·Σx² − (Σx)² before the one rounding step
            let num = u128::from(self.count) * self.sum_sq - self.sum * self.sum;
            (num as f64 / (n * (n - 1.0))).sqrt()
        } else {
            0.0
        };
        MetricSummary { mean, stddev, standard_error: stddev / n.sqrt(), min: self.min, max: self.max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub stddev: f64,
    pub standard_error: f64,
    pub min: u64,
    pub max: u64,
}

/// Statistics over the converged trials of a batch (all trials for
/// `MaxInteractions` batches).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub trials: u64,
    pub converged: u64,
    pub truncated: u64,
    pub bst_interactions: MetricSummary,
    pub total_interactions: MetricSummary,
    pub non_null_transitions: MetricSummary,
    /// Mean phase switches per converged trial (phased protocol); informational.
    pub mean_phase_switches: f64,
    pub invariant_violations: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct BatchAccumulator {
    trials: u64,
    truncated: u64,
    bst: MetricAccumulator,
    total: MetricAccumulator,
    non_null: MetricAccumulator,
    phase_switches: u128,
    violations: u64,
}

impl BatchAccumulator {
    fn push(&mut self, r: &RunRecord, include_unconverged: bool) {
        self.trials += 1;
        self.violations += r.invariant_violations;
        let (bst, total, nn) =
            match (r.converged_at_bst_interaction, r.converged_at_interaction, r.converged_at_non_null) {
                (Some(b), Some(t), Some(nn)) => (b, t, nn),
                _ if include_unconverged => (r.bst_interactions, r.total_interactions, r.non_null_transitions),
                _ => {
                    self.truncated += 1;
                    return;
                }
            };
        self.bst.push(bst);
        self.total.push(total);
        self.non_null.push(nn);
        self.phase_switches += u128::from(r.phase_switches);
    }

    fn merge(self, o: Self) -> Self {
        BatchAccumulator {
            trials: self.trials + o.trials,
            truncated: self.truncated + o.truncated,
            bst: self.bst.merge(o.bst),
            total: self.total.merge(o.total),
            non_null: self.non_null.merge(o.non_null),
            phase_switches: self.phase_switches + o.phase_switches,
            violations: self.violations + o.violations,
        }
    }

    fn finish(self) -> Result<Summary, ExperimentError> {
        let converged = self.bst.count;
        if converged == 0 {
            return Err(ExperimentError::AllTrialsTruncated { trials: self.trials });
        }
        Ok(Summary {
            trials: self.trials,
            converged,
            truncated: self.truncated,
            bst_interactions: self.bst.summary(),
            total_interactions: self.total.summary(),
            non_null_transitions: self.non_null.summary(),
            mean_phase_switches: self.phase_switches as f64 / converged as f64,
            invariant_violations: self.violations,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub summary: Summary,
    pub records: Vec<RunRecord>,
}

/// Runs every trial and keeps the per-trial records.
pub fn run_batch(spec: &TrialBatchSpec) -> Result<BatchResult, ExperimentError> {
    spec.validate()?;
    spec.stop_condition()?;
    let records = (0..spec.trials).into_par_iter().map(|i| run_trial(spec, i)).collect::<Result<Vec<_>, _>>()?;
    let include_all = spec.stop == StopKind::MaxInteractions;
    let mut acc = BatchAccumulator::default();
    for r in &records {
        acc.push(r, include_all);
    }
    Ok(BatchResult { summary: acc.finish()?, records })
}

/// Same statistics as [`run_batch`] without keeping the records.
pub fn run_batch_summary(spec: &TrialBatchSpec) -> Result<Summary, ExperimentError> {
    spec.validate()?;
    spec.stop_condition()?;
    let include_all = spec.stop == StopKind::MaxInteractions;
    let acc = (0..spec.trials)
        .into_par_iter()
        .try_fold(BatchAccumulator::default, |mut acc, i| {
            acc.push(&run_trial(spec, i)?, include_all);
            Ok::<_, ExperimentError>(acc)
        })
        .try_reduce(BatchAccumulator::default, |a, b| Ok(a.merge(b)))?;
    acc.finish()
}

/// One batch per `n`, each seeded from the template seed and `n`.
pub fn sweep_n(template: &TrialBatchSpec, n_values: &[usize]) -> Result<Vec<(usize, Summary)>, ExperimentError> {
    if n_values.is_empty() {
        return Err(ExperimentError::InvalidSpec("sweep needs at least one n".into()));
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::InvalidSpec("sweep values must be strictly ascending".into()));
    }
    n_values
        .iter()
        .map(|&n| {
            let spec = TrialBatchSpec { n, seed: split_seed(template.seed, n as u64), ..template.clone() };
            run_batch_summary(&spec).map(|s| (n, s))
        })
        .collect()
}

/// Frequency with which a fresh zero phase over `n` zero-marked agents ends
/// with every agent marked 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllFlipEstimate {
    pub n: usize,
    pub trials: u64,
    pub successes: u64,
    pub frequency: f64,
    pub standard_error: f64,
    pub invariant_violations: u64,
}

/// Starts the phased protocol with a fresh BST (`c0 = c1 = 0`, zero phase)
/// and all `n` agents marked 0, runs until the first phase switch, and counts
/// the trials in which no 0-marked agent is left at that moment.
pub fn estimate_allflip_probability(n: usize, trials: u64, seed: u64) -> Result<AllFlipEstimate, ExperimentError> {
    if n < 2 {
        return Err(ExperimentError::InvalidSpec("all-flip estimate needs n >= 2".into()));
    }
    if trials == 0 {
        return Err(ExperimentError::InvalidSpec("trials must be at least 1".into()));
    }
    let (successes, violations) = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(u64, u64), ExperimentError> {
            let config = Configuration::with_marks(ProtocolId::TimeOpt, &vec![0; n])?;
            let mut exec = Execution::new(ProtocolId::TimeOpt, config)?;
            let mut sched = Scheduler::new(SchedulerKind::BstOnly, split_seed(seed, i));
            loop {
                let pair = sched.next_pair(exec.config()).map_err(EngineError::from)?;
                exec.step(pair)?;
                if let BstState::TimeOpt(TimeOptBst { phase: 1, .. }) = exec.config().bst() {
                    break;
                }
            }
            Ok((u64::from(exec.ones() == n), exec.invariant_violations()))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let frequency = successes as f64 / trials as f64;
    Ok(AllFlipEstimate {
        n,
        trials,
        successes,
        frequency,
        standard_error: (frequency * (1.0 - frequency) / trials as f64).sqrt(),
        invariant_violations: violations,
    })
}

/// Result of running the adversarial schedule from every reduced unnamed start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorstUnnamed {
    pub n: usize,
    pub p: u32,
    pub starts: u64,
    /// Reduced name set of the slowest start, ascending.
    pub worst_start: Vec<u32>,
    pub worst_non_null: u64,
    /// BST namings on the slowest start.
    pub worst_namings: u64,
    /// Starts whose silent terminal configuration is not `n` distinct nonzero names.
    pub terminal_violations: u64,
    /// Starts that did not fall silent within `16 · 2^n` non-null transitions.
    pub truncated: u64,
}

/// Configuration with reduced name set `mask` (bit `j` stands for name `j+1`),
/// padded with sink agents to `n`.
pub fn reduced_start(n: usize, mask: u64) -> Vec<u32> {
    let mut names: Vec<u32> = (0..n as u32).filter(|j| mask >> j & 1 == 1).map(|j| j + 1).collect();
    names.resize(n, 0);
    names
}

/// Runs the adversarial naming schedule from each of the `2^n - 1` reduced
/// unnamed starts of `n = P - 1` agents and returns the slowest.
pub fn sweep_worst_unnamed(n: usize, p: u32) -> Result<WorstUnnamed, ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::InvalidSpec("n must be at least 1".into()));
    }
    if n > WORST_UNNAMED_MAX_N {
        return Err(ExperimentError::Intractable { n, max: WORST_UNNAMED_MAX_N });
    }
    if p as usize != n + 1 {
        return Err(ExperimentError::InvalidSpec(format!("sweep requires P = n + 1, got n = {n}, P = {p}")));
    }
    let full = (1u64 << n) - 1;
    let budget = default_budget(ProtocolId::GrosNaming, n)?;
    let stop = StopCondition::new(StopKind::Silence, budget.metric, budget.bound)?;
    let outcomes = (0..full)
        .into_par_iter()
        .map(|mask| -> Result<(u64, u64, u64, bool, bool), ExperimentError> {
            let config = Configuration::with_names(p, &reduced_start(n, mask))?;
            let mut exec = Execution::new(ProtocolId::GrosNaming, config)?;
            let mut sched = Scheduler::new(SchedulerKind::WeakAdversarial, 0);
            let record = exec.run(&mut sched, &stop)?;
            let mut names = exec.config().names().unwrap_or_default();
            names.sort_unstable();
            names.dedup();
            let named = names.len() == n && names.first().is_some_and(|&s| s != 0);
            Ok((mask, record.non_null_transitions, record.bst_interactions, named, record.converged()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut worst = (0u64, 0u64, 0u64);
    let (mut violations, mut truncated) = (0, 0);
    for (mask, nn, namings, named, converged) in outcomes {
        if nn > worst.1 {
            worst = (mask, nn, namings);
        }
        violations += u64::from(!named);
        truncated += u64::from(!converged);
    }
    let mut worst_start: Vec<u32> = reduced_start(n, worst.0).into_iter().filter(|&s| s != 0).collect();
    worst_start.sort_unstable();
    Ok(WorstUnnamed {
        n,
        p,
        starts: full,
        worst_start,
        worst_non_null: worst.1,
        worst_namings: worst.2,
        terminal_violations: violations,
        truncated,
    })
}

/// Pair sequence helper for tests and tools: replays `pairs` on `config`.
pub fn replay(
    protocol: ProtocolId,
    config: Configuration,
    pairs: &[InteractionPair],
) -> Result<Execution, ExperimentError> {
    let mut exec = Execution::new(protocol, config)?;
    for &pair in pairs {
        exec.step(pair)?;
    }
    Ok(exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_policy_parsing() {
        assert_eq!("zeros".parse::<InitPolicy>().unwrap(), InitPolicy::AllZero);
        assert_eq!("vector=0,1,1".parse::<InitPolicy>().unwrap(), InitPolicy::ExplicitVector(vec![0, 1, 1]));
        assert!("vector=0,x".parse::<InitPolicy>().is_err());
        assert!("bogus".parse::<InitPolicy>().is_err());
        for s in ["zeros", "ones", "random", "worst", "vector=3,0,2"] {
            assert_eq!(s.parse::<InitPolicy>().unwrap().label(), s);
        }
    }

    #[test]
    fn accumulator_statistics() {
        let mut acc = MetricAccumulator::default();
        for x in [2u64, 4, 4, 4, 5, 5, 7, 9] {
            acc.push(x);
        }
        let s = acc.summary();
        assert_eq!(s.mean, 5.0);
        assert!((s.stddev - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert!((s.standard_error - s.stddev / 8f64.sqrt()).abs() < 1e-15);
        assert_eq!((s.min, s.max), (2, 9));
        let mut a = MetricAccumulator::default();
        let mut b = MetricAccumulator::default();
        for x in [2u64, 4, 4] {
            a.push(x);
        }
        for x in [4u64, 5, 5, 7, 9] {
            b.push(x);
        }
        assert_eq!(a.merge(b), acc);
        assert_eq!(b.merge(a), acc);
    }

    #[test]
    fn flip_single_agent_batch() {
        for init in [InitPolicy::AllZero, InitPolicy::AllOne, InitPolicy::UniformRandomMarks] {
            let spec = TrialBatchSpec::new(ProtocolId::Flip, 1, 50, SchedulerKind::BstOnly, init, 3);
            let batch = run_batch(&spec).unwrap();
            assert!(batch.records.iter().all(|r| r.converged_at_bst_interaction == Some(1)));
            assert_eq!(batch.summary.bst_interactions.mean, 1.0);
        }
    }

    #[test]
    fn flip_three_agents_match_oracle() {
        let spec = TrialBatchSpec::new(ProtocolId::Flip, 3, 100_000, SchedulerKind::BstOnly, InitPolicy::AllZero, 17);
        let s = run_batch_summary(&spec).unwrap();
        assert_eq!(s.truncated, 0);
        let m = s.bst_interactions;
        assert!((m.mean - 10.0).abs() <= 3.0 * m.standard_error, "mean {} se {}", m.mean, m.standard_error);
        assert_eq!(s.invariant_violations, 0);
    }

    #[test]
    fn batch_is_deterministic_and_summary_matches_records() {
        let spec =
            TrialBatchSpec::new(ProtocolId::TimeOpt, 6, 300, SchedulerKind::BstOnly, InitPolicy::UniformRandomMarks, 8);
        let a = run_batch(&spec).unwrap();
        let b = run_batch(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(run_batch_summary(&spec).unwrap(), a.summary);
        let s = &a.summary;
        for m in [s.bst_interactions, s.total_interactions, s.non_null_transitions] {
            assert!(m.min as f64 <= m.mean && m.mean <= m.max as f64);
        }
    }

    #[test]
    fn gros_worst_start_reaches_lower_bound() {
        let mut spec = TrialBatchSpec::new(
            ProtocolId::GrosNaming,
            3,
            1,
            SchedulerKind::WeakAdversarial,
            InitPolicy::WorstCaseUnnamed,
            0,
        );
        spec.p = Some(4);
        let batch = run_batch(&spec).unwrap();
        let r = &batch.records[0];
        assert!(r.non_null_transitions >= 7);
        assert_eq!(r.bst_interactions, 7);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let ok = TrialBatchSpec::new(ProtocolId::Flip, 3, 10, SchedulerKind::BstOnly, InitPolicy::AllZero, 0);
        for spec in [
            TrialBatchSpec { n: 0, ..ok.clone() },
            TrialBatchSpec { trials: 0, ..ok.clone() },
            TrialBatchSpec { scheduler: SchedulerKind::WeakAdversarial, ..ok.clone() },
            TrialBatchSpec { init: InitPolicy::WorstCaseUnnamed, ..ok.clone() },
            TrialBatchSpec { init: InitPolicy::ExplicitVector(vec![0, 1]), ..ok.clone() },
        ] {
            assert!(matches!(run_batch(&spec), Err(ExperimentError::InvalidSpec(_))), "{spec:?}");
        }
        let bad_marks = TrialBatchSpec { init: InitPolicy::ExplicitVector(vec![0, 2, 1]), ..ok };
        assert!(run_batch(&bad_marks).is_err());
    }

    #[test]
    fn truncated_batches_are_reported() {
        let mut spec = TrialBatchSpec::new(ProtocolId::Flip, 10, 5, SchedulerKind::BstOnly, InitPolicy::AllZero, 0);
        spec.budget = Some(Limit { metric: LimitMetric::BstInteractions, bound: 3 });
        assert_eq!(run_batch(&spec), Err(ExperimentError::AllTrialsTruncated { trials: 5 }));
    }

    #[test]
    fn sweep_validates_values() {
        let spec = TrialBatchSpec::new(ProtocolId::Flip, 1, 10, SchedulerKind::BstOnly, InitPolicy::AllZero, 0);
        assert!(sweep_n(&spec, &[]).is_err());
        assert!(sweep_n(&spec, &[3, 2]).is_err());
        let out = sweep_n(&spec, &[1, 2]).unwrap();
        assert_eq!(out.iter().map(|(n, _)| *n).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn allflip_small_cases() {
        let e = estimate_allflip_probability(2, 20_000, 1).unwrap();
        assert!(e.frequency >= 0.5 - 3.0 * e.standard_error);
        assert_eq!(e.invariant_violations, 0);
        assert!(estimate_allflip_probability(1, 10, 1).is_err());
    }

    #[test]
    fn worst_unnamed_small() {
        let w = sweep_worst_unnamed(1, 2).unwrap();
        assert_eq!(w.starts, 1);
        assert!(w.worst_non_null >= 1);
        let w = sweep_worst_unnamed(3, 4).unwrap();
        assert!(w.worst_non_null >= 7 && w.worst_non_null <= 16, "{w:?}");
        assert_eq!(w.terminal_violations, 0);
        assert!(sweep_worst_unnamed(3, 5).is_err());
        assert!(matches!(sweep_worst_unnamed(17, 18), Err(ExperimentError::Intractable { .. })));
    }

    #[test]
    fn reduced_start_layout() {
        assert_eq!(reduced_start(4, 0b0101), vec![1, 3, 0, 0]);
        assert_eq!(reduced_start(3, 0), vec![0, 0, 0]);
        assert_eq!(worst_unnamed_start(4), vec![1, 2, 3, 0]);
    }
}
