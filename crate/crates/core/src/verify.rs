//! The acceptance suite behind `popcount verify`.
//!
//! Each criterion runs a seeded experiment or an exact oracle check and
//! reports pass/fail with observed and expected values. The rendered report
//! is a pure function of the level and seed: no timings, no thread-count
//! dependence. Wall-clock times are kept on the side for callers that enforce
//! runtime budgets.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::experiments::{
    estimate_allflip_probability, run_batch, sweep_n, sweep_worst_unnamed, ExperimentError, InitPolicy, Summary,
    TrialBatchSpec,
};
use crate::oracle::{
    flip_expected_closed_form, flip_expected_recurrence, gros_length, gros_sequence, gros_term, harmonic_bound,
    timeopt_exact_expected, ExactRational,
};
use crate::protocols::ProtocolId;
use crate::schedulers::{split_seed, SchedulerKind, RNG_ALGORITHM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Reduced sizes, about a minute on one core.
    Fast,
    /// Every criterion at its stated size, plus the supplementary checks.
    Full,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Fast => "fast",
            Level::Full => "full",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(format!("unknown level `{other}` (expected fast or full)")),
        }
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    /// `"1"` … `"11"` for acceptance criteria, `"S1"` … for supplementary checks.
    pub id: String,
    pub name: &'static str,
    pub passed: bool,
    /// Observed against expected values; on failure it names what broke.
    pub detail: String,
    /// Supplementary checks are reported but do not decide the exit status.
    pub gating: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub level: Level,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl Report {
    /// Whether every gating check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gating).all(|c| c.passed)
    }

    pub fn check(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// Deterministic text table (no timings).
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "popcount verify level={} seed={} rng={}", self.level, self.seed, RNG_ALGORITHM);
        for c in &self.checks {
            let status = match (c.passed, c.gating) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "WARN",
            };
            let _ = writeln!(out, "{:<4} {:<4} {:<34} {}", c.id, status, c.name, c.detail);
        }
        let gating = self.checks.iter().filter(|c| c.gating).count();
        let passed = self.checks.iter().filter(|c| c.gating && c.passed).count();
        let _ = writeln!(out, "result: {passed}/{gating} criteria passed");
        out
    }
}

/// Problem sizes per level.
#[derive(Debug, Clone)]
struct Sizes {
    flip_n: Vec<usize>,
    flip_trials: u64,
    timeopt_n: Vec<usize>,
    timeopt_trials: u64,
    lower_bound_n: Vec<usize>,
    allflip_n: Vec<usize>,
    allflip_trials: u64,
    exact_trials: u64,
    worst_n: Vec<usize>,
}

impl Sizes {
    fn for_level(level: Level) -> Self {
        match level {
            Level::Full => Sizes {
                flip_n: (2..=12).collect(),
                flip_trials: 10_000,
                timeopt_n: vec![8, 16, 32, 64, 128, 256],
                timeopt_trials: 1_000,
                lower_bound_n: vec![16, 64, 256],
                allflip_n: vec![2, 8, 32],
                allflip_trials: 100_000,
                exact_trials: 1_000_000,
                worst_n: (2..=12).collect(),
            },
            Level::Fast => Sizes {
                flip_n: (2..=8).collect(),
                flip_trials: 2_000,
                timeopt_n: vec![8, 16, 32, 64],
                timeopt_trials: 200,
                lower_bound_n: vec![16, 64],
                allflip_n: vec![2, 8, 32],
                allflip_trials: 10_000,
                exact_trials: 100_000,
                worst_n: (2..=10).collect(),
            },
        }
    }
}

type Outcome = Result<(bool, String), ExperimentError>;

/// Shared state between criteria: later criteria reuse earlier data.
struct Suite {
    level: Level,
    seed: u64,
    sizes: Sizes,
    timeopt: Vec<(usize, Summary)>,
    simulated_violations: u64,
    terminal_violations: Option<u64>,
}

impl Suite {
    fn seed_for(&self, id: u64) -> u64 {
        split_seed(self.seed, id)
    }

    fn oracle_identity(&mut self) -> Outcome {
        for n in 1..=64u64 {
            let closed = flip_expected_closed_form(n)?;
            let rec = flip_expected_recurrence(n)?;
            if closed != rec {
                return Ok((false, format!("n = {n}: closed form {closed} != recurrence {rec}")));
            }
        }
        let u64_value = flip_expected_closed_form(64)?;
        Ok((true, format!("equal for n = 1..64 (u_64 ≈ {:.6e})", u64_value.to_f64())))
    }

    fn flip_vs_oracle(&mut self) -> Outcome {
        let template = TrialBatchSpec::new(
            ProtocolId::Flip,
            2,
            self.sizes.flip_trials,
            SchedulerKind::BstOnly,
            InitPolicy::AllZero,
            self.seed_for(2),
        );
        let rows = sweep_n(&template, &self.sizes.flip_n)?;
        let mut worst = (0usize, 0.0f64);
        let mut failures = Vec::new();
        for (n, s) in &rows {
            self.simulated_violations += s.invariant_violations;
            let u = flip_expected_closed_form(*n as u64)?.to_f64();
            let m = &s.bst_interactions;
            let tol = (3.0 * m.standard_error).max(0.02 * u);
            let dev = (m.mean - u).abs();
            if dev / tol > worst.1 {
                worst = (*n, dev / tol);
            }
            if dev > tol || s.truncated > 0 {
                failures.push(format!(
                    "n = {n}: mean {:.3} vs u_n {:.3} (tolerance {:.3}, truncated {})",
                    m.mean, u, tol, s.truncated
                ));
            }
        }
        if failures.is_empty() {
            Ok((
                true,
                format!(
                    "n = {}..{}, {} trials each; largest deviation {:.2} of tolerance at n = {}",
                    self.sizes.flip_n[0],
                    self.sizes.flip_n[self.sizes.flip_n.len() - 1],
                    self.sizes.flip_trials,
                    worst.1,
                    worst.0
                ),
            ))
        } else {
            Ok((false, failures.join("; ")))
        }
    }

    fn timeopt_scaling(&mut self) -> Outcome {
        let template = TrialBatchSpec::new(
            ProtocolId::TimeOpt,
            8,
            self.sizes.timeopt_trials,
            SchedulerKind::BstOnly,
            InitPolicy::UniformRandomMarks,
            self.seed_for(3),
        );
        self.timeopt = sweep_n(&template, &self.sizes.timeopt_n)?;
        let mut failures = Vec::new();
        for (n, s) in &self.timeopt {
            self.simulated_violations += s.invariant_violations;
            if s.converged != s.trials {
                failures.push(format!("n = {n}: {}/{} converged", s.converged, s.trials));
            }
        }
        let mut ratios = Vec::new();
        for w in self.timeopt.windows(2) {
            let r = w[1].1.bst_interactions.mean / w[0].1.bst_interactions.mean;
            ratios.push(format!("{:.3}", r));
            if !(1.8..=2.7).contains(&r) {
                failures.push(format!("ratio n = {} -> {}: {:.3} outside [1.8, 2.7]", w[0].0, w[1].0, r));
            }
        }
        if failures.is_empty() {
            Ok((true, format!("all trials converged; doubling ratios {} in [1.8, 2.7]", ratios.join(" "))))
        } else {
            Ok((false, failures.join("; ")))
        }
    }

    fn lower_bound(&mut self) -> Outcome {
        let mut parts = Vec::new();
        let mut ok = true;
        for &n in &self.sizes.lower_bound_n {
            let Some((_, s)) = self.timeopt.iter().find(|(m, _)| *m == n) else {
                return Ok((false, format!("no time-opt data for n = {n}")));
            };
            let bound = harmonic_bound(n as u64)?.to_f64();
            let m = &s.bst_interactions;
            let pass = m.mean >= bound - 3.0 * m.standard_error;
            ok &= pass;
            parts.push(format!(
                "n = {n}: mean {:.1} vs nH_n {:.1}{}",
                m.mean,
                bound,
                if pass { "" } else { " (below)" }
            ));
        }
        Ok((ok, parts.join("; ")))
    }

    fn allflip(&mut self) -> Outcome {
        let mut parts = Vec::new();
        let mut ok = true;
        for &n in &self.sizes.allflip_n {
            let e = estimate_allflip_probability(n, self.sizes.allflip_trials, split_seed(self.seed_for(5), n as u64))?;
            self.simulated_violations += e.invariant_violations;
            let pass = e.frequency >= 0.5 - 3.0 * e.standard_error;
            ok &= pass;
            parts.push(format!("n = {n}: {:.5} (SE {:.5})", e.frequency, e.standard_error));
        }
        Ok((ok, format!("{} trials each; {}", self.sizes.allflip_trials, parts.join("; "))))
    }

    fn invariants(&mut self) -> Outcome {
        let v = self.simulated_violations;
        Ok((v == 0, format!("{v} violations across the simulated trials of criteria 2-5")))
    }

    fn small_exact(&mut self) -> Outcome {
        let mut parts = Vec::new();
        let mut ok = true;
        for n in [1usize, 2] {
            let exact = timeopt_exact_expected(n as u64)?;
            let spec = TrialBatchSpec::new(
                ProtocolId::TimeOpt,
                n,
                self.sizes.exact_trials,
                SchedulerKind::BstOnly,
                InitPolicy::UniformRandomMarks,
                split_seed(self.seed_for(7), n as u64),
            );
            let s = crate::experiments::run_batch_summary(&spec)?;
            let m = &s.bst_interactions;
            let e = exact.to_f64();
            let pass = (m.mean - e).abs() <= 3.0 * m.standard_error && s.truncated == 0;
            ok &= pass;
            parts.push(format!(
                "n = {n}: mean {:.4} vs exact {} = {:.4} (SE {:.4})",
                m.mean, exact, e, m.standard_error
            ));
        }
        Ok((ok, format!("{} trials each; {}", self.sizes.exact_trials, parts.join("; "))))
    }

    fn weak_fairness(&mut self) -> Outcome {
        let mut failures = Vec::new();
        let mut terminal = 0;
        let mut summary = Vec::new();
        for &n in &self.sizes.worst_n {
            let w = sweep_worst_unnamed(n, n as u32 + 1)?;
            terminal += w.terminal_violations;
            let lo = (1u64 << n) - 1;
            let hi = 2u64 << n;
            if !(lo..=hi).contains(&w.worst_non_null) || w.truncated > 0 {
                failures.push(format!(
                    "n = {n}: worst {} outside [{lo}, {hi}] (truncated {})",
                    w.worst_non_null, w.truncated
                ));
            }
            summary.push(format!("{n}:{}", w.worst_non_null));
        }
        self.terminal_violations = Some(terminal);
        if failures.is_empty() {
            Ok((true, format!("worst non-null per n in [2^n-1, 2^(n+1)]: {}", summary.join(" "))))
        } else {
            Ok((false, failures.join("; ")))
        }
    }

    fn gros_sequence_check(&mut self) -> Outcome {
        // U_1 = 1, U_n = U_{n-1}, n, U_{n-1}
        let mut u: Vec<u32> = vec![1];
        for n in 2..=6u32 {
            let prev = u.clone();
            u.push(n);
            u.extend(prev);
        }
        for (i, &g) in u.iter().enumerate() {
            let k = i as u64 + 1;
            if gros_term(k) != g {
                return Ok((false, format!("term {k}: {} vs expansion {g}", gros_term(k))));
            }
        }
        for n in 1..=30u32 {
            let len = gros_length(n)?;
            if len != (1u64 << n) - 1 {
                return Ok((false, format!("length of U_{n} is {len}, expected {}", (1u64 << n) - 1)));
            }
        }
        for n in 1..=10u32 {
            let seq = gros_sequence(n)?;
            for j in 1..=n {
                let count = seq.iter().filter(|&&s| s == j).count() as u64;
                if count != 1u64 << (n - j) {
                    return Ok((false, format!("U_{n}: name {j} appears {count} times, expected {}", 1u64 << (n - j))));
                }
            }
        }
        Ok((true, "terms 1..63 match the expansion; |U_n| = 2^n-1 for n <= 30; multiplicities hold for n <= 10".into()))
    }

    fn terminal_naming(&mut self) -> Outcome {
        match self.terminal_violations {
            Some(v) => Ok((v == 0, format!("{v} silent configurations without n distinct nonzero names"))),
            None => Ok((false, "weak-fairness sweep did not run".into())),
        }
    }

    fn determinism(&mut self) -> Outcome {
        let a = run_criteria(Level::Fast, self.seed).render();
        let b = run_criteria(Level::Fast, self.seed).render();
        if a == b {
            Ok((true, format!("two fast runs gave identical reports ({} bytes)", a.len())))
        } else {
            Ok((false, "two fast runs gave different reports".into()))
        }
    }

    fn flip_extended(&mut self) -> Outcome {
        let template = TrialBatchSpec::new(
            ProtocolId::Flip,
            4,
            10_000,
            SchedulerKind::BstOnly,
            InitPolicy::AllZero,
            self.seed_for(101),
        );
        let rows = sweep_n(&template, &(4..=14).collect::<Vec<_>>())?;
        let mut worst = (0usize, 0.0f64);
        for (n, s) in &rows {
            let u = flip_expected_closed_form(*n as u64)?.to_f64();
            let rel = (s.bst_interactions.mean - u).abs() / u;
            if rel > worst.1 {
                worst = (*n, rel);
            }
        }
        Ok((
            worst.1 <= 0.05,
            format!("flip n = 4..14 within 5% of u_n; largest error {:.2}% at n = {}", 100.0 * worst.1, worst.0),
        ))
    }

    fn gros_growth(&mut self) -> Outcome {
        let mut counts = Vec::new();
        for n in 3..=16usize {
            let mut spec = TrialBatchSpec::new(
                ProtocolId::GrosNaming,
                n,
                1,
                SchedulerKind::WeakAdversarial,
                InitPolicy::WorstCaseUnnamed,
                self.seed,
            );
            spec.p = Some(n as u32 + 1);
            let r = run_batch(&spec)?;
            counts.push((n, r.summary.non_null_transitions.max));
        }
        let mut out_of_band = Vec::new();
        let mut ratios = Vec::new();
        for w in counts.windows(2) {
            let r = w[1].1 as f64 / w[0].1 as f64;
            ratios.push(format!("{:.3}", r));
            if !(1.9..=2.1).contains(&r) {
                out_of_band.push(format!("{}->{}", w[0].0, w[1].0));
            }
        }
        let detail = format!(
            "worst-start non-null n = 3..16: {} ; growth {}{}",
            counts.iter().map(|(_, c)| c.to_string()).collect::<Vec<_>>().join(" "),
            ratios.join(" "),
            if out_of_band.is_empty() {
                String::new()
            } else {
                format!(" ; outside [1.9, 2.1] at {}", out_of_band.join(" "))
            }
        );
        Ok((out_of_band.is_empty(), detail))
    }

    fn scheduler_cross_check(&mut self) -> Outcome {
        let n = 16usize;
        let mut means = Vec::new();
        for (i, kind) in [SchedulerKind::BstOnly, SchedulerKind::UniformPair].into_iter().enumerate() {
            let spec = TrialBatchSpec::new(
                ProtocolId::TimeOpt,
                n,
                2_000,
                kind,
                InitPolicy::UniformRandomMarks,
                split_seed(self.seed_for(103), i as u64),
            );
            means.push(crate::experiments::run_batch_summary(&spec)?);
        }
        let (b, u) = (&means[0].bst_interactions, &means[1].bst_interactions);
        let se = (b.standard_error.powi(2) + u.standard_error.powi(2)).sqrt();
        let same_law = (b.mean - u.mean).abs() <= 3.0 * se;
        let per_bst = means[1].total_interactions.mean / u.mean;
        let expected = (n as f64 + 1.0) / 2.0;
        let share_ok = (per_bst / expected - 1.0).abs() <= 0.05;
        Ok((
            same_law && share_ok,
            format!(
                "n = 16 BST interactions: bst {:.1} vs uniform {:.1} (SE {:.1}); interactions per BST interaction {:.3} vs (n+1)/2 = {:.1}",
                b.mean, u.mean, se, per_bst, expected
            ),
        ))
    }
}

fn timed(id: &str, name: &'static str, gating: bool, f: impl FnOnce() -> Outcome) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult { id: id.to_string(), name, passed, detail, gating, elapsed: start.elapsed() }
}

/// Criteria 1–10 (plus the supplementary checks at the full level).
pub fn run_criteria(level: Level, seed: u64) -> Report {
    let mut s = Suite {
        level,
        seed,
        sizes: Sizes::for_level(level),
        timeopt: Vec::new(),
        simulated_violations: 0,
        terminal_violations: None,
    };
    let mut checks = vec![
        timed("1", "oracle identity", true, || s.oracle_identity()),
        timed("2", "flip simulation vs oracle", true, || s.flip_vs_oracle()),
        timed("3", "time-opt convergence and scaling", true, || s.timeopt_scaling()),
        timed("4", "lower-bound consistency", true, || s.lower_bound()),
        timed("5", "all-flip lemma", true, || s.allflip()),
        timed("6", "invariant suite", true, || s.invariants()),
        timed("7", "small-n exact cross-check", true, || s.small_exact()),
        timed("8", "weak-fairness lower bound", true, || s.weak_fairness()),
        timed("9", "gros sequence", true, || s.gros_sequence_check()),
        timed("10", "terminal naming", true, || s.terminal_naming()),
    ];
    if s.level == Level::Full {
        checks.push(timed("S1", "flip sweep to n = 14", false, || s.flip_extended()));
        checks.push(timed("S2", "adversarial growth to n = 16", false, || s.gros_growth()));
        checks.push(timed("S3", "uniform vs bst-only scheduling", false, || s.scheduler_cross_check()));
    }
    Report { level, seed, checks }
}

/// The whole suite: criteria 1–10, the determinism check, and (full level)
/// the supplementary checks.
pub fn run_suite(level: Level, seed: u64) -> Report {
    let mut report = run_criteria(level, seed);
    let mut s = Suite {
        level,
        seed,
        sizes: Sizes::for_level(level),
        timeopt: Vec::new(),
        simulated_violations: 0,
        terminal_violations: None,
    };
    let determinism = timed("11", "determinism", true, || s.determinism());
    let at = report.checks.iter().position(|c| !c.gating).unwrap_or(report.checks.len());
    report.checks.insert(at, determinism);
    report
}

/// Exact value rendered as in the oracle command: `p/q ≈ decimal`, or the
/// integer alone.
pub fn format_exact(value: &ExactRational) -> String {
    if value.is_integer() {
        value.to_string()
    } else {
        format!("{} ≈ {}", value, value.to_decimal(20))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_parsing() {
        assert_eq!("fast".parse::<Level>().unwrap(), Level::Fast);
        assert_eq!("full".parse::<Level>().unwrap(), Level::Full);
        assert!("slow".parse::<Level>().is_err());
    }

    #[test]
    fn exact_formatting() {
        assert_eq!(format_exact(&ExactRational::new(64, 3)), "64/3 ≈ 21.333333333333333333");
        assert_eq!(format_exact(&ExactRational::from(1023u64)), "1023");
    }

    #[test]
    fn render_has_one_line_per_check() {
        let report = Report {
            level: Level::Fast,
            seed: 1,
            checks: vec![CheckResult {
                id: "9".into(),
                name: "gros sequence",
                passed: true,
                detail: "ok".into(),
                gating: true,
                elapsed: Duration::from_secs(3),
            }],
        };
        let text = report.render();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("PASS"));
        assert!(!text.contains("3s"));
        assert!(report.passed());
    }
}
