//! Output rows and their CSV/JSON writers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::experiments::{MetricSummary, Summary};

/// Version of the row layout below. Bump on any field change.
pub const SCHEMA_VERSION: &str = "1";

/// One batch, self-describing: the `command` field together with `seed` and
/// `rng` reproduces the row exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub schema_version: String,
    pub command: String,
    pub protocol: String,
    pub n: usize,
    pub p: Option<u32>,
    pub scheduler: String,
    pub init: String,
    pub seed: u64,
    pub rng: String,
    pub max_interactions: Option<u64>,
    pub trials: u64,
    pub converged: u64,
    pub truncated: u64,
    pub bst_interactions_mean: f64,
    pub bst_interactions_stddev: f64,
    pub bst_interactions_se: f64,
    pub bst_interactions_min: u64,
    pub bst_interactions_max: u64,
    pub total_interactions_mean: f64,
    pub total_interactions_stddev: f64,
    pub total_interactions_se: f64,
    pub total_interactions_min: u64,
    pub total_interactions_max: u64,
    pub non_null_mean: f64,
    pub non_null_stddev: f64,
    pub non_null_se: f64,
    pub non_null_min: u64,
    pub non_null_max: u64,
    /// Mean BST interactions per unit of parallel time is `n`; this is
    /// `total_interactions_mean / n`.
    pub parallel_time_mean: f64,
    pub mean_phase_switches: f64,
    pub invariant_violations: u64,
    pub final_c_min: u64,
    pub final_c_max: u64,
    /// Exact expected BST interactions for this batch, when an oracle covers it.
    pub oracle_bst_interactions: Option<f64>,
    pub oracle_exact: Option<String>,
}

/// Everything about a batch except its statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RowContext {
    pub command: String,
    pub protocol: String,
    pub n: usize,
    pub p: Option<u32>,
    pub scheduler: String,
    pub init: String,
    pub seed: u64,
    pub rng: String,
    pub max_interactions: Option<u64>,
    pub final_c: (u64, u64),
    pub oracle: Option<(f64, String)>,
}

impl OutputRow {
    pub fn new(ctx: RowContext, s: &Summary) -> Self {
        let MetricSummary { mean: bm, stddev: bs, standard_error: be, min: bmin, max: bmax } = s.bst_interactions;
        let MetricSummary { mean: tm, stddev: ts, standard_error: te, min: tmin, max: tmax } = s.total_interactions;
        let MetricSummary { mean: nm, stddev: ns, standard_error: ne, min: nmin, max: nmax } = s.non_null_transitions;
        OutputRow {
            schema_version: SCHEMA_VERSION.to_string(),
            command: ctx.command,
            protocol: ctx.protocol,
            n: ctx.n,
            p: ctx.p,
            scheduler: ctx.scheduler,
            init: ctx.init,
            seed: ctx.seed,
            rng: ctx.rng,
            max_interactions: ctx.max_interactions,
            trials: s.trials,
            converged: s.converged,
            truncated: s.truncated,
            bst_interactions_mean: bm,
            bst_interactions_stddev: bs,
            bst_interactions_se: be,
            bst_interactions_min: bmin,
            bst_interactions_max: bmax,
            total_interactions_mean: tm,
            total_interactions_stddev: ts,
            total_interactions_se: te,
            total_interactions_min: tmin,
            total_interactions_max: tmax,
            non_null_mean: nm,
            non_null_stddev: ns,
            non_null_se: ne,
            non_null_min: nmin,
            non_null_max: nmax,
            parallel_time_mean: tm / ctx.n as f64,
            mean_phase_switches: s.mean_phase_switches,
            invariant_violations: s.invariant_violations,
            final_c_min: ctx.final_c.0,
            final_c_max: ctx.final_c.1,
            oracle_bst_interactions: ctx.oracle.as_ref().map(|o| o.0),
            oracle_exact: ctx.oracle.map(|o| o.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Serialises all rows to a buffer first, so a failure never leaves a
/// partial table behind.
pub fn render_rows(rows: &[OutputRow], format: Format) -> Result<Vec<u8>, String> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| e.to_string())?;
            }
            w.into_inner().map_err(|e| e.to_string())
        }
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(rows).map_err(|e| e.to_string())?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

/// Parses a CSV table written by [`render_rows`].
pub fn parse_csv(bytes: &[u8]) -> Result<Vec<OutputRow>, String> {
    csv::Reader::from_reader(bytes).deserialize().collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())
}

pub fn write_all(out: &mut dyn Write, bytes: &[u8]) -> std::io::Result<()> {
    out.write_all(bytes)?;
    out.flush()
}
