//! Run records, aggregates and result files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::agents::Variant;
use crate::envs::DurationMode;

/// Derives an independent per-trial seed from the master seed, a textual
/// grid-point key and the seed index.
pub fn derive_seed(master: u64, key: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((key.len() as u64).to_le_bytes());
    h.update(key.as_bytes());
    h.update(seed.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

/// Keeps at most `max_points` values at a uniform stride, always including
/// the first and last.
pub fn downsample(values: &[f64], max_points: usize) -> Vec<f64> {
    let n = values.len();
    if n <= max_points || max_points < 2 {
        return values.to_vec();
    }
    let stride = (n - 1).div_ceil(max_points - 1);
    let mut out: Vec<f64> = values.iter().step_by(stride).copied().collect();
    if (n - 1) % stride != 0 {
        out.push(values[n - 1]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    TwoState,
    Market,
}

/// Outcome of one (agent, environment, hyperparameters, seed) trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: Experiment,
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
    pub log_scale: Option<f64>,
    pub segment: Option<usize>,
    pub window_size: Option<usize>,
    pub duration_mode: Option<DurationMode>,
    pub seed: u64,
    /// Seed actually used for the trial's random streams.
    pub derived_seed: u64,
    /// β has no effect on this variant; the record is a copy of a shared run.
    pub redundant: bool,
    pub failed: bool,
    pub error: Option<String>,
    /// Two-state only: the greedy action at `s₁` is B.
    pub success: Option<bool>,
    pub final_greedy_policy: Vec<usize>,
    pub final_rho: f64,
    pub final_accumulated_reward: f64,
    pub steps: u64,
    pub onpolicy_steps: u64,
    pub rho_updates: u64,
    /// Accumulated on-policy reward, downsampled.
    pub accumulated_onpolicy_reward_trace: Vec<f64>,
    pub wall_time_secs: f64,
}

impl RunRecord {
    /// The record with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn file_stem(&self) -> String {
        let mut s = format!("{:?}_{}_a{:e}", self.experiment, self.variant, self.alpha);
        if self.variant.uses_beta() || self.redundant {
            s += &format!("_b{:e}", self.beta);
        }
        if let Some(v) = self.log_scale {
            s += &format!("_v{v:e}");
        }
        if let Some(seg) = self.segment {
            s += &format!("_seg{seg}");
        }
        if let Some(k) = self.window_size {
            s += &format!("_k{k}");
        }
        if let Some(m) = self.duration_mode {
            s += &format!("_{m:?}");
        }
        s + &format!("_s{}", self.seed)
    }
}

/// Per-group statistics over seeds, plus the experiment's headline metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub experiment: Experiment,
    pub variant: Variant,
    /// Opponent for win-ratio rows.
    pub opponent: Option<Variant>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub log_scale: Option<f64>,
    pub segment: Option<usize>,
    pub window_size: Option<usize>,
    pub duration_mode: Option<DurationMode>,
    pub redundant: bool,
    pub runs: usize,
    pub failures: usize,
    pub mean: f64,
    pub std: f64,
    pub success_rate: Option<f64>,
    pub win_ratio: Option<f64>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.max(0.0).sqrt())
}

/// Fraction of records flagged successful. Failed trials count as misses.
pub fn success_rate(records: &[&RunRecord]) -> Result<f64, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyGroup);
    }
    let wins = records.iter().filter(|r| r.success == Some(true)).count();
    Ok(wins as f64 / records.len() as f64)
}

fn seed_means_by_segment(records: &[&RunRecord]) -> Result<BTreeMap<usize, f64>, HarnessError> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        let seg = r.segment.ok_or(HarnessError::SegmentMismatch)?;
        groups
            .entry(seg)
            .or_default()
            .push(r.final_accumulated_reward);
    }
    Ok(groups
        .into_iter()
        .map(|(k, v)| (k, mean_std(&v).0))
        .collect())
}

/// Fraction of segments on which the candidate's seed-mean final accumulated
/// reward strictly exceeds the opponent's. Ties are losses.
pub fn win_ratio(candidate: &[&RunRecord], opponent: &[&RunRecord]) -> Result<f64, HarnessError> {
    let ours = seed_means_by_segment(candidate)?;
    let theirs = seed_means_by_segment(opponent)?;
    if ours.is_empty() || !ours.keys().eq(theirs.keys()) {
        return Err(HarnessError::SegmentMismatch);
    }
    let wins = ours
        .iter()
        .filter(|(seg, mean)| **mean > theirs[*seg])
        .count();
    Ok(wins as f64 / ours.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

/// Column order of the CSV output.
pub const CSV_COLUMNS: [&str; 16] = [
    "experiment",
    "variant",
    "opponent",
    "alpha",
    "beta",
    "log_scale",
    "segment",
    "window_size",
    "duration_mode",
    "redundant",
    "runs",
    "failures",
    "mean",
    "std",
    "success_rate",
    "win_ratio",
];

/// Writes one row (or JSON object) per aggregate.
pub fn emit_results(
    aggregates: &[AggregateResult],
    format: OutputFormat,
    path: &Path,
) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            w.write_record(CSV_COLUMNS)?;
            for a in aggregates {
                w.serialize(a)?;
            }
            w.flush()?;
        }
        OutputFormat::Jsonl => {
            for a in aggregates {
                serde_json::to_writer(&mut out, a)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Reads aggregates back from a CSV written by [`emit_results`].
pub fn read_results_csv(path: &Path) -> Result<Vec<AggregateResult>, HarnessError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
