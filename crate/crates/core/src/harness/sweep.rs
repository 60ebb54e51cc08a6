//! Grid sweeps, aggregation and the on-disk output layout.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::records::{
    emit_results, mean_std, success_rate, win_ratio, AggregateResult, Experiment, OutputFormat,
    RunRecord,
};
use super::trials::{run_market_trial, run_two_state_trial, MarketTrial, TwoStateTrial};
use super::{HarnessError, MarketConfig, SweepConfig};
use crate::agents::Variant;
use crate::envs::{read_bars, repair_gaps, split_segments, MarketSegment};

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(f))
}

/// Runs every (variant, α, β, log_scale, seed) trial. Variants that ignore
/// β run once per (α, log_scale, seed) and are copied to the other β values
/// with `redundant` set. `jobs = 0` uses all cores.
pub fn run_two_state_sweep(cfg: &SweepConfig, jobs: usize) -> Result<Vec<RunRecord>, HarnessError> {
    cfg.validate()?;
    let alphas = cfg.alpha_grid.resolve()?;
    let betas = cfg.beta_grid.resolve()?;
    let scales = cfg.log_scale_grid.resolve()?;

    let mut trials = Vec::new();
    for &variant in &cfg.variants {
        let used_betas = if variant.uses_beta() {
            &betas[..]
        } else {
            &betas[..1]
        };
        for &log_scale in &scales {
            for &alpha in &alphas {
                for &beta in used_betas {
                    for &seed in &cfg.seeds {
                        trials.push(TwoStateTrial {
                            variant,
                            alpha,
                            beta,
                            log_scale,
                            seed,
                        });
                    }
                }
            }
        }
    }
    let ran: Vec<RunRecord> = with_pool(jobs, || {
        trials
            .par_iter()
            .map(|&t| run_two_state_trial(cfg, t))
            .collect()
    })?;

    let mut records = Vec::with_capacity(ran.len());
    for rec in ran {
        if !rec.variant.uses_beta() {
            for &beta in &betas[1..] {
                records.push(RunRecord {
                    beta,
                    redundant: true,
                    ..rec.clone()
                });
            }
        }
        records.push(rec);
    }
    records.sort_by(|a, b| {
        two_state_order(a)
            .partial_cmp(&two_state_order(b))
            .expect("finite grid")
    });
    Ok(records)
}

fn two_state_order(r: &RunRecord) -> (Variant, f64, f64, f64, u64) {
    (
        r.variant,
        r.log_scale.unwrap_or(0.0),
        r.alpha,
        r.beta,
        r.seed,
    )
}

/// Runs every (segment, window, duration mode, β, variant, seed) backtest.
pub fn run_market_sweep(
    cfg: &MarketConfig,
    segments: &[MarketSegment],
    jobs: usize,
) -> Result<Vec<RunRecord>, HarnessError> {
    cfg.validate()?;
    if segments.is_empty() {
        return Err(HarnessError::EmptyGroup);
    }
    let mut trials = Vec::new();
    for (segment, _) in segments.iter().enumerate() {
        for &window_size in &cfg.window_sizes {
            for &duration_mode in &cfg.duration_modes {
                for &variant in &cfg.variants {
                    let used = if variant.uses_beta() {
                        &cfg.betas[..]
                    } else {
                        &cfg.betas[..1]
                    };
                    for &beta in used {
                        for &seed in &cfg.seeds {
                            trials.push(MarketTrial {
                                variant,
                                beta,
                                segment,
                                window_size,
                                duration_mode,
                                seed,
                            });
                        }
                    }
                }
            }
        }
    }
    let ran: Vec<RunRecord> = with_pool(jobs, || {
        trials
            .par_iter()
            .map(|&t| run_market_trial(cfg, &segments[t.segment], t))
            .collect()
    })?;
    let mut records = Vec::with_capacity(ran.len());
    for rec in ran {
        if !rec.variant.uses_beta() {
            for &beta in &cfg.betas[1..] {
                records.push(RunRecord {
                    beta,
                    redundant: true,
                    ..rec.clone()
                });
            }
        }
        records.push(rec);
    }
    records.sort_by(|a, b| {
        market_order(a)
            .partial_cmp(&market_order(b))
            .expect("finite grid")
    });
    Ok(records)
}

fn market_order(r: &RunRecord) -> (usize, String, f64, usize, Variant, u64) {
    (
        r.window_size.unwrap_or(0),
        format!("{:?}", r.duration_mode),
        r.beta,
        r.segment.unwrap_or(0),
        r.variant,
        r.seed,
    )
}

fn blank_aggregate(experiment: Experiment, variant: Variant) -> AggregateResult {
    AggregateResult {
        experiment,
        variant,
        opponent: None,
        alpha: None,
        beta: None,
        log_scale: None,
        segment: None,
        window_size: None,
        duration_mode: None,
        redundant: false,
        runs: 0,
        failures: 0,
        mean: f64::NAN,
        std: f64::NAN,
        success_rate: None,
        win_ratio: None,
    }
}

fn stats(group: &[&RunRecord], agg: &mut AggregateResult) {
    let finals: Vec<f64> = group
        .iter()
        .filter(|r| !r.failed)
        .map(|r| r.final_accumulated_reward)
        .collect();
    let (mean, std) = mean_std(&finals);
    agg.runs = group.len();
    agg.failures = group.iter().filter(|r| r.failed).count();
    agg.mean = mean;
    agg.std = std;
    agg.redundant = group.iter().all(|r| r.redundant);
}

/// One row per (variant, α, β, log_scale) with the success rate over seeds.
pub fn aggregate_two_state(records: &[RunRecord]) -> Result<Vec<AggregateResult>, HarnessError> {
    let mut out = Vec::new();
    for group in records.chunk_by(|a, b| {
        (a.variant, a.log_scale, a.alpha, a.beta) == (b.variant, b.log_scale, b.alpha, b.beta)
    }) {
        let refs: Vec<&RunRecord> = group.iter().collect();
        let first = &group[0];
        let mut agg = blank_aggregate(Experiment::TwoState, first.variant);
        agg.alpha = Some(first.alpha);
        agg.beta = Some(first.beta);
        agg.log_scale = first.log_scale;
        stats(&refs, &mut agg);
        agg.success_rate = Some(success_rate(&refs)?);
        out.push(agg);
    }
    Ok(out)
}

/// Success rate over the whole (α, β, seed) grid at one log_scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessPoint {
    pub variant: Variant,
    pub log_scale: f64,
    pub runs: usize,
    pub success_rate: f64,
}

pub fn success_curve(records: &[RunRecord]) -> Result<Vec<SuccessPoint>, HarnessError> {
    let mut groups: BTreeMap<(Variant, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.experiment == Experiment::TwoState)
    {
        let v = r.log_scale.unwrap_or(f64::NAN);
        groups.entry((r.variant, v.to_bits())).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((variant, bits), group) in groups {
        out.push(SuccessPoint {
            variant,
            log_scale: f64::from_bits(bits),
            runs: group.len(),
            success_rate: success_rate(&group)?,
        });
    }
    out.sort_by(|a, b| {
        (a.variant, a.log_scale)
            .partial_cmp(&(b.variant, b.log_scale))
            .expect("finite")
    });
    Ok(out)
}

/// Per-segment rows for every (variant, window, mode, β), followed by
/// pairwise win-ratio rows across segments.
pub fn aggregate_market(records: &[RunRecord]) -> Result<Vec<AggregateResult>, HarnessError> {
    type Cell = (usize, String, u64);
    let mut cells: BTreeMap<Cell, BTreeMap<Variant, Vec<&RunRecord>>> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.experiment == Experiment::Market)
    {
        let key = (
            r.window_size.unwrap_or(0),
            format!("{:?}", r.duration_mode),
            r.beta.to_bits(),
        );
        cells
            .entry(key)
            .or_default()
            .entry(r.variant)
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for by_variant in cells.values() {
        for (&variant, group) in by_variant {
            let mut by_segment: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
            for r in group {
                by_segment
                    .entry(r.segment.unwrap_or(0))
                    .or_default()
                    .push(r);
            }
            for (segment, seg_group) in by_segment {
                let first = seg_group[0];
                let mut agg = blank_aggregate(Experiment::Market, variant);
                agg.alpha = Some(first.alpha);
                agg.beta = Some(first.beta);
                agg.segment = Some(segment);
                agg.window_size = first.window_size;
                agg.duration_mode = first.duration_mode;
                stats(&seg_group, &mut agg);
                out.push(agg);
            }
        }
        for (&variant, group) in by_variant {
            for (&opponent, theirs) in by_variant {
                if opponent == variant {
                    continue;
                }
                let first = group[0];
                let mut agg = blank_aggregate(Experiment::Market, variant);
                agg.opponent = Some(opponent);
                agg.alpha = Some(first.alpha);
                agg.beta = Some(first.beta);
                agg.window_size = first.window_size;
                agg.duration_mode = first.duration_mode;
                stats(group, &mut agg);
                agg.win_ratio = Some(win_ratio(group, theirs)?);
                out.push(agg);
            }
        }
    }
    Ok(out)
}

/// Provenance of a sweep's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub master_seed: u64,
    pub config_sha256: String,
    pub runs: usize,
    pub failures: usize,
}

impl Manifest {
    pub fn new(config_text: &str, master_seed: u64, records: &[RunRecord]) -> Self {
        let digest = Sha256::digest(config_text.as_bytes());
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            runs: records.len(),
            failures: records.iter().filter(|r| r.failed).count(),
        }
    }
}

/// Everything a sweep writes.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<AggregateResult>,
    pub success_curve: Vec<SuccessPoint>,
    pub manifest: Manifest,
}

impl SweepOutput {
    /// Runs the two-state sweep and aggregates it.
    pub fn two_state(
        cfg: &SweepConfig,
        config_text: &str,
        jobs: usize,
    ) -> Result<Self, HarnessError> {
        let records = run_two_state_sweep(cfg, jobs)?;
        Ok(Self {
            aggregates: aggregate_two_state(&records)?,
            success_curve: success_curve(&records)?,
            manifest: Manifest::new(config_text, cfg.master_seed, &records),
            records,
        })
    }

    /// Runs the market sweep over `segments` and aggregates it.
    pub fn market(
        cfg: &MarketConfig,
        segments: &[MarketSegment],
        config_text: &str,
        jobs: usize,
    ) -> Result<Self, HarnessError> {
        let records = run_market_sweep(cfg, segments, jobs)?;
        Ok(Self {
            aggregates: aggregate_market(&records)?,
            success_curve: Vec::new(),
            manifest: Manifest::new(config_text, cfg.master_seed, &records),
            records,
        })
    }
}

/// Loads a bar file and cuts it up as `cfg` asks: `segment_len` bars per
/// segment, at most `max_segments` of them, each cut to `truncate` bars.
/// Also returns the number of repaired gaps.
pub fn prepare_segments(
    path: &Path,
    cfg: &MarketConfig,
) -> Result<(Vec<MarketSegment>, usize), HarnessError> {
    let file = std::fs::File::open(path)?;
    let mut bars = read_bars(std::io::BufReader::new(file))?;
    let repairs = repair_gaps(&mut bars);
    let mut segments = split_segments(bars, cfg.segment_len);
    if cfg.max_segments > 0 {
        segments.truncate(cfg.max_segments);
    }
    if cfg.truncate > 0 {
        segments = segments
            .into_iter()
            .map(|s| MarketSegment::new(s.bars()[..s.len().min(cfg.truncate)].to_vec()))
            .collect();
    }
    Ok((segments, repairs))
}

/// Writes `results.csv`, `results.jsonl`, `success_curve.csv` (two-state
/// only), `manifest.json` and one `runs/*.json` per distinct trial.
pub fn write_outputs(out: &SweepOutput, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir.join("runs"))?;
    emit_results(&out.aggregates, OutputFormat::Csv, &dir.join("results.csv"))?;
    emit_results(
        &out.aggregates,
        OutputFormat::Jsonl,
        &dir.join("results.jsonl"),
    )?;
    if !out.success_curve.is_empty() {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(dir.join("success_curve.csv"))?;
        for p in &out.success_curve {
            w.serialize(p)?;
        }
        w.flush()?;
    }
    for r in out.records.iter().filter(|r| !r.redundant) {
        let path = dir.join("runs").join(format!("{}.json", r.file_stem()));
        std::fs::write(path, serde_json::to_vec_pretty(r)?)?;
    }
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_vec_pretty(&out.manifest)?,
    )?;
    Ok(())
}
