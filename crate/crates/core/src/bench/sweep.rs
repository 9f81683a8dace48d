use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, MetricsReport};
use super::testbed::Testbed;
use crate::diffusion::{DiffusionSpec, Schedule, Variant};
use crate::error::{Error, Result};
use crate::sampler::{reconstruct, SamplerConfig};

/// One CSV row: a single chain, or the mean/std over the chains of a point
/// when `agg = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: String,
    pub steps: usize,
    /// Chain seed, or `mean` / `std` on aggregate rows.
    pub seed: String,
    pub nmse: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub wall_ms: f64,
    pub agg: u8,
    /// Empty on success.
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub step_counts: Vec<usize>,
    pub variants: Vec<Variant>,
    pub chains: usize,
    /// Chain `c` of every point uses seed `seed_base + c`.
    pub seed_base: u64,
    /// Low-band width for the HFS variants.
    pub n_l: usize,
    pub schedule: Schedule,
    /// Step count and seed are overridden per job.
    pub sampler: SamplerConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            step_counts: vec![50, 100, 200, 300, 400, 500],
            variants: vec![Variant::Vp, Variant::HfsVp],
            chains: 4,
            seed_base: 0,
            n_l: 16,
            schedule: Schedule::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_counts.is_empty() || self.step_counts[0] == 0 {
            return Err(Error::Parameter("step counts must be non-empty and ≥ 1".into()));
        }
        if self.step_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter("step counts must be strictly increasing".into()));
        }
        if self.chains == 0 {
            return Err(Error::Parameter("at least one chain per point is required".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Parameter("no variants to sweep".into()));
        }
        self.schedule.validate()?;
        self.sampler.validate()
    }

    fn spec(&self, variant: Variant, n_l: usize) -> DiffusionSpec {
        let mut spec = DiffusionSpec::new(variant, if variant.is_hfs() { n_l } else { 0 });
        spec.schedule = self.schedule;
        spec
    }
}

/// Outcome of one reconstruction chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainResult {
    pub seed: u64,
    pub outcome: std::result::Result<(MetricsReport, f64), String>,
}

/// Reconstructs once with `seed` and scores against the truth. `None` when
/// the testbed has no model for `spec`.
pub fn run_chain(
    testbed: &dyn Testbed,
    spec: &DiffusionSpec,
    sampler: &SamplerConfig,
    steps: usize,
    seed: u64,
) -> Option<ChainResult> {
    let model = testbed.model(spec)?;
    let cfg = SamplerConfig { steps, seed, ..*sampler };
    let outcome = reconstruct(testbed.problem(), model.as_ref(), spec, &cfg)
        .and_then(|r| Ok((metrics(&r.recon, testbed.truth())?, r.wall_ms)))
        .map_err(|e| e.to_string());
    Some(ChainResult { seed, outcome })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn chain_row(label: &str, steps: usize, c: &ChainResult) -> SweepRow {
    let (m, wall, error) = match &c.outcome {
        Ok((m, w)) => (*m, *w, String::new()),
        Err(e) => (MetricsReport { nmse: f64::NAN, psnr: f64::NAN, ssim: f64::NAN }, f64::NAN, e.clone()),
    };
    SweepRow {
        variant: label.to_string(),
        steps,
        seed: c.seed.to_string(),
        nmse: m.nmse,
        psnr: m.psnr,
        ssim: m.ssim,
        wall_ms: wall,
        agg: 0,
        error,
    }
}

/// Chain rows followed by the `mean` and `std` rows over successful chains.
fn point_rows(label: &str, steps: usize, chains: &[ChainResult]) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = chains.iter().map(|c| chain_row(label, steps, c)).collect();
    let ok: Vec<&(MetricsReport, f64)> = chains.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
    let col = |f: &dyn Fn(&(MetricsReport, f64)) -> f64| mean_std(&ok.iter().map(|x| f(x)).collect::<Vec<_>>());
    let stats = [col(&|x| x.0.nmse), col(&|x| x.0.psnr), col(&|x| x.0.ssim), col(&|x| x.1)];
    let failed = chains.len() - ok.len();
    let error = if failed > 0 { format!("{failed} of {} chains failed", chains.len()) } else { String::new() };
    for (name, pick) in [("mean", 0usize), ("std", 1)] {
        let g = |s: (f64, f64)| if pick == 0 { s.0 } else { s.1 };
        rows.push(SweepRow {
            variant: label.to_string(),
            steps,
            seed: name.into(),
            nmse: g(stats[0]),
            psnr: g(stats[1]),
            ssim: g(stats[2]),
            wall_ms: g(stats[3]),
            agg: 1,
            error: error.clone(),
        });
    }
    rows
}

/// Runs every `(variant, steps, chain)` job in parallel and returns rows
/// sorted by variant (in the order given) and step count. Failed chains are
/// recorded in their row, not propagated.
pub fn convergence_sweep(testbed: &dyn Testbed, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, u64)> = (0..cfg.variants.len())
        .flat_map(|v| cfg.step_counts.iter().flat_map(move |&s| (0..cfg.chains as u64).map(move |c| (v, s, c))))
        .collect();
    let results: Vec<ChainResult> = jobs
        .par_iter()
        .map(|&(v, steps, c)| {
            let spec = cfg.spec(cfg.variants[v], cfg.n_l);
            let seed = cfg.seed_base + c;
            run_chain(testbed, &spec, &cfg.sampler, steps, seed)
                .unwrap_or(ChainResult { seed, outcome: Err(format!("no score model for {}", spec.variant)) })
        })
        .collect();
    let mut rows = Vec::new();
    for (point, chunk) in results.chunks(cfg.chains).enumerate() {
        let (v, steps, _) = jobs[point * cfg.chains];
        rows.extend(point_rows(cfg.variants[v].name(), steps, chunk));
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// No score model exists for this `n_l`.
    Absent,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub n_l: usize,
    pub variant: String,
    pub steps: usize,
    pub seed: String,
    pub nmse: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub wall_ms: f64,
    pub agg: u8,
    pub status: RowStatus,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub nl_values: Vec<usize>,
    pub variant: Variant,
    pub steps: usize,
    pub chains: usize,
    pub seed_base: u64,
    pub schedule: Schedule,
    pub sampler: SamplerConfig,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            nl_values: vec![2, 8, 16, 24, 32],
            variant: Variant::HfsVp,
            steps: 200,
            chains: 1,
            seed_base: 0,
            schedule: Schedule::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

/// Sorted, deduplicated `n_l` values and one warning per dropped duplicate.
pub fn dedup_nl(values: &[usize]) -> (Vec<usize>, Vec<String>) {
    let mut out: Vec<usize> = Vec::new();
    let mut warnings = Vec::new();
    for &v in values {
        if out.contains(&v) {
            warnings.push(format!("duplicate n_l = {v} ignored"));
        } else {
            out.push(v);
        }
    }
    out.sort_unstable();
    (out, warnings)
}

/// Per-`n_l` reconstruction quality; one chain row per seed plus aggregates,
/// or a single row flagged absent when the testbed lacks a model.
pub fn ablation_nl(testbed: &dyn Testbed, cfg: &AblationConfig) -> Result<(Vec<AblationRow>, Vec<String>)> {
    if cfg.chains == 0 || cfg.steps == 0 {
        return Err(Error::Parameter("ablation needs ≥ 1 chain and ≥ 1 step".into()));
    }
    if !cfg.variant.is_hfs() {
        return Err(Error::Parameter(format!("n_l ablation needs an HFS variant, got {}", cfg.variant)));
    }
    cfg.sampler.validate()?;
    let (values, warnings) = dedup_nl(&cfg.nl_values);
    for w in &warnings {
        log::warn!("{w}");
    }
    let results: Vec<(usize, Option<Vec<ChainResult>>)> = values
        .par_iter()
        .map(|&n_l| {
            let mut spec = DiffusionSpec::new(cfg.variant, n_l);
            spec.schedule = cfg.schedule;
            let chains: Option<Vec<ChainResult>> = (0..cfg.chains as u64)
                .map(|c| run_chain(testbed, &spec, &cfg.sampler, cfg.steps, cfg.seed_base + c))
                .collect();
            (n_l, chains)
        })
        .collect();
    let mut rows = Vec::new();
    for (n_l, chains) in results {
        let label = cfg.variant.name();
        match chains {
            None => rows.push(AblationRow {
                n_l,
                variant: label.into(),
                steps: cfg.steps,
                seed: String::new(),
                nmse: f64::NAN,
                psnr: f64::NAN,
                ssim: f64::NAN,
                wall_ms: f64::NAN,
                agg: 0,
                status: RowStatus::Absent,
                error: format!("no score model for n_l = {n_l}"),
            }),
            Some(chains) => {
                for r in point_rows(label, cfg.steps, &chains) {
                    let status = if r.agg == 0 && !r.error.is_empty() { RowStatus::Error } else { RowStatus::Ok };
                    rows.push(AblationRow {
                        n_l,
                        variant: r.variant,
                        steps: r.steps,
                        seed: r.seed,
                        nmse: r.nmse,
                        psnr: r.psnr,
                        ssim: r.ssim,
                        wall_ms: r.wall_ms,
                        agg: r.agg,
                        status,
                        error: r.error,
                    });
                }
            }
        }
    }
    Ok((rows, warnings))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRun {
    pub label: String,
    pub steps: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub label: String,
    pub steps: usize,
    pub wall_ms: f64,
    /// `wall_ms / wall_ms` of the first run; empty for a single run.
    pub ratio: Option<f64>,
}

pub fn timing_report(runs: &[TimingRun]) -> Vec<TimingRow> {
    let base = runs.first().map(|r| r.wall_ms);
    runs.iter()
        .map(|r| TimingRow {
            label: r.label.clone(),
            steps: r.steps,
            wall_ms: r.wall_ms,
            ratio: if runs.len() > 1 { base.map(|b| r.wall_ms / b) } else { None },
        })
        .collect()
}

/// Times a full reconstruction at each step count, keeping the fastest of
/// `repeats` runs. Runs are sequential so that they do not compete.
pub fn time_reconstructions(
    testbed: &dyn Testbed,
    spec: &DiffusionSpec,
    sampler: &SamplerConfig,
    step_counts: &[usize],
    repeats: usize,
) -> Result<Vec<TimingRun>> {
    let model = testbed.model(spec).ok_or_else(|| Error::Parameter(format!("no score model for {}", spec.variant)))?;
    step_counts
        .iter()
        .map(|&steps| {
            let cfg = SamplerConfig { steps, ..*sampler };
            let mut best = f64::INFINITY;
            for _ in 0..repeats.max(1) {
                let start = Instant::now();
                reconstruct(testbed.problem(), model.as_ref(), spec, &cfg)?;
                best = best.min(start.elapsed().as_secs_f64() * 1e3);
            }
            Ok(TimingRun { label: format!("{}-N{steps}", spec.variant), steps, wall_ms: best })
        })
        .collect()
}

/// Writes any serializable rows as CSV with a header.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_warns_once_per_duplicate() {
        let (v, w) = dedup_nl(&[8, 2, 8, 16, 2]);
        assert_eq!(v, vec![2, 8, 16]);
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn timing_ratio_column() {
        let one = timing_report(&[TimingRun { label: "a".into(), steps: 10, wall_ms: 5.0 }]);
        assert_eq!(one[0].ratio, None);
        let two = timing_report(&[
            TimingRun { label: "a".into(), steps: 10, wall_ms: 5.0 },
            TimingRun { label: "b".into(), steps: 100, wall_ms: 50.0 },
        ]);
        assert_eq!(two[1].ratio, Some(10.0));
    }

    #[test]
    fn sweep_config_validation() {
        let bad = SweepConfig { step_counts: vec![100, 50], ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(SweepConfig::default().validate().is_ok());
    }

    #[test]
    fn aggregate_rows() {
        let ok = |seed, nmse| ChainResult { seed, outcome: Ok((MetricsReport { nmse, psnr: 1.0, ssim: 0.5 }, 2.0)) };
        let rows = point_rows("vp", 10, &[ok(0, 1.0), ok(1, 3.0)]);
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[2].seed.as_str(), rows[2].nmse), ("mean", 2.0));
        assert!((rows[3].nmse - 2f64.sqrt()).abs() < 1e-15);
        assert!(rows.iter().all(|r| r.error.is_empty()));
    }
}
