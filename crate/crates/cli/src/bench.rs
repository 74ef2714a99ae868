//! Benchmark harness: repeated independent estimator runs over a grid of
//! particle counts and strip widths, with mean/stderr/MSE summaries against
//! an exact or long-run reference and wall-clock accounting per run.
//!
//! Configuration files extend the model spec grammar with:
//!
//! ```text
//! particles = 1250 2500 5000 10000 20000   # particle-count grid
//! runs = 10                                # independent runs per point (>= 2)
//! strip_widths = 1 3                       # optional, default: model strip_width
//! reference = oracle                       # or `fixed <value>`
//!                                          # or `long-run <N_ref> <runs_ref>`
//! seed = 1                                 # base seed, default 0
//! ```

use std::time::Instant;

use rllcap_core::oracle;
use rllcap_core::smc::{self, RngSpec};
use thiserror::Error;

use crate::modelspec::{self, ConfigError, ModelSpec};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] rllcap_core::Error),
}

/// Reference capacity the MSE is computed against.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// Exact transfer-matrix/brute-force capacity.
    Oracle,
    /// A caller-supplied value, echoed as-is.
    Fixed(f64),
    /// Mean capacity of `runs` independent estimator runs at `n_particles`
    /// (strip width 1), for models beyond the oracle's reach.
    LongRun { n_particles: usize, runs: usize },
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub model: ModelSpec,
    pub particle_grid: Vec<usize>,
    pub runs: usize,
    pub strip_widths: Vec<usize>,
    pub reference: Reference,
    pub base_seed: u64,
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let pairs = modelspec::parse_pairs(text)?;
        let mut model_pairs = Vec::new();
        let mut particle_grid = None;
        let mut runs = None;
        let mut strip_widths = None;
        let mut reference = None;
        let mut base_seed = None;

        for pair in pairs {
            match pair.key.as_str() {
                "particles" => particle_grid = Some(parse_usize_list(&pair)?),
                "runs" => runs = Some(modelspec::parse_usize(&pair)?),
                "strip_widths" => strip_widths = Some(parse_usize_list(&pair)?),
                "reference" => reference = Some(parse_reference(&pair)?),
                "seed" => base_seed = Some(modelspec::parse_u64(&pair)?),
                _ => model_pairs.push(pair),
            }
        }

        let model = ModelSpec::from_pairs(model_pairs)?;
        let config = Self {
            strip_widths: strip_widths.unwrap_or_else(|| vec![model.strip_width]),
            particle_grid: particle_grid.ok_or(ConfigError::Missing("particles"))?,
            runs: runs.ok_or(ConfigError::Missing("runs"))?,
            reference: reference.unwrap_or(Reference::Oracle),
            base_seed: base_seed.unwrap_or(0),
            model,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.runs < 2 {
            return Err(ConfigError::Invalid(format!(
                "runs must be at least 2 to estimate error bars, got {}",
                self.runs
            )));
        }
        if self.particle_grid.is_empty() || self.particle_grid.contains(&0) {
            return Err(ConfigError::Invalid(
                "particles must list positive particle counts".into(),
            ));
        }
        if self.strip_widths.is_empty()
            || self
                .strip_widths
                .iter()
                .any(|&w| w == 0 || w > self.model.cols)
        {
            return Err(ConfigError::Invalid(format!(
                "strip_widths entries must be in 1..={}",
                self.model.cols
            )));
        }
        if let Reference::LongRun { n_particles, runs } = self.reference {
            if n_particles == 0 || runs == 0 {
                return Err(ConfigError::Invalid(
                    "long-run reference needs positive N_ref and runs_ref".into(),
                ));
            }
        }
        Ok(())
    }
}

fn parse_usize_list(pair: &modelspec::Pair) -> Result<Vec<usize>, ConfigError> {
    pair.value
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| ConfigError::Value {
            line: pair.line,
            key: pair.key.clone(),
            reason: format!("expected whitespace-separated integers, got `{}`", pair.value),
        })
}

fn parse_reference(pair: &modelspec::Pair) -> Result<Reference, ConfigError> {
    let tokens: Vec<&str> = pair.value.split_whitespace().collect();
    let bad = |reason: String| ConfigError::Value {
        line: pair.line,
        key: pair.key.clone(),
        reason,
    };
    match tokens.as_slice() {
        ["oracle"] => Ok(Reference::Oracle),
        ["fixed", v] => v
            .parse()
            .map(Reference::Fixed)
            .map_err(|_| bad(format!("expected a number after `fixed`, got `{v}`"))),
        ["long-run", n, r] => {
            let n_particles = n
                .parse()
                .map_err(|_| bad(format!("expected an integer N_ref, got `{n}`")))?;
            let runs = r
                .parse()
                .map_err(|_| bad(format!("expected an integer runs_ref, got `{r}`")))?;
            Ok(Reference::LongRun { n_particles, runs })
        }
        _ => Err(bad(
            "expected `oracle`, `fixed <value>`, or `long-run <N_ref> <runs_ref>`".into(),
        )),
    }
}

/// One estimator run within a benchmark grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub n_particles: usize,
    pub strip_width: usize,
    pub run: usize,
    pub seed: u64,
    pub capacity: f64,
    pub log2_z: f64,
    pub wall_clock_s: f64,
}

/// Aggregates over the runs of one (N, W) grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub n_particles: usize,
    pub strip_width: usize,
    pub runs: usize,
    pub mean: f64,
    pub stderr: f64,
    pub mse: f64,
    pub mean_wall_clock_s: f64,
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub reference: f64,
    pub records: Vec<BenchRecord>,
    pub summaries: Vec<BenchSummary>,
}

/// Resolves the reference capacity for a configuration.
pub fn reference_value(config: &BenchConfig) -> Result<f64, BenchError> {
    match config.reference {
        Reference::Fixed(v) => Ok(v),
        Reference::Oracle => {
            let model = config.model.build()?;
            oracle::exact_capacity(&model).map_err(|e| {
                // An out-of-reach oracle is a configuration problem: the
                // config must name a reachable reference.
                BenchError::Config(ConfigError::Invalid(format!(
                    "oracle reference unavailable: {e}; use `fixed` or `long-run`"
                )))
            })
        }
        Reference::LongRun { n_particles, runs } => {
            let model = config.model.build()?;
            let view = model.column_view();
            let mut total = 0.0;
            for i in 0..runs {
                let seed = reference_seed(config.base_seed, i);
                total += smc::run(&view, n_particles, &RngSpec::new(seed))?.capacity;
            }
            Ok(total / runs as f64)
        }
    }
}

/// Runs the full grid: `runs` independent estimator runs per (N, W) point,
/// with per-record seeds derived deterministically from the base seed, and
/// summaries against the reference capacity. Wall clock covers the
/// estimator run only.
pub fn run_bench(config: &BenchConfig) -> Result<BenchOutput, BenchError> {
    let reference = reference_value(config)?;
    let model = config.model.build()?;

    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for (n_idx, &n_particles) in config.particle_grid.iter().enumerate() {
        for (w_idx, &width) in config.strip_widths.iter().enumerate() {
            let view = model.strip_view(width)?;
            let mut point = Vec::with_capacity(config.runs);
            for run in 0..config.runs {
                let seed = record_seed(config, n_idx, w_idx, run);
                let started = Instant::now();
                let estimate = smc::run(&view, n_particles, &RngSpec::new(seed))?;
                let wall_clock_s = started.elapsed().as_secs_f64();
                point.push(BenchRecord {
                    n_particles,
                    strip_width: width,
                    run,
                    seed,
                    capacity: estimate.capacity,
                    log2_z: estimate.log2_z,
                    wall_clock_s,
                });
            }
            summaries.push(summarize(&point, reference));
            records.extend(point);
        }
    }
    Ok(BenchOutput {
        reference,
        records,
        summaries,
    })
}

fn record_seed(config: &BenchConfig, n_idx: usize, w_idx: usize, run: usize) -> u64 {
    let offset = (n_idx * config.strip_widths.len() + w_idx) * config.runs + run;
    config.base_seed.wrapping_add(offset as u64)
}

/// Long-run reference seeds live far from the record-seed range.
fn reference_seed(base_seed: u64, run: usize) -> u64 {
    (base_seed ^ 0x9E37_79B9_7F4A_7C15).wrapping_add(run as u64)
}

fn summarize(point: &[BenchRecord], reference: f64) -> BenchSummary {
    let runs = point.len();
    let mean = point.iter().map(|r| r.capacity).sum::<f64>() / runs as f64;
    let var = point
        .iter()
        .map(|r| (r.capacity - mean) * (r.capacity - mean))
        .sum::<f64>()
        / (runs - 1) as f64;
    let mse = point
        .iter()
        .map(|r| (r.capacity - reference) * (r.capacity - reference))
        .sum::<f64>()
        / runs as f64;
    BenchSummary {
        n_particles: point[0].n_particles,
        strip_width: point[0].strip_width,
        runs,
        mean,
        stderr: (var / runs as f64).sqrt(),
        mse,
        mean_wall_clock_s: point.iter().map(|r| r.wall_clock_s).sum::<f64>() / runs as f64,
    }
}
