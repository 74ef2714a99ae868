//! Fully adapted sequential Monte Carlo over the column (or strip) chain:
//! exact proposals and resampling weights come from the per-step forward
//! pass, so every particle carries equal weight after every step and the
//! running product of mean resampling weights estimates the partition
//! function without bias.
//!
//! All randomness is drawn from counter-derived substreams indexed by
//! (seed, step, particle), so a run is bit-identical no matter how the
//! per-particle work is scheduled across threads.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ffbs;
use crate::model::{ColumnState, StripView};
use crate::num;

/// Substream slot reserved for ancestor selection at each step.
const SELECTION_SLOT: u64 = u32::MAX as u64;

/// Seed plus the deterministic substream rule: particle `i` at step `k`
/// draws from stream `k << 32 | i` of a ChaCha cipher keyed by the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSpec {
    pub seed: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn stream(&self, step: usize, slot: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((step as u64) << 32) | slot);
        rng
    }

    fn particle_rng(&self, step: usize, particle: usize) -> ChaCha8Rng {
        debug_assert!((particle as u64) < SELECTION_SLOT);
        self.stream(step, particle as u64)
    }

    fn selection_rng(&self, step: usize) -> ChaCha8Rng {
        self.stream(step, SELECTION_SLOT)
    }
}

/// Estimate of the log2 partition function and the per-site capacity,
/// with the run's configuration attached.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    pub log2_z: f64,
    /// `log2_z / (rows * cols)`, bits per lattice site.
    pub capacity: f64,
    pub rows: usize,
    pub cols: usize,
    pub strip_width: usize,
    pub n_particles: usize,
    pub seed: u64,
    /// Filled by callers that time the run; the estimator itself reports 0.
    pub wall_clock_seconds: f64,
}

impl CapacityEstimate {
    pub fn with_wall_clock(mut self, seconds: f64) -> Self {
        self.wall_clock_seconds = seconds;
        self
    }
}

/// Options for [`ParticleSystem::init_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SmcOptions {
    /// Keep every particle's full column history. Costs O(N * rows * cols)
    /// memory and is only needed for trajectory-level diagnostics; the
    /// estimator itself uses the latest column per particle.
    pub store_trajectories: bool,
}

/// The particle population: the latest (super-)column per particle plus the
/// running log2 estimate of the partition function.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    current: Vec<ColumnState>,
    log2_z_hat: f64,
    completed: usize,
    trajectories: Option<Vec<Vec<ColumnState>>>,
    last_ancestors: Option<Vec<usize>>,
}

impl ParticleSystem {
    /// Draws `n_particles` exact i.i.d. samples from the first step's
    /// target and seeds the estimate with that step's exact normalizer
    /// (no Monte Carlo error at step 1).
    pub fn init(view: &StripView<'_>, n_particles: usize, rng: &RngSpec) -> Result<Self> {
        Self::init_with(view, n_particles, rng, SmcOptions::default())
    }

    pub fn init_with(
        view: &StripView<'_>,
        n_particles: usize,
        rng: &RngSpec,
        options: SmcOptions,
    ) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::InvalidParameter(alloc::string::String::from(
                "particle count must be positive",
            )));
        }
        if n_particles as u64 >= SELECTION_SLOT {
            return Err(Error::InvalidParameter(alloc::format!(
                "particle count must be below {SELECTION_SLOT}"
            )));
        }
        let stack = ffbs::forward_messages(view, 0, None)?;
        if !stack.has_support() {
            return Err(Error::EmptySupport);
        }
        let log2_z_hat = stack.log2_resampling_weight();

        let draws = map_particles(n_particles, |i| {
            let mut prng = rng.particle_rng(1, i);
            ffbs::backward_sample(view, 0, None, &stack, &mut prng)
        });

        let mut current = Vec::with_capacity(n_particles);
        let mut trajectories = options.store_trajectories.then(Vec::new);
        for draw in draws {
            if let Some(t) = trajectories.as_mut() {
                t.push(draw.columns.clone());
            }
            current.push(draw.columns.into_iter().next_back().expect("nonempty draw"));
        }

        Ok(Self {
            current,
            log2_z_hat,
            completed: 1,
            trajectories,
            last_ancestors: None,
        })
    }

    /// Advances the system to step `k` (1-based; requires `k` to be the
    /// next uncompleted step): computes every particle's resampling weight,
    /// draws ancestors, propagates through the optimal proposal, and folds
    /// the mean weight into the running estimate.
    pub fn step(&mut self, view: &StripView<'_>, k: usize, rng: &RngSpec) -> Result<()> {
        if k != self.completed + 1 || k < 2 || k > view.super_cols() {
            return Err(Error::InvalidParameter(alloc::format!(
                "step {k} out of order (completed {}, total {})",
                self.completed,
                view.super_cols()
            )));
        }
        let strip = k - 1; // 0-based strip index
        let n = self.current.len();

        let log2_nu = map_particles(n, |i| {
            ffbs::forward_messages(view, strip, Some(&self.current[i]))
                .map(|s| s.log2_resampling_weight())
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;

        let shift = log2_nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Err(Error::SupportCollapse { step: k });
        }
        let update = weight_update(&log2_nu, shift);

        let mut selection = rng.selection_rng(k);
        let ancestors = multinomial_sorted(&update.probabilities, n, &mut selection);

        let draws = map_particles(n, |i| {
            let prev = &self.current[ancestors[i]];
            let stack = ffbs::forward_messages(view, strip, Some(prev))
                .expect("forward pass over a sampler-produced state");
            let mut prng = rng.particle_rng(k, i);
            ffbs::backward_sample(view, strip, Some(prev), &stack, &mut prng)
        });

        let mut new_current = Vec::with_capacity(n);
        let mut new_trajectories = self
            .trajectories
            .as_ref()
            .map(|_| Vec::with_capacity(n));
        for (i, draw) in draws.into_iter().enumerate() {
            if let (Some(out), Some(old)) = (new_trajectories.as_mut(), self.trajectories.as_ref())
            {
                let mut lineage = old[ancestors[i]].clone();
                lineage.extend(draw.columns.iter().cloned());
                out.push(lineage);
            }
            new_current.push(draw.columns.into_iter().next_back().expect("nonempty draw"));
        }

        self.current = new_current;
        self.trajectories = new_trajectories;
        self.last_ancestors = Some(ancestors);
        self.log2_z_hat += update.log2_mean;
        self.completed = k;
        Ok(())
    }

    /// Running log2 estimate of the partition function over the completed
    /// steps.
    pub fn log2_z_hat(&self) -> f64 {
        self.log2_z_hat
    }

    /// Latest (super-)column's last original column, one per particle.
    pub fn current(&self) -> &[ColumnState] {
        &self.current
    }

    /// Number of completed (super-)columns.
    pub fn completed_steps(&self) -> usize {
        self.completed
    }

    pub fn n_particles(&self) -> usize {
        self.current.len()
    }

    /// Full column history per particle, when trajectory storage is on.
    pub fn trajectories(&self) -> Option<&[Vec<ColumnState>]> {
        self.trajectories.as_deref()
    }

    /// Ancestor indices drawn at the most recent step.
    pub fn last_ancestors(&self) -> Option<&[usize]> {
        self.last_ancestors.as_deref()
    }
}

/// Runs the full estimator over every step of `view`.
pub fn run(view: &StripView<'_>, n_particles: usize, rng: &RngSpec) -> Result<CapacityEstimate> {
    run_with(view, n_particles, rng, SmcOptions::default()).map(|(est, _)| est)
}

/// As [`run`], returning the final particle system as well.
pub fn run_with(
    view: &StripView<'_>,
    n_particles: usize,
    rng: &RngSpec,
    options: SmcOptions,
) -> Result<(CapacityEstimate, ParticleSystem)> {
    let mut system = ParticleSystem::init_with(view, n_particles, rng, options)?;
    for k in 2..=view.super_cols() {
        system.step(view, k, rng)?;
    }
    let model = view.model();
    let estimate = CapacityEstimate {
        log2_z: system.log2_z_hat(),
        capacity: capacity_from_log2_z(system.log2_z_hat(), model.rows(), model.cols()),
        rows: model.rows(),
        cols: model.cols(),
        strip_width: view.width(),
        n_particles,
        seed: rng.seed,
        wall_clock_seconds: 0.0,
    };
    Ok((estimate, system))
}

/// Per-site capacity from a log2 partition function.
pub fn capacity_from_log2_z(log2_z: f64, rows: usize, cols: usize) -> f64 {
    debug_assert!(rows >= 1 && cols >= 1);
    log2_z / (rows * cols) as f64
}

/// Result of one max-shifted weight update.
#[derive(Debug, Clone)]
pub struct WeightUpdate {
    /// Normalized resampling probabilities; exactly 0 for particles whose
    /// log2 weight is negative infinity.
    pub probabilities: Vec<f64>,
    /// Increment for the running log2 estimate: the log2 mean of the raw
    /// weights, reconstructed from the shifted ones.
    pub log2_mean: f64,
}

/// Converts log2 resampling weights into resampling probabilities and the
/// estimate increment, shifting by `shift` before exponentiating. Both
/// outputs are invariant to the choice of `shift` (up to rounding); the
/// caller passes the maximum log2 weight so the largest shifted weight is
/// exactly 1.
pub fn weight_update(log2_weights: &[f64], shift: f64) -> WeightUpdate {
    debug_assert!(!log2_weights.is_empty());
    debug_assert!(shift.is_finite());
    let shifted: Vec<f64> = log2_weights
        .iter()
        .map(|&l| {
            if l == f64::NEG_INFINITY {
                0.0
            } else {
                num::exp2(l - shift)
            }
        })
        .collect();
    let total: f64 = shifted.iter().sum();
    debug_assert!(total > 0.0);
    let n = log2_weights.len() as f64;
    let log2_mean = num::log2(total) - num::log2(n) + shift;
    let probabilities = shifted.iter().map(|&w| w / total).collect();
    WeightUpdate {
        probabilities,
        log2_mean,
    }
}

/// Draws `n` ancestor indices whose counts are exactly multinomial in the
/// given probabilities, in O(n): the order statistics of n uniforms are
/// generated directly from exponential spacings and swept once through the
/// cumulative weights. Zero-probability entries are skipped outright.
fn multinomial_sorted<R: Rng>(probabilities: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let positive: Vec<(usize, f64)> = probabilities
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p > 0.0)
        .map(|(i, &p)| (i, p))
        .collect();
    debug_assert!(!positive.is_empty());
    let total_p: f64 = positive.iter().map(|&(_, p)| p).sum();

    let gaps: Vec<f64> = (0..=n).map(|_| -num::ln(1.0 - rng.gen::<f64>())).collect();
    let total_gap: f64 = gaps.iter().sum();

    let mut out = Vec::with_capacity(n);
    let mut cum_gap = 0.0;
    let mut idx = 0usize;
    let mut cum_p = positive[0].1;
    for &gap in gaps.iter().take(n) {
        cum_gap += gap;
        let target = cum_gap / total_gap * total_p;
        while target > cum_p && idx + 1 < positive.len() {
            idx += 1;
            cum_p += positive[idx].1;
        }
        out.push(positive[idx].0);
    }
    out
}

fn map_particles<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
