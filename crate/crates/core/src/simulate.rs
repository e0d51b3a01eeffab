//! Seeded Monte Carlo simulation of arrival paths.
//!
//! Step `k` draws a uniform `u_k` from the path's stream and records an
//! arrival iff `u_k < λ_k`. Path `i` of a batch uses
//! [`path_seed`](crate::rng::path_seed)`(seed, i)`, so a batch is a pure
//! function of `(kernel, n, paths, seed)` whatever the worker count.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{ExcitingFunction, KernelForm};
use crate::moments::limit_arrival_prob;
use crate::rng::{path_seed, PathStream};

/// Default cap on `paths * n` Bernoulli draws per run.
pub const DEFAULT_DRAW_BUDGET: u64 = 1_000_000_000;

/// Running intensity `λ_k = a_0 + Σ_{i<k} a_{k-i} ξ_i`.
#[derive(Clone, Debug)]
pub struct Intensity {
    base_rate: f64,
    state: IntensityState,
}

#[derive(Clone, Debug)]
enum IntensityState {
    /// `s_{k+1} = rho s_k + alpha ξ_k`
    Geometric {
        alpha: f64,
        rho: f64,
        excitation: f64,
    },
    /// Last `K` arrivals, most recent first.
    Explicit {
        weights: Vec<f64>,
        recent: VecDeque<bool>,
    },
}

impl Intensity {
    pub fn new(kernel: &ExcitingFunction) -> Self {
        let state = match kernel.form() {
            KernelForm::Geometric { alpha, rho } => IntensityState::Geometric {
                alpha: *alpha,
                rho: *rho,
                excitation: 0.0,
            },
            KernelForm::Explicit { weights } => IntensityState::Explicit {
                weights: weights.clone(),
                recent: VecDeque::with_capacity(weights.len() + 1),
            },
        };
        Self {
            base_rate: kernel.base_rate(),
            state,
        }
    }

    #[inline]
    pub fn current(&self) -> f64 {
        match &self.state {
            IntensityState::Geometric { excitation, .. } => self.base_rate + excitation,
            IntensityState::Explicit { weights, recent } => {
                self.base_rate
                    + weights
                        .iter()
                        .zip(recent)
                        .filter(|(_, x)| **x)
                        .map(|(w, _)| w)
                        .sum::<f64>()
            }
        }
    }

    #[inline]
    pub fn record(&mut self, arrival: bool) {
        match &mut self.state {
            IntensityState::Geometric {
                alpha,
                rho,
                excitation,
            } => {
                *excitation = *rho * *excitation + if arrival { *alpha } else { 0.0 };
            }
            IntensityState::Explicit { weights, recent } => {
                if weights.is_empty() {
                    return;
                }
                recent.push_front(arrival);
                if recent.len() > weights.len() {
                    recent.pop_back();
                }
            }
        }
    }
}

/// Runs one path, calling `visit(step, arrival, intensity)` for steps `1..=n`.
/// Returns `H_n`.
#[inline]
pub fn run_path<F>(kernel: &ExcitingFunction, n: usize, path_seed: u64, mut visit: F) -> u32
where
    F: FnMut(usize, bool, f64),
{
    let mut stream = PathStream::new(path_seed);
    let mut intensity = Intensity::new(kernel);
    let mut count = 0;
    for step in 1..=n {
        let lambda = intensity.current();
        let arrival = stream.uniform() < lambda;
        count += u32::from(arrival);
        intensity.record(arrival);
        visit(step, arrival, lambda);
    }
    count
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPath {
    /// `ξ_1..ξ_n` as 0/1
    pub arrivals: Vec<u8>,
    /// `λ_1..λ_n`
    pub intensities: Vec<f64>,
    /// `H_n`
    pub count: u32,
}

impl SimulatedPath {
    /// `H_1..H_n`
    pub fn counting_process(&self) -> Vec<u32> {
        self.arrivals
            .iter()
            .scan(0u32, |h, x| {
                *h += u32::from(*x);
                Some(*h)
            })
            .collect()
    }
}

pub fn simulate_path(kernel: &ExcitingFunction, n: usize, path_seed: u64) -> SimulatedPath {
    let mut arrivals = Vec::with_capacity(n);
    let mut intensities = Vec::with_capacity(n);
    let count = run_path(kernel, n, path_seed, |_, x, lambda| {
        arrivals.push(u8::from(x));
        intensities.push(lambda);
    });
    SimulatedPath {
        arrivals,
        intensities,
        count,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retain {
    /// Terminal counts `H_n` only.
    #[default]
    Terminal,
    /// Full `ξ` and `λ` traces for every path.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub retain: Retain,
    #[serde(default = "default_draw_budget")]
    pub max_draws: u64,
}

fn default_draw_budget() -> u64 {
    DEFAULT_DRAW_BUDGET
}

impl BatchConfig {
    pub fn new(horizon: usize, paths: usize, seed: u64) -> Self {
        Self {
            horizon,
            paths,
            seed,
            retain: Retain::Terminal,
            max_draws: DEFAULT_DRAW_BUDGET,
        }
    }

    pub fn retain(mut self, retain: Retain) -> Self {
        self.retain = retain;
        self
    }

    pub(crate) fn check_budget(&self) -> Result<()> {
        if self.paths == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig(
                "paths and horizon must be at least 1".into(),
            ));
        }
        let draws = (self.paths as u64).saturating_mul(self.horizon as u64);
        if draws > self.max_draws {
            return Err(Error::BudgetExceeded {
                what: "Bernoulli draws",
                requested: draws,
                cap: self.max_draws,
            });
        }
        Ok(())
    }
}

/// Result of [`simulate_batch`].
#[derive(Clone, Debug, Serialize)]
pub struct PathBatch {
    pub kernel_fingerprint: String,
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    /// `H_n` per path, in path order.
    pub counts: Vec<u32>,
    /// Present when the batch was run with [`Retain::Full`].
    pub full: Option<Vec<SimulatedPath>>,
}

impl PathBatch {
    /// Batch mean of `H_n / n`.
    pub fn mean_fraction(&self) -> f64 {
        let total: u64 = self.counts.iter().map(|&c| u64::from(c)).sum();
        total as f64 / (self.paths as f64 * self.horizon as f64)
    }

    /// Number of paths with `H_n = r`, for `r = 0..=n`.
    pub fn count_histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; self.horizon + 1];
        for &c in &self.counts {
            hist[c as usize] += 1;
        }
        hist
    }

    /// Empirical `P(ξ_k = 1)` per step; needs full retention.
    pub fn arrival_frequencies(&self) -> Option<Vec<f64>> {
        let full = self.full.as_ref()?;
        let mut freq = vec![0u64; self.horizon];
        for path in full {
            for (f, x) in freq.iter_mut().zip(&path.arrivals) {
                *f += u64::from(*x);
            }
        }
        Some(freq.iter().map(|&f| f as f64 / self.paths as f64).collect())
    }
}

pub fn simulate_batch(kernel: &ExcitingFunction, config: &BatchConfig) -> Result<PathBatch> {
    config.check_budget()?;
    let n = config.horizon;
    let seed = config.seed;
    let (counts, full) = match config.retain {
        Retain::Terminal => {
            let counts = (0..config.paths as u64)
                .into_par_iter()
                .map(|i| run_path(kernel, n, path_seed(seed, i), |_, _, _| {}))
                .collect();
            (counts, None)
        }
        Retain::Full => {
            let paths: Vec<SimulatedPath> = (0..config.paths as u64)
                .into_par_iter()
                .map(|i| simulate_path(kernel, n, path_seed(seed, i)))
                .collect();
            (paths.iter().map(|p| p.count).collect(), Some(paths))
        }
    };
    Ok(PathBatch {
        kernel_fingerprint: kernel.fingerprint(),
        horizon: n,
        paths: config.paths,
        seed,
        counts,
        full,
    })
}

/// `(H_n - n μ) / √n` per path.
pub fn clt_statistic(batch: &PathBatch, kernel: &ExcitingFunction) -> Vec<f64> {
    let n = batch.horizon as f64;
    let centre = n * limit_arrival_prob(kernel);
    let scale = n.sqrt();
    batch
        .counts
        .iter()
        .map(|&h| (f64::from(h) - centre) / scale)
        .collect()
}

/// Sample mean and unbiased sample variance.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, if xs.len() > 1 { ss / (n - 1.0) } else { 0.0 })
}
