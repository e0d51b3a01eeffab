//! Exact small-horizon distributions by enumerating all `2^n` histories.
//!
//! Each history `ξ_1..ξ_n` has probability `Π_k [λ_k if ξ_k = 1 else 1 - λ_k]`.
//! The intensity depends on the whole arrival pattern, not just on the count,
//! so histories with equal `H_n` cannot be merged: the walk below visits every
//! leaf. It is depth-first and keeps only the current prefix, so memory is
//! `O(n)` per worker.
//!
//! Work is split at a fixed prefix depth and partial results are merged in
//! prefix order, which makes every result bitwise identical for any worker
//! count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{ExcitingFunction, Truncation, TRUNCATION_TOLERANCE};

/// Default number of enumerated histories, `2^22`.
pub const DEFAULT_STATE_BUDGET: u64 = 1 << 22;

/// Histories are stored as bit masks.
const MAX_MASK_HORIZON: usize = 63;

const SPLIT_DEPTH: usize = 8;

/// Compensated (Neumaier) sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.compensation += other.compensation;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Finite kernel used by the walker.
#[derive(Clone, Debug)]
pub struct Walker {
    base_rate: f64,
    weights: Vec<f64>,
    horizon: usize,
    truncation_lag: Option<usize>,
}

impl Walker {
    pub fn new(kernel: &ExcitingFunction, n: usize) -> Result<Self> {
        Self::with_budget(kernel, n, DEFAULT_STATE_BUDGET)
    }

    pub fn with_budget(kernel: &ExcitingFunction, n: usize, max_states: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::HorizonTooShort { got: 0, min: 1 });
        }
        let states = if n >= 64 { u64::MAX } else { 1u64 << n };
        if n > MAX_MASK_HORIZON || states > max_states {
            return Err(Error::BudgetExceeded {
                what: "exact enumeration states",
                requested: states,
                cap: max_states,
            });
        }
        let Truncation {
            base_rate,
            mut weights,
            lag,
            ..
        } = kernel.truncate(TRUNCATION_TOLERANCE);
        // lags >= n never contribute
        weights.truncate(n.saturating_sub(1));
        Ok(Self {
            base_rate,
            weights,
            horizon: n,
            truncation_lag: lag,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn truncation_lag(&self) -> Option<usize> {
        self.truncation_lag
    }

    /// Intensity at step `k + 1` (0-based `k` steps decided) given `mask`,
    /// where bit `j` holds `ξ_{j+1}`.
    #[inline]
    fn intensity(&self, mask: u64, k: usize) -> f64 {
        let mut lambda = self.base_rate;
        for (l, w) in self.weights.iter().enumerate().take(k) {
            if mask >> (k - 1 - l) & 1 == 1 {
                lambda += w;
            }
        }
        lambda
    }

    /// Folds `leaf(acc, probability, mask)` over every history. `init` creates
    /// one accumulator per prefix block and `merge` combines them in prefix
    /// order.
    pub fn fold<A, I, L, M>(&self, init: I, leaf: L, merge: M) -> Result<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        L: Fn(&mut A, f64, u64) + Sync,
        M: Fn(&mut A, A),
    {
        let depth = self.horizon.min(SPLIT_DEPTH);
        let blocks: Vec<Result<A>> = (0..1u64 << depth)
            .into_par_iter()
            .map(|prefix| {
                let mut acc = init();
                let mut prob = 1.0;
                for k in 0..depth {
                    let lambda = self.checked_intensity(prefix, k)?;
                    prob *= if prefix >> k & 1 == 1 {
                        lambda
                    } else {
                        1.0 - lambda
                    };
                }
                self.descend(prefix, depth, prob, &mut acc, &leaf)?;
                Ok(acc)
            })
            .collect();
        let mut blocks = blocks.into_iter();
        let mut total = blocks.next().expect("at least one block")?;
        for block in blocks {
            merge(&mut total, block?);
        }
        Ok(total)
    }

    fn checked_intensity(&self, mask: u64, k: usize) -> Result<f64> {
        let lambda = self.intensity(mask, k);
        if lambda > 0.0 && lambda < 1.0 {
            Ok(lambda)
        } else {
            Err(Error::IntensityOutOfRange {
                step: k + 1,
                value: lambda,
            })
        }
    }

    fn descend<A, L>(&self, mask: u64, k: usize, prob: f64, acc: &mut A, leaf: &L) -> Result<()>
    where
        L: Fn(&mut A, f64, u64),
    {
        if k == self.horizon {
            leaf(acc, prob, mask);
            return Ok(());
        }
        let lambda = self.checked_intensity(mask, k)?;
        self.descend(mask, k + 1, prob * (1.0 - lambda), acc, leaf)?;
        self.descend(mask | 1 << k, k + 1, prob * lambda, acc, leaf)
    }
}

/// Exact pmf `c_{0,n}..c_{n,n}` of `H_n`.
#[derive(Clone, Debug, Serialize)]
pub struct ExactDistribution {
    pub horizon: usize,
    pub pmf: Vec<f64>,
    pub kernel_fingerprint: String,
    pub truncation_lag: Option<usize>,
}

/// Deviations of an [`ExactDistribution`] from its closed-form identities.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExactChecks {
    /// `|Σ_r c_{r,n} - 1|`
    pub norm_err: f64,
    /// `|c_{0,n} - (1 - a_0)^n|`
    pub c0_err: f64,
    /// `|c_{n,n} - a_0 (a_0 + a_1) ... (a_0 + ... + a_{n-1})|`
    pub cnn_err: f64,
}

impl ExactChecks {
    pub fn max_err(&self) -> f64 {
        self.norm_err.max(self.c0_err).max(self.cnn_err)
    }
}

/// `a_0 (a_0 + a_1) ... (a_0 + ... + a_{n-1})`, the probability of `n` arrivals in `n` steps.
pub fn all_arrivals_prob(kernel: &ExcitingFunction, n: usize) -> f64 {
    let mut partial = kernel.base_rate();
    let mut prod = 1.0;
    for k in 0..n {
        if k > 0 {
            partial += kernel.weight_unchecked(k);
        }
        prod *= partial;
    }
    prod
}

impl ExactDistribution {
    pub fn checks(&self, kernel: &ExcitingFunction) -> ExactChecks {
        let n = self.horizon;
        let norm: f64 = self.pmf.iter().sum();
        ExactChecks {
            norm_err: (norm - 1.0).abs(),
            c0_err: (self.pmf[0] - (1.0 - kernel.base_rate()).powi(n as i32)).abs(),
            cnn_err: (self.pmf[n] - all_arrivals_prob(kernel, n)).abs(),
        }
    }

    /// `E(H_n)`
    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(r, c)| r as f64 * c).sum()
    }

    /// `log E(e^{t H_n})`, evaluated in log-sum-exp form.
    pub fn log_mgf(&self, t: f64) -> f64 {
        log_sum_exp(
            self.pmf
                .iter()
                .enumerate()
                .filter(|(_, c)| **c > 0.0)
                .map(|(r, c)| c.ln() + r as f64 * t),
        )
    }

    /// `P(H_n >= count)`
    pub fn upper_tail(&self, count: usize) -> f64 {
        self.pmf.iter().skip(count).sum()
    }
}

pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn enumerate_pmf(kernel: &ExcitingFunction, n: usize) -> Result<ExactDistribution> {
    enumerate_pmf_with_budget(kernel, n, DEFAULT_STATE_BUDGET)
}

pub fn enumerate_pmf_with_budget(
    kernel: &ExcitingFunction,
    n: usize,
    max_states: u64,
) -> Result<ExactDistribution> {
    let walker = Walker::with_budget(kernel, n, max_states)?;
    let bins = walker.fold(
        || vec![CompensatedSum::default(); n + 1],
        |bins, prob, mask| bins[mask.count_ones() as usize].add(prob),
        |total, block| {
            for (t, b) in total.iter_mut().zip(&block) {
                t.merge(b);
            }
        },
    )?;
    Ok(ExactDistribution {
        horizon: n,
        pmf: bins.iter().map(CompensatedSum::value).collect(),
        kernel_fingerprint: kernel.fingerprint(),
        truncation_lag: walker.truncation_lag(),
    })
}

/// `E(e^{t H_n}) = Σ_r c_{r,n} e^{r t}`.
pub fn exact_mgf(dist: &ExactDistribution, t: f64) -> f64 {
    dist.log_mgf(t).exp()
}

/// Exact first and second moments of `ξ_1..ξ_n`.
#[derive(Clone, Debug)]
pub struct ExactMoments {
    pub n: usize,
    /// `E(ξ_i)` for `i = 1..n`
    pub mean: Vec<f64>,
    /// `E(ξ_i ξ_j)`, row-major `n x n`, 0-based.
    pub second: Vec<f64>,
}

impl ExactMoments {
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.second[(i - 1) * self.n + (j - 1)] - self.mean[i - 1] * self.mean[j - 1]
    }
}

pub fn exact_moments(kernel: &ExcitingFunction, n: usize) -> Result<ExactMoments> {
    let walker = Walker::new(kernel, n)?;
    let sums = walker.fold(
        || vec![CompensatedSum::default(); n * n],
        |acc, prob, mask| {
            for i in 0..n {
                if mask >> i & 1 == 0 {
                    continue;
                }
                for j in i..n {
                    if mask >> j & 1 == 1 {
                        acc[i * n + j].add(prob);
                    }
                }
            }
        },
        |total, block| {
            for (t, b) in total.iter_mut().zip(&block) {
                t.merge(b);
            }
        },
    )?;
    let mut second = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = sums[i * n + j].value();
            second[i * n + j] = v;
            second[j * n + i] = v;
        }
    }
    let mean = (0..n).map(|i| second[i * n + i]).collect();
    Ok(ExactMoments { n, mean, second })
}

/// `Cov[ξ_i, ξ_j]` for `1 <= i < j <= n`.
pub fn exact_pair_covariance(
    kernel: &ExcitingFunction,
    i: usize,
    j: usize,
    n: usize,
) -> Result<f64> {
    if !(1 <= i && i < j && j <= n) {
        return Err(Error::IndexOutOfRange(format!(
            "need 1 <= i < j <= n, got i={i}, j={j}, n={n}"
        )));
    }
    let walker = Walker::new(kernel, n)?;
    let (bi, bj) = (i - 1, j - 1);
    let sums = walker.fold(
        || [CompensatedSum::default(); 3],
        |acc, prob, mask| {
            let xi = mask >> bi & 1 == 1;
            let xj = mask >> bj & 1 == 1;
            if xi {
                acc[0].add(prob);
            }
            if xj {
                acc[1].add(prob);
            }
            if xi && xj {
                acc[2].add(prob);
            }
        },
        |total, block| {
            for (t, b) in total.iter_mut().zip(&block) {
                t.merge(b);
            }
        },
    )?;
    Ok(sums[2].value() - sums[0].value() * sums[1].value())
}
