//! Insurance surplus `U_k = u + k p - H_k` with unit claims arriving as a DTHP.
//!
//! Ruin means `U_k < 0` at some `k <= n`; a surplus of exactly zero is not
//! ruin. Because `u + k p` is computed in floating point, surpluses within
//! [`RUIN_TOLERANCE`] of zero count as zero.
//!
//! The Monte Carlo fan keeps one histogram of `H_k` per step. `H_k` is an
//! integer in `[0, k]`, so the per-step mean and nearest-rank percentiles come
//! out of integer counts, and merging worker partials is exact and
//! order-independent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{enumerate_pmf, CompensatedSum, Walker};
use crate::kernel::ExcitingFunction;
use crate::ldp::{chernoff_tail, legendre_analytic, uniform_grid, GammaBounds, TailBound};
use crate::moments::limit_arrival_prob;
use crate::rng::path_seed;
use crate::simulate::{run_path, DEFAULT_DRAW_BUDGET};

pub const RUIN_TOLERANCE: f64 = 1e-9;

/// Largest horizon the fan histograms are built for.
pub const MAX_FAN_HORIZON: usize = 5000;

/// Horizons up to this size get an exact terminal exceedance in the LDP band.
pub const EXACT_BAND_HORIZON: usize = 20;

const PATHS_PER_BLOCK: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurplusConfig {
    /// `u`
    pub initial_surplus: f64,
    /// `p`
    pub premium: f64,
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    #[serde(default = "default_draw_budget")]
    pub max_draws: u64,
}

fn default_draw_budget() -> u64 {
    DEFAULT_DRAW_BUDGET
}

impl SurplusConfig {
    pub fn new(
        initial_surplus: f64,
        premium: f64,
        horizon: usize,
        paths: usize,
        seed: u64,
    ) -> Self {
        Self {
            initial_surplus,
            premium,
            horizon,
            paths,
            seed,
            max_draws: DEFAULT_DRAW_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.initial_surplus) || !open_unit(self.premium) {
            return Err(Error::InvalidConfig(format!(
                "initial surplus and premium must lie in (0, 1), got u={}, p={}",
                self.initial_surplus, self.premium
            )));
        }
        if self.horizon == 0 || self.paths == 0 {
            return Err(Error::InvalidConfig(
                "horizon and paths must be at least 1".into(),
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

/// `U_k < 0` for `count = H_k`.
#[inline]
pub fn is_ruined(initial_surplus: f64, premium: f64, step: usize, count: u32) -> bool {
    f64::from(count) - (initial_surplus + step as f64 * premium) > RUIN_TOLERANCE
}

/// `U_1..U_n` from a claim sequence.
pub fn surplus_from_claims(initial_surplus: f64, premium: f64, claims: &[u8]) -> Vec<f64> {
    let mut h = 0u32;
    claims
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            h += u32::from(x);
            initial_surplus + (i + 1) as f64 * premium - f64::from(h)
        })
        .collect()
}

pub fn surplus_path(kernel: &ExcitingFunction, config: &SurplusConfig, path_seed: u64) -> Vec<f64> {
    let mut claims = Vec::with_capacity(config.horizon);
    run_path(kernel, config.horizon, path_seed, |_, x, _| {
        claims.push(u8::from(x))
    });
    surplus_from_claims(config.initial_surplus, config.premium, &claims)
}

/// Minimum premium for long-run profit, `μ = a_0 / (1 - Σ a_i)`.
pub fn premium_threshold(kernel: &ExcitingFunction) -> f64 {
    limit_arrival_prob(kernel)
}

/// `lim E(U_n)/n = p - μ`.
pub fn long_run_drift(kernel: &ExcitingFunction, premium: f64) -> f64 {
    premium - premium_threshold(kernel)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FanRow {
    pub step: usize,
    pub mean: f64,
    pub p5: f64,
    pub median: f64,
    pub p95: f64,
}

/// Bracket of `P(H_n/n ∈ (u/n + p, 1))` from the conjugates of `L` and `U`.
#[derive(Clone, Debug, Serialize)]
pub struct RuinBand {
    pub horizon: usize,
    /// `u/n + p`
    pub threshold: f64,
    /// `u/n + p >= 1`: ruin at the horizon is impossible with unit claims.
    pub empty: bool,
    /// `inf L*` over the interval
    pub inf_lower_conjugate: f64,
    /// `inf U*` over the interval
    pub inf_upper_conjugate: f64,
    /// `exp(-n inf L*)`
    pub lower: f64,
    /// `exp(-n inf U*)`
    pub upper: f64,
    /// Finite-n bound on `P(H_n/n >= u/n + p)`.
    pub chernoff: Option<TailBound>,
    /// Exact `P(H_n > u + n p)` for small horizons.
    pub exact_terminal: Option<f64>,
    /// `p <= μ`: the surplus drifts down and the approximation regime does not apply.
    pub premium_below_threshold: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RuinReport {
    pub config: SurplusConfig,
    pub kernel_fingerprint: String,
    pub rows: Vec<FanRow>,
    /// Fraction of paths with `U_k < 0` for some `k <= n`.
    pub ruin_frequency: f64,
    pub ruin_std_err: f64,
    pub premium_threshold: f64,
    /// `p - μ`
    pub drift_theory: f64,
    /// Least-squares slope of the mean surplus over steps `n/2..=n`.
    pub drift_estimate: f64,
    pub ldp_band: RuinBand,
}

struct FanAccumulator {
    /// Step `k` occupies `k + 1` bins starting at `(k - 1)(k + 2) / 2`.
    hist: Vec<u32>,
    ruined: u64,
}

fn fan_offset(step: usize) -> usize {
    (step - 1) * (step + 2) / 2
}

impl FanAccumulator {
    fn new(n: usize) -> Self {
        Self {
            hist: vec![0; n * (n + 3) / 2],
            ruined: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.hist.iter_mut().zip(&other.hist) {
            *a += b;
        }
        self.ruined += other.ruined;
        self
    }
}

/// Count with ascending nearest rank `rank` (1-based) in a histogram.
fn ranked_count(bins: &[u32], rank: u64) -> usize {
    let mut seen = 0u64;
    for (h, &c) in bins.iter().enumerate() {
        seen += u64::from(c);
        if seen >= rank {
            return h;
        }
    }
    bins.len() - 1
}

/// Nearest-rank `q`-quantile of the surplus `c - H` at one step.
fn surplus_percentile(bins: &[u32], paths: u64, shift: f64, q: f64) -> f64 {
    let rank = ((q * paths as f64).ceil() as u64).clamp(1, paths);
    // r-th smallest surplus is the r-th largest count
    shift - ranked_count(bins, paths - rank + 1) as f64
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn monte_carlo_fan(kernel: &ExcitingFunction, config: &SurplusConfig) -> Result<RuinReport> {
    config.validate()?;
    let n = config.horizon;
    if n > MAX_FAN_HORIZON {
        return Err(Error::BudgetExceeded {
            what: "fan horizon",
            requested: n as u64,
            cap: MAX_FAN_HORIZON as u64,
        });
    }
    let (u, p) = (config.initial_surplus, config.premium);
    let blocks = config.paths.div_ceil(PATHS_PER_BLOCK);
    let acc = (0..blocks)
        .into_par_iter()
        .fold(
            || FanAccumulator::new(n),
            |mut acc, block| {
                let start = block * PATHS_PER_BLOCK;
                let end = (start + PATHS_PER_BLOCK).min(config.paths);
                for i in start..end {
                    let mut count = 0u32;
                    let mut ruined = false;
                    run_path(kernel, n, path_seed(config.seed, i as u64), |step, x, _| {
                        count += u32::from(x);
                        acc.hist[fan_offset(step) + count as usize] += 1;
                        ruined |= x && is_ruined(u, p, step, count);
                    });
                    acc.ruined += u64::from(ruined);
                }
                acc
            },
        )
        .reduce(|| FanAccumulator::new(n), FanAccumulator::merge);

    let paths = config.paths as u64;
    let rows: Vec<FanRow> = (1..=n)
        .map(|step| {
            let bins = &acc.hist[fan_offset(step)..fan_offset(step) + step + 1];
            let total: u64 = bins
                .iter()
                .enumerate()
                .map(|(h, &c)| h as u64 * u64::from(c))
                .sum();
            let shift = u + step as f64 * p;
            FanRow {
                step,
                mean: shift - total as f64 / paths as f64,
                p5: surplus_percentile(bins, paths, shift, 0.05),
                median: surplus_percentile(bins, paths, shift, 0.50),
                p95: surplus_percentile(bins, paths, shift, 0.95),
            }
        })
        .collect();

    let late = &rows[(n / 2).saturating_sub(1)..];
    let drift_estimate = if late.len() >= 2 {
        let xs: Vec<f64> = late.iter().map(|r| r.step as f64).collect();
        let ys: Vec<f64> = late.iter().map(|r| r.mean).collect();
        slope(&xs, &ys)
    } else {
        f64::NAN
    };
    let q = acc.ruined as f64 / paths as f64;

    Ok(RuinReport {
        config: config.clone(),
        kernel_fingerprint: kernel.fingerprint(),
        rows,
        ruin_frequency: q,
        ruin_std_err: (q * (1.0 - q) / paths as f64).sqrt(),
        premium_threshold: premium_threshold(kernel),
        drift_theory: long_run_drift(kernel, p),
        drift_estimate,
        ldp_band: ldp_ruin_band(kernel, u, p, n)?,
    })
}

/// `P(H_n > u + n p)` by enumeration.
pub fn exact_terminal_exceedance(
    kernel: &ExcitingFunction,
    initial_surplus: f64,
    premium: f64,
    n: usize,
) -> Result<f64> {
    let dist = enumerate_pmf(kernel, n)?;
    Ok(dist
        .pmf
        .iter()
        .enumerate()
        .filter(|(r, _)| is_ruined(initial_surplus, premium, n, *r as u32))
        .map(|(_, c)| c)
        .sum())
}

/// Finite-horizon ruin probability `P(min_{k<=n} U_k < 0)` by enumeration.
pub fn exact_ruin_probability(
    kernel: &ExcitingFunction,
    initial_surplus: f64,
    premium: f64,
    n: usize,
) -> Result<f64> {
    let walker = Walker::new(kernel, n)?;
    let total = walker.fold(
        CompensatedSum::default,
        |acc, prob, mask| {
            let mut count = 0u32;
            for k in 0..n {
                if mask >> k & 1 == 1 {
                    count += 1;
                    if is_ruined(initial_surplus, premium, k + 1, count) {
                        acc.add(prob);
                        return;
                    }
                }
            }
        },
        |total, block| total.merge(&block),
    )?;
    Ok(total.value())
}

/// Band `[exp(-n inf L*), exp(-n inf U*)]` for the probability that the
/// surplus is negative at step `n`, with infima over `(u/n + p, 1)`. The rate
/// function is only bracketed, so this is a band and never a point estimate.
pub fn ldp_ruin_band(
    kernel: &ExcitingFunction,
    initial_surplus: f64,
    premium: f64,
    n: usize,
) -> Result<RuinBand> {
    if n == 0 {
        return Err(Error::HorizonTooShort { got: 0, min: 1 });
    }
    let threshold = initial_surplus / n as f64 + premium;
    let premium_below_threshold = premium <= premium_threshold(kernel);
    if threshold >= 1.0 {
        return Ok(RuinBand {
            horizon: n,
            threshold,
            empty: true,
            inf_lower_conjugate: f64::INFINITY,
            inf_upper_conjugate: f64::INFINITY,
            lower: 0.0,
            upper: 0.0,
            chernoff: None,
            exact_terminal: Some(0.0),
            premium_below_threshold,
        });
    }

    let bounds = GammaBounds::new(kernel);
    let t_grid = uniform_grid(-4.0, 16.0, 801)?;
    let x_grid: Vec<f64> = (0..=200)
        .map(|j| threshold + (1.0 - threshold) * j as f64 / 200.0)
        .collect();
    let l_star = legendre_analytic("L", |t| bounds.lower(t), &t_grid, &x_grid)?;
    let u_star = legendre_analytic("U", |t| bounds.upper(t), &t_grid, &x_grid)?;
    let interior_inf = |c: &crate::ldp::LegendreGrid| {
        let inner = c
            .values
            .iter()
            .zip(&c.boundary)
            .filter(|(_, b)| !**b)
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min);
        if inner.is_finite() {
            inner
        } else {
            c.values.iter().copied().fold(f64::INFINITY, f64::min)
        }
    };
    let inf_l = interior_inf(&l_star);
    let inf_u = interior_inf(&u_star);
    let exact_terminal = if n <= EXACT_BAND_HORIZON {
        Some(exact_terminal_exceedance(
            kernel,
            initial_surplus,
            premium,
            n,
        )?)
    } else {
        None
    };
    Ok(RuinBand {
        horizon: n,
        threshold,
        empty: false,
        inf_lower_conjugate: inf_l,
        inf_upper_conjugate: inf_u,
        lower: (-(n as f64) * inf_l).exp(),
        upper: (-(n as f64) * inf_u).exp(),
        chernoff: Some(chernoff_tail(kernel, n, threshold)?),
        exact_terminal,
        premium_below_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldp::bernoulli_kl;

    fn reference_kernel() -> ExcitingFunction {
        ExcitingFunction::geometric(0.2, 0.3, 0.5).unwrap()
    }

    #[test]
    fn surplus_examples() {
        let s = surplus_from_claims(0.6, 0.6, &[1]);
        assert!((s[0] - 0.2).abs() < 1e-15);
        let none = surplus_from_claims(0.6, 0.6, &[0; 10]);
        assert!(none.windows(2).all(|w| w[1] > w[0]));
        // all claims: ruin first when u < k (1 - p), here k = 2
        assert!(!is_ruined(0.6, 0.6, 1, 1));
        assert!(is_ruined(0.6, 0.6, 2, 2));
        // exactly zero surplus is not ruin: 0.6 + 4*0.6 = 3
        assert!(!is_ruined(0.6, 0.6, 4, 3));
        assert!(is_ruined(0.6, 0.6, 4, 4));
    }

    #[test]
    fn surplus_increments() {
        let k = reference_kernel();
        let cfg = SurplusConfig::new(0.6, 0.6, 300, 1, 0);
        for i in 0..20 {
            let seed = path_seed(5, i);
            let s = surplus_path(&k, &cfg, seed);
            let path = crate::simulate::simulate_path(&k, 300, seed);
            let mut prev = 0.6;
            for (x, uk) in path.arrivals.iter().zip(&s) {
                assert!((uk - prev - (0.6 - f64::from(*x))).abs() < 1e-12);
                prev = *uk;
            }
        }
    }

    #[test]
    fn thresholds_and_drift() {
        let k = reference_kernel();
        assert!((premium_threshold(&k) - 0.5).abs() < 1e-15);
        assert!((long_run_drift(&k, 0.6) - 0.1).abs() < 1e-12);
        assert!((long_run_drift(&k, 0.4) + 0.1).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let k = reference_kernel();
        assert!(monte_carlo_fan(&k, &SurplusConfig::new(1.2, 0.6, 10, 10, 0)).is_err());
        assert!(monte_carlo_fan(&k, &SurplusConfig::new(0.6, 0.0, 10, 10, 0)).is_err());
        let mut big = SurplusConfig::new(0.6, 0.6, 10, 10, 0);
        big.max_draws = 50;
        assert!(matches!(
            monte_carlo_fan(&k, &big),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn percentiles_nearest_rank() {
        // counts H = 0 (x3), 1 (x1), 2 (x6) over 10 paths, shift 5
        let bins = [3, 1, 6];
        // surplus sample sorted: 3 x6, 4, 5 x3
        assert_eq!(surplus_percentile(&bins, 10, 5.0, 0.05), 3.0);
        assert_eq!(surplus_percentile(&bins, 10, 5.0, 0.60), 3.0);
        assert_eq!(surplus_percentile(&bins, 10, 5.0, 0.70), 4.0);
        assert_eq!(surplus_percentile(&bins, 10, 5.0, 0.95), 5.0);
    }

    #[test]
    fn zero_drift_keeps_mean_near_initial_surplus() {
        let k = ExcitingFunction::explicit(0.5, vec![]).unwrap();
        let report = monte_carlo_fan(&k, &SurplusConfig::new(0.5, 0.5, 100, 20_000, 3)).unwrap();
        for row in &report.rows {
            // sd of mean H_k = sqrt(k/4 / 2e4) <= 0.036
            assert!((row.mean - 0.5).abs() < 0.15, "{row:?}");
            assert!(row.p5 <= row.median && row.median <= row.p95);
        }
    }

    #[test]
    fn small_horizon_ruin_matches_exact() {
        let k = reference_kernel();
        let exact = exact_ruin_probability(&k, 0.6, 0.6, 8).unwrap();
        let report = monte_carlo_fan(&k, &SurplusConfig::new(0.6, 0.6, 8, 50_000, 1)).unwrap();
        let se = (exact * (1.0 - exact) / 50_000.0).sqrt();
        assert!((report.ruin_frequency - exact).abs() < 5.0 * se);
    }

    #[test]
    fn band_cases() {
        let k = reference_kernel();
        let empty = ldp_ruin_band(&k, 0.6, 0.95, 10).unwrap();
        assert!(empty.empty);
        assert_eq!((empty.lower, empty.upper), (0.0, 0.0));

        let band = ldp_ruin_band(&k, 0.6, 0.6, 14).unwrap();
        let exact = band.exact_terminal.unwrap();
        assert!(exact <= band.upper + 1e-12);
        assert!(exact <= band.chernoff.unwrap().probability + 1e-12);
        assert!(band.lower <= band.upper);

        let iid = ExcitingFunction::explicit(0.3, vec![]).unwrap();
        let b = ldp_ruin_band(&iid, 0.5, 0.4, 50).unwrap();
        let kl = bernoulli_kl(b.threshold, 0.3);
        assert!((b.inf_lower_conjugate - kl).abs() < 1e-9);
        assert!((b.inf_upper_conjugate - kl).abs() < 1e-9);
    }
}
