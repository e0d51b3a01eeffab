//! Scaled log-MGF `Γ_n(t) = (1/n) log E(e^{t H_n})`, the envelope functions
//! `L ≤ Γ ≤ U` of its limit, numerical Fenchel-Legendre conjugates and
//! finite-n Chernoff tail bounds.
//!
//! With `μ = a_0 / (1 - Σ_{i>=1} a_i)` and `m = Σ_{i>=0} a_i`:
//!
//! ```text
//! L(t) = log(1 + (e^t - 1) μ)                          t >= 0
//!        max{log(1 + (e^t - 1) μ), log(1 - a_0)}       t <  0
//! U(t) = log(1 + (e^t - 1) m)                          t >= 0
//!        log(1 + (e^t - 1) a_0)                        t <  0
//! ```
//!
//! The limit `Γ` itself is never computed; only the finite-n sequence and the
//! band are.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{enumerate_pmf, log_sum_exp};
use crate::kernel::ExcitingFunction;
use crate::moments::limit_arrival_prob;
use crate::optimize::{golden_max, golden_min};
use crate::rng::splitmix64;
use crate::simulate::{simulate_batch, BatchConfig};

pub const DEFAULT_T_MIN: f64 = -4.0;
pub const DEFAULT_T_MAX: f64 = 4.0;
pub const DEFAULT_T_POINTS: usize = 401;
pub const DEFAULT_X_POINTS: usize = 201;

/// Second differences below `-CONVEXITY_TOLERANCE` reject an input as non-convex.
pub const CONVEXITY_TOLERANCE: f64 = 1e-9;

const REFINE_TOLERANCE: f64 = 1e-12;

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::InvalidGrid(format!(
            "need lo < hi and at least 2 points, got [{lo}, {hi}] with {points}"
        )));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect())
}

pub fn default_t_grid() -> Vec<f64> {
    uniform_grid(DEFAULT_T_MIN, DEFAULT_T_MAX, DEFAULT_T_POINTS).expect("valid default grid")
}

pub fn default_x_grid() -> Vec<f64> {
    uniform_grid(0.0, 1.0, DEFAULT_X_POINTS).expect("valid default grid")
}

fn check_increasing(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(
            "grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Rejects `values` on `grid` whose spacing-normalised second differences fall
/// below `-tolerance`. On a uniform grid these are the plain second differences.
pub fn check_convex(grid: &[f64], values: &[f64], tolerance: f64) -> Result<()> {
    for j in 1..grid.len().saturating_sub(1) {
        let h1 = grid[j] - grid[j - 1];
        let h2 = grid[j + 1] - grid[j];
        let d = ((values[j + 1] - values[j]) * h1 - (values[j] - values[j - 1]) * h2)
            / (0.5 * (h1 + h2));
        if d < -tolerance {
            return Err(Error::NotConvex {
                index: j,
                second_difference: d,
            });
        }
    }
    Ok(())
}

/// `log(1 + (e^t - 1) p)`, the cumulant generating function of Bernoulli(p).
pub fn bernoulli_cgf(p: f64, t: f64) -> f64 {
    let arg = p * t.exp_m1();
    debug_assert!(arg > -1.0, "log argument must stay positive");
    arg.ln_1p()
}

/// `x log(x/p) + (1-x) log((1-x)/(1-p))`, the conjugate of [`bernoulli_cgf`].
pub fn bernoulli_kl(x: f64, p: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(x, p) + term(1.0 - x, 1.0 - p)
}

/// The envelope functions `L` and `U` of a kernel.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GammaBounds {
    /// `μ`
    pub limit_prob: f64,
    /// `a_0`
    pub base_rate: f64,
    /// `Σ_{i>=0} a_i`
    pub total_mass: f64,
}

impl GammaBounds {
    pub fn new(kernel: &ExcitingFunction) -> Self {
        Self {
            limit_prob: limit_arrival_prob(kernel),
            base_rate: kernel.base_rate(),
            total_mass: kernel.total_mass(),
        }
    }

    pub fn lower(&self, t: f64) -> f64 {
        let cgf = bernoulli_cgf(self.limit_prob, t);
        if t >= 0.0 {
            cgf
        } else {
            cgf.max((1.0 - self.base_rate).ln())
        }
    }

    pub fn upper(&self, t: f64) -> f64 {
        if t >= 0.0 {
            bernoulli_cgf(self.total_mass, t)
        } else {
            bernoulli_cgf(self.base_rate, t)
        }
    }
}

pub fn bound_lower(kernel: &ExcitingFunction, t: f64) -> f64 {
    GammaBounds::new(kernel).lower(t)
}

pub fn bound_upper(kernel: &ExcitingFunction, t: f64) -> f64 {
    GammaBounds::new(kernel).upper(t)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MgfMethod {
    Exact,
    MonteCarlo {
        paths: usize,
        seed: u64,
        bootstrap: usize,
    },
}

/// `Γ_n` tabulated on a t-grid.
#[derive(Clone, Debug, Serialize)]
pub struct MgfGrid {
    pub n: usize,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    /// Bootstrap standard errors (Monte Carlo only).
    pub std_err: Option<Vec<f64>>,
    pub method: MgfMethod,
    /// All sampled mass sat in one bin of `H_n`.
    pub degenerate: bool,
}

impl MgfGrid {
    /// Value at `t = 0` is zero, values are nondecreasing and convex.
    pub fn check_invariants(&self) -> Result<()> {
        if let Some(j) = self.t.iter().position(|&t| t == 0.0) {
            if self.values[j].abs() > 1e-10 {
                return Err(Error::InvalidGrid(format!(
                    "Γ_n(0) = {} is not zero",
                    self.values[j]
                )));
            }
        }
        for (j, w) in self.values.windows(2).enumerate() {
            if w[1] < w[0] - 1e-12 {
                return Err(Error::InvalidGrid(format!("decreasing at index {j}")));
            }
        }
        check_convex(&self.t, &self.values, CONVEXITY_TOLERANCE)
    }
}

/// Exact `Γ_n` from full enumeration (`n` within the enumeration budget).
pub fn gamma_exact(kernel: &ExcitingFunction, n: usize, t_grid: &[f64]) -> Result<MgfGrid> {
    check_increasing(t_grid)?;
    let dist = enumerate_pmf(kernel, n)?;
    let values = t_grid
        .iter()
        .map(|&t| {
            if t == 0.0 {
                0.0
            } else {
                dist.log_mgf(t) / n as f64
            }
        })
        .collect();
    Ok(MgfGrid {
        n,
        t: t_grid.to_vec(),
        values,
        std_err: None,
        method: MgfMethod::Exact,
        degenerate: false,
    })
}

/// `Γ_n` estimated from a histogram of `H_n`.
fn gamma_from_histogram(hist: &[u64], n: usize, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let total: u64 = hist.iter().sum();
    let terms = hist
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(move |(r, c)| (*c as f64).ln() + r as f64 * t);
    (log_sum_exp(terms) - (total as f64).ln()) / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
    pub bootstrap: usize,
}

impl McConfig {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            bootstrap: 200,
        }
    }
}

/// Monte Carlo `Γ_n` with bootstrap standard errors. The bootstrap resamples
/// the `H_n` histogram multinomially from a stream derived from `seed`.
pub fn gamma_mc(
    kernel: &ExcitingFunction,
    n: usize,
    t_grid: &[f64],
    config: &McConfig,
) -> Result<MgfGrid> {
    check_increasing(t_grid)?;
    let batch = simulate_batch(kernel, &BatchConfig::new(n, config.paths, config.seed))?;
    let hist = batch.count_histogram();
    let values: Vec<f64> = t_grid
        .iter()
        .map(|&t| gamma_from_histogram(&hist, n, t))
        .collect();
    let degenerate = hist.iter().filter(|&&c| c > 0).count() == 1;

    let std_err = if config.bootstrap >= 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ 0xb007_57ab));
        let total = config.paths as u64;
        let mut sums = vec![0.0; t_grid.len()];
        let mut squares = vec![0.0; t_grid.len()];
        let mut resample = vec![0u64; hist.len()];
        for _ in 0..config.bootstrap {
            let mut remaining = total;
            let mut remaining_mass = total;
            for (r, &c) in hist.iter().enumerate() {
                if remaining == 0 || c == 0 {
                    resample[r] = 0;
                    continue;
                }
                let p = (c as f64 / remaining_mass as f64).min(1.0);
                let draw = Binomial::new(remaining, p)
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?
                    .sample(&mut rng);
                resample[r] = draw;
                remaining -= draw;
                remaining_mass -= c;
            }
            for (j, &t) in t_grid.iter().enumerate() {
                let v = gamma_from_histogram(&resample, n, t);
                sums[j] += v;
                squares[j] += v * v;
            }
        }
        let b = config.bootstrap as f64;
        Some(
            sums.iter()
                .zip(&squares)
                .map(|(s, q)| ((q - s * s / b) / (b - 1.0)).max(0.0).sqrt())
                .collect(),
        )
    } else {
        None
    };

    Ok(MgfGrid {
        n,
        t: t_grid.to_vec(),
        values,
        std_err,
        method: MgfMethod::MonteCarlo {
            paths: config.paths,
            seed: config.seed,
            bootstrap: config.bootstrap,
        },
        degenerate,
    })
}

/// Conjugate `f*(x) = sup_t {t x - f(t)}` tabulated on an x-grid.
#[derive(Clone, Debug, Serialize)]
pub struct LegendreGrid {
    pub source: String,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    /// `t` attaining the supremum.
    pub maximizer: Vec<f64>,
    /// Supremum hit a t-grid endpoint; the value is then only a lower estimate.
    pub boundary: Vec<bool>,
    /// Grid-resolution error bound `max_spacing * |x|` (tabulated inputs only).
    pub resolution: Option<Vec<f64>>,
}

impl LegendreGrid {
    /// Value at the x-grid point nearest `x`.
    pub fn at(&self, x: f64) -> f64 {
        let j = self
            .x
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map(|(j, _)| j)
            .expect("non-empty grid");
        self.values[j]
    }
}

fn grid_sup(t: &[f64], f: &[f64], x: f64) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, (tj, fj)) in t.iter().zip(f).enumerate() {
        let v = tj * x - fj;
        if v > best.1 {
            best = (j, v);
        }
    }
    best
}

/// Conjugate of an analytic convex function: grid supremum, then golden-section
/// refinement on the two cells around the grid maximizer.
pub fn legendre_analytic<F>(
    source: &str,
    f: F,
    t_grid: &[f64],
    x_grid: &[f64],
) -> Result<LegendreGrid>
where
    F: Fn(f64) -> f64,
{
    check_increasing(t_grid)?;
    check_increasing(x_grid)?;
    let tabulated: Vec<f64> = t_grid.iter().map(|&t| f(t)).collect();
    check_convex(t_grid, &tabulated, CONVEXITY_TOLERANCE)?;
    let last = t_grid.len() - 1;

    let mut out = LegendreGrid {
        source: source.to_string(),
        x: x_grid.to_vec(),
        values: Vec::with_capacity(x_grid.len()),
        maximizer: Vec::with_capacity(x_grid.len()),
        boundary: Vec::with_capacity(x_grid.len()),
        resolution: None,
    };
    for &x in x_grid {
        let (j, grid_value) = grid_sup(t_grid, &tabulated, x);
        let on_edge = j == 0 || j == last;
        let (t_best, value) = if on_edge {
            (t_grid[j], grid_value)
        } else {
            let (t_ref, v_ref) = golden_max(
                |t| t * x - f(t),
                t_grid[j - 1],
                t_grid[j + 1],
                REFINE_TOLERANCE,
            );
            if v_ref > grid_value {
                (t_ref, v_ref)
            } else {
                (t_grid[j], grid_value)
            }
        };
        out.values.push(value);
        out.maximizer.push(t_best);
        out.boundary.push(on_edge);
    }
    Ok(out)
}

/// Conjugate of a tabulated `Γ_n`: grid supremum only.
pub fn legendre_tabulated(grid: &MgfGrid, x_grid: &[f64]) -> Result<LegendreGrid> {
    check_increasing(&grid.t)?;
    check_increasing(x_grid)?;
    check_convex(&grid.t, &grid.values, CONVEXITY_TOLERANCE)?;
    let spacing = grid.t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let last = grid.t.len() - 1;
    let mut out = LegendreGrid {
        source: format!("gamma_{}", grid.n),
        x: x_grid.to_vec(),
        values: Vec::with_capacity(x_grid.len()),
        maximizer: Vec::with_capacity(x_grid.len()),
        boundary: Vec::with_capacity(x_grid.len()),
        resolution: Some(x_grid.iter().map(|x| spacing * x.abs()).collect()),
    };
    for &x in x_grid {
        let (j, v) = grid_sup(&grid.t, &grid.values, x);
        out.values.push(v);
        out.maximizer.push(grid.t[j]);
        out.boundary.push(j == 0 || j == last);
    }
    Ok(out)
}

/// Conjugates of `L` and `U` on the same grids.
pub fn bound_conjugates(
    kernel: &ExcitingFunction,
    t_grid: &[f64],
    x_grid: &[f64],
) -> Result<(LegendreGrid, LegendreGrid)> {
    let b = GammaBounds::new(kernel);
    let l = legendre_analytic("L", |t| b.lower(t), t_grid, x_grid)?;
    let u = legendre_analytic("U", |t| b.upper(t), t_grid, x_grid)?;
    Ok((l, u))
}

/// Chernoff bound `P(H_n / n >= a) <= exp(n * exponent)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailBound {
    pub threshold: f64,
    /// `inf_{t>=0} (U(t) - t a)`, never positive.
    pub exponent: f64,
    /// `exp(n * exponent)`
    pub probability: f64,
    /// `a <= μ`: the bound says nothing useful about an upper tail.
    pub loose: bool,
}

/// `inf_{t>=0} (U(t) - t a)` for the t ≥ 0 branch of `U`, which bounds the MGF
/// at every finite horizon. At `a = 1` the infimum is the `t → ∞` limit
/// `log Σ_{i>=0} a_i`.
pub fn chernoff_tail(kernel: &ExcitingFunction, n: usize, a: f64) -> Result<TailBound> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "tail threshold must lie in (0, 1], got {a}"
        )));
    }
    let bounds = GammaBounds::new(kernel);
    let g = |t: f64| bounds.upper(t) - t * a;
    let exponent = if a >= 1.0 {
        bounds.total_mass.ln()
    } else {
        let mut hi = 1.0;
        while hi < 1e3 && g(2.0 * hi) < g(hi) {
            hi *= 2.0;
        }
        let (_, v) = golden_min(g, 0.0, 2.0 * hi, 1e-12);
        v.min(0.0)
    };
    Ok(TailBound {
        threshold: a,
        exponent,
        probability: (n as f64 * exponent).exp().min(1.0),
        loose: a <= bounds.limit_prob,
    })
}
