//! First-moment analysis of the arrival process.
//!
//! With `b_1 = a_1` and `b_n = a_n + Σ_{i=1}^{n-1} b_{n-i} a_i`, the marginal
//! arrival probability is `E(ξ_n) = a_0 (1 + b_1 + ... + b_{n-1})`, which
//! increases to `μ = a_0 / (1 - Σ a_i)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::ExcitingFunction;

/// `|E(ξ_n) - μ|` below which the marginal is reported as converged.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-9;

/// `b_1..b_m` by direct convolution. Runs in `O(m * min(m, K))`.
fn b_sequence(kernel: &ExcitingFunction, m: usize) -> Vec<f64> {
    let support = kernel.support().unwrap_or(usize::MAX);
    let a = kernel.lag_weights(m.min(support));
    let mut b = Vec::with_capacity(m);
    for n in 1..=m {
        let mut value = a.get(n - 1).copied().unwrap_or(0.0);
        for (i, ai) in a.iter().enumerate().take(n - 1) {
            value += b[n - 2 - i] * ai;
        }
        b.push(value);
    }
    b
}

/// `b_1..b_{horizon-1}`.
pub fn b_recursion(kernel: &ExcitingFunction, horizon: usize) -> Result<Vec<f64>> {
    if horizon < 2 {
        return Err(Error::HorizonTooShort {
            got: horizon,
            min: 2,
        });
    }
    Ok(b_sequence(kernel, horizon - 1))
}

/// `E(ξ_1)..E(ξ_n)`.
pub fn marginal_probs(kernel: &ExcitingFunction, n: usize) -> Vec<f64> {
    let a0 = kernel.base_rate();
    let b = b_sequence(kernel, n.saturating_sub(1));
    let mut out = Vec::with_capacity(n);
    let mut partial = 1.0;
    for k in 0..n {
        if k > 0 {
            partial += b[k - 1];
        }
        out.push(a0 * partial);
    }
    out
}

/// `μ - E(ξ_1)..μ - E(ξ_n)`.
///
/// Uses `d_n = μ Σ_{j>=n} a_j + Σ_{l=1}^{n-1} a_l d_{n-l}`, whose terms are all
/// nonnegative, so the gap keeps full relative precision long after
/// `E(ξ_n)` itself has rounded to `μ` in double precision.
pub fn marginal_gaps(kernel: &ExcitingFunction, n: usize) -> Vec<f64> {
    let mu = limit_arrival_prob(kernel);
    let support = kernel.support().unwrap_or(usize::MAX);
    let a = kernel.lag_weights(n.min(support));
    let mut d: Vec<f64> = Vec::with_capacity(n);
    for k in 1..=n {
        let mut value = mu * kernel.tail_sum(k);
        for (l, al) in a.iter().enumerate().take(k - 1) {
            value += al * d[k - 2 - l];
        }
        d.push(value);
    }
    d
}

/// `P(ξ_n = 1)`.
pub fn marginal_prob(kernel: &ExcitingFunction, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::IndexOutOfRange("step index starts at 1".into()));
    }
    Ok(marginal_probs(kernel, n)[n - 1])
}

/// `μ = a_0 / (1 - Σ_{i>=1} a_i)`.
pub fn limit_arrival_prob(kernel: &ExcitingFunction) -> f64 {
    kernel.base_rate() / (1.0 - kernel.excitation_mass())
}

/// The closed-form CLT variance `μ(1-μ) / (1 - Σ a_j)^2`.
///
/// The exact `Var(H_n)/n` of the process tends to `E[λ(1-λ)] / (1 - Σ a_j)^2`,
/// which is smaller by `Var(λ) / (1 - Σ a_j)^2` whenever the stationary
/// intensity is random. For the geometric kernel `a_0 = 0.2, α = 0.3, ρ = 0.5`
/// this value is 1.5625 while `Var(H_n)/n` tends to 1.25.
pub fn clt_variance(kernel: &ExcitingFunction) -> f64 {
    let mu = limit_arrival_prob(kernel);
    let gap = 1.0 - kernel.excitation_mass();
    mu * (1.0 - mu) / (gap * gap)
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentTable {
    pub horizon: usize,
    /// `b_1..b_horizon`
    pub b: Vec<f64>,
    /// `E(ξ_1)..E(ξ_horizon)`
    pub marginal: Vec<f64>,
    /// `μ - E(ξ_1)..μ - E(ξ_horizon)`, see [`marginal_gaps`].
    pub gap: Vec<f64>,
    pub limit_prob: f64,
    pub clt_variance: f64,
    /// First step with `|E(ξ_n) - μ| < CONVERGENCE_TOLERANCE`, if reached.
    pub converged_at: Option<usize>,
}

impl MomentTable {
    pub fn compute(kernel: &ExcitingFunction, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::HorizonTooShort { got: 0, min: 1 });
        }
        let b = b_sequence(kernel, horizon);
        let marginal = marginal_probs(kernel, horizon);
        let limit_prob = limit_arrival_prob(kernel);
        let gap = marginal_gaps(kernel, horizon);
        let converged_at = gap
            .iter()
            .position(|d| d.abs() < CONVERGENCE_TOLERANCE)
            .map(|i| i + 1);
        Ok(Self {
            horizon,
            b,
            marginal,
            gap,
            limit_prob,
            clt_variance: clt_variance(kernel),
            converged_at,
        })
    }

    /// Rows of `(n, b_n, E(ξ_n))`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.b
            .iter()
            .zip(&self.marginal)
            .enumerate()
            .map(|(i, (b, m))| (i + 1, *b, *m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_kernel() -> ExcitingFunction {
        ExcitingFunction::geometric(0.2, 0.3, 0.5).unwrap()
    }

    #[test]
    fn b_values() {
        let b = b_recursion(&reference_kernel(), 3).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0], 0.3);
        assert!((b[1] - 0.24).abs() < 1e-15);
        assert_eq!(b_recursion(&reference_kernel(), 2).unwrap(), vec![0.3]);
        assert!(matches!(
            b_recursion(&reference_kernel(), 1),
            Err(Error::HorizonTooShort { got: 1, min: 2 })
        ));
        let tiny = ExcitingFunction::explicit(0.3, vec![1e-6]).unwrap();
        assert_eq!(b_recursion(&tiny, 2).unwrap(), vec![1e-6]);
    }

    #[test]
    fn geometric_shortcut_agrees_with_convolution() {
        // b_n = a_n + rho (b_{n-1} - a_{n-1}) + a_1 b_{n-1}
        let k = reference_kernel();
        let b = b_sequence(&k, 200);
        for n in 2..=200 {
            let a_n = k.weight_at(n).unwrap();
            let a_prev = k.weight_at(n - 1).unwrap();
            let shortcut = a_n + 0.5 * (b[n - 2] - a_prev) + 0.3 * b[n - 2];
            assert!(
                (shortcut - b[n - 1]).abs() <= 1e-13 * b[n - 1].max(1.0),
                "n={n}"
            );
        }
    }

    #[test]
    fn marginals() {
        let k = reference_kernel();
        assert_eq!(marginal_prob(&k, 1).unwrap(), 0.2);
        assert!((marginal_prob(&k, 2).unwrap() - 0.26).abs() < 1e-15);
        assert!((marginal_prob(&k, 3).unwrap() - 0.308).abs() < 1e-15);
        assert!(marginal_prob(&k, 0).is_err());
    }

    #[test]
    fn limits() {
        assert!((limit_arrival_prob(&reference_kernel()) - 0.5).abs() < 1e-15);
        let iid = ExcitingFunction::explicit(0.2, vec![]).unwrap();
        assert_eq!(limit_arrival_prob(&iid), 0.2);
        let single = ExcitingFunction::explicit(0.1, vec![0.5]).unwrap();
        assert!((limit_arrival_prob(&single) - 0.2).abs() < 1e-15);

        assert!((clt_variance(&reference_kernel()) - 1.5625).abs() < 1e-12);
        let half = ExcitingFunction::explicit(0.5, vec![]).unwrap();
        assert_eq!(clt_variance(&half), 0.25);
        assert!((clt_variance(&single) - 0.64).abs() < 1e-12);
    }

    #[test]
    fn reference_kernel_converges_monotonically() {
        let k = reference_kernel();
        let mu = limit_arrival_prob(&k);
        let m = marginal_probs(&k, 201);
        for w in m.windows(2) {
            assert!(w[1] >= w[0]);
            assert!(w[1] <= mu);
        }
        let d = marginal_gaps(&k, 201);
        for w in d.windows(2) {
            assert!(w[1] < w[0] && w[1] > 0.0);
        }
        assert!(d[199] < 1e-3);
        assert!((m[199] - mu).abs() < 1e-3);
    }

    #[test]
    fn gaps_agree_with_marginals_while_resolvable() {
        for k in [
            reference_kernel(),
            ExcitingFunction::explicit(0.1, vec![0.3, 0.2]).unwrap(),
        ] {
            let mu = limit_arrival_prob(&k);
            let m = marginal_probs(&k, 60);
            let d = marginal_gaps(&k, 60);
            for (mi, di) in m.iter().zip(&d) {
                assert!((mu - mi - di).abs() < 1e-14);
            }
        }
        assert!((marginal_gaps(&reference_kernel(), 1)[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn over_dispersion_when_excited() {
        let k = reference_kernel();
        let mu = limit_arrival_prob(&k);
        assert!(clt_variance(&k) > mu * (1.0 - mu));
    }

    #[test]
    fn table_invariants() {
        let k = reference_kernel();
        let t = MomentTable::compute(&k, 60).unwrap();
        for (n, _, m) in t.rows() {
            let partial: f64 = 1.0 + t.b[..n - 1].iter().sum::<f64>();
            assert!((m - k.base_rate() * partial).abs() < 1e-14);
        }
        assert_eq!(t.converged_at, None);
        let long = MomentTable::compute(&k, 400).unwrap();
        assert!(long.converged_at.is_some());
    }
}
