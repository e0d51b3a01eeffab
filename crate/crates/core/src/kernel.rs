//! Exciting functions `(a_i)_{i>=0}` of a discrete-time Hawkes process.
//!
//! The arrival probability at step `n` given the history is
//!
//! ```text
//! λ_n = a_0 + Σ_{i=1}^{n-1} a_{n-i} ξ_i
//! ```
//!
//! Two forms are supported: a geometric tail `a_i = α ρ^{i-1}` and an explicit
//! finite list `a_1..a_K` (zero beyond `K`). Both have a finite first moment
//! `Σ i a_i`, and validation requires the total mass `a_0 + Σ a_i` to stay
//! strictly below one so that every intensity lies in `(0, 1)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Total mass must not exceed `1 - MASS_MARGIN`, otherwise intensities can
/// round to exactly 1.0.
pub const MASS_MARGIN: f64 = 1e-9;

/// Geometric kernels are cut where the remaining tail drops to this level.
pub const TRUNCATION_TOLERANCE: f64 = 1e-12;

/// Shape of the lag weights `a_1, a_2, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum KernelForm {
    /// `a_i = alpha * rho^(i-1)` for `i >= 1`.
    Geometric { alpha: f64, rho: f64 },
    /// `a_1..a_K` listed explicitly, zero beyond `K`.
    Explicit { weights: Vec<f64> },
}

/// Unvalidated kernel description, as read from a config block such as
/// `{"a0": 0.2, "form": "geometric", "alpha": 0.3, "rho": 0.5}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub a0: f64,
    #[serde(flatten)]
    pub form: KernelForm,
}

impl KernelSpec {
    pub fn geometric(a0: f64, alpha: f64, rho: f64) -> Self {
        Self {
            a0,
            form: KernelForm::Geometric { alpha, rho },
        }
    }

    pub fn explicit(a0: f64, weights: impl Into<Vec<f64>>) -> Self {
        Self {
            a0,
            form: KernelForm::Explicit {
                weights: weights.into(),
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks every kernel assumption and reports each one with the computed sums.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();
        let a0 = self.a0;

        let params_finite = a0.is_finite()
            && match &self.form {
                KernelForm::Geometric { alpha, rho } => alpha.is_finite() && rho.is_finite(),
                KernelForm::Explicit { weights } => weights.iter().all(|w| w.is_finite()),
            };
        checks.push(InvariantCheck::new(
            "finite_parameters",
            params_finite,
            "all parameters are finite reals".to_string(),
        ));

        checks.push(InvariantCheck::new(
            "base_rate_in_unit_interval",
            a0 > 0.0 && a0 < 1.0,
            format!("a0 = {a0}"),
        ));

        let (excitation, first_moment) = match &self.form {
            KernelForm::Geometric { alpha, rho } => {
                checks.push(InvariantCheck::new(
                    "rho_in_unit_interval",
                    *rho > 0.0 && *rho < 1.0,
                    format!("rho = {rho}"),
                ));
                checks.push(InvariantCheck::new(
                    "weights_positive",
                    *alpha > 0.0,
                    format!("alpha = {alpha}"),
                ));
                let one_minus = 1.0 - rho;
                (alpha / one_minus, alpha / (one_minus * one_minus))
            }
            KernelForm::Explicit { weights } => {
                let bad = weights.iter().position(|w| w.is_nan() || *w <= 0.0);
                checks.push(InvariantCheck::new(
                    "weights_positive",
                    bad.is_none(),
                    match bad {
                        Some(i) => format!("a_{} = {}", i + 1, weights[i]),
                        None => format!("{} positive weights", weights.len()),
                    },
                ));
                let mass: f64 = weights.iter().sum();
                let moment: f64 = weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| (i + 1) as f64 * w)
                    .sum();
                (mass, moment)
            }
        };
        let total = a0 + excitation;

        checks.push(InvariantCheck::new(
            "total_mass_below_one",
            total.is_finite() && total <= 1.0 - MASS_MARGIN,
            format!("a0 + sum a_i = {total}"),
        ));
        checks.push(InvariantCheck::new(
            "first_moment_finite",
            first_moment.is_finite() && first_moment >= 0.0,
            format!("sum i*a_i = {first_moment}"),
        ));

        ValidationReport {
            passed: checks.iter().all(|c| c.passed),
            checks,
            excitation_mass: excitation,
            total_mass: total,
            first_moment,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl InvariantCheck {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Outcome of [`KernelSpec::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<InvariantCheck>,
    /// `Σ_{i>=1} a_i`
    pub excitation_mass: f64,
    /// `a_0 + Σ_{i>=1} a_i`
    pub total_mass: f64,
    /// `Σ_{i>=1} i a_i`
    pub first_moment: f64,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &InvariantCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// A validated exciting function. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcitingFunction {
    spec: KernelSpec,
    excitation_mass: f64,
    first_moment: f64,
}

/// A finite view of a kernel: lag weights `a_1..a_K` and where a geometric
/// tail was cut, if it was.
#[derive(Clone, Debug, PartialEq)]
pub struct Truncation {
    pub base_rate: f64,
    pub weights: Vec<f64>,
    pub lag: Option<usize>,
    /// Mass discarded beyond the cut.
    pub discarded_mass: f64,
}

impl ExcitingFunction {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        let report = spec.validate();
        if !report.passed {
            let reasons: Vec<String> = report
                .failures()
                .map(|c| format!("{} ({})", c.name, c.detail))
                .collect();
            return Err(Error::InvalidKernel(reasons.join(", ")));
        }
        Ok(Self {
            spec,
            excitation_mass: report.excitation_mass,
            first_moment: report.first_moment,
        })
    }

    pub fn geometric(a0: f64, alpha: f64, rho: f64) -> Result<Self> {
        Self::new(KernelSpec::geometric(a0, alpha, rho))
    }

    pub fn explicit(a0: f64, weights: impl Into<Vec<f64>>) -> Result<Self> {
        Self::new(KernelSpec::explicit(a0, weights))
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn form(&self) -> &KernelForm {
        &self.spec.form
    }

    /// `a_0`
    pub fn base_rate(&self) -> f64 {
        self.spec.a0
    }

    /// `Σ_{i>=1} a_i`
    pub fn excitation_mass(&self) -> f64 {
        self.excitation_mass
    }

    /// `Σ_{i>=0} a_i`
    pub fn total_mass(&self) -> f64 {
        self.spec.a0 + self.excitation_mass
    }

    /// `Σ_{i>=1} i a_i`
    pub fn first_moment(&self) -> f64 {
        self.first_moment
    }

    /// Number of nonzero lag weights, or `None` for an infinite geometric tail.
    pub fn support(&self) -> Option<usize> {
        match &self.spec.form {
            KernelForm::Geometric { .. } => None,
            KernelForm::Explicit { weights } => Some(weights.len()),
        }
    }

    /// `a_lag` for `lag >= 1`.
    pub fn weight_at(&self, lag: usize) -> Result<f64> {
        if lag == 0 {
            return Err(Error::ZeroLag);
        }
        Ok(self.weight_unchecked(lag))
    }

    pub(crate) fn weight_unchecked(&self, lag: usize) -> f64 {
        match &self.spec.form {
            KernelForm::Geometric { alpha, rho } => alpha * rho.powi(lag as i32 - 1),
            KernelForm::Explicit { weights } => weights.get(lag - 1).copied().unwrap_or(0.0),
        }
    }

    /// `Σ_{i>=from_lag} a_i`. Lags below 1 are counted from 1.
    pub fn tail_sum(&self, from_lag: usize) -> f64 {
        let from = from_lag.max(1);
        match &self.spec.form {
            KernelForm::Geometric { alpha, rho } => alpha * rho.powi(from as i32 - 1) / (1.0 - rho),
            KernelForm::Explicit { weights } => weights.iter().skip(from - 1).sum(),
        }
    }

    /// Lag weights `a_1..a_m`, zero-padded past the support.
    pub fn lag_weights(&self, m: usize) -> Vec<f64> {
        (1..=m).map(|lag| self.weight_unchecked(lag)).collect()
    }

    /// Finite kernel for enumeration. Geometric tails are cut at the smallest
    /// `K` with `tail_sum(K + 1) <= tolerance`.
    pub fn truncate(&self, tolerance: f64) -> Truncation {
        match &self.spec.form {
            KernelForm::Explicit { weights } => Truncation {
                base_rate: self.spec.a0,
                weights: weights.clone(),
                lag: None,
                discarded_mass: 0.0,
            },
            KernelForm::Geometric { .. } => {
                let mut k = 1;
                while self.tail_sum(k + 1) > tolerance {
                    k += 1;
                }
                Truncation {
                    base_rate: self.spec.a0,
                    weights: self.lag_weights(k),
                    lag: Some(k),
                    discarded_mass: self.tail_sum(k + 1),
                }
            }
        }
    }

    /// Stable 64-bit identifier of the kernel parameters.
    pub fn fingerprint(&self) -> String {
        let mut canonical = format!("a0={:?}", self.spec.a0);
        match &self.spec.form {
            KernelForm::Geometric { alpha, rho } => {
                let _ = write!(canonical, ";geometric;alpha={alpha:?};rho={rho:?}");
            }
            KernelForm::Explicit { weights } => {
                canonical.push_str(";explicit");
                for w in weights {
                    let _ = write!(canonical, ";{w:?}");
                }
            }
        }
        format!("{:016x}", fnv1a(canonical.as_bytes()))
    }
}

impl TryFrom<KernelSpec> for ExcitingFunction {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        Self::new(spec)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_kernel() -> ExcitingFunction {
        ExcitingFunction::geometric(0.2, 0.3, 0.5).unwrap()
    }

    #[test]
    fn geometric_kernel_passes_with_expected_sums() {
        let report = KernelSpec::geometric(0.2, 0.3, 0.5).validate();
        assert!(report.passed);
        assert!((report.excitation_mass - 0.6).abs() < 1e-15);
        assert!((report.total_mass - 0.8).abs() < 1e-15);
        assert!((report.first_moment - 1.2).abs() < 1e-15);
    }

    #[test]
    fn empty_explicit_kernel_is_iid() {
        let report = KernelSpec::explicit(0.5, vec![]).validate();
        assert!(report.passed);
        assert_eq!(report.excitation_mass, 0.0);
        assert_eq!(report.total_mass, 0.5);
    }

    #[test]
    fn excess_mass_is_rejected_with_computed_mass() {
        let report = KernelSpec::geometric(0.5, 0.3, 0.5).validate();
        assert!(!report.passed);
        assert!((report.total_mass - 1.1).abs() < 1e-12);
        let failed: Vec<_> = report.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, ["total_mass_below_one"]);
        let err = ExcitingFunction::new(KernelSpec::geometric(0.5, 0.3, 0.5)).unwrap_err();
        assert!(err.to_string().contains("1.1"));
    }

    #[test]
    fn rejects_bad_parameters() {
        for spec in [
            KernelSpec::geometric(f64::NAN, 0.3, 0.5),
            KernelSpec::geometric(0.2, 0.3, 1.0),
            KernelSpec::geometric(0.2, 0.3, 0.0),
            KernelSpec::geometric(0.2, f64::INFINITY, 0.5),
            KernelSpec::geometric(0.0, 0.3, 0.5),
            KernelSpec::explicit(0.2, vec![0.3, 0.0]),
            KernelSpec::explicit(0.2, vec![0.3, -0.1]),
            KernelSpec::explicit(0.5, vec![0.5]),
        ] {
            assert!(!spec.validate().passed, "{spec:?}");
            assert!(ExcitingFunction::new(spec).is_err());
        }
    }

    #[test]
    fn mass_margin_is_enforced() {
        assert!(
            !KernelSpec::explicit(0.5, vec![0.5 - 1e-12])
                .validate()
                .passed
        );
        assert!(
            KernelSpec::explicit(0.5, vec![0.5 - 1e-8])
                .validate()
                .passed
        );
    }

    #[test]
    fn weight_lookup() {
        let k = reference_kernel();
        assert_eq!(k.weight_at(1).unwrap(), 0.3);
        assert!((k.weight_at(2).unwrap() - 0.15).abs() < 1e-16);
        assert!(matches!(k.weight_at(0), Err(Error::ZeroLag)));
        let e = ExcitingFunction::explicit(0.2, vec![0.3]).unwrap();
        assert_eq!(e.weight_at(5).unwrap(), 0.0);
    }

    #[test]
    fn tail_sums() {
        let k = reference_kernel();
        assert!((k.tail_sum(1) - 0.6).abs() < 1e-15);
        assert!((k.tail_sum(3) - 0.15).abs() < 1e-15);
        let e = ExcitingFunction::explicit(0.2, vec![0.3, 0.15]).unwrap();
        assert_eq!(e.tail_sum(2), 0.15);
        assert_eq!(e.tail_sum(3), 0.0);
        for m in 1..=64 {
            let diff = k.tail_sum(m) - k.tail_sum(m + 1);
            assert!((diff - k.weight_at(m).unwrap()).abs() < 1e-14, "m={m}");
        }
    }

    #[test]
    fn geometric_truncation_meets_tolerance() {
        let t = reference_kernel().truncate(TRUNCATION_TOLERANCE);
        let lag = t.lag.unwrap();
        assert_eq!(lag, 40);
        assert_eq!(t.weights.len(), lag);
        assert!(t.discarded_mass <= TRUNCATION_TOLERANCE);
        assert!(reference_kernel().tail_sum(lag) > TRUNCATION_TOLERANCE);
    }

    #[test]
    fn json_config_forms() {
        let g =
            KernelSpec::from_json(r#"{"a0": 0.2, "form": "geometric", "alpha": 0.3, "rho": 0.5}"#)
                .unwrap();
        assert_eq!(g, KernelSpec::geometric(0.2, 0.3, 0.5));
        let e = KernelSpec::from_json(r#"{"a0": 0.2, "form": "explicit", "weights": [0.3, 0.15]}"#)
            .unwrap();
        assert_eq!(e, KernelSpec::explicit(0.2, vec![0.3, 0.15]));
        assert!(KernelSpec::from_json(r#"{"a0": 0.2, "form": "power"}"#).is_err());
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(
            text,
            r#"{"a0":0.2,"form":"geometric","alpha":0.3,"rho":0.5}"#
        );
    }

    #[test]
    fn fingerprint_distinguishes_kernels() {
        let a = reference_kernel().fingerprint();
        assert_eq!(a, reference_kernel().fingerprint());
        assert_ne!(
            a,
            ExcitingFunction::geometric(0.2, 0.3, 0.4)
                .unwrap()
                .fingerprint()
        );
        assert_eq!(a.len(), 16);
    }
}
