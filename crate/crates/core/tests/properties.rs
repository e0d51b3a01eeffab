use dthp::exact::enumerate_pmf;
use dthp::kernel::KernelSpec;
use dthp::ldp::{bernoulli_cgf, check_convex, legendre_analytic, uniform_grid};
use dthp::risk::surplus_from_claims;
use dthp::simulate::Intensity;
use dthp::ExcitingFunction;
use proptest::prelude::*;

/// Explicit kernels with total mass at most 0.95.
fn explicit_kernel() -> impl Strategy<Value = ExcitingFunction> {
    (
        0.01f64..0.6,
        prop::collection::vec(0.01f64..1.0, 0..6),
        0.05f64..0.95,
    )
        .prop_map(|(a0, raw, scale)| {
            let room = (0.95 - a0).max(0.0);
            let total: f64 = raw.iter().sum();
            let weights: Vec<f64> = if total > 0.0 {
                raw.iter().map(|w| w / total * room * scale).collect()
            } else {
                raw
            };
            ExcitingFunction::new(KernelSpec::explicit(a0, weights)).unwrap()
        })
}

fn geometric_kernel() -> impl Strategy<Value = ExcitingFunction> {
    (0.01f64..0.5, 0.01f64..0.99, 0.01f64..0.95).prop_filter_map("mass", |(a0, rho, frac)| {
        let alpha = (0.99 - a0) * (1.0 - rho) * frac;
        ExcitingFunction::geometric(a0, alpha, rho).ok()
    })
}

fn any_kernel() -> impl Strategy<Value = ExcitingFunction> {
    prop_oneof![explicit_kernel(), geometric_kernel()]
}

proptest! {
    #[test]
    fn intensity_stays_in_unit_interval(
        k in any_kernel(),
        history in prop::collection::vec(any::<bool>(), 1..120),
    ) {
        let mut tracker = Intensity::new(&k);
        for (n, &x) in history.iter().enumerate() {
            let lambda = tracker.current();
            let direct = k.base_rate()
                + (0..n)
                    .filter(|&i| history[i])
                    .map(|i| k.weight_at(n - i).unwrap())
                    .sum::<f64>();
            prop_assert!(lambda > 0.0 && lambda < 1.0);
            prop_assert!((lambda - direct).abs() < 1e-14);
            tracker.record(x);
        }
    }

    #[test]
    fn tail_sum_differences_are_weights(k in any_kernel(), m in 1usize..64) {
        let diff = k.tail_sum(m) - k.tail_sum(m + 1);
        prop_assert!((diff - k.weight_at(m).unwrap()).abs() < 1e-14);
        prop_assert!(k.tail_sum(m + 1) <= k.tail_sum(m));
    }

    #[test]
    fn enumeration_identities(k in any_kernel(), n in 1usize..11) {
        let d = enumerate_pmf(&k, n).unwrap();
        let checks = d.checks(&k);
        prop_assert!(checks.max_err() <= 1e-12, "{:?}", checks);
        prop_assert!(d.pmf.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn bernoulli_conjugate_is_nonnegative_and_convex(p in 0.05f64..0.95) {
        let t = uniform_grid(-6.0, 6.0, 241).unwrap();
        let x = uniform_grid(0.0, 1.0, 51).unwrap();
        let conj = legendre_analytic("cgf", |s| bernoulli_cgf(p, s), &t, &x).unwrap();
        prop_assert!(conj.values.iter().all(|&v| v >= 0.0));
        prop_assert!(check_convex(&conj.x, &conj.values, 1e-9).is_ok());
    }

    #[test]
    fn surplus_steps_are_premium_minus_claim(
        u in 0.01f64..0.99,
        p in 0.01f64..0.99,
        claims in prop::collection::vec(0u8..2, 1..200),
    ) {
        let s = surplus_from_claims(u, p, &claims);
        let mut prev = u;
        for (x, uk) in claims.iter().zip(&s) {
            prop_assert!((uk - prev - (p - f64::from(*x))).abs() < 1e-12);
            prev = *uk;
        }
    }
}
