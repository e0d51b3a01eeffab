//! Build exciting functions from code and from JSON, validate them, and
//! inspect their weights and truncation.
//!
//! ```bash
//! cargo run -p dthp --example kernel_validation
//! ```

use dthp::kernel::TRUNCATION_TOLERANCE;
use dthp::{ExcitingFunction, KernelSpec};

fn main() -> dthp::Result<()> {
    let spec =
        KernelSpec::from_json(r#"{"a0": 0.2, "form": "geometric", "alpha": 0.3, "rho": 0.5}"#)?;
    let report = spec.validate();
    println!("geometric kernel passed validation: {}", report.passed);
    println!(
        "  excitation mass {:.4}, total mass {:.4}, first moment {:.4}",
        report.excitation_mass, report.total_mass, report.first_moment
    );

    let kernel = ExcitingFunction::new(spec)?;
    let weights: Vec<String> = kernel
        .lag_weights(6)
        .iter()
        .map(|w| format!("{w:.5}"))
        .collect();
    println!("  first six lag weights: {}", weights.join(", "));
    let truncated = kernel.truncate(TRUNCATION_TOLERANCE);
    println!(
        "  truncated at lag {:?}, discarded mass {:.2e}, fingerprint {}",
        truncated.lag,
        truncated.discarded_mass,
        kernel.fingerprint()
    );

    // Weights summing to one or more would push intensities past one.
    let heavy = KernelSpec::explicit(0.3, vec![0.4, 0.3, 0.1]);
    let report = heavy.validate();
    println!("explicit kernel passed validation: {}", report.passed);
    for check in report.failures() {
        println!("  failed {}: {}", check.name, check.detail);
    }
    match ExcitingFunction::new(heavy) {
        Ok(_) => println!("  unexpectedly accepted"),
        Err(err) => println!("  rejected: {err}"),
    }
    Ok(())
}
