//! Insurance surplus driven by self-exciting claims: percentile fan, ruin
//! frequency, drift, and the large-deviation band for the ruin probability.
//!
//! ```bash
//! cargo run --release -p dthp --example ruin_fan
//! ```

use dthp::risk::{exact_ruin_probability, monte_carlo_fan, SurplusConfig};
use dthp::ExcitingFunction;

fn main() -> dthp::Result<()> {
    let kernel = ExcitingFunction::geometric(0.2, 0.3, 0.5)?;

    for premium in [0.6, 0.4] {
        let config = SurplusConfig::new(0.6, premium, 500, 20_000, 7);
        let report = monte_carlo_fan(&kernel, &config)?;
        println!(
            "premium {premium}: drift {:+.4} (theory {:+.4}), ruin frequency {:.4} +/- {:.4}",
            report.drift_estimate, report.drift_theory, report.ruin_frequency, report.ruin_std_err
        );
        println!("  {:>5} {:>9} {:>9} {:>9}", "step", "p5", "mean", "p95");
        for row in report.rows.iter().filter(|r| r.step % 100 == 0) {
            println!(
                "  {:>5} {:>9.2} {:>9.2} {:>9.2}",
                row.step, row.p5, row.mean, row.p95
            );
        }
        let band = &report.ldp_band;
        println!(
            "  large-deviation band for P(H_n >= u + n p): [{:.3e}, {:.3e}]",
            band.lower, band.upper
        );
    }

    let config = SurplusConfig::new(0.6, 0.6, 12, 100_000, 7);
    let report = monte_carlo_fan(&kernel, &config)?;
    let exact = exact_ruin_probability(&kernel, 0.6, 0.6, 12)?;
    println!(
        "ruin within 12 steps: Monte Carlo {:.5} +/- {:.5}, exact {exact:.5}",
        report.ruin_frequency, report.ruin_std_err
    );
    Ok(())
}
