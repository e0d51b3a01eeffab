//! Exact law of the arrival count by enumerating every arrival history, with
//! the closed-form identities the enumeration must satisfy.
//!
//! ```bash
//! cargo run -p dthp --example exact_distribution
//! ```

use dthp::exact::{enumerate_pmf, exact_moments};
use dthp::ExcitingFunction;

fn main() -> dthp::Result<()> {
    let kernel = ExcitingFunction::geometric(0.2, 0.3, 0.5)?;
    let n = 12;
    let dist = enumerate_pmf(&kernel, n)?;

    println!("P(H_{n} = r):");
    for (r, p) in dist.pmf.iter().enumerate() {
        println!(
            "  r = {r:>2}  {p:.10}  {}",
            "#".repeat((p * 200.0).round() as usize)
        );
    }
    let checks = dist.checks(&kernel);
    println!(
        "identity errors: normalisation {:.1e}, no arrivals {:.1e}, all arrivals {:.1e}",
        checks.norm_err, checks.c0_err, checks.cnn_err
    );
    println!("E(H_{n}) = {:.10}", dist.mean());
    println!("P(H_{n} >= 9) = {:.3e}", dist.upper_tail(9));

    let moments = exact_moments(&kernel, 6)?;
    println!("pair covariances of the first six arrivals:");
    for i in 1..=6 {
        let row: Vec<String> = (1..=6)
            .map(|j| {
                if i == j {
                    format!("{:>8}", "-")
                } else {
                    format!("{:>8.5}", moments.covariance(i.min(j), i.max(j)))
                }
            })
            .collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
