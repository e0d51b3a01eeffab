//! Marginal arrival probabilities from the renewal-type recursion and their
//! approach to the long-run arrival rate.
//!
//! ```bash
//! cargo run -p dthp --example moment_recursion
//! ```

use dthp::moments::MomentTable;
use dthp::ExcitingFunction;

fn main() -> dthp::Result<()> {
    let kernel = ExcitingFunction::geometric(0.2, 0.3, 0.5)?;
    let table = MomentTable::compute(&kernel, 400)?;

    println!(
        "{:>4} {:>12} {:>12} {:>12}",
        "n", "b_n", "P(arrival)", "gap"
    );
    for (n, b, marginal) in table
        .rows()
        .filter(|(n, _, _)| [1, 2, 3, 5, 10, 20, 50].contains(n))
    {
        println!(
            "{n:>4} {b:>12.6} {marginal:>12.8} {:>12.3e}",
            table.gap[n - 1]
        );
    }
    println!("long-run arrival rate {}", table.limit_prob);
    println!(
        "closed-form CLT variance mu(1-mu)/(1-sum a_i)^2: {}",
        table.clt_variance
    );
    match table.converged_at {
        Some(n) => println!("marginal within 1e-9 of the limit from step {n}"),
        None => println!("marginal not yet within 1e-9 of the limit"),
    }
    Ok(())
}
