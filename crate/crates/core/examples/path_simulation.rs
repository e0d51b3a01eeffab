//! Seeded Monte Carlo paths: a single trajectory with its intensity, and a
//! batch checking the law of large numbers and the spread of the count.
//!
//! ```bash
//! cargo run --release -p dthp --example path_simulation
//! ```

use dthp::moments::limit_arrival_prob;
use dthp::rng::path_seed;
use dthp::simulate::{
    clt_statistic, mean_and_variance, simulate_batch, simulate_path, BatchConfig,
};
use dthp::ExcitingFunction;

fn main() -> dthp::Result<()> {
    let kernel = ExcitingFunction::geometric(0.2, 0.3, 0.5)?;
    let seed = 42;

    let path = simulate_path(&kernel, 30, path_seed(seed, 0));
    let trace: String = path
        .arrivals
        .iter()
        .map(|&x| if x == 1 { '|' } else { '.' })
        .collect();
    println!("arrivals  {trace}");
    let peak = path.intensities.iter().copied().fold(0.0, f64::max);
    println!(
        "{} arrivals in 30 steps, peak intensity {peak:.4}",
        path.count
    );

    let batch = simulate_batch(&kernel, &BatchConfig::new(2000, 10_000, seed))?;
    println!(
        "mean H_n/n over {} paths of length {}: {:.5} (limit {})",
        batch.paths,
        batch.horizon,
        batch.mean_fraction(),
        limit_arrival_prob(&kernel)
    );
    let (mean, variance) = mean_and_variance(&clt_statistic(&batch, &kernel));
    println!("(H_n - n mu)/sqrt(n): mean {mean:.4}, variance {variance:.4}");
    Ok(())
}
