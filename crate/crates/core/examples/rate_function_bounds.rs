//! Envelopes of the scaled log moment generating function, their Legendre
//! conjugates, and the Chernoff tail bound checked against the exact tail.
//!
//! ```bash
//! cargo run -p dthp --example rate_function_bounds
//! ```

use dthp::exact::enumerate_pmf;
use dthp::ldp::{
    bound_conjugates, chernoff_tail, default_t_grid, gamma_exact, legendre_tabulated, GammaBounds,
};
use dthp::ExcitingFunction;

fn main() -> dthp::Result<()> {
    let kernel = ExcitingFunction::geometric(0.2, 0.3, 0.5)?;
    let bounds = GammaBounds::new(&kernel);
    let t_grid = default_t_grid();
    let gamma = gamma_exact(&kernel, 12, &t_grid)?;
    gamma.check_invariants()?;

    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "t", "L(t)", "Gamma_12", "U(t)"
    );
    for (t, g) in gamma.t.iter().zip(&gamma.values).step_by(50) {
        println!(
            "{t:>6.2} {:>10.5} {g:>10.5} {:>10.5}",
            bounds.lower(*t),
            bounds.upper(*t)
        );
    }

    let x_grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    let (lower, upper) = bound_conjugates(&kernel, &t_grid, &x_grid)?;
    let middle = legendre_tabulated(&gamma, &x_grid)?;
    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "x", "U*(x)", "Gamma_12*", "L*(x)"
    );
    for (j, x) in x_grid.iter().enumerate() {
        println!(
            "{x:>6.2} {:>10.5} {:>10.5} {:>10.5}{}",
            upper.values[j],
            middle.values[j],
            lower.values[j],
            if lower.boundary[j] || upper.boundary[j] {
                "  (t-grid edge)"
            } else {
                ""
            }
        );
    }

    let n = 14;
    let dist = enumerate_pmf(&kernel, n)?;
    println!("tail exponents at n = {n}:");
    for a in [0.6, 0.8, 1.0] {
        let exact = dist.upper_tail((n as f64 * a).ceil() as usize).ln() / n as f64;
        let bound = chernoff_tail(&kernel, n, a)?;
        println!(
            "  a = {a}: exact {exact:.5} <= Chernoff {:.5}",
            bound.exponent
        );
    }
    Ok(())
}
