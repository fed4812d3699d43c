//! Coupled Monte-Carlo estimate of E[sup |X − X^d|²] and its log-log rate.
//!
//! `cargo run --release --example convergence_rate -- 2000` for the full sample count.

use wzlab::coefficients::ScalarGeometric;
use wzlab::convergence::{convergence_experiment, MonteCarloConfig};
use wzlab::integrate::ReferenceScheme;

fn main() -> wzlab::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let cfg = MonteCarloConfig {
        samples,
        seed: 1,
        ..MonteCarloConfig::default()
    };
    let field = ScalarGeometric::new(0.1, 0.5);
    let report = convergence_experiment(&field, &[1.0], &[5, 6, 7, 8, 9], 12, ReferenceScheme::FineWongZakai, &cfg)?;

    println!("{:>3} {:>12} {:>12}", "d", "error", "stderr");
    for c in &report.cells {
        println!("{:>3} {:>12.4e} {:>12.2e}", c.d.unwrap_or(0), c.estimate, c.stderr);
    }
    if let Some(fit) = &report.fit {
        println!(
            "slope {:.3}, 95% CI [{:.3}, {:.3}], R² {:.4}",
            fit.slope, fit.ci_low, fit.ci_high, fit.r_squared
        );
    }
    Ok(())
}
