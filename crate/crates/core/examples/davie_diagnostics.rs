//! Davie residual, the L estimate across levels, and the short-horizon
//! conditions with their thresholds.

use wzlab::brownian::NestedBrownianPath;
use wzlab::coefficients::{LinearField, ProbeBox};
use wzlab::davie::{
    check_horizon, estimate_L, short_horizon_bound, verify_short_horizon, BoundCheckConfig, FieldBounds,
    HorizonConditions, DEFAULT_K2, DEFAULT_M,
};
use wzlab::integrate::solve_wz;
use wzlab::roughlift::{lift_piecewise_linear, DEFAULT_PAIR_BUDGET};

fn main() -> wzlab::Result<()> {
    let alpha = 0.4;
    let field = LinearField::non_commuting_2d(0.1, 0.5);
    let x0 = [1.0, 0.5];
    let path = NestedBrownianPath::sample(3, 1.0, 2, 10)?;

    println!("{:>3} {:>10} {:>22}", "d", "L", "argmax (s, t)");
    for d in [6, 8, 10] {
        let driver = path.interpolant(d)?;
        let traj = solve_wz(&field, &driver, &x0, 4)?;
        let rp = lift_piecewise_linear(&driver, alpha)?;
        let l = estimate_L(&traj, &rp, &field, alpha, DEFAULT_PAIR_BUDGET)?;
        println!("{d:>3} {:>10.4} {:>10.4} {:>10.4}", l.value, l.argmax.0, l.argmax.1);
    }

    let bounds = FieldBounds::from_field(&field, &x0, ProbeBox::new(10.0), 500)?;
    let rp = lift_piecewise_linear(&path.interpolant(10)?, alpha)?;
    let norm = rp.hoelder_norm(DEFAULT_PAIR_BUDGET).value;
    let hc = HorizonConditions::new(1.0, alpha, DEFAULT_M, DEFAULT_K2, bounds.clone(), norm)?;
    let report = check_horizon(&hc);
    println!("\nT = 1, ‖B‖_α = {norm:.3}");
    for c in &report.conditions {
        let thr = c.mu_threshold.map_or("none".to_string(), |t| format!("{t:.4e}"));
        println!("  {:<20} {:>5}  μ threshold {thr}", c.name, if c.pass { "ok" } else { "FAIL" });
    }
    println!("  binding: {:?}, K* = {:?}", report.binding, report.k_star);

    if let Some(k) = report.k_star {
        let hc = hc.with_mu(0.9 * k);
        let b = short_horizon_bound(&hc, 1.25f64.sqrt())?;
        println!("\nat μ = 0.9 K*: bound {:.4} (C15 {:.3e}, C16 {:.3e})", b.bound, b.c15, b.c16);
    }

    let cfg = BoundCheckConfig {
        samples: 20,
        seed: 9,
        ..BoundCheckConfig::default()
    };
    let samples = verify_short_horizon(&field, &bounds, &x0, &cfg)?;
    let worst = samples.iter().map(|s| s.empirical / s.bound).fold(0.0, f64::max);
    println!("20 sampled ω: all dominated = {}, worst ratio {worst:.3}", samples.iter().all(|s| s.dominated));
    Ok(())
}
