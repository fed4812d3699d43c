//! Solve the geometric SDE on one ω with Wong-Zakai drivers of increasing
//! level and compare with the closed-form Stratonovich solution.

use wzlab::brownian::NestedBrownianPath;
use wzlab::coefficients::ScalarGeometric;
use wzlab::integrate::{
    solve_localized_wz, solve_strat_reference, solve_wz_refined, ReferenceScheme, DEFAULT_SUBSTEPS,
};

fn main() -> wzlab::Result<()> {
    let field = ScalarGeometric::new(0.1, 0.5);
    let d_ref = 14;
    let path = NestedBrownianPath::sample(2024, 1.0, 1, d_ref)?;
    let x0 = [1.0];

    let times = path.times(d_ref);
    let b = path.level_values(d_ref)?;
    let exact_sup = |traj: &wzlab::integrate::Trajectory| {
        times
            .iter()
            .zip(&b)
            .enumerate()
            .map(|(i, (&t, &bt))| (traj.state(i)[0] - field.exact(1.0, t, bt)).powi(2))
            .fold(0.0f64, f64::max)
    };

    println!("{:>3} {:>14}", "d", "sup|X^d − X|²");
    for d in [4, 6, 8, 10, 12] {
        let xd = solve_wz_refined(&field, &path.interpolant(d)?, &x0, DEFAULT_SUBSTEPS, d_ref - d)?;
        println!("{d:>3} {:>14.4e}", exact_sup(&xd));
    }

    for scheme in [ReferenceScheme::FineWongZakai, ReferenceScheme::Heun, ReferenceScheme::EulerCorrected] {
        let x = solve_strat_reference(&field, &path, d_ref, &x0, scheme, DEFAULT_SUBSTEPS)?;
        println!("reference {:>16}: sup err² {:.3e}", scheme.name(), exact_sup(&x));
    }

    let driver = path.interpolant(10)?;
    println!("\nlocalized X^(10,n), final state:");
    for n in [1.5, 4.0, 64.0] {
        let xdn = solve_localized_wz(&field, n, &driver, &x0, DEFAULT_SUBSTEPS, d_ref - 10)?;
        println!("  n = {n:>5}: {:.6}  (sup |x|² = {:.3})", xdn.final_state()[0], xdn.sup_norm_sq());
    }
    Ok(())
}
