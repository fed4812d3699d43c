//! Lift a piecewise-linear Brownian interpolant to a level-2 rough path and
//! look at its Hölder norm, Lévy area and Chen relation.

use wzlab::brownian::NestedBrownianPath;
use wzlab::roughlift::{lift_piecewise_linear, DEFAULT_PAIR_BUDGET};

fn main() -> wzlab::Result<()> {
    let alpha = 0.4;
    let path = NestedBrownianPath::sample(7, 1.0, 2, 10)?;

    println!("{:>3} {:>10} {:>10} {:>10} {:>12}", "d", "norm", "level1", "level2", "area(0,1)");
    for d in [4, 6, 8, 10] {
        let rp = lift_piecewise_linear(&path.interpolant(d)?, alpha)?;
        let h = rp.hoelder_norm(DEFAULT_PAIR_BUDGET);
        let area = rp.increment(0.0, 1.0)?.area()[1];
        println!("{d:>3} {:>10.4} {:>10.4} {:>10.4} {:>12.6}", h.value, h.level1, h.level2, area);
    }

    let rp = lift_piecewise_linear(&path.interpolant(10)?, alpha)?;
    let (s, u, t) = (0.125, 0.5, 0.875);
    let chen = rp.compose_chen(s, u, t)?;
    let direct = rp.increment(s, t)?;
    let err = chen
        .level2
        .iter()
        .zip(&direct.level2)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("\nChen on ({s}, {u}, {t}): max level-2 mismatch {err:e}");
    let defect = rp.geometricity_defect(s, t)?;
    println!("Sym(X²) − ½ X¹⊗X¹: max {:e}", defect.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    Ok(())
}
