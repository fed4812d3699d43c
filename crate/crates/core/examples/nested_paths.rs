//! Sample a nested dyadic Brownian path, check that coarse levels are
//! sub-samples of fine ones, and round-trip the binary dump.

use wzlab::brownian::NestedBrownianPath;

fn main() -> wzlab::Result<()> {
    let path = NestedBrownianPath::sample(42, 1.0, 2, 12)?;

    // B at t = 1/2 is the same number on every level that contains it.
    println!("B(1/2) by level:");
    for d in 1..=12 {
        let i = 1usize << (d - 1);
        println!("  d = {d:2}  {:?}", path.value(d, i)?);
    }

    println!("\nquadratic variation / (r T):");
    for d in [4, 8, 12] {
        let v = path.level_values(d)?;
        let qv: f64 = v.windows(4).step_by(2).map(|w| (w[2] - w[0]).powi(2) + (w[3] - w[1]).powi(2)).sum();
        println!("  d = {d:2}  {:.4}", qv / 2.0);
    }

    let finer = path.refine()?;
    assert_eq!(finer.level_values(12)?, path.level_values(12)?);
    println!("\nrefine() to level {} kept every existing value", finer.max_level());

    let mut buf = Vec::new();
    path.write_binary(&mut buf)?;
    let back = NestedBrownianPath::read_binary(buf.as_slice())?;
    assert_eq!(back, path);
    println!("binary dump: {} bytes, round trip exact", buf.len());
    Ok(())
}
