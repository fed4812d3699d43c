//! Distributional checks on the Brownian generator, each at 5 standard errors.

use wzlab::brownian::NestedBrownianPath;
use wzlab::stats::MeanEstimate;

const PATHS: u64 = 4000;

fn within(values: &[f64], expected: f64, what: &str) {
    let m = MeanEstimate::from_values(values);
    assert!(
        (m.mean - expected).abs() <= 5.0 * m.stderr,
        "{what}: mean {} ± {} vs {expected}",
        m.mean,
        m.stderr
    );
}

#[test]
fn terminal_value_has_the_right_moments() {
    let horizon = 2.0;
    let finals: Vec<f64> = (0..PATHS)
        .map(|s| NestedBrownianPath::sample(s, horizon, 1, 6).unwrap().value(6, 64).unwrap()[0])
        .collect();
    within(&finals, 0.0, "E[B_T]");
    let squares: Vec<f64> = finals.iter().map(|x| x * x).collect();
    within(&squares, horizon, "E[B_T²]");
}

#[test]
fn bridge_midpoints_have_the_right_variance() {
    let horizon = 1.5;
    let level = 6;
    let h = horizon / 64.0;
    let dev: Vec<f64> = (0..PATHS)
        .map(|s| {
            let p = NestedBrownianPath::sample(1000 + s, horizon, 1, level).unwrap();
            let (a, m, b) = (p.value(level, 10).unwrap()[0], p.value(level, 11).unwrap()[0], p.value(level, 12).unwrap()[0]);
            (m - 0.5 * (a + b)).powi(2)
        })
        .collect();
    within(&dev, h / 2.0, "bridge variance");
}

#[test]
fn increments_are_uncorrelated_with_variance_mesh() {
    let level = 8;
    let (mut sq, mut cross, mut coords) = (Vec::new(), Vec::new(), Vec::new());
    for s in 0..PATHS {
        let p = NestedBrownianPath::sample(5000 + s, 1.0, 2, level).unwrap();
        let v = p.level_values(level).unwrap();
        let d1 = [v[2 * 37 + 2] - v[2 * 37], v[2 * 37 + 3] - v[2 * 37 + 1]];
        let d2 = [v[2 * 38 + 2] - v[2 * 38], v[2 * 38 + 3] - v[2 * 38 + 1]];
        sq.push(d1[0] * d1[0] * 256.0);
        cross.push(d1[0] * d2[0] * 256.0);
        coords.push(d1[0] * d1[1] * 256.0);
    }
    within(&sq, 1.0, "increment variance");
    within(&cross, 0.0, "adjacent covariance");
    within(&coords, 0.0, "cross-coordinate covariance");
}

#[test]
fn deeper_sampling_keeps_coarser_levels() {
    for seed in [0, 1, 99] {
        let coarse = NestedBrownianPath::sample(seed, 1.0, 3, 6).unwrap();
        let deep = NestedBrownianPath::sample(seed, 1.0, 3, 11).unwrap();
        for d in 0..=6 {
            assert_eq!(coarse.level_values(d).unwrap(), deep.level_values(d).unwrap());
        }
    }
}
