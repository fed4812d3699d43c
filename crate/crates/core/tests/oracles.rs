//! Comparisons against values computed independently of the library code
//! paths: Riemann sums, finite differences and closed-form solutions.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use wzlab::brownian::{NestedBrownianPath, PiecewiseLinearPath};
use wzlab::coefficients::{
    davie_tensor, AffineField, CoefficientField, LinearField, QuadraticDiffusion, ScalarGeometric, TrigField,
    TruncatedField,
};
use wzlab::integrate::{solve_localized_wz, solve_strat_reference, solve_wz, solve_wz_refined, ReferenceScheme};
use wzlab::roughlift::lift_piecewise_linear;

#[test]
fn two_segment_lift_matches_midpoint_riemann_sum() {
    let pl = PiecewiseLinearPath::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 1.0, 2.0, -1.0, 3.0], 2).unwrap();
    let rp = lift_piecewise_linear(&pl, 0.4).unwrap();
    let inc = rp.increment(0.0, 1.0).unwrap();

    const N: usize = 1_000_000;
    let at = |t: f64| {
        let mut x = [0.0; 2];
        pl.eval(t, &mut x).unwrap();
        x
    };
    let mut oracle = [0.0; 4];
    let mut prev = at(0.0);
    for k in 1..=N {
        let cur = at(k as f64 / N as f64);
        for a in 0..2 {
            let mid = 0.5 * (prev[a] + cur[a]);
            for b in 0..2 {
                oracle[a * 2 + b] += mid * (cur[b] - prev[b]);
            }
        }
        prev = cur;
    }
    for (got, want) in inc.level2.iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
    assert_eq!(inc.level1, vec![-1.0, 3.0]);
}

fn random_points(dim: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random_range(-radius..radius)).collect())
        .collect()
}

/// Central difference of `f: R^v → R^m`, laid out `[j * v + l]`.
fn fd_jacobian(f: impl Fn(&[f64], &mut [f64]), x: &[f64], m: usize, h: f64) -> Vec<f64> {
    let v = x.len();
    let mut out = vec![0.0; m * v];
    let (mut plus, mut minus) = (vec![0.0; m], vec![0.0; m]);
    for l in 0..v {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[l] += h;
        xm[l] -= h;
        f(&xp, &mut plus);
        f(&xm, &mut minus);
        for j in 0..m {
            out[j * v + l] = (plus[j] - minus[j]) / (2.0 * h);
        }
    }
    out
}

fn assert_close(got: &[f64], want: &[f64], rel: f64, what: &str) {
    assert_eq!(got.len(), want.len(), "{what}: length");
    for (k, (g, w)) in got.iter().zip(want).enumerate() {
        let scale = w.abs().max(1.0);
        assert!((g - w).abs() <= rel * scale, "{what}[{k}]: {g} vs {w}");
    }
}

fn check_derivatives(field: &dyn CoefficientField, radius: f64, hess_tol: f64) {
    let (v, r) = (field.state_dim(), field.noise_dim());
    for x in random_points(v, 100, radius, 17) {
        let mut jb = vec![0.0; v * v];
        field.drift_jacobian(&x, &mut jb);
        assert_close(&jb, &fd_jacobian(|y, o| field.drift(y, o), &x, v, 1e-6), 1e-6, "drift jacobian");

        let mut js = vec![0.0; v * r * v];
        field.diffusion_jacobian(&x, &mut js);
        let fd = fd_jacobian(|y, o| field.diffusion(y, o), &x, v * r, 1e-6);
        assert_close(&js, &fd, 1e-6, "diffusion jacobian");

        let mut hs = vec![0.0; v * r * v * v];
        field.diffusion_hessian(&x, &mut hs);
        let fd = fd_jacobian(|y, o| field.diffusion_jacobian(y, o), &x, v * r * v, 1e-6);
        assert_close(&hs, &fd, hess_tol, "diffusion hessian");
    }
}

#[test]
fn builtin_derivatives_match_finite_differences() {
    check_derivatives(&ScalarGeometric::new(0.1, 0.5), 3.0, 1e-6);
    check_derivatives(&LinearField::non_commuting_2d(0.1, 0.5), 3.0, 1e-6);
    check_derivatives(
        &AffineField::new(vec![-0.5, 1.0, 0.0, -0.2], vec![0.1, 0.2], vec![0.3, 0.0, 0.1, 0.4], 2, 2).unwrap(),
        3.0,
        1e-6,
    );
    check_derivatives(&TrigField::new(3, 0.5, 0.3), 3.0, 1e-6);
    check_derivatives(&QuadraticDiffusion { c: 1.5 }, 3.0, 1e-6);
}

#[test]
fn truncated_derivatives_match_finite_differences() {
    // The retraction is only C² across the transition band, so the Hessian
    // check is looser than the first-derivative one.
    check_derivatives(&TruncatedField::new(TrigField::new(2, 0.5, 0.3), 2.0).unwrap(), 2.5, 1e-4);
    check_derivatives(&TruncatedField::new(QuadraticDiffusion { c: 1.0 }, 4.0).unwrap(), 3.0, 1e-4);
}

fn fd_davie(field: &dyn CoefficientField, x: &[f64]) -> Vec<f64> {
    let (v, r) = (field.state_dim(), field.noise_dim());
    let mut sigma = vec![0.0; v * r];
    field.diffusion(x, &mut sigma);
    let ds = fd_jacobian(|y, o| field.diffusion(y, o), x, v * r, 1e-5);
    let mut out = vec![0.0; v * r * r];
    for i in 0..v {
        for k in 0..r {
            for m in 0..r {
                out[i * r * r + k * r + m] = (0..v).map(|l| sigma[l * r + k] * ds[(i * r + m) * v + l]).sum();
            }
        }
    }
    out
}

#[test]
fn davie_tensor_matches_finite_difference_oracle() {
    let rotation = LinearField::new(vec![0.0; 4], vec![vec![0.0, -1.0, 1.0, 0.0]], 2).unwrap();
    for x in random_points(2, 50, 5.0, 3) {
        let t = davie_tensor(&rotation, &x).unwrap();
        // σ = Jx with J a quarter turn, so Σ = J²x = −x.
        assert!((t[0] + x[0]).abs() < 1e-12 && (t[1] + x[1]).abs() < 1e-12);
        assert_close(&t, &fd_davie(&rotation, &x), 1e-8, "rotation");
    }
    let trig = TrigField::new(3, 0.5, 0.3);
    for x in random_points(3, 50, 4.0, 4) {
        assert_close(&davie_tensor(&trig, &x).unwrap(), &fd_davie(&trig, &x), 1e-8, "trig");
    }
}

#[test]
fn geometric_wong_zakai_matches_segment_exponentials() {
    let (a, c) = (0.1, 0.5);
    let field = ScalarGeometric::new(a, c);
    for seed in 0..5 {
        let path = NestedBrownianPath::sample(seed, 1.0, 1, 10).unwrap();
        let traj = solve_wz(&field, &path.interpolant(10).unwrap(), &[1.0], 4).unwrap();
        let b = path.level_values(10).unwrap();
        let h = path.mesh(10);
        let mut x = 1.0;
        for k in 0..b.len() - 1 {
            x *= (a * h + c * (b[k + 1] - b[k])).exp();
            let got = traj.state(k + 1)[0];
            assert!((got / x - 1.0).abs() < 1e-8, "seed {seed} step {k}: {got} vs {x}");
        }
    }
}

#[test]
fn references_match_the_closed_form_stratonovich_solution() {
    let field = ScalarGeometric::new(0.1, 0.5);
    let d_ref = 14;
    for seed in 0..5 {
        let path = NestedBrownianPath::sample(seed, 1.0, 1, d_ref).unwrap();
        let b = path.level_values(d_ref).unwrap();
        let times = path.times(d_ref);
        for (scheme, tol) in [(ReferenceScheme::FineWongZakai, 1e-12), (ReferenceScheme::Heun, 1e-6)] {
            let x = solve_strat_reference(&field, &path, d_ref, &[1.0], scheme, 4).unwrap();
            let err = (0..times.len())
                .map(|i| (x.state(i)[0] - field.exact(1.0, times[i], b[i])).powi(2))
                .fold(0.0, f64::max);
            assert!(err < tol, "{} seed {seed}: {err}", scheme.name());
        }
    }
}

#[test]
fn additive_noise_matches_linear_ode_per_segment() {
    let (lambda, c) = (-0.7, 0.4);
    let field = AffineField::new(vec![lambda], vec![0.0], vec![c], 1, 1).unwrap();
    let path = NestedBrownianPath::sample(8, 1.0, 1, 9).unwrap();
    let traj = solve_wz(&field, &path.interpolant(9).unwrap(), &[2.0], 4).unwrap();
    let b = path.level_values(9).unwrap();
    let h = path.mesh(9);
    let growth = (lambda * h).exp();
    let mut x = 2.0;
    for k in 0..b.len() - 1 {
        let slope = (b[k + 1] - b[k]) / h;
        x = growth * x + c * slope * (growth - 1.0) / lambda;
        assert!((traj.state(k + 1)[0] - x).abs() < 1e-9 * x.abs().max(1.0));
    }
}

#[test]
fn localization_with_huge_radius_is_inert() {
    let field = ScalarGeometric::new(0.1, 0.5);
    for seed in 0..10 {
        let path = NestedBrownianPath::sample(seed, 1.0, 1, 11).unwrap();
        let driver = path.interpolant(8).unwrap();
        let xd = solve_wz_refined(&field, &driver, &[1.0], 4, 3).unwrap();
        let xdn = solve_localized_wz(&field, 1e6, &driver, &[1.0], 4, 3).unwrap();
        assert!(xd.sup_norm_sq() < 1e6);
        assert!(xdn.sup_sq_distance(&xd).unwrap().sqrt() <= 1e-9);
    }
}

#[test]
fn small_radius_keeps_an_explosive_field_bounded() {
    let field = QuadraticDiffusion { c: 1.0 };
    for seed in 0..50 {
        let path = NestedBrownianPath::sample(seed, 1.0, 1, 8).unwrap();
        let driver = path.interpolant(8).unwrap();
        let xdn = solve_localized_wz(&field, 2.0, &driver, &[1.0], 4, 0).unwrap();
        assert!(!xdn.blew_up(), "seed {seed}");
        assert!(xdn.sup_norm_sq().is_finite() && xdn.sup_norm_sq() < 1e3, "seed {seed}: {}", xdn.sup_norm_sq());
    }
}

#[test]
fn halving_the_inner_step_changes_little() {
    let field = LinearField::non_commuting_2d(0.1, 0.5);
    let path = NestedBrownianPath::sample(5, 1.0, 2, 10).unwrap();
    let driver = path.interpolant(10).unwrap();
    let coarse = solve_wz(&field, &driver, &[1.0, 0.5], 4).unwrap();
    let fine = solve_wz(&field, &driver, &[1.0, 0.5], 8).unwrap();
    assert!(coarse.sup_sq_distance(&fine).unwrap().sqrt() <= 1e-9);
}
