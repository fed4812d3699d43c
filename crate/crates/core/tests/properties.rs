//! Structural invariants checked on random inputs.

use proptest::prelude::*;
use wzlab::brownian::NestedBrownianPath;
use wzlab::coefficients::{CoefficientField, LinearField, TrigField, TruncatedField};
use wzlab::roughlift::lift_piecewise_linear;
use wzlab::stats::rate_fit;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refinement_nests(seed in any::<u64>(), dim in 1usize..4, level in 1u32..9, horizon in 0.1f64..5.0) {
        let path = NestedBrownianPath::sample(seed, horizon, dim, level).unwrap();
        let finer = path.refine().unwrap();
        for d in 0..=level {
            prop_assert_eq!(path.level_values(d).unwrap(), finer.level_values(d).unwrap());
        }
        for i in 0..=(1usize << level) {
            prop_assert_eq!(path.value(level, i).unwrap(), finer.value(level + 1, 2 * i).unwrap());
        }
    }

    #[test]
    fn chen_holds_for_grid_triples(
        seed in any::<u64>(),
        dim in 1usize..4,
        idx in prop::array::uniform3(0usize..=128),
    ) {
        let path = NestedBrownianPath::sample(seed, 1.0, dim, 7).unwrap();
        let rp = lift_piecewise_linear(&path.interpolant(7).unwrap(), 0.4).unwrap();
        let mut idx = idx;
        idx.sort_unstable();
        let t = rp.times();
        let chen = rp.compose_chen(t[idx[0]], t[idx[1]], t[idx[2]]).unwrap();
        let direct = rp.increment(t[idx[0]], t[idx[2]]).unwrap();
        for (a, b) in chen.level1.iter().chain(&chen.level2).zip(direct.level1.iter().chain(&direct.level2)) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn lift_is_geometric(seed in any::<u64>(), dim in 1usize..4, i in 0usize..64, len in 1usize..64) {
        let path = NestedBrownianPath::sample(seed, 2.0, dim, 7).unwrap();
        let rp = lift_piecewise_linear(&path.interpolant(7).unwrap(), 0.45).unwrap();
        let t = rp.times();
        let defect = rp.geometricity_defect(t[i], t[i + len]).unwrap();
        prop_assert!(defect.iter().all(|x| x.abs() <= 1e-10));
    }

    #[test]
    fn truncation_is_inert_inside_the_ball(
        x in prop::collection::vec(-1.0f64..1.0, 2),
        n in 4.0f64..100.0,
    ) {
        let base = LinearField::non_commuting_2d(0.3, 0.7);
        let trunc = TruncatedField::new(base.clone(), n).unwrap();
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() <= n);
        let (mut a, mut b) = (vec![0.0; 4], vec![0.0; 4]);
        base.diffusion(&x, &mut a);
        trunc.diffusion(&x, &mut b);
        prop_assert_eq!(&a, &b);
        base.drift_jacobian(&x, &mut a);
        trunc.drift_jacobian(&x, &mut b);
        prop_assert_eq!(&a, &b);
    }

    #[test]
    fn truncated_coefficients_are_bounded(
        x in prop::collection::vec(-1e6f64..1e6, 3),
        n in 1.0f64..50.0,
    ) {
        let base = TrigField::new(3, 2.0, 1.0);
        let trunc = TruncatedField::new(LinearField::non_commuting_2d(1.0, 1.0), n).unwrap();
        let mut out = vec![0.0; 4];
        trunc.diffusion(&x[..2], &mut out);
        // ‖C_j y‖ ≤ ‖y‖ for the unit-scale matrices and the retraction stays within radius 2√n.
        prop_assert!(out.iter().all(|v| v.abs() <= 2.0 * n.sqrt() + 1e-9));
        let mut b = vec![0.0; 3];
        base.drift(&x, &mut b);
        prop_assert!(b.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rate_fit_recovers_synthetic_slopes(
        slope in 0.1f64..2.0,
        scale in 1e-4f64..10.0,
        levels in 3usize..8,
    ) {
        let pts: Vec<(f64, f64)> = (0..levels)
            .map(|k| {
                let delta = 2f64.powi(-(k as i32) - 4);
                (delta, scale * delta.powf(slope))
            })
            .collect();
        let fit = rate_fit(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - scale.log2()).abs() < 1e-8);
        prop_assert!(fit.ci_low <= fit.slope + 1e-12 && fit.slope <= fit.ci_high + 1e-12);
    }
}
