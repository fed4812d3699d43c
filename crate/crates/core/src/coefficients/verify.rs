//! Probe-box scans of derivative bounds and of the Lipschitz constant of the
//! contracted Davie term.

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{contracted_davie, davie_jacobian, euclidean, CoefficientField};

/// The cube `[-radius, radius]^v`, sampled uniformly from a fixed seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeBox {
    pub radius: f64,
    pub seed: u64,
}

impl ProbeBox {
    pub fn new(radius: f64) -> Self {
        Self { radius, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn points(&self, dim: usize, samples: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(samples + 1);
        out.push(vec![0.0; dim]);
        for _ in 0..samples {
            out.push((0..dim).map(|_| self.radius * (2.0 * unit(&mut rng) - 1.0)).collect());
        }
        out
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sampled suprema over one probe box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSups {
    pub radius: f64,
    /// Spectral norm of `∇b`.
    pub grad_b: f64,
    /// Spectral norm of `∇σ_{·,j}` per column.
    pub grad_sigma: Vec<f64>,
    /// Frobenius norm of `∇²σ_{·,j}` per column.
    pub hess_sigma: Vec<f64>,
    /// Frobenius norm of the full `∇σ` tensor.
    pub grad_sigma_full: f64,
    /// Frobenius norm of the Jacobian of the Davie tensor.
    pub davie_jacobian: f64,
    /// Largest difference quotient of the contracted Davie term over point pairs.
    pub davie_lipschitz: f64,
    /// Points where some evaluator returned a non-finite value.
    pub non_finite: usize,
}

impl DerivativeSups {
    /// `max(|∇b|, max_j |∇σ_{·,j}|, max_j |∇²σ_{·,j}|)`.
    pub fn mc_estimate(&self) -> f64 {
        self.grad_sigma
            .iter()
            .chain(&self.hess_sigma)
            .fold(self.grad_b, |m, &x| m.max(x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub field: String,
    pub samples: usize,
    pub seed: u64,
    pub analytic_derivatives: bool,
    /// Scan over the requested box.
    pub outer: DerivativeSups,
    /// Scan over the box shrunk by a factor 10.
    pub inner: DerivativeSups,
    pub mc_estimate: f64,
    pub davie_lipschitz: f64,
    /// Quantities whose sampled sup more than doubles from the inner to the outer box.
    pub growth_flags: Vec<String>,
    pub satisfied: bool,
}

fn spectral_norm(m: &[f64], rows: usize, cols: usize) -> f64 {
    if m.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    DMatrix::from_row_slice(rows, cols, m)
        .singular_values()
        .iter()
        .fold(0.0, |a: f64, &s| a.max(s))
}

fn frobenius(m: &[f64]) -> f64 {
    euclidean(m)
}

fn scan<F: CoefficientField + ?Sized>(field: &F, probe: ProbeBox, samples: usize) -> DerivativeSups {
    let (v, r) = (field.state_dim(), field.noise_dim());
    let points = probe.points(v, samples);
    let mut db = vec![0.0; v * v];
    let mut ds = vec![0.0; v * r * v];
    let mut hs = vec![0.0; v * r * v * v];
    let mut col = vec![0.0; v * v];
    let mut sups = DerivativeSups {
        radius: probe.radius,
        grad_b: 0.0,
        grad_sigma: vec![0.0; r],
        hess_sigma: vec![0.0; r],
        grad_sigma_full: 0.0,
        davie_jacobian: 0.0,
        davie_lipschitz: 0.0,
        non_finite: 0,
    };
    let bump = |acc: &mut f64, val: f64, bad: &mut bool| {
        if val.is_finite() {
            *acc = acc.max(val);
        } else {
            *bad = true;
        }
    };

    let mut contracted = Vec::with_capacity(points.len());
    for x in &points {
        let mut bad = false;
        field.drift_jacobian(x, &mut db);
        field.diffusion_jacobian(x, &mut ds);
        field.diffusion_hessian(x, &mut hs);
        bump(&mut sups.grad_b, spectral_norm(&db, v, v), &mut bad);
        for j in 0..r {
            for i in 0..v {
                for l in 0..v {
                    col[i * v + l] = ds[(i * r + j) * v + l];
                }
            }
            bump(&mut sups.grad_sigma[j], spectral_norm(&col, v, v), &mut bad);
            let hess_sq: f64 = (0..v)
                .flat_map(|i| (0..v * v).map(move |lm| (i, lm)))
                .map(|(i, lm)| hs[(i * r + j) * v * v + lm].powi(2))
                .sum();
            bump(&mut sups.hess_sigma[j], hess_sq.sqrt(), &mut bad);
        }
        bump(&mut sups.grad_sigma_full, frobenius(&ds), &mut bad);
        match davie_jacobian(field, x) {
            Ok(jac) => bump(&mut sups.davie_jacobian, frobenius(&jac), &mut bad),
            Err(_) => bad = true,
        }
        let c = contracted_davie(field, x).ok().filter(|c| c.iter().all(|a| a.is_finite()));
        bad |= c.is_none();
        contracted.push(c);
        if bad {
            sups.non_finite += 1;
        }
    }

    // far pairs: consecutive sample points; near pairs: small perturbations
    let mut quotient = |x: &[f64], cx: &[f64], y: &[f64]| {
        if let Ok(cy) = contracted_davie(field, y) {
            let dist: f64 = euclidean(&x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>());
            let diff: f64 = euclidean(&cx.iter().zip(&cy).map(|(a, b)| a - b).collect::<Vec<_>>());
            if dist > 0.0 && diff.is_finite() {
                sups.davie_lipschitz = sups.davie_lipschitz.max(diff / dist);
            }
        }
    };
    let h = 1e-3 * probe.radius.max(1e-3);
    for (k, x) in points.iter().enumerate() {
        let Some(cx) = &contracted[k] else { continue };
        let y = &points[(k + 1) % points.len()];
        quotient(x, cx, y);
        let near: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, a)| a + if (i + k) % 2 == 0 { h } else { -h })
            .collect();
        quotient(x, cx, &near);
    }
    sups
}

/// Scans `probe` and the same box shrunk tenfold, reporting derivative sups
/// and flagging quantities that grow between the two.
pub fn verify_assumptions<F: CoefficientField + ?Sized>(
    field: &F,
    probe: ProbeBox,
    samples: usize,
) -> AssumptionReport {
    let outer = scan(field, probe, samples);
    let inner = scan(
        field,
        ProbeBox {
            radius: probe.radius / 10.0,
            seed: probe.seed,
        },
        samples,
    );
    let mut flags = Vec::new();
    let mut check = |name: String, o: f64, i: f64| {
        if o > 2.0 * i + 1e-9 {
            flags.push(name);
        }
    };
    check("grad_b".into(), outer.grad_b, inner.grad_b);
    for j in 0..outer.grad_sigma.len() {
        check(format!("grad_sigma[{j}]"), outer.grad_sigma[j], inner.grad_sigma[j]);
        check(format!("hess_sigma[{j}]"), outer.hess_sigma[j], inner.hess_sigma[j]);
    }
    check("davie_jacobian".into(), outer.davie_jacobian, inner.davie_jacobian);
    if outer.non_finite > 0 {
        flags.push("non_finite".into());
    }
    AssumptionReport {
        field: field.name(),
        samples,
        seed: probe.seed,
        analytic_derivatives: field.analytic_derivatives(),
        mc_estimate: outer.mc_estimate(),
        davie_lipschitz: outer.davie_lipschitz,
        satisfied: flags.is_empty(),
        growth_flags: flags,
        outer,
        inner,
    }
}
