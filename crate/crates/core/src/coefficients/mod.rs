//! SDE coefficient fields and the quantities derived from them.
//!
//! Layout conventions (all row-major, `v` = state dimension, `r` = noise
//! dimension):
//!
//! | quantity      | shape       | index of `∂_l ∂_m σ_{i,j}` etc.   |
//! |---------------|-------------|-----------------------------------|
//! | `b`           | `v`         | `i`                               |
//! | `σ`           | `v × r`     | `i*r + j`                         |
//! | `∇b`          | `v × v`     | `i*v + l`                         |
//! | `∇σ`          | `v × r × v` | `(i*r + j)*v + l`                 |
//! | `∇²σ`         | `v×r×v×v`   | `((i*r + j)*v + l)*v + m`         |
//! | Davie tensor  | `v × r × r` | `i*r*r + k*r + m`                 |

mod builtin;
mod expr;
mod field_spec;
mod truncate;
mod verify;

pub use builtin::{AffineField, LinearField, QuadraticDiffusion, ScalarGeometric, TrigField};
pub use expr::{ExpressionField, ExpressionFieldSpec};
pub use field_spec::FieldSpec;
pub use truncate::{Retraction, TruncatedField};
pub use verify::{verify_assumptions, AssumptionReport, DerivativeSups, ProbeBox};

use std::sync::Arc;

use crate::error::{Error, Result};

/// Drift `b: R^v → R^v` and diffusion `σ: R^v → R^{v×r}` with derivatives.
pub trait CoefficientField: Send + Sync {
    fn name(&self) -> String;
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;

    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]);
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]);
    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]);

    /// Whether the derivative evaluators are exact rather than finite differences.
    fn analytic_derivatives(&self) -> bool {
        true
    }
}

macro_rules! forward_field {
    ($($ptr:ty),*) => {$(
        impl<T: CoefficientField + ?Sized> CoefficientField for $ptr {
            fn name(&self) -> String { (**self).name() }
            fn state_dim(&self) -> usize { (**self).state_dim() }
            fn noise_dim(&self) -> usize { (**self).noise_dim() }
            fn drift(&self, x: &[f64], out: &mut [f64]) { (**self).drift(x, out) }
            fn diffusion(&self, x: &[f64], out: &mut [f64]) { (**self).diffusion(x, out) }
            fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) { (**self).drift_jacobian(x, out) }
            fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) { (**self).diffusion_jacobian(x, out) }
            fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) { (**self).diffusion_hessian(x, out) }
            fn analytic_derivatives(&self) -> bool { (**self).analytic_derivatives() }
        }
    )*};
}

forward_field!(&T, Box<T>, Arc<T>);

pub(crate) fn check_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::param(format!("expected a point of dimension {dim}, got {}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{x:?}")));
    }
    Ok(())
}

/// Scratch space for σ and ∇σ at one point.
pub struct DiffusionScratch {
    pub sigma: Vec<f64>,
    pub dsigma: Vec<f64>,
}

impl DiffusionScratch {
    pub fn for_field<F: CoefficientField + ?Sized>(field: &F) -> Self {
        let (v, r) = (field.state_dim(), field.noise_dim());
        Self {
            sigma: vec![0.0; v * r],
            dsigma: vec![0.0; v * r * v],
        }
    }
}

/// Davie tensor `Σ_{i,k,m}(x) = Σ_l σ_{l,k}(x) ∂_l σ_{i,m}(x)`.
pub fn davie_tensor<F: CoefficientField + ?Sized>(field: &F, x: &[f64]) -> Result<Vec<f64>> {
    let (v, r) = (field.state_dim(), field.noise_dim());
    check_point(x, v)?;
    let mut scratch = DiffusionScratch::for_field(field);
    let mut out = vec![0.0; v * r * r];
    davie_tensor_into(field, x, &mut scratch, &mut out);
    Ok(out)
}

pub fn davie_tensor_into<F: CoefficientField + ?Sized>(
    field: &F,
    x: &[f64],
    scratch: &mut DiffusionScratch,
    out: &mut [f64],
) {
    let (v, r) = (field.state_dim(), field.noise_dim());
    field.diffusion(x, &mut scratch.sigma);
    field.diffusion_jacobian(x, &mut scratch.dsigma);
    let (sigma, dsigma) = (&scratch.sigma, &scratch.dsigma);
    for i in 0..v {
        for k in 0..r {
            for m in 0..r {
                let mut acc = 0.0;
                for l in 0..v {
                    acc += sigma[l * r + k] * dsigma[(i * r + m) * v + l];
                }
                out[i * r * r + k * r + m] = acc;
            }
        }
    }
}

/// Applies the Davie tensor to a level-2 tensor `g ∈ R^{r×r}`.
pub fn contract_davie(tensor: &[f64], g: &[f64], v: usize, r: usize, out: &mut [f64]) {
    for i in 0..v {
        let block = &tensor[i * r * r..(i + 1) * r * r];
        out[i] = block.iter().zip(g).map(|(a, b)| a * b).sum();
    }
}

/// Scalar-per-component form `Σ_i = Σ_{k,m} Σ_{i,k,m}`.
pub fn contracted_davie<F: CoefficientField + ?Sized>(field: &F, x: &[f64]) -> Result<Vec<f64>> {
    let (v, r) = (field.state_dim(), field.noise_dim());
    let t = davie_tensor(field, x)?;
    Ok((0..v).map(|i| t[i * r * r..(i + 1) * r * r].iter().sum()).collect())
}

/// Jacobian of the Davie tensor, `∂_p Σ_{i,k,m}` at index `(i*r*r + k*r + m)*v + p`.
pub fn davie_jacobian<F: CoefficientField + ?Sized>(field: &F, x: &[f64]) -> Result<Vec<f64>> {
    let (v, r) = (field.state_dim(), field.noise_dim());
    check_point(x, v)?;
    let mut sigma = vec![0.0; v * r];
    let mut ds = vec![0.0; v * r * v];
    let mut hs = vec![0.0; v * r * v * v];
    field.diffusion(x, &mut sigma);
    field.diffusion_jacobian(x, &mut ds);
    field.diffusion_hessian(x, &mut hs);
    let mut out = vec![0.0; v * r * r * v];
    for i in 0..v {
        for k in 0..r {
            for m in 0..r {
                for p in 0..v {
                    let mut acc = 0.0;
                    for l in 0..v {
                        acc += ds[(l * r + k) * v + p] * ds[(i * r + m) * v + l]
                            + sigma[l * r + k] * hs[((i * r + m) * v + l) * v + p];
                    }
                    out[(i * r * r + k * r + m) * v + p] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Itô–Stratonovich drift correction `c_i = ½ Σ_k Σ_l σ_{l,k} ∂_l σ_{i,k}`.
pub fn strat_drift_correction<F: CoefficientField + ?Sized>(field: &F, x: &[f64]) -> Result<Vec<f64>> {
    let v = field.state_dim();
    check_point(x, v)?;
    let mut scratch = DiffusionScratch::for_field(field);
    let mut out = vec![0.0; v];
    strat_drift_correction_into(field, x, &mut scratch, &mut out);
    Ok(out)
}

pub fn strat_drift_correction_into<F: CoefficientField + ?Sized>(
    field: &F,
    x: &[f64],
    scratch: &mut DiffusionScratch,
    out: &mut [f64],
) {
    let (v, r) = (field.state_dim(), field.noise_dim());
    field.diffusion(x, &mut scratch.sigma);
    field.diffusion_jacobian(x, &mut scratch.dsigma);
    let (sigma, dsigma) = (&scratch.sigma, &scratch.dsigma);
    for i in 0..v {
        let mut acc = 0.0;
        for k in 0..r {
            for l in 0..v {
                acc += sigma[l * r + k] * dsigma[(i * r + k) * v + l];
            }
        }
        out[i] = 0.5 * acc;
    }
}

pub(crate) fn euclidean(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_diffusion_has_no_davie_term() {
        let f = AffineField::new(vec![0.0; 4], vec![0.0; 2], vec![0.3, 0.1, -0.2, 0.5], 2, 2).unwrap();
        let x = [0.7, -1.1];
        assert!(davie_tensor(&f, &x).unwrap().iter().all(|&t| t == 0.0));
        assert!(strat_drift_correction(&f, &x).unwrap().iter().all(|&t| t == 0.0));
    }

    #[test]
    fn scalar_geometric_values() {
        let f = ScalarGeometric::new(0.1, 0.5);
        let x = [1.7];
        let t = davie_tensor(&f, &x).unwrap();
        assert!((t[0] - 0.25 * 1.7).abs() < 1e-15);
        let c = strat_drift_correction(&f, &x).unwrap();
        assert!((c[0] - 0.5 * 0.25 * 1.7).abs() < 1e-15);
    }

    #[test]
    fn diagonal_field_correction() {
        // σ = diag(x1, x2): c = (½x1, ½x2)
        let c1 = vec![1.0, 0.0, 0.0, 0.0];
        let c2 = vec![0.0, 0.0, 0.0, 1.0];
        let f = LinearField::new(vec![0.0; 4], vec![c1, c2], 2).unwrap();
        let x = [0.8, -2.5];
        let c = strat_drift_correction(&f, &x).unwrap();
        assert!((c[0] - 0.4).abs() < 1e-15);
        assert!((c[1] + 1.25).abs() < 1e-15);
    }

    #[test]
    fn non_finite_point_is_a_domain_error() {
        let f = ScalarGeometric::new(0.1, 0.5);
        assert!(matches!(davie_tensor(&f, &[f64::NAN]), Err(Error::Domain(_))));
        assert!(matches!(strat_drift_correction(&f, &[f64::INFINITY]), Err(Error::Domain(_))));
    }

    #[test]
    fn correction_is_half_diagonal_contraction() {
        let f = TrigField::new(2, 0.3, 0.4);
        for x in [[0.1, 0.2], [1.5, -0.7], [-3.0, 2.2]] {
            let t = davie_tensor(&f, &x).unwrap();
            let c = strat_drift_correction(&f, &x).unwrap();
            for i in 0..2 {
                let diag = t[i * 4] + t[i * 4 + 3];
                assert!((c[i] - 0.5 * diag).abs() <= 1e-15 * diag.abs().max(1.0));
            }
        }
    }
}
