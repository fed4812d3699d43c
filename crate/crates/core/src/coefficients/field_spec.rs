use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{
    AffineField, CoefficientField, ExpressionField, ExpressionFieldSpec, LinearField, QuadraticDiffusion,
    ScalarGeometric, TrigField,
};

/// Serializable description of a coefficient field, tagged by `kind`.
///
/// ```toml
/// [field]
/// kind = "geometric"
/// a = 0.1
/// c = 0.5
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Geometric {
        a: f64,
        c: f64,
    },
    #[serde(rename = "non_commuting_2d")]
    NonCommuting2d {
        #[serde(default = "default_drift_scale")]
        drift_scale: f64,
        #[serde(default = "default_noise_scale")]
        noise_scale: f64,
    },
    /// `b = A x`, `σ_{·,j} = C_j x`; matrices as rows.
    Linear {
        drift: Vec<Vec<f64>>,
        columns: Vec<Vec<Vec<f64>>>,
    },
    /// `b = A x + b0`, `σ ≡ C`.
    Affine {
        drift: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Vec<f64>,
        diffusion: Vec<Vec<f64>>,
    },
    Trig {
        dim: usize,
        drift_scale: f64,
        diffusion_scale: f64,
    },
    Quadratic {
        c: f64,
    },
    Expression(ExpressionFieldSpec),
}

fn default_drift_scale() -> f64 {
    0.1
}

fn default_noise_scale() -> f64 {
    0.5
}

fn square(rows: &[Vec<f64>], what: &str) -> Result<(usize, Vec<f64>)> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::config(what, "must be a non-empty square matrix"));
    }
    Ok((n, rows.concat()))
}

impl FieldSpec {
    pub fn build(&self) -> Result<Box<dyn CoefficientField>> {
        Ok(match self {
            FieldSpec::Geometric { a, c } => Box::new(ScalarGeometric::new(*a, *c)),
            FieldSpec::NonCommuting2d {
                drift_scale,
                noise_scale,
            } => Box::new(LinearField::non_commuting_2d(*drift_scale, *noise_scale)),
            FieldSpec::Linear { drift, columns } => {
                let (v, a) = square(drift, "field.drift")?;
                let cols = columns
                    .iter()
                    .map(|c| {
                        let (n, flat) = square(c, "field.columns")?;
                        if n != v {
                            return Err(Error::config("field.columns", "column matrices must match the drift size"));
                        }
                        Ok(flat)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Box::new(LinearField::new(a, cols, v)?)
            }
            FieldSpec::Affine {
                drift,
                offset,
                diffusion,
            } => {
                let (v, a) = square(drift, "field.drift")?;
                let r = diffusion.first().map_or(0, Vec::len);
                if diffusion.len() != v || r == 0 || diffusion.iter().any(|row| row.len() != r) {
                    return Err(Error::config("field.diffusion", "must have v rows of equal, non-zero length"));
                }
                let b0 = if offset.is_empty() { vec![0.0; v] } else { offset.clone() };
                Box::new(AffineField::new(a, b0, diffusion.concat(), v, r)?)
            }
            FieldSpec::Trig {
                dim,
                drift_scale,
                diffusion_scale,
            } => {
                if *dim == 0 {
                    return Err(Error::config("field.dim", "must be at least 1"));
                }
                Box::new(TrigField::new(*dim, *drift_scale, *diffusion_scale))
            }
            FieldSpec::Quadratic { c } => Box::new(QuadraticDiffusion { c: *c }),
            FieldSpec::Expression(spec) => Box::new(ExpressionField::new(spec.clone())?),
        })
    }
}
