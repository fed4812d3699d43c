//! User-defined fields from expression strings in the variables `x1..xv`.
//!
//! Derivatives are taken from explicit expressions when supplied; otherwise
//! central finite differences are used (step `1e-5` for first derivatives,
//! `1e-4` for the mixed second differences), which costs roughly six to
//! eight significant digits.

use exmex::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

use super::CoefficientField;

const FD_STEP: f64 = 1e-5;
const FD2_STEP: f64 = 1e-4;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpressionFieldSpec {
    /// `v` drift components.
    pub drift: Vec<String>,
    /// `v` rows of `r` diffusion entries.
    pub diffusion: Vec<Vec<String>>,
    /// Optional `v` rows of `v` entries, `∂_l b_i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_jacobian: Option<Vec<Vec<String>>>,
    /// Optional, `v*r` rows (entry `(i, j)` at row `i*r + j`) of `v` entries `∂_l σ_{i,j}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion_jacobian: Option<Vec<Vec<String>>>,
    /// Optional, `v*r*v` rows (row `(i*r + j)*v + l`) of `v` entries `∂_m ∂_l σ_{i,j}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion_hessian: Option<Vec<Vec<String>>>,
}

struct Expr {
    source: String,
    flat: FlatEx<f64>,
    vars: Vec<usize>,
}

impl Expr {
    fn parse(source: &str, dim: usize) -> Result<Self> {
        let flat = exmex::parse::<f64>(source)
            .map_err(|e| Error::Expression(format!("`{source}`: {e}")))?;
        let vars = flat
            .var_names()
            .iter()
            .map(|name| {
                name.strip_prefix('x')
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1 && k <= dim)
                    .map(|k| k - 1)
                    .ok_or_else(|| {
                        Error::Expression(format!(
                            "`{source}`: unknown variable `{name}` (expected x1..x{dim})"
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            source: source.to_string(),
            flat,
            vars,
        })
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        let args: SmallVec<[f64; 8]> = self.vars.iter().map(|&k| x[k]).collect();
        self.flat.eval(&args).unwrap_or(f64::NAN)
    }
}

impl std::fmt::Debug for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.source)
    }
}

#[derive(Debug)]
pub struct ExpressionField {
    v: usize,
    r: usize,
    drift: Vec<Expr>,
    diffusion: Vec<Expr>,
    drift_jacobian: Option<Vec<Expr>>,
    diffusion_jacobian: Option<Vec<Expr>>,
    diffusion_hessian: Option<Vec<Expr>>,
    spec: ExpressionFieldSpec,
}

fn parse_rows(rows: &[Vec<String>], n_rows: usize, n_cols: usize, dim: usize, what: &str) -> Result<Vec<Expr>> {
    if rows.len() != n_rows || rows.iter().any(|row| row.len() != n_cols) {
        return Err(Error::Expression(format!(
            "{what} must have {n_rows} rows of {n_cols} entries"
        )));
    }
    rows.iter().flatten().map(|s| Expr::parse(s, dim)).collect()
}

impl ExpressionField {
    pub fn new(spec: ExpressionFieldSpec) -> Result<Self> {
        let v = spec.drift.len();
        if v == 0 {
            return Err(Error::Expression("drift must have at least one component".into()));
        }
        let r = spec.diffusion.first().map_or(0, Vec::len);
        if r == 0 {
            return Err(Error::Expression("diffusion must have at least one column".into()));
        }
        let drift = spec
            .drift
            .iter()
            .map(|s| Expr::parse(s, v))
            .collect::<Result<Vec<_>>>()?;
        let diffusion = parse_rows(&spec.diffusion, v, r, v, "diffusion")?;
        let drift_jacobian = spec
            .drift_jacobian
            .as_ref()
            .map(|rows| parse_rows(rows, v, v, v, "drift_jacobian"))
            .transpose()?;
        let diffusion_jacobian = spec
            .diffusion_jacobian
            .as_ref()
            .map(|rows| parse_rows(rows, v * r, v, v, "diffusion_jacobian"))
            .transpose()?;
        let diffusion_hessian = spec
            .diffusion_hessian
            .as_ref()
            .map(|rows| parse_rows(rows, v * r * v, v, v, "diffusion_hessian"))
            .transpose()?;
        Ok(Self {
            v,
            r,
            drift,
            diffusion,
            drift_jacobian,
            diffusion_jacobian,
            diffusion_hessian,
            spec,
        })
    }

    pub fn spec(&self) -> &ExpressionFieldSpec {
        &self.spec
    }

    fn central_difference(&self, exprs: &[Expr], x: &[f64], out: &mut [f64]) {
        let v = self.v;
        let mut xp: SmallVec<[f64; 8]> = SmallVec::from_slice(x);
        for (e_idx, e) in exprs.iter().enumerate() {
            for l in 0..v {
                xp[l] = x[l] + FD_STEP;
                let fp = e.eval(&xp);
                xp[l] = x[l] - FD_STEP;
                let fm = e.eval(&xp);
                xp[l] = x[l];
                out[e_idx * v + l] = (fp - fm) / (2.0 * FD_STEP);
            }
        }
    }
}

impl CoefficientField for ExpressionField {
    fn name(&self) -> String {
        format!("expression(v={}, r={})", self.v, self.r)
    }
    fn state_dim(&self) -> usize {
        self.v
    }
    fn noise_dim(&self) -> usize {
        self.r
    }
    fn analytic_derivatives(&self) -> bool {
        self.drift_jacobian.is_some() && self.diffusion_jacobian.is_some() && self.diffusion_hessian.is_some()
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.drift) {
            *o = e.eval(x);
        }
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.diffusion) {
            *o = e.eval(x);
        }
    }

    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        match &self.drift_jacobian {
            Some(exprs) => {
                for (o, e) in out.iter_mut().zip(exprs) {
                    *o = e.eval(x);
                }
            }
            None => self.central_difference(&self.drift, x, out),
        }
    }

    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) {
        match &self.diffusion_jacobian {
            Some(exprs) => {
                for (o, e) in out.iter_mut().zip(exprs) {
                    *o = e.eval(x);
                }
            }
            None => self.central_difference(&self.diffusion, x, out),
        }
    }

    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) {
        if let Some(exprs) = &self.diffusion_hessian {
            for (o, e) in out.iter_mut().zip(exprs) {
                *o = e.eval(x);
            }
            return;
        }
        let v = self.v;
        if self.diffusion_jacobian.is_some() {
            // difference the analytic Jacobian once
            let n = v * self.r * v;
            let mut jp = vec![0.0; n];
            let mut jm = vec![0.0; n];
            let mut xp: SmallVec<[f64; 8]> = SmallVec::from_slice(x);
            for m in 0..v {
                xp[m] = x[m] + FD_STEP;
                self.diffusion_jacobian(&xp, &mut jp);
                xp[m] = x[m] - FD_STEP;
                self.diffusion_jacobian(&xp, &mut jm);
                xp[m] = x[m];
                for k in 0..n {
                    out[k * v + m] = (jp[k] - jm[k]) / (2.0 * FD_STEP);
                }
            }
            return;
        }
        let h = FD2_STEP;
        let mut xp: SmallVec<[f64; 8]> = SmallVec::from_slice(x);
        for (e_idx, e) in self.diffusion.iter().enumerate() {
            for l in 0..v {
                for m in 0..v {
                    let mut f = |dl: f64, dm: f64| {
                        xp.copy_from_slice(x);
                        xp[l] += dl;
                        xp[m] += dm;
                        e.eval(&xp)
                    };
                    let val = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
                    out[(e_idx * v + l) * v + m] = val;
                }
            }
        }
    }
}
