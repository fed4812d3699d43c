//! Localization of coefficients by smooth radial retraction.
//!
//! `b^n(x) = b(ρ_n(x))`, `σ^n(x) = σ(ρ_n(x))` with `ρ_n(x) = x · s(|x|²)`.
//! The retracted squared radius `h(q) = |ρ_n(x)|²` equals `q` on `q ≤ n`,
//! rises along a quintic in the band `[n, 4n]` and is frozen at `4n`
//! beyond it; `h` is C² in `q`, so `ρ_n` is C² and the truncated fields
//! have globally bounded derivatives whenever the base field's derivatives
//! are bounded on bounded sets.

use smallvec::SmallVec;

use crate::error::{Error, Result};

use super::CoefficientField;

type Buf = SmallVec<[f64; 32]>;

/// The retraction `ρ_n` with its first and second derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Retraction {
    n: f64,
}

/// Quintic `p` on `[0, 1]` with `p(0) = 0, p'(0) = 1, p''(0) = 0,
/// p(1) = 1, p'(1) = p''(1) = 0`; `p' = (1 − u)²(15u² + 2u + 1) > 0`.
#[inline]
fn blend(u: f64) -> (f64, f64, f64) {
    let u2 = u * u;
    let u3 = u2 * u;
    let p = u + 4.0 * u3 - 7.0 * u3 * u + 3.0 * u3 * u2;
    let dp = 1.0 + 12.0 * u2 - 28.0 * u3 + 15.0 * u3 * u;
    let ddp = 24.0 * u - 84.0 * u2 + 60.0 * u3;
    (p, dp, ddp)
}

impl Retraction {
    pub fn new(n: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::param(format!("localization radius must be positive, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn radius(&self) -> f64 {
        self.n
    }

    /// `(h, h', h'')` as functions of `q = |x|²`.
    #[inline]
    fn squared_radius(&self, q: f64) -> (f64, f64, f64) {
        let n = self.n;
        if q <= n {
            (q, 1.0, 0.0)
        } else if q >= 4.0 * n {
            (4.0 * n, 0.0, 0.0)
        } else {
            let (p, dp, ddp) = blend((q - n) / (3.0 * n));
            (n + 3.0 * n * p, dp, ddp / (3.0 * n))
        }
    }

    /// `(s, s', s'')` for the radial multiplier, valid for `q > n`.
    #[inline]
    fn multiplier(&self, q: f64) -> (f64, f64, f64) {
        let (h, dh, ddh) = self.squared_radius(q);
        let g = h / q;
        let dg = dh / q - h / (q * q);
        let ddg = ddh / q - 2.0 * dh / (q * q) + 2.0 * h / (q * q * q);
        let s = g.sqrt();
        let ds = dg / (2.0 * s);
        let dds = ddg / (2.0 * s) - dg * dg / (4.0 * s * s * s);
        (s, ds, dds)
    }

    #[inline]
    pub fn inside(&self, x: &[f64]) -> bool {
        x.iter().map(|a| a * a).sum::<f64>() <= self.n
    }

    /// Writes `ρ_n(x)`; returns `false` (and copies `x`) inside `S_n`.
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) -> bool {
        let q: f64 = x.iter().map(|a| a * a).sum();
        if q <= self.n {
            out.copy_from_slice(x);
            return false;
        }
        let (s, _, _) = self.multiplier(q);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi * s;
        }
        true
    }

    /// Jacobian `J_{il} = ∂_l ρ_i` (v × v) and, if requested, the second
    /// derivatives `H_{ilm} = ∂_m ∂_l ρ_i` at index `(i*v + l)*v + m`.
    pub fn derivatives(&self, x: &[f64], jac: &mut [f64], hess: Option<&mut [f64]>) {
        let v = x.len();
        let q: f64 = x.iter().map(|a| a * a).sum();
        if q <= self.n {
            jac.fill(0.0);
            for i in 0..v {
                jac[i * v + i] = 1.0;
            }
            if let Some(h) = hess {
                h.fill(0.0);
            }
            return;
        }
        let (s, ds, dds) = self.multiplier(q);
        for i in 0..v {
            for l in 0..v {
                let delta = if i == l { s } else { 0.0 };
                jac[i * v + l] = delta + 2.0 * ds * x[i] * x[l];
            }
        }
        if let Some(h) = hess {
            for i in 0..v {
                for l in 0..v {
                    for m in 0..v {
                        let mut val = 4.0 * dds * x[i] * x[l] * x[m];
                        if i == l {
                            val += 2.0 * ds * x[m];
                        }
                        if i == m {
                            val += 2.0 * ds * x[l];
                        }
                        if l == m {
                            val += 2.0 * ds * x[i];
                        }
                        h[(i * v + l) * v + m] = val;
                    }
                }
            }
        }
    }
}

/// Localized field `(b^n, σ^n)`; agrees exactly with the base field on
/// `S_n = {|x|² ≤ n}`.
#[derive(Clone, Debug)]
pub struct TruncatedField<F> {
    base: F,
    retraction: Retraction,
}

impl<F: CoefficientField> TruncatedField<F> {
    pub fn new(base: F, n: f64) -> Result<Self> {
        Ok(Self {
            base,
            retraction: Retraction::new(n)?,
        })
    }

    pub fn base(&self) -> &F {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.retraction.n
    }

    pub fn retraction(&self) -> &Retraction {
        &self.retraction
    }
}

impl<F: CoefficientField> CoefficientField for TruncatedField<F> {
    fn name(&self) -> String {
        format!("{} truncated at n={}", self.base.name(), self.retraction.n)
    }
    fn state_dim(&self) -> usize {
        self.base.state_dim()
    }
    fn noise_dim(&self) -> usize {
        self.base.noise_dim()
    }
    fn analytic_derivatives(&self) -> bool {
        self.base.analytic_derivatives()
    }

    #[inline]
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        if self.retraction.inside(x) {
            return self.base.drift(x, out);
        }
        let mut y: Buf = SmallVec::from_elem(0.0, x.len());
        self.retraction.apply(x, &mut y);
        self.base.drift(&y, out);
    }

    #[inline]
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        if self.retraction.inside(x) {
            return self.base.diffusion(x, out);
        }
        let mut y: Buf = SmallVec::from_elem(0.0, x.len());
        self.retraction.apply(x, &mut y);
        self.base.diffusion(&y, out);
    }

    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        if self.retraction.inside(x) {
            return self.base.drift_jacobian(x, out);
        }
        let v = x.len();
        let mut y: Buf = SmallVec::from_elem(0.0, v);
        let mut jac: Buf = SmallVec::from_elem(0.0, v * v);
        let mut db: Buf = SmallVec::from_elem(0.0, v * v);
        self.retraction.apply(x, &mut y);
        self.retraction.derivatives(x, &mut jac, None);
        self.base.drift_jacobian(&y, &mut db);
        for i in 0..v {
            for l in 0..v {
                out[i * v + l] = (0..v).map(|k| db[i * v + k] * jac[k * v + l]).sum();
            }
        }
    }

    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) {
        if self.retraction.inside(x) {
            return self.base.diffusion_jacobian(x, out);
        }
        let v = x.len();
        let r = self.noise_dim();
        let mut y: Buf = SmallVec::from_elem(0.0, v);
        let mut jac: Buf = SmallVec::from_elem(0.0, v * v);
        let mut ds: Buf = SmallVec::from_elem(0.0, v * r * v);
        self.retraction.apply(x, &mut y);
        self.retraction.derivatives(x, &mut jac, None);
        self.base.diffusion_jacobian(&y, &mut ds);
        for ij in 0..v * r {
            for l in 0..v {
                out[ij * v + l] = (0..v).map(|k| ds[ij * v + k] * jac[k * v + l]).sum();
            }
        }
    }

    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) {
        if self.retraction.inside(x) {
            return self.base.diffusion_hessian(x, out);
        }
        let v = x.len();
        let r = self.noise_dim();
        let mut y: Buf = SmallVec::from_elem(0.0, v);
        let mut jac: Buf = SmallVec::from_elem(0.0, v * v);
        let mut hr: Buf = SmallVec::from_elem(0.0, v * v * v);
        let mut ds: Buf = SmallVec::from_elem(0.0, v * r * v);
        let mut hs: Buf = SmallVec::from_elem(0.0, v * r * v * v);
        self.retraction.apply(x, &mut y);
        self.retraction.derivatives(x, &mut jac, Some(&mut hr));
        self.base.diffusion_jacobian(&y, &mut ds);
        self.base.diffusion_hessian(&y, &mut hs);
        for ij in 0..v * r {
            for l in 0..v {
                for m in 0..v {
                    let mut acc = 0.0;
                    for k in 0..v {
                        for p in 0..v {
                            acc += hs[(ij * v + k) * v + p] * jac[k * v + l] * jac[p * v + m];
                        }
                        acc += ds[ij * v + k] * hr[(k * v + l) * v + m];
                    }
                    out[(ij * v + l) * v + m] = acc;
                }
            }
        }
    }
}
