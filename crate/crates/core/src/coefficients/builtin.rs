use crate::error::{Error, Result};

use super::CoefficientField;

/// Scalar linear field `b(x) = a x`, `σ(x) = c x`.
///
/// Unbounded, with constant derivatives; the Stratonovich solution is
/// `x0 · exp(a t + c B_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGeometric {
    pub a: f64,
    pub c: f64,
}

impl ScalarGeometric {
    pub fn new(a: f64, c: f64) -> Self {
        Self { a, c }
    }

    /// Closed-form Stratonovich solution at time `t` given `B_t`.
    pub fn exact(&self, x0: f64, t: f64, b_t: f64) -> f64 {
        x0 * (self.a * t + self.c * b_t).exp()
    }
}

impl CoefficientField for ScalarGeometric {
    fn name(&self) -> String {
        format!("geometric(a={}, c={})", self.a, self.c)
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    #[inline]
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.a * x[0];
    }
    #[inline]
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.c * x[0];
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.a;
    }
    fn diffusion_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.c;
    }
    fn diffusion_hessian(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
}

/// Linear field `b(x) = A x`, `σ_{·,j}(x) = C_j x` in dimension `v` with
/// `r = C.len()` noise columns. Matrices are `v × v`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearField {
    dim: usize,
    drift: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

impl LinearField {
    pub fn new(drift: Vec<f64>, columns: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        if dim == 0 || drift.len() != dim * dim || columns.is_empty() {
            return Err(Error::param("linear field needs a v×v drift and at least one v×v column"));
        }
        if columns.iter().any(|c| c.len() != dim * dim) {
            return Err(Error::param("every diffusion column matrix must be v×v"));
        }
        Ok(Self { dim, drift, columns })
    }

    /// Two-dimensional field with anticommuting noise matrices
    /// `C_1 = s·diag(1, −1)`, `C_2 = s·[[0, 1], [1, 0]]` and a damped
    /// rotation drift.
    pub fn non_commuting_2d(drift_scale: f64, noise_scale: f64) -> Self {
        let a = drift_scale;
        let s = noise_scale;
        Self {
            dim: 2,
            drift: vec![-a, a, -a, -a],
            columns: vec![vec![s, 0.0, 0.0, -s], vec![0.0, s, s, 0.0]],
        }
    }

    pub fn drift_matrix(&self) -> &[f64] {
        &self.drift
    }

    pub fn column_matrix(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// Whether the noise matrices pairwise commute.
    pub fn commuting(&self) -> bool {
        let v = self.dim;
        let mul = |p: &[f64], q: &[f64]| {
            let mut out = vec![0.0; v * v];
            for i in 0..v {
                for k in 0..v {
                    for j in 0..v {
                        out[i * v + j] += p[i * v + k] * q[k * v + j];
                    }
                }
            }
            out
        };
        for (a, ca) in self.columns.iter().enumerate() {
            for cb in &self.columns[a + 1..] {
                let ab = mul(ca, cb);
                let ba = mul(cb, ca);
                if ab.iter().zip(&ba).any(|(x, y)| (x - y).abs() > 1e-14) {
                    return false;
                }
            }
        }
        true
    }
}

impl CoefficientField for LinearField {
    fn name(&self) -> String {
        format!("linear(v={}, r={})", self.dim, self.columns.len())
    }
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.columns.len()
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let v = self.dim;
        for i in 0..v {
            out[i] = (0..v).map(|l| self.drift[i * v + l] * x[l]).sum();
        }
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let (v, r) = (self.dim, self.columns.len());
        for (j, c) in self.columns.iter().enumerate() {
            for i in 0..v {
                out[i * r + j] = (0..v).map(|l| c[i * v + l] * x[l]).sum();
            }
        }
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.drift);
    }
    fn diffusion_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        let (v, r) = (self.dim, self.columns.len());
        for (j, c) in self.columns.iter().enumerate() {
            for i in 0..v {
                for l in 0..v {
                    out[(i * r + j) * v + l] = c[i * v + l];
                }
            }
        }
    }
    fn diffusion_hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Affine drift with state-independent diffusion:
/// `b(x) = A x + b0`, `σ(x) = C`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineField {
    v: usize,
    r: usize,
    a: Vec<f64>,
    b0: Vec<f64>,
    c: Vec<f64>,
}

impl AffineField {
    pub fn new(a: Vec<f64>, b0: Vec<f64>, c: Vec<f64>, v: usize, r: usize) -> Result<Self> {
        if v == 0 || r == 0 || a.len() != v * v || b0.len() != v || c.len() != v * r {
            return Err(Error::param("affine field dimensions do not match"));
        }
        Ok(Self { v, r, a, b0, c })
    }

    /// `b(x) = λ x`, `σ ≡ 0` in dimension `v` with `r` (inactive) noise columns.
    pub fn deterministic_linear(lambda: f64, v: usize, r: usize) -> Self {
        let mut a = vec![0.0; v * v];
        for i in 0..v {
            a[i * v + i] = lambda;
        }
        Self {
            v,
            r,
            a,
            b0: vec![0.0; v],
            c: vec![0.0; v * r],
        }
    }

    /// `b ≡ 0`, `σ ≡ C`.
    pub fn additive(c: Vec<f64>, v: usize, r: usize) -> Result<Self> {
        Self::new(vec![0.0; v * v], vec![0.0; v], c, v, r)
    }

    pub fn diffusion_matrix(&self) -> &[f64] {
        &self.c
    }
}

impl CoefficientField for AffineField {
    fn name(&self) -> String {
        format!("affine(v={}, r={})", self.v, self.r)
    }
    fn state_dim(&self) -> usize {
        self.v
    }
    fn noise_dim(&self) -> usize {
        self.r
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let v = self.v;
        for i in 0..v {
            out[i] = self.b0[i] + (0..v).map(|l| self.a[i * v + l] * x[l]).sum::<f64>();
        }
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.c);
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.a);
    }
    fn diffusion_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn diffusion_hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Bounded trigonometric field in dimension `v = r = dim`:
/// `b_i(x) = β sin(x_i)`, `σ_{i,j}(x) = γ cos(x_i + x_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigField {
    pub dim: usize,
    pub drift_scale: f64,
    pub diffusion_scale: f64,
}

impl TrigField {
    pub fn new(dim: usize, drift_scale: f64, diffusion_scale: f64) -> Self {
        Self {
            dim,
            drift_scale,
            diffusion_scale,
        }
    }
}

impl CoefficientField for TrigField {
    fn name(&self) -> String {
        format!(
            "trig(dim={}, beta={}, gamma={})",
            self.dim, self.drift_scale, self.diffusion_scale
        )
    }
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            out[i] = self.drift_scale * x[i].sin();
        }
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.diffusion_scale * (x[i] + x[j]).cos();
            }
        }
    }
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        out.fill(0.0);
        for i in 0..n {
            out[i * n + i] = self.drift_scale * x[i].cos();
        }
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        out.fill(0.0);
        for i in 0..n {
            for j in 0..n {
                let s = -self.diffusion_scale * (x[i] + x[j]).sin();
                out[(i * n + j) * n + i] += s;
                out[(i * n + j) * n + j] += s;
            }
        }
    }
    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        out.fill(0.0);
        for i in 0..n {
            for j in 0..n {
                let c = -self.diffusion_scale * (x[i] + x[j]).cos();
                for l in [i, j] {
                    for m in [i, j] {
                        out[((i * n + j) * n + l) * n + m] += c;
                    }
                }
            }
        }
    }
}

/// Scalar `b ≡ 0`, `σ(x) = c x²`: derivatives grow without bound.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticDiffusion {
    pub c: f64,
}

impl CoefficientField for QuadraticDiffusion {
    fn name(&self) -> String {
        format!("quadratic(c={})", self.c)
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.c * x[0] * x[0];
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * self.c * x[0];
    }
    fn diffusion_hessian(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * self.c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_commuting_instance() {
        let f = LinearField::non_commuting_2d(0.1, 0.4);
        assert!(!f.commuting());
        let diag = LinearField::new(vec![0.0; 4], vec![vec![1.0, 0.0, 0.0, 2.0], vec![3.0, 0.0, 0.0, 1.0]], 2).unwrap();
        assert!(diag.commuting());
    }

    #[test]
    fn linear_field_layout() {
        let f = LinearField::non_commuting_2d(0.1, 0.4);
        let mut s = [0.0; 4];
        f.diffusion(&[1.0, 2.0], &mut s);
        // column 0: 0.4*diag(1,-1)*(1,2) = (0.4, -0.8); column 1: 0.4*(2, 1)
        assert_eq!(s, [0.4, 0.8, -0.8, 0.4]);
    }

    #[test]
    fn dimension_checks() {
        assert!(LinearField::new(vec![0.0; 3], vec![vec![0.0; 4]], 2).is_err());
        assert!(AffineField::new(vec![0.0; 4], vec![0.0; 2], vec![0.0; 3], 2, 2).is_err());
    }
}
