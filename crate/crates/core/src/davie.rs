//! Davie-expansion residuals, the sewing constant `L`, and the short-horizon
//! admissibility conditions with their bound constants.
//!
//! With `μ = T^α`, `θ = 3α` and the sewing constant `K = 1/(1 − 2^{1−θ})`,
//! five conditions on `μ` guarantee
//! `‖X̂^d‖_α ≤ C15(μ) + C16(μ)|x0| + C13·|b(x0)|·μ^{1/α−1}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::brownian::NestedBrownianPath;
use crate::coefficients::{davie_tensor_into, euclidean, verify_assumptions, CoefficientField, DiffusionScratch, ProbeBox};
use crate::error::{Error, Result};
use crate::integrate::{solve_wz, Trajectory};
use crate::rng::derive_seed;
use crate::roughlift::{check_exponent, lift_piecewise_linear, PathIncrement, RoughPath, DEFAULT_PAIR_BUDGET};

pub const DEFAULT_M: f64 = 0.2;
pub const DEFAULT_K2: f64 = 0.5;

/// Per-grid-point data for repeated residual evaluation.
pub struct DavieResidual<'a> {
    traj: &'a Trajectory,
    rp: &'a RoughPath,
    v: usize,
    r: usize,
    /// Trapezoid prefix integrals of `b(X)`.
    integral: Vec<f64>,
    sigma: Vec<f64>,
    davie: Vec<f64>,
}

impl<'a> DavieResidual<'a> {
    pub fn new<F: CoefficientField + ?Sized>(traj: &'a Trajectory, rp: &'a RoughPath, field: &F) -> Result<Self> {
        let (v, r) = (field.state_dim(), field.noise_dim());
        if traj.dim() != v || rp.dim() != r {
            return Err(Error::GridMismatch("trajectory, rough path and field dimensions differ".into()));
        }
        if traj.blew_up() {
            return Err(Error::Domain("trajectory blew up".into()));
        }
        let n = traj.len();
        if n != rp.times().len() {
            return Err(Error::GridMismatch(format!(
                "trajectory has {n} points, rough path {}",
                rp.times().len()
            )));
        }
        let scale = traj.times()[n - 1].abs().max(1.0);
        if traj
            .times()
            .iter()
            .zip(rp.times())
            .any(|(a, b)| (a - b).abs() > 1e-12 * scale)
        {
            return Err(Error::GridMismatch("trajectory and rough path grids differ".into()));
        }
        let mut integral = vec![0.0; n * v];
        let mut sigma = vec![0.0; n * v * r];
        let mut davie = vec![0.0; n * v * r * r];
        let mut b_prev = vec![0.0; v];
        let mut b_cur = vec![0.0; v];
        let mut scratch = DiffusionScratch::for_field(field);
        for i in 0..n {
            let x = traj.state(i);
            field.drift(x, &mut b_cur);
            field.diffusion(x, &mut sigma[i * v * r..(i + 1) * v * r]);
            davie_tensor_into(field, x, &mut scratch, &mut davie[i * v * r * r..(i + 1) * v * r * r]);
            if i > 0 {
                let h = traj.times()[i] - traj.times()[i - 1];
                for k in 0..v {
                    integral[i * v + k] = integral[(i - 1) * v + k] + 0.5 * h * (b_prev[k] + b_cur[k]);
                }
            }
            std::mem::swap(&mut b_prev, &mut b_cur);
        }
        Ok(Self {
            traj,
            rp,
            v,
            r,
            integral,
            sigma,
            davie,
        })
    }

    /// Residual between grid indices `i < j` given the lift increment over `[t_i, t_j]`.
    pub fn with_increment(&self, i: usize, j: usize, inc: &PathIncrement) -> f64 {
        let (v, r) = (self.v, self.r);
        let (xs, xt) = (self.traj.state(i), self.traj.state(j));
        let sig = &self.sigma[i * v * r..(i + 1) * v * r];
        let dav = &self.davie[i * v * r * r..(i + 1) * v * r * r];
        let mut sq = 0.0;
        for k in 0..v {
            let drift = self.integral[j * v + k] - self.integral[i * v + k];
            let first: f64 = (0..r).map(|a| sig[k * r + a] * inc.level1[a]).sum();
            let second: f64 = dav[k * r * r..(k + 1) * r * r]
                .iter()
                .zip(&inc.level2)
                .map(|(s, g)| s * g)
                .sum();
            let res = xt[k] - xs[k] - drift - first - second;
            sq += res * res;
        }
        sq.sqrt()
    }

    pub fn between(&self, i: usize, j: usize) -> f64 {
        self.with_increment(i, j, &self.rp.increment_between(i, j))
    }

    pub fn len(&self) -> usize {
        self.traj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traj.is_empty()
    }
}

/// `|X_t − X_s − ∫_s^t b(X_u)du − σ(X_s)B¹_{s,t} − Σ(X_s)B²_{s,t}|`.
pub fn davie_residual<F: CoefficientField + ?Sized>(
    traj: &Trajectory,
    rp: &RoughPath,
    field: &F,
    s: f64,
    t: f64,
) -> Result<f64> {
    let (i, j) = (rp.index_of(s)?, rp.index_of(t)?);
    if i >= j {
        return Err(Error::param(format!("need s < t, got s = {s}, t = {t}")));
    }
    Ok(DavieResidual::new(traj, rp, field)?.between(i, j))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LEstimate {
    pub value: f64,
    pub theta: f64,
    /// Grid times of the maximizing pair.
    pub argmax: (f64, f64),
    pub exhaustive: bool,
    pub pairs: usize,
}

/// `sup residual(s, t) / (t − s)^{3α}` over grid pairs, restricted to dyadic
/// index blocks when there are more than `pair_budget` pairs.
#[allow(non_snake_case)]
pub fn estimate_L<F: CoefficientField + ?Sized>(
    traj: &Trajectory,
    rp: &RoughPath,
    field: &F,
    alpha: f64,
    pair_budget: usize,
) -> Result<LEstimate> {
    check_exponent(alpha)?;
    let res = DavieResidual::new(traj, rp, field)?;
    let theta = 3.0 * alpha;
    let times = rp.times();
    let n = times.len();
    let total = n * (n - 1) / 2;
    let mut best = LEstimate {
        value: 0.0,
        theta,
        argmax: (times[0], times[0]),
        exhaustive: total <= pair_budget,
        pairs: 0,
    };
    let mut consider = |i: usize, j: usize, inc: &PathIncrement| {
        let q = res.with_increment(i, j, inc) / (times[j] - times[i]).powf(theta);
        best.pairs += 1;
        if q > best.value || q.is_nan() {
            best.value = q;
            best.argmax = (times[i], times[j]);
        }
    };
    if total <= pair_budget {
        for i in 0..n - 1 {
            let mut inc = PathIncrement::zero(rp.dim());
            for j in i + 1..n {
                inc.extend(rp.interval_level1(j - 1), rp.interval_level2(j - 1));
                consider(i, j, &inc);
            }
        }
    } else {
        let mut width = 1;
        while width < n {
            let mut i = 0;
            while i + width < n {
                consider(i, i + width, &rp.increment_between(i, i + width));
                i += width;
            }
            width *= 2;
        }
    }
    Ok(best)
}

/// Derivative sups and point values entering the horizon conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldBounds {
    /// `‖∇b‖_∞` (spectral norm).
    pub grad_b: f64,
    /// `‖∇σ‖_∞` (Frobenius norm of the full derivative).
    pub grad_sigma: f64,
    /// `‖∇Σ‖_∞` (Frobenius norm of the Davie-tensor Jacobian).
    pub grad_davie: f64,
    pub sigma_at_zero: f64,
    pub sigma_at_x0: f64,
    pub drift_at_x0: f64,
    pub probe: ProbeBox,
    pub probe_samples: usize,
}

impl FieldBounds {
    pub fn from_field<F: CoefficientField + ?Sized>(
        field: &F,
        x0: &[f64],
        probe: ProbeBox,
        samples: usize,
    ) -> Result<Self> {
        crate::coefficients::check_point(x0, field.state_dim())?;
        let report = verify_assumptions(field, probe, samples);
        let (v, r) = (field.state_dim(), field.noise_dim());
        let mut sigma = vec![0.0; v * r];
        let mut drift = vec![0.0; v];
        field.diffusion(&vec![0.0; v], &mut sigma);
        let sigma_at_zero = euclidean(&sigma);
        field.diffusion(x0, &mut sigma);
        field.drift(x0, &mut drift);
        Ok(Self {
            grad_b: report.outer.grad_b,
            grad_sigma: report.outer.grad_sigma_full,
            grad_davie: report.outer.davie_jacobian,
            sigma_at_zero,
            sigma_at_x0: euclidean(&sigma),
            drift_at_x0: euclidean(&drift),
            probe,
            probe_samples: samples,
        })
    }
}

/// Inputs of the short-horizon conditions at one horizon `μ = T^α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonConditions {
    mu: f64,
    alpha: f64,
    m: f64,
    k2: f64,
    pub bounds: FieldBounds,
    /// `‖B^d‖_α` of the driving lift on `[0, T]`.
    pub driver_norm: f64,
}

pub fn sewing_constant(theta: f64) -> f64 {
    1.0 / (1.0 - 2f64.powf(1.0 - theta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// Largest admissible `μ` for this condition alone; `None` if unbounded.
    pub mu_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub mu: f64,
    pub horizon: f64,
    pub alpha: f64,
    pub theta: f64,
    pub k: f64,
    pub m: f64,
    pub k2: f64,
    pub driver_norm: f64,
    pub conditions: Vec<ConditionRecord>,
    pub all_pass: bool,
    /// Condition with the smallest threshold, i.e. the first to fail as `μ` grows.
    pub binding: Option<String>,
    /// Largest `μ` passing every condition.
    pub k_star: Option<f64>,
    /// `K*·(1 + ‖B^d‖_α)`.
    pub c_star: Option<f64>,
    pub constants: BTreeMap<String, Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonBound {
    pub c15: f64,
    pub c16: f64,
    /// `C13·|b(x0)|·μ^{1/α−1}`.
    pub drift_term: f64,
    pub x0_norm: f64,
    pub bound: f64,
}

const CONDITION_NAMES: [&str; 5] = [
    "davie_term",
    "diffusion_term",
    "drift_term",
    "sewing_contraction",
    "sewing_remainder",
];

impl HorizonConditions {
    pub fn new(mu: f64, alpha: f64, m: f64, k2: f64, bounds: FieldBounds, driver_norm: f64) -> Result<Self> {
        check_exponent(alpha)?;
        if !(m > 0.0 && m < 1.0 / 3.0) {
            return Err(Error::param(format!("M must lie in (0, 1/3), got {m}")));
        }
        if !(k2 > 0.0 && k2 < 1.0) {
            return Err(Error::param(format!("K2 must lie in (0, 1), got {k2}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::param(format!("mu must be positive, got {mu}")));
        }
        if !(driver_norm >= 0.0 && driver_norm.is_finite()) {
            return Err(Error::param(format!("driver norm must be finite, got {driver_norm}")));
        }
        Ok(Self {
            mu,
            alpha,
            m,
            k2,
            bounds,
            driver_norm,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        3.0 * self.alpha
    }

    pub fn k(&self) -> f64 {
        sewing_constant(self.theta())
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }

    fn c3(&self, mu: f64) -> f64 {
        let b = self.driver_norm;
        self.bounds.grad_davie * ((1.0 + mu * mu) * b * b + b)
    }

    fn c4(&self, mu: f64) -> f64 {
        let b = self.driver_norm;
        self.bounds.grad_sigma.powi(2) * b * b * mu
    }

    fn c13(&self) -> f64 {
        1.0 / ((1.0 - 3.0 * self.m) * (1.0 - self.k2))
    }

    fn c14(&self) -> f64 {
        self.k() / (1.0 - self.k2)
    }

    /// `(lhs(μ), rhs)` of condition `idx`.
    fn condition(&self, idx: usize, mu: f64) -> (f64, f64) {
        let b = self.driver_norm;
        let fb = &self.bounds;
        let (m, k2, k) = (self.m, self.k2, self.k());
        match idx {
            0 => (b * fb.grad_davie * mu * mu, m),
            1 => (b * fb.grad_sigma * mu, m),
            2 => (fb.grad_b * mu.powf(1.0 / self.alpha), m),
            3 => (fb.grad_sigma * b * mu, k2 / k),
            _ => (mu * mu * (self.c4(mu) + self.c3(mu)), k2 * (1.0 - 3.0 * m) * (1.0 - k2) / k),
        }
    }

    fn threshold(&self, idx: usize) -> Option<f64> {
        let passes = |mu: f64| {
            let (l, r) = self.condition(idx, mu);
            l <= r
        };
        if passes(1e12) {
            return None;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while passes(hi) {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > 1e-7 * hi {
            let mid = 0.5 * (lo + hi);
            if passes(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    pub fn constants(&self) -> BTreeMap<String, Option<f64>> {
        let mu = self.mu;
        let a = self.alpha;
        let b = self.driver_norm;
        let fb = &self.bounds;
        let (m, s0) = (self.m, fb.sigma_at_zero);
        let c3 = self.c3(mu);
        let c4 = self.c4(mu);
        let c5 = fb.grad_sigma * b * mu;
        let c7 = b * fb.sigma_at_x0 * (1.0 + fb.grad_sigma * mu);
        let c8 = b * fb.grad_davie * mu * mu;
        let c9 = b * fb.grad_sigma * mu;
        let c11 = fb.grad_sigma.powi(2) * b * b;
        let c12 = c11 * fb.grad_sigma;
        let c10 = c3 + s0 * c11;
        let (c13, c14) = (self.c13(), self.c14());
        let (c15, c16) = self.c15_c16();
        let c17 = (m / fb.grad_b).powf(1.0 - a);
        let c18 = c13 * fb.grad_sigma;
        let c19 = c13 * fb.grad_sigma * (c14 * m * m + m + c17);
        let c20 = c13 * (c14 * m + s0);
        let c21 = c13 * (1.0 + c14 * m * (1.0 + m / fb.grad_davie) + c14 * s0 * m * m + s0 * (m + c17));
        let c22 = c20 / c18 + c21 / c19;
        let c61 = fb.grad_b * mu.powf(1.0 / a);
        let c62 = fb.drift_at_x0 * mu.powf(1.0 / a - 1.0);
        let finite = |x: f64| x.is_finite().then_some(x);
        [
            ("C3", c3),
            ("C4", c4),
            ("C5", c5),
            ("C7", c7),
            ("C8", c8),
            ("C9", c9),
            ("C10", c10),
            ("C11", c11),
            ("C12", c12),
            ("C13", c13),
            ("C14", c14),
            ("C15", c15),
            ("C16", c16),
            ("C17", c17),
            ("C18", c18),
            ("C19", c19),
            ("C20", c20),
            ("C21", c21),
            ("C22", c22),
            ("C61", c61),
            ("C62", c62),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), finite(v)))
        .collect()
    }

    fn c15_c16(&self) -> (f64, f64) {
        let mu = self.mu;
        let b = self.driver_norm;
        let fb = &self.bounds;
        let (c13, c14) = (self.c13(), self.c14());
        let s0 = fb.sigma_at_zero;
        let tail = mu.powf(1.0 / self.alpha - 1.0);
        let c15 = c13
            * (c14 * mu * mu * (fb.grad_davie * ((1.0 + mu * mu) * b * b + b) + fb.grad_sigma.powi(2) * b * b * s0)
                + s0 * (b + b * fb.grad_sigma * mu + tail));
        let c16 = c13
            * fb.grad_sigma
            * (c14 * mu * mu * fb.grad_sigma.powi(2) * b * b + b + mu * fb.grad_sigma * b + tail);
        (c15, c16)
    }
}

/// Evaluates the five conditions at the stored `μ`, the per-condition
/// thresholds, `K*` and the bound constants.
pub fn check_horizon(hc: &HorizonConditions) -> HorizonReport {
    let conditions: Vec<ConditionRecord> = (0..5)
        .map(|idx| {
            let (lhs, rhs) = hc.condition(idx, hc.mu);
            ConditionRecord {
                name: CONDITION_NAMES[idx].to_string(),
                lhs,
                rhs,
                pass: lhs <= rhs,
                mu_threshold: hc.threshold(idx),
            }
        })
        .collect();
    let binding = conditions
        .iter()
        .filter_map(|c| c.mu_threshold.map(|t| (t, c.name.clone())))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let k_star = binding.as_ref().map(|b| b.0);
    HorizonReport {
        mu: hc.mu,
        horizon: hc.mu.powf(1.0 / hc.alpha),
        alpha: hc.alpha,
        theta: hc.theta(),
        k: hc.k(),
        m: hc.m,
        k2: hc.k2,
        driver_norm: hc.driver_norm,
        all_pass: conditions.iter().all(|c| c.pass),
        conditions,
        binding: binding.map(|b| b.1),
        k_star,
        c_star: k_star.map(|k| k * (1.0 + hc.driver_norm)),
        constants: hc.constants(),
    }
}

/// `C15(μ) + C16(μ)|x0| + C13·|b(x0)|·μ^{1/α−1}`; errors naming the first
/// violated condition.
pub fn short_horizon_bound(hc: &HorizonConditions, x0_norm: f64) -> Result<HorizonBound> {
    for idx in 0..5 {
        let (lhs, rhs) = hc.condition(idx, hc.mu);
        if lhs > rhs {
            return Err(Error::HorizonCondition(format!("{} ({lhs:e} > {rhs:e})", CONDITION_NAMES[idx])));
        }
    }
    let (c15, c16) = hc.c15_c16();
    let drift_term = hc.c13() * hc.bounds.drift_at_x0 * hc.mu.powf(1.0 / hc.alpha - 1.0);
    Ok(HorizonBound {
        c15,
        c16,
        drift_term,
        x0_norm,
        bound: c15 + c16 * x0_norm + drift_term,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckConfig {
    pub alpha: f64,
    pub m: f64,
    pub k2: f64,
    pub level: u32,
    pub samples: usize,
    pub seed: u64,
    /// First horizon tried; halved until all conditions pass.
    pub start_horizon: f64,
    pub substeps: usize,
    pub pair_budget: usize,
}

impl Default for BoundCheckConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            m: DEFAULT_M,
            k2: DEFAULT_K2,
            level: 8,
            samples: 100,
            seed: 0,
            start_horizon: 1.0,
            substeps: 4,
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSample {
    pub seed: u64,
    pub horizon: f64,
    pub mu: f64,
    pub driver_norm: f64,
    pub empirical: f64,
    pub bound: f64,
    pub dominated: bool,
}

/// For each sampled ω, halves the horizon until the conditions pass, then
/// compares the empirical Hölder seminorm of the Wong-Zakai solution with
/// the bound.
pub fn verify_short_horizon<F: CoefficientField + ?Sized>(
    field: &F,
    bounds: &FieldBounds,
    x0: &[f64],
    cfg: &BoundCheckConfig,
) -> Result<Vec<BoundSample>> {
    check_exponent(cfg.alpha)?;
    let x0_norm = euclidean(x0);
    (0..cfg.samples)
        .map(|k| {
            let seed = derive_seed(cfg.seed, k as u64);
            let mut horizon = cfg.start_horizon;
            for _ in 0..80 {
                let path = NestedBrownianPath::sample(seed, horizon, field.noise_dim(), cfg.level)?;
                let driver = path.interpolant(cfg.level)?;
                let rp = lift_piecewise_linear(&driver, cfg.alpha)?;
                let norm = rp.hoelder_norm(cfg.pair_budget).value;
                let mu = horizon.powf(cfg.alpha);
                let hc = HorizonConditions::new(mu, cfg.alpha, cfg.m, cfg.k2, bounds.clone(), norm)?;
                if let Ok(bound) = short_horizon_bound(&hc, x0_norm) {
                    let traj = solve_wz(field, &driver, x0, cfg.substeps)?;
                    if traj.blew_up() {
                        return Err(Error::BlowUp {
                            blowups: 1,
                            samples: 1,
                        });
                    }
                    let (empirical, _) = traj.hoelder_seminorm(cfg.alpha, cfg.pair_budget);
                    return Ok(BoundSample {
                        seed,
                        horizon,
                        mu,
                        driver_norm: norm,
                        empirical,
                        bound: bound.bound,
                        dominated: empirical <= bound.bound,
                    });
                }
                horizon *= 0.5;
            }
            Err(Error::HorizonCondition("no admissible horizon found after 80 halvings".into()))
        })
        .collect()
}
