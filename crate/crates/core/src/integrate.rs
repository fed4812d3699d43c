//! Wong-Zakai ODE solves, reference solutions of the Stratonovich SDE and
//! their localized counterparts.
//!
//! On each linear segment of the driver the Wong-Zakai equation is the
//! autonomous ODE `ẋ = b(x) + σ(x)·slope`, integrated with classical RK4.
//! The SDE schemes (`Heun`, `EulerCorrected`) step directly on the
//! Brownian increments of one level.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::brownian::{NestedBrownianPath, PiecewiseLinearPath};
use crate::coefficients::{check_point, CoefficientField, DiffusionScratch, TruncatedField};
use crate::error::{Error, Result};

pub const DEFAULT_SUBSTEPS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub field: String,
    pub scheme: String,
    pub substeps: usize,
    /// Level of the driving interpolant, or the level whose increments drive an SDE scheme.
    pub level: u32,
    pub reference: bool,
    pub truncation: Option<f64>,
}

/// A solution sampled on a grid. States are stored row-major, `dim` per time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    pub meta: TrajectoryMeta,
    /// Time of the first non-finite state; the grid stops at the last finite one.
    pub blow_up: Option<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn blew_up(&self) -> bool {
        self.blow_up.is_some()
    }

    /// `max_i |X_{t_i}|²`.
    pub fn sup_norm_sq(&self) -> f64 {
        self.states
            .chunks_exact(self.dim)
            .map(|x| x.iter().map(|a| a * a).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `sup |X_t − X_s| / |t − s|^α` over grid pairs. Beyond `pair_budget`
    /// pairs only dyadic index blocks are scanned; the flag reports whether
    /// the scan was exhaustive.
    pub fn hoelder_seminorm(&self, alpha: f64, pair_budget: usize) -> (f64, bool) {
        let n = self.len();
        let pairs = n * n.saturating_sub(1) / 2;
        let dist = |i: usize, j: usize| {
            let d: f64 = self
                .state(i)
                .iter()
                .zip(self.state(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.sqrt() / (self.times[j] - self.times[i]).powf(alpha)
        };
        let mut best = 0.0f64;
        if pairs <= pair_budget {
            for i in 0..n {
                for j in i + 1..n {
                    best = best.max(dist(i, j));
                }
            }
            return (best, true);
        }
        let mut width = 1;
        while width < n {
            let mut i = 0;
            while i + width < n {
                best = best.max(dist(i, i + width));
                i += width;
            }
            width *= 2;
        }
        (best, false)
    }

    /// `max |X_t − Y_t|²` over the common grid. One grid must be a strided
    /// subset of the other.
    pub fn sup_sq_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::GridMismatch(format!("dimensions {} and {}", self.dim, other.dim)));
        }
        let (coarse, fine) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        let (nc, nf) = (coarse.len(), fine.len());
        if nc < 2 || (nf - 1) % (nc - 1) != 0 {
            return Err(Error::GridMismatch(format!("{nc} and {nf} points")));
        }
        let stride = (nf - 1) / (nc - 1);
        let scale = fine.times[nf - 1].abs().max(1.0);
        let mut best = 0.0f64;
        for i in 0..nc {
            let j = i * stride;
            if (coarse.times[i] - fine.times[j]).abs() > 1e-12 * scale {
                return Err(Error::GridMismatch(format!(
                    "time {} does not match {}",
                    coarse.times[i], fine.times[j]
                )));
            }
            let d: f64 = coarse
                .state(i)
                .iter()
                .zip(fine.state(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            best = best.max(d);
        }
        Ok(best)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|k| format!("x{k}")));
        w.write_record(&header)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:e}")];
            row.extend(self.state(i).iter().map(|x| format!("{x:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scheme used for SDE-type solutions on Brownian increments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceScheme {
    /// Wong-Zakai on the level-`d_ref` interpolant.
    FineWongZakai,
    /// Stratonovich Heun on level-`d_ref` increments.
    Heun,
    /// Euler-Maruyama for the Itô form with drift `b + c`.
    EulerCorrected,
}

impl ReferenceScheme {
    pub fn name(self) -> &'static str {
        match self {
            ReferenceScheme::FineWongZakai => "fine_wong_zakai",
            ReferenceScheme::Heun => "heun",
            ReferenceScheme::EulerCorrected => "euler_corrected",
        }
    }
}

struct Rk4<'a, F: ?Sized> {
    field: &'a F,
    r: usize,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    sigma: Vec<f64>,
}

impl<'a, F: CoefficientField + ?Sized> Rk4<'a, F> {
    fn new(field: &'a F) -> Self {
        let (v, r) = (field.state_dim(), field.noise_dim());
        Self {
            field,
            r,
            k: [vec![0.0; v], vec![0.0; v], vec![0.0; v], vec![0.0; v]],
            tmp: vec![0.0; v],
            sigma: vec![0.0; v * r],
        }
    }

    #[inline]
    fn rhs(field: &F, r: usize, sigma: &mut [f64], x: &[f64], slope: &[f64], out: &mut [f64]) {
        field.drift(x, out);
        field.diffusion(x, sigma);
        for (o, row) in out.iter_mut().zip(sigma.chunks_exact(r)) {
            *o += row.iter().zip(slope).map(|(s, w)| s * w).sum::<f64>();
        }
    }

    fn step(&mut self, x: &mut [f64], slope: &[f64], h: f64) {
        let Self {
            field,
            r,
            k,
            tmp,
            sigma,
        } = self;
        let [k1, k2, k3, k4] = k;
        Self::rhs(*field, *r, sigma, x, slope, k1);
        for (t, (a, b)) in tmp.iter_mut().zip(x.iter().zip(k1.iter())) {
            *t = a + 0.5 * h * b;
        }
        Self::rhs(*field, *r, sigma, tmp, slope, k2);
        for (t, (a, b)) in tmp.iter_mut().zip(x.iter().zip(k2.iter())) {
            *t = a + 0.5 * h * b;
        }
        Self::rhs(*field, *r, sigma, tmp, slope, k3);
        for (t, (a, b)) in tmp.iter_mut().zip(x.iter().zip(k3.iter())) {
            *t = a + h * b;
        }
        Self::rhs(*field, *r, sigma, tmp, slope, k4);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

fn check_inputs<F: CoefficientField + ?Sized>(field: &F, noise_dim: usize, x0: &[f64], substeps: usize) -> Result<()> {
    if substeps == 0 {
        return Err(Error::param("substeps must be at least 1"));
    }
    if noise_dim != field.noise_dim() {
        return Err(Error::param(format!(
            "driver has dimension {noise_dim} but the field has {} noise columns",
            field.noise_dim()
        )));
    }
    check_point(x0, field.state_dim())
}

fn level_of(driver: &PiecewiseLinearPath) -> u32 {
    driver.num_segments().trailing_zeros()
}

/// Wong-Zakai solution with `substeps` RK4 steps per driver segment,
/// recorded at the segment endpoints.
pub fn solve_wz<F: CoefficientField + ?Sized>(
    field: &F,
    driver: &PiecewiseLinearPath,
    x0: &[f64],
    substeps: usize,
) -> Result<Trajectory> {
    solve_wz_refined(field, driver, x0, substeps, 0)
}

/// As [`solve_wz`], but records the state on every segment split into
/// `2^refinement` equal parts, each integrated with
/// `max(1, ⌈substeps / 2^refinement⌉)` steps. With a level-`d` driver and
/// `refinement = d_ref − d` the output grid is `Π_{d_ref}`.
pub fn solve_wz_refined<F: CoefficientField + ?Sized>(
    field: &F,
    driver: &PiecewiseLinearPath,
    x0: &[f64],
    substeps: usize,
    refinement: u32,
) -> Result<Trajectory> {
    check_inputs(field, driver.dim(), x0, substeps)?;
    if refinement > 30 {
        return Err(Error::param("output refinement above 30"));
    }
    let v = field.state_dim();
    let parts = 1usize << refinement;
    let steps = substeps.div_ceil(parts).max(1);
    let knots = driver.times();
    let n_out = driver.num_segments() * parts + 1;
    let mut times = Vec::with_capacity(n_out);
    let mut states = Vec::with_capacity(n_out * v);
    let mut x = x0.to_vec();
    times.push(knots[0]);
    states.extend_from_slice(&x);
    let mut rk = Rk4::new(field);
    let mut blow_up = None;
    'outer: for seg in 0..driver.num_segments() {
        let (t0, t1) = (knots[seg], knots[seg + 1]);
        let slope = driver.slope(seg);
        let h = (t1 - t0) / (parts * steps) as f64;
        for part in 1..=parts {
            for _ in 0..steps {
                rk.step(&mut x, slope, h);
            }
            let t = if part == parts { t1 } else { t0 + (t1 - t0) * part as f64 / parts as f64 };
            if x.iter().any(|a| !a.is_finite()) {
                blow_up = Some(t);
                break 'outer;
            }
            times.push(t);
            states.extend_from_slice(&x);
        }
    }
    Ok(Trajectory {
        dim: v,
        times,
        states,
        meta: TrajectoryMeta {
            field: field.name(),
            scheme: "rk4_wong_zakai".into(),
            substeps,
            level: level_of(driver) + refinement,
            reference: false,
            truncation: None,
        },
        blow_up,
    })
}

/// One SDE scheme on the level-`level` increments of `path`.
pub fn solve_sde<F: CoefficientField + ?Sized>(
    field: &F,
    path: &NestedBrownianPath,
    level: u32,
    x0: &[f64],
    scheme: ReferenceScheme,
) -> Result<Trajectory> {
    check_inputs(field, path.dim(), x0, 1)?;
    if scheme == ReferenceScheme::FineWongZakai {
        return solve_wz(field, &path.interpolant(level)?, x0, DEFAULT_SUBSTEPS);
    }
    let (v, r) = (field.state_dim(), field.noise_dim());
    let values = path.level_values(level)?;
    let grid = path.times(level);
    let dt = path.mesh(level);
    let mut times = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len() * v);
    let mut x = x0.to_vec();
    let mut pred = vec![0.0; v];
    let mut f0 = vec![0.0; v];
    let mut f1 = vec![0.0; v];
    let mut db = vec![0.0; r];
    let mut sigma = vec![0.0; v * r];
    let mut scratch = DiffusionScratch::for_field(field);
    let mut corr = vec![0.0; v];
    times.push(grid[0]);
    states.extend_from_slice(&x);
    let mut blow_up = None;

    // f(x) = b(x) dt + σ(x) dB
    let increment = |x: &[f64], db: &[f64], out: &mut [f64], sigma: &mut [f64]| {
        field.drift(x, out);
        field.diffusion(x, sigma);
        for (o, row) in out.iter_mut().zip(sigma.chunks_exact(r)) {
            *o = *o * dt + row.iter().zip(db).map(|(s, w)| s * w).sum::<f64>();
        }
    };

    for i in 1..grid.len() {
        for k in 0..r {
            db[k] = values[i * r + k] - values[(i - 1) * r + k];
        }
        increment(&x, &db, &mut f0, &mut sigma);
        match scheme {
            ReferenceScheme::Heun => {
                for k in 0..v {
                    pred[k] = x[k] + f0[k];
                }
                increment(&pred, &db, &mut f1, &mut sigma);
                for k in 0..v {
                    x[k] += 0.5 * (f0[k] + f1[k]);
                }
            }
            ReferenceScheme::EulerCorrected => {
                crate::coefficients::strat_drift_correction_into(field, &x, &mut scratch, &mut corr);
                for k in 0..v {
                    x[k] += f0[k] + corr[k] * dt;
                }
            }
            ReferenceScheme::FineWongZakai => unreachable!(),
        }
        if x.iter().any(|a| !a.is_finite()) {
            blow_up = Some(grid[i]);
            break;
        }
        times.push(grid[i]);
        states.extend_from_slice(&x);
    }
    Ok(Trajectory {
        dim: v,
        times,
        states,
        meta: TrajectoryMeta {
            field: field.name(),
            scheme: scheme.name().into(),
            substeps: 1,
            level,
            reference: false,
            truncation: None,
        },
        blow_up,
    })
}

/// Reference solution of the Stratonovich SDE on `Π_{d_ref}` of the same ω.
pub fn solve_strat_reference<F: CoefficientField + ?Sized>(
    field: &F,
    path: &NestedBrownianPath,
    d_ref: u32,
    x0: &[f64],
    scheme: ReferenceScheme,
    substeps: usize,
) -> Result<Trajectory> {
    let mut traj = match scheme {
        ReferenceScheme::FineWongZakai => solve_wz(field, &path.interpolant(d_ref)?, x0, substeps)?,
        _ => solve_sde(field, path, d_ref, x0, scheme)?,
    };
    traj.meta.reference = true;
    Ok(traj)
}

/// `X^{d,n}`: Wong-Zakai with the truncated field, output refined as in
/// [`solve_wz_refined`].
pub fn solve_localized_wz<F: CoefficientField + ?Sized>(
    field: &F,
    n: f64,
    driver: &PiecewiseLinearPath,
    x0: &[f64],
    substeps: usize,
    refinement: u32,
) -> Result<Trajectory> {
    let truncated = TruncatedField::new(field, n)?;
    let mut traj = solve_wz_refined(&truncated, driver, x0, substeps, refinement)?;
    traj.meta.truncation = Some(n);
    Ok(traj)
}

/// `X^n`: the truncated SDE on `Π_{d_ref}`.
pub fn solve_localized_sde<F: CoefficientField + ?Sized>(
    field: &F,
    n: f64,
    path: &NestedBrownianPath,
    d_ref: u32,
    x0: &[f64],
    scheme: ReferenceScheme,
    substeps: usize,
) -> Result<Trajectory> {
    let truncated = TruncatedField::new(field, n)?;
    let mut traj = solve_strat_reference(&truncated, path, d_ref, x0, scheme, substeps)?;
    traj.meta.truncation = Some(n);
    Ok(traj)
}

/// Agreement between the fine Wong-Zakai and Heun references on one ω.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConsistency {
    /// `sup_t |X^{WZ}_t − X^{Heun}_t|` on `Π_{d_ref}`.
    pub distance: f64,
    /// Step-halving estimates `sup |X_{d_ref} − X_{d_ref−1}|` on `Π_{d_ref−1}`.
    pub wong_zakai_error: f64,
    pub heun_error: f64,
    pub pass: bool,
}

/// Cross-checks the two reference modes: their distance must stay below
/// five times the sum of their step-halving error estimates.
pub fn reference_consistency<F: CoefficientField + ?Sized>(
    field: &F,
    path: &NestedBrownianPath,
    d_ref: u32,
    x0: &[f64],
    substeps: usize,
) -> Result<ReferenceConsistency> {
    if d_ref == 0 {
        return Err(Error::param("d_ref must be at least 1"));
    }
    let run = |scheme, level| solve_strat_reference(field, path, level, x0, scheme, substeps);
    let wz = run(ReferenceScheme::FineWongZakai, d_ref)?;
    let wz_half = run(ReferenceScheme::FineWongZakai, d_ref - 1)?;
    let heun = run(ReferenceScheme::Heun, d_ref)?;
    let heun_half = run(ReferenceScheme::Heun, d_ref - 1)?;
    if [&wz, &wz_half, &heun, &heun_half].iter().any(|t| t.blew_up()) {
        return Err(Error::BlowUp {
            blowups: 1,
            samples: 1,
        });
    }
    let distance = wz.sup_sq_distance(&heun)?.sqrt();
    let wong_zakai_error = wz.sup_sq_distance(&wz_half)?.sqrt();
    let heun_error = heun.sup_sq_distance(&heun_half)?.sqrt();
    Ok(ReferenceConsistency {
        distance,
        wong_zakai_error,
        heun_error,
        pass: distance <= 5.0 * (wong_zakai_error + heun_error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{AffineField, ScalarGeometric};

    fn path(seed: u64, level: u32) -> NestedBrownianPath {
        NestedBrownianPath::sample(seed, 1.0, 1, level).unwrap()
    }

    #[test]
    fn deterministic_linear_ode() {
        let f = AffineField::deterministic_linear(0.7, 1, 1);
        let driver = path(1, 6).interpolant(6).unwrap();
        let traj = solve_wz(&f, &driver, &[2.0], 4).unwrap();
        let exact = 2.0 * 0.7f64.exp();
        assert!((traj.final_state()[0] / exact - 1.0).abs() < 1e-8);
        assert_eq!(traj.len(), 65);
    }

    #[test]
    fn additive_noise_integrates_the_driver() {
        let f = AffineField::additive(vec![0.3], 1, 1).unwrap();
        let p = path(2, 8);
        let driver = p.interpolant(8).unwrap();
        let traj = solve_wz(&f, &driver, &[1.0], 1).unwrap();
        for i in 0..traj.len() {
            let expected = 1.0 + 0.3 * driver.knot(i)[0];
            assert!((traj.state(i)[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn refined_output_lands_on_the_fine_grid() {
        let f = ScalarGeometric::new(0.1, 0.5);
        let p = path(3, 10);
        let coarse = solve_wz(&f, &p.interpolant(6).unwrap(), &[1.0], 4).unwrap();
        let fine = solve_wz_refined(&f, &p.interpolant(6).unwrap(), &[1.0], 4, 4).unwrap();
        assert_eq!(fine.len(), 1025);
        assert_eq!(fine.meta.level, 10);
        for (a, b) in fine.times().iter().zip(p.times(10)) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(coarse.sup_sq_distance(&fine).unwrap() < 1e-12);
    }

    #[test]
    fn blow_up_is_flagged() {
        let f = AffineField::deterministic_linear(1e100, 1, 1);
        let traj = solve_wz(&f, &path(4, 4).interpolant(4).unwrap(), &[1.0], 1).unwrap();
        assert!(traj.blew_up());
        assert!(traj.states().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn heun_and_corrected_euler_agree_for_geometric() {
        let f = ScalarGeometric::new(0.2, 0.4);
        let p = path(5, 14);
        let exact = f.exact(1.0, 1.0, p.value(0, 1).unwrap()[0]);
        for scheme in [ReferenceScheme::FineWongZakai, ReferenceScheme::Heun, ReferenceScheme::EulerCorrected] {
            let traj = solve_strat_reference(&f, &p, 14, &[1.0], scheme, 4).unwrap();
            let tol = if scheme == ReferenceScheme::EulerCorrected { 3e-2 } else { 1e-3 };
            assert!((traj.final_state()[0] / exact - 1.0).abs() < tol, "{scheme:?}");
        }
    }

    #[test]
    fn bad_inputs() {
        let f = ScalarGeometric::new(0.1, 0.5);
        let driver = path(6, 3).interpolant(3).unwrap();
        assert!(solve_wz(&f, &driver, &[1.0], 0).is_err());
        assert!(solve_wz(&f, &driver, &[1.0, 2.0], 1).is_err());
        assert!(matches!(solve_wz(&f, &driver, &[f64::NAN], 1), Err(Error::Domain(_))));
        assert!(solve_localized_wz(&f, 0.0, &driver, &[1.0], 1, 0).is_err());
    }

    #[test]
    fn hoelder_seminorm_of_a_line() {
        let f = AffineField::deterministic_linear(0.0, 1, 1);
        let mut traj = solve_wz(&f, &path(7, 4).interpolant(4).unwrap(), &[0.0], 1).unwrap();
        traj.states = traj.times.iter().map(|t| 2.0 * t).collect();
        let (full, exhaustive) = traj.hoelder_seminorm(0.4, usize::MAX);
        assert!(exhaustive);
        assert!((full - 2.0).abs() < 1e-12);
        let (dyadic, exhaustive) = traj.hoelder_seminorm(0.4, 10);
        assert!(!exhaustive);
        assert!((dyadic - 2.0).abs() < 1e-12);
    }
}
