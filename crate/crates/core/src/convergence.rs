//! Coupled Monte-Carlo experiments.
//!
//! Every sample draws one nested Brownian path from a seed derived from the
//! master seed and the sample index, and all processes of that sample are
//! driven by it. Samples may run on any number of workers; per-sample
//! results are collected in index order and reduced by pairwise summation,
//! so reports are bitwise independent of the worker count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::NestedBrownianPath;
use crate::coefficients::{check_point, CoefficientField};
use crate::error::{Error, Result};
use crate::integrate::{
    solve_localized_sde, solve_localized_wz, solve_strat_reference, solve_wz, solve_wz_refined, ReferenceScheme,
    Trajectory, DEFAULT_SUBSTEPS,
};
use crate::rng::derive_seed;
use crate::stats::{rate_fit, MeanEstimate, RateFit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub horizon: f64,
    pub samples: usize,
    pub seed: u64,
    pub substeps: usize,
    pub workers: usize,
    /// Fraction of blown-up samples above which an experiment fails.
    pub blowup_tolerance: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            samples: 2000,
            seed: 0,
            substeps: DEFAULT_SUBSTEPS,
            workers: 1,
            blowup_tolerance: 0.01,
        }
    }
}

impl MonteCarloConfig {
    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("horizon must be positive"));
        }
        if self.samples < 2 {
            return Err(Error::param("at least 2 samples are needed"));
        }
        if self.substeps == 0 {
            return Err(Error::param("substeps must be at least 1"));
        }
        Ok(())
    }

    fn path(&self, index: usize, dim: usize, level: u32) -> Result<NestedBrownianPath> {
        NestedBrownianPath::sample(derive_seed(self.seed, index as u64), self.horizon, dim, level)
    }
}

/// Runs `job` for every sample index on a pool of `workers` threads and
/// returns the results in index order.
pub fn run_samples<T, J>(workers: usize, samples: usize, job: J) -> Result<Vec<T>>
where
    T: Send,
    J: Fn(usize) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;
    pool.install(|| (0..samples).into_par_iter().map(&job).collect())
}

/// One cell of a report: a Monte-Carlo mean over non-blown-up samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub edge: String,
    pub d: Option<u32>,
    pub n: Option<f64>,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    pub blowups: usize,
}

/// Aggregates per-sample values (`None` = blow-up) into a cell.
fn aggregate(edge: &str, d: Option<u32>, n: Option<f64>, values: &[Option<f64>], tolerance: f64) -> Result<CellRecord> {
    let good: Vec<f64> = values.iter().flatten().copied().collect();
    let blowups = values.len() - good.len();
    if blowups as f64 > tolerance * values.len() as f64 {
        return Err(Error::BlowUp {
            blowups,
            samples: values.len(),
        });
    }
    let m = MeanEstimate::from_values(&good);
    Ok(CellRecord {
        edge: edge.to_string(),
        d,
        n,
        estimate: m.mean,
        stderr: m.stderr,
        samples: m.samples,
        blowups,
    })
}

fn sq_distance(a: &Trajectory, b: &Trajectory) -> Result<Option<f64>> {
    if a.blew_up() || b.blew_up() {
        return Ok(None);
    }
    Ok(Some(a.sup_sq_distance(b)?))
}

fn check_levels(d_list: &[u32], d_ref: u32) -> Result<()> {
    if d_list.is_empty() {
        return Err(Error::param("d_list is empty"));
    }
    if d_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("d_list must be strictly increasing"));
    }
    if d_list.iter().any(|&d| d > d_ref) {
        return Err(Error::param(format!("every level must be at most d_ref = {d_ref}")));
    }
    if d_ref > crate::brownian::MAX_LEVEL {
        return Err(Error::Level {
            requested: d_ref,
            max: crate::brownian::MAX_LEVEL,
        });
    }
    Ok(())
}

/// `E[sup_{Π_{d_ref}} |X_t − X^d_t|²]` for each `d` in `d_list`, with the
/// reference `X` on level `d_ref` of the same ω.
pub fn l2_sup_errors<F: CoefficientField + ?Sized>(
    field: &F,
    x0: &[f64],
    d_list: &[u32],
    d_ref: u32,
    reference: ReferenceScheme,
    cfg: &MonteCarloConfig,
) -> Result<Vec<CellRecord>> {
    cfg.validate()?;
    check_levels(d_list, d_ref)?;
    check_point(x0, field.state_dim())?;
    let per_sample = run_samples(cfg.workers, cfg.samples, |k| {
        let path = cfg.path(k, field.noise_dim(), d_ref)?;
        let x_ref = solve_strat_reference(field, &path, d_ref, x0, reference, cfg.substeps)?;
        d_list
            .iter()
            .map(|&d| {
                let xd = solve_wz_refined(field, &path.interpolant(d)?, x0, cfg.substeps, d_ref - d)?;
                sq_distance(&xd, &x_ref)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    d_list
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            let col: Vec<Option<f64>> = per_sample.iter().map(|s| s[j]).collect();
            aggregate("d_to_limit", Some(d), None, &col, cfg.blowup_tolerance)
        })
        .collect()
}

/// Single-level form of [`l2_sup_errors`].
pub fn l2_sup_error<F: CoefficientField + ?Sized>(
    field: &F,
    x0: &[f64],
    d: u32,
    d_ref: u32,
    cfg: &MonteCarloConfig,
) -> Result<CellRecord> {
    Ok(l2_sup_errors(field, x0, &[d], d_ref, ReferenceScheme::FineWongZakai, cfg)?.remove(0))
}

/// Rate fit of `(δ_d, estimate)` for cells with a level and a positive estimate.
pub fn fit_cells(cells: &[CellRecord], horizon: f64) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = cells
        .iter()
        .filter_map(|c| c.d.map(|d| (horizon / 2f64.powi(d as i32), c.estimate)))
        .collect();
    rate_fit(&pts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub d: u32,
    pub n: f64,
    /// Empirical `P(sup |X^d|² > n)`.
    pub probability: f64,
    pub probability_stderr: f64,
    /// `(1/n)·Ê[sup |X^d|²]`.
    pub markov_bound: f64,
    pub markov_stderr: f64,
    pub samples: usize,
    pub blowups: usize,
    /// `probability ≤ markov_bound + 3·combined SE`.
    pub pass: bool,
}

/// Exit frequencies of `X^d` from `S_n` against the Markov majorant, for
/// every `(d, n)` pair.
pub fn exit_probability<F: CoefficientField + ?Sized>(
    field: &F,
    x0: &[f64],
    d_list: &[u32],
    n_list: &[f64],
    cfg: &MonteCarloConfig,
) -> Result<Vec<ExitRecord>> {
    cfg.validate()?;
    let d_max = *d_list.last().ok_or_else(|| Error::param("d_list is empty"))?;
    check_levels(d_list, d_max)?;
    check_point(x0, field.state_dim())?;
    if n_list.iter().any(|&n| !(n > 0.0)) {
        return Err(Error::param("every n must be positive"));
    }
    let sups = sup_moments(field, x0, d_list, d_max, cfg)?;
    let mut out = Vec::new();
    for (j, &d) in d_list.iter().enumerate() {
        let col: Vec<f64> = sups.iter().filter_map(|s| s[j]).collect();
        let blowups = sups.len() - col.len();
        check_blowups(blowups, sups.len(), cfg)?;
        let moment = MeanEstimate::from_values(&col);
        for &n in n_list {
            let hits: Vec<f64> = col.iter().map(|&s| if s > n { 1.0 } else { 0.0 }).collect();
            let p = MeanEstimate::from_values(&hits);
            let markov = moment.mean / n;
            let markov_se = moment.stderr / n;
            let combined = (p.stderr.powi(2) + markov_se.powi(2)).sqrt();
            out.push(ExitRecord {
                d,
                n,
                probability: p.mean,
                probability_stderr: p.stderr,
                markov_bound: markov,
                markov_stderr: markov_se,
                samples: col.len(),
                blowups,
                pass: p.mean <= markov + 3.0 * combined,
            });
        }
    }
    Ok(out)
}

fn check_blowups(blowups: usize, samples: usize, cfg: &MonteCarloConfig) -> Result<()> {
    if blowups as f64 > cfg.blowup_tolerance * samples as f64 {
        return Err(Error::BlowUp { blowups, samples });
    }
    Ok(())
}

/// Per-sample `sup |X^d|²` on each level's own knots.
fn sup_moments<F: CoefficientField + ?Sized>(
    field: &F,
    x0: &[f64],
    d_list: &[u32],
    d_max: u32,
    cfg: &MonteCarloConfig,
) -> Result<Vec<Vec<Option<f64>>>> {
    run_samples(cfg.workers, cfg.samples, |k| {
        let path = cfg.path(k, field.noise_dim(), d_max)?;
        d_list
            .iter()
            .map(|&d| {
                let xd = solve_wz(field, &path.interpolant(d)?, x0, cfg.substeps)?;
                Ok((!xd.blew_up()).then(|| xd.sup_norm_sq()))
            })
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentScan {
    /// `Ê[sup_t |X^d_t|²]` per level (edge `moment`).
    pub cells: Vec<CellRecord>,
    pub max: f64,
    pub max_level: u32,
    /// `|m_{D} − m_{D−1}| / m_{D−1}` for the two finest levels.
    pub relative_variation: f64,
    /// `|m_{D} − m_{D−1}| ≤ 0.1·m_{D−1} + 3·combined SE`.
    pub stable: bool,
}

/// Second moments of the running sup of `X^d` across levels.
pub fn uniform_moment_scan<F: CoefficientField + ?Sized>(
    field: &F,
    x0: &[f64],
    d_list: &[u32],
    cfg: &MonteCarloConfig,
) -> Result<MomentScan> {
    cfg.validate()?;
    let d_max = *d_list.last().ok_or_else(|| Error::param("d_list is empty"))?;
    check_levels(d_list, d_max)?;
    check_point(x0, field.state_dim())?;
    let sups = sup_moments(field, x0, d_list, d_max, cfg)?;
    let cells = d_list
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            let col: Vec<Option<f64>> = sups.iter().map(|s| s[j]).collect();
            aggregate("moment", Some(d), None, &col, cfg.blowup_tolerance)
        })
        .collect::<Result<Vec<_>>>()?;
    let (max_level, max) = cells
        .iter()
        .map(|c| (c.d.unwrap_or(0), c.estimate))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let (relative_variation, stable) = match cells.len() {
        0 | 1 => (0.0, true),
        k => {
            let (a, b) = (&cells[k - 2], &cells[k - 1]);
            let diff = (b.estimate - a.estimate).abs();
            let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            (diff / a.estimate, diff <= 0.1 * a.estimate + 3.0 * se)
        }
    };
    Ok(MomentScan {
        cells,
        max,
        max_level,
        relative_variation,
        stable,
    })
}

pub const EDGE_DN_TO_N: &str = "dn_to_n";
pub const EDGE_N_TO_LIMIT: &str = "n_to_limit";
pub const EDGE_DN_TO_D: &str = "dn_to_d";
pub const EDGE_D_TO_LIMIT: &str = "d_to_limit";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformEdgeRecord {
    pub n: f64,
    /// `max_d Ê[sup |X^{d,n} − X^d|²]`.
    pub max_error: f64,
    pub stderr: f64,
    pub argmax_d: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseTrend {
    pub n: f64,
    /// Each `dn_to_n` estimate is at most the previous plus 2 combined SE.
    pub decreasing: bool,
    pub fit: Option<RateFit>,
}

/// Paired comparison at the corner (finest `d`, largest `n`) of the two
/// `d → ∞` edges: `sup|X^{d,n} − X^n|²` against `sup|X^d − X|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerCheck {
    pub d: u32,
    pub n: f64,
    pub via_n: f64,
    pub via_d: f64,
    pub mean_difference: f64,
    pub difference_stderr: f64,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramSummary {
    pub uniform_edge: Vec<UniformEdgeRecord>,
    /// `max_d` of the `dn_to_d` edge is non-increasing in `n` within 2 combined SE.
    pub uniform_edge_monotone: bool,
    pub pointwise: Vec<PointwiseTrend>,
    pub corner: CornerCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    pub field: String,
    pub seed: u64,
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub d_ref: u32,
    pub reference: ReferenceScheme,
    pub substeps: usize,
    pub samples: usize,
    pub cells: Vec<CellRecord>,
    pub fit: Option<RateFit>,
    pub diagram: Option<DiagramSummary>,
}

impl ConvergenceReport {
    pub fn cell(&self, edge: &str, d: Option<u32>, n: Option<f64>) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.edge == edge && c.d == d && c.n == n)
    }

    /// Long format: `edge,d,n,estimate,stderr,samples,blowups`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["edge", "d", "n", "estimate", "stderr", "samples", "blowups"])?;
        for c in &self.cells {
            w.write_record([
                c.edge.clone(),
                c.d.map(|d| d.to_string()).unwrap_or_default(),
                c.n.map(|n| format!("{n:e}")).unwrap_or_default(),
                format!("{:e}", c.estimate),
                format!("{:e}", c.stderr),
                c.samples.to_string(),
                c.blowups.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `edge,n,log2_delta,log2_error` rows for cells with a level and a positive estimate.
    pub fn write_plot_data<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["edge", "n", "log2_delta", "log2_error"])?;
        for c in &self.cells {
            let Some(d) = c.d else { continue };
            if !(c.estimate > 0.0) {
                continue;
            }
            let log2_delta = self.horizon.log2() - d as f64;
            w.write_record([
                c.edge.clone(),
                c.n.map(|n| format!("{n:e}")).unwrap_or_default(),
                format!("{log2_delta:e}"),
                format!("{:e}", c.estimate.log2()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Coupled rate experiment: [`l2_sup_errors`] plus a log-log fit.
pub fn convergence_experiment<F: CoefficientField + ?Sized>(
    field: &F,
    x0: &[f64],
    d_list: &[u32],
    d_ref: u32,
    reference: ReferenceScheme,
    cfg: &MonteCarloConfig,
) -> Result<ConvergenceReport> {
    let cells = l2_sup_errors(field, x0, d_list, d_ref, reference, cfg)?;
    let positive: Vec<CellRecord> = cells.iter().filter(|c| c.estimate > 0.0).cloned().collect();
    let fit = if positive.len() >= 3 { Some(fit_cells(&positive, cfg.horizon)?) } else { None };
    Ok(ConvergenceReport {
        experiment: "converge".into(),
        field: field.name(),
        seed: cfg.seed,
        horizon: cfg.horizon,
        x0: x0.to_vec(),
        d_ref,
        reference,
        substeps: cfg.substeps,
        samples: cfg.samples,
        cells,
        fit,
        diagram: None,
    })
}

/// Fills all four edges of the `(d, n)` diagram on coupled ω.
///
/// `X` and `X^n` use `scheme` on `Π_{d_ref}`; `X^d` and `X^{d,n}` are
/// Wong-Zakai solutions recorded on `Π_{d_ref}`.
#[allow(clippy::too_many_arguments)]
pub fn diagram_experiment<F: CoefficientField + ?Sized>(
    field: &F,
    x0: &[f64],
    d_list: &[u32],
    n_list: &[f64],
    d_ref: u32,
    scheme: ReferenceScheme,
    cfg: &MonteCarloConfig,
) -> Result<ConvergenceReport> {
    cfg.validate()?;
    check_levels(d_list, d_ref)?;
    check_point(x0, field.state_dim())?;
    if n_list.is_empty() || n_list.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
        return Err(Error::param("n_list must be non-empty with positive finite entries"));
    }
    let (nd, nn) = (d_list.len(), n_list.len());
    // per sample: [dn_to_n (nd*nn), n_to_limit (nn), dn_to_d (nd*nn), d_to_limit (nd), corner difference]
    let per_sample = run_samples(cfg.workers, cfg.samples, |k| {
        let path = cfg.path(k, field.noise_dim(), d_ref)?;
        let x = solve_strat_reference(field, &path, d_ref, x0, scheme, cfg.substeps)?;
        let xn = n_list
            .iter()
            .map(|&n| solve_localized_sde(field, n, &path, d_ref, x0, scheme, cfg.substeps))
            .collect::<Result<Vec<_>>>()?;
        let mut dn_to_n = vec![None; nd * nn];
        let mut dn_to_d = vec![None; nd * nn];
        let mut d_to_limit = vec![None; nd];
        let mut corner = None;
        for (i, &d) in d_list.iter().enumerate() {
            let driver = path.interpolant(d)?;
            let xd = solve_wz_refined(field, &driver, x0, cfg.substeps, d_ref - d)?;
            d_to_limit[i] = sq_distance(&xd, &x)?;
            for (j, &n) in n_list.iter().enumerate() {
                let xdn = solve_localized_wz(field, n, &driver, x0, cfg.substeps, d_ref - d)?;
                dn_to_n[i * nn + j] = sq_distance(&xdn, &xn[j])?;
                dn_to_d[i * nn + j] = sq_distance(&xdn, &xd)?;
            }
        }
        if let (Some(a), Some(b)) = (dn_to_n[nd * nn - 1], d_to_limit[nd - 1]) {
            corner = Some(a - b);
        }
        let n_to_limit = xn.iter().map(|t| sq_distance(t, &x)).collect::<Result<Vec<_>>>()?;
        Ok((dn_to_n, n_to_limit, dn_to_d, d_to_limit, corner))
    })?;

    let tol = cfg.blowup_tolerance;
    let mut cells = Vec::new();
    for (i, &d) in d_list.iter().enumerate() {
        for (j, &n) in n_list.iter().enumerate() {
            let col: Vec<_> = per_sample.iter().map(|s| s.0[i * nn + j]).collect();
            cells.push(aggregate(EDGE_DN_TO_N, Some(d), Some(n), &col, tol)?);
        }
    }
    for (j, &n) in n_list.iter().enumerate() {
        let col: Vec<_> = per_sample.iter().map(|s| s.1[j]).collect();
        cells.push(aggregate(EDGE_N_TO_LIMIT, None, Some(n), &col, tol)?);
    }
    for (i, &d) in d_list.iter().enumerate() {
        for (j, &n) in n_list.iter().enumerate() {
            let col: Vec<_> = per_sample.iter().map(|s| s.2[i * nn + j]).collect();
            cells.push(aggregate(EDGE_DN_TO_D, Some(d), Some(n), &col, tol)?);
        }
    }
    for (i, &d) in d_list.iter().enumerate() {
        let col: Vec<_> = per_sample.iter().map(|s| s.3[i]).collect();
        cells.push(aggregate(EDGE_D_TO_LIMIT, Some(d), None, &col, tol)?);
    }

    let find = |edge: &str, d: Option<u32>, n: Option<f64>| {
        cells
            .iter()
            .find(|c| c.edge == edge && c.d == d && c.n == n)
            .cloned()
            .expect("cell exists")
    };

    let uniform_edge: Vec<UniformEdgeRecord> = n_list
        .iter()
        .map(|&n| {
            let best = d_list
                .iter()
                .map(|&d| find(EDGE_DN_TO_D, Some(d), Some(n)))
                .fold(None::<CellRecord>, |acc, c| match acc {
                    Some(a) if a.estimate >= c.estimate => Some(a),
                    _ => Some(c),
                })
                .expect("d_list is non-empty");
            UniformEdgeRecord {
                n,
                max_error: best.estimate,
                stderr: best.stderr,
                argmax_d: best.d.unwrap_or(0),
            }
        })
        .collect();
    let uniform_edge_monotone = uniform_edge.windows(2).all(|w| {
        let se = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].max_error <= w[0].max_error + 2.0 * se
    });

    let pointwise = n_list
        .iter()
        .map(|&n| {
            let row: Vec<CellRecord> = d_list.iter().map(|&d| find(EDGE_DN_TO_N, Some(d), Some(n))).collect();
            let decreasing = row.windows(2).all(|w| {
                let se = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
                w[1].estimate <= w[0].estimate + 2.0 * se
            });
            let fit = if row.iter().all(|c| c.estimate > 0.0) && row.len() >= 3 {
                fit_cells(&row, cfg.horizon).ok()
            } else {
                None
            };
            PointwiseTrend { n, decreasing, fit }
        })
        .collect();

    let d_top = d_list[nd - 1];
    let n_top = n_list[nn - 1];
    let diffs: Vec<f64> = per_sample.iter().filter_map(|s| s.4).collect();
    let diff = MeanEstimate::from_values(&diffs);
    let corner = CornerCheck {
        d: d_top,
        n: n_top,
        via_n: find(EDGE_DN_TO_N, Some(d_top), Some(n_top)).estimate,
        via_d: find(EDGE_D_TO_LIMIT, Some(d_top), None).estimate,
        mean_difference: diff.mean,
        difference_stderr: diff.stderr,
        consistent: diff.mean.abs() <= 2.0 * diff.stderr + 1e-12,
    };

    Ok(ConvergenceReport {
        experiment: "diagram".into(),
        field: field.name(),
        seed: cfg.seed,
        horizon: cfg.horizon,
        x0: x0.to_vec(),
        d_ref,
        reference: scheme,
        substeps: cfg.substeps,
        samples: cfg.samples,
        cells,
        fit: None,
        diagram: Some(DiagramSummary {
            uniform_edge,
            uniform_edge_monotone,
            pointwise,
            corner,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{AffineField, ScalarGeometric};

    fn cfg(samples: usize) -> MonteCarloConfig {
        MonteCarloConfig {
            samples,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn coupled_identity_at_the_reference_level() {
        let f = ScalarGeometric::new(0.1, 0.5);
        let cells = l2_sup_errors(&f, &[1.0], &[4, 7], 7, ReferenceScheme::FineWongZakai, &cfg(8)).unwrap();
        assert_eq!(cells[1].estimate, 0.0);
        assert!(cells[0].estimate > 0.0);
    }

    #[test]
    fn deterministic_dynamics_do_not_depend_on_the_level() {
        let f = AffineField::deterministic_linear(-0.5, 1, 1);
        let cells = l2_sup_errors(&f, &[1.0], &[3, 5], 8, ReferenceScheme::FineWongZakai, &cfg(4)).unwrap();
        assert!(cells.iter().all(|c| c.estimate < 1e-20));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let f = ScalarGeometric::new(0.1, 0.5);
        let mut c = cfg(16);
        let a = convergence_experiment(&f, &[1.0], &[3, 4, 5], 8, ReferenceScheme::FineWongZakai, &c).unwrap();
        c.workers = 4;
        let b = convergence_experiment(&f, &[1.0], &[3, 4, 5], 8, ReferenceScheme::FineWongZakai, &c).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn exits_are_certain_below_the_start() {
        let f = ScalarGeometric::new(0.1, 0.5);
        let recs = exit_probability(&f, &[2.0], &[4], &[1.0, 1e6], &cfg(20)).unwrap();
        assert_eq!(recs[0].probability, 1.0);
        assert_eq!(recs[1].probability, 0.0);
        assert!(recs.iter().all(|r| r.pass));
    }

    #[test]
    fn huge_radius_gives_identical_localized_paths() {
        let f = ScalarGeometric::new(0.1, 0.5);
        let rep = diagram_experiment(&f, &[1.0], &[3, 4], &[1e6], 6, ReferenceScheme::Heun, &cfg(6)).unwrap();
        for c in rep.cells.iter().filter(|c| c.edge == EDGE_DN_TO_D) {
            assert_eq!(c.estimate, 0.0);
        }
        assert!(rep.diagram.unwrap().corner.consistent);
    }

    #[test]
    fn invalid_levels() {
        let f = ScalarGeometric::new(0.1, 0.5);
        assert!(l2_sup_errors(&f, &[1.0], &[5, 4], 8, ReferenceScheme::Heun, &cfg(4)).is_err());
        assert!(l2_sup_errors(&f, &[1.0], &[9], 8, ReferenceScheme::Heun, &cfg(4)).is_err());
        assert!(l2_sup_errors(&f, &[1.0], &[4], 8, ReferenceScheme::Heun, &cfg(1)).is_err());
    }
}
