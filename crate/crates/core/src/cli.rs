//! Subcommand runner behind the `wzlab` binary.
//!
//! Every run writes into one output directory: the resolved `config.toml`,
//! the subcommand's JSON/CSV artifacts, and `manifest.json` listing the
//! artifacts with their SHA-256 digests and the pass/fail checks. A
//! `RUNNING` marker exists while the run is in progress; it is replaced by
//! `FAILED` when the run errors or is interrupted.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::brownian::NestedBrownianPath;
use crate::coefficients::{verify_assumptions, CoefficientField, ProbeBox};
use crate::config::{ExperimentConfig, OUT_DIR_ENV};
use crate::convergence::{
    convergence_experiment, diagram_experiment, exit_probability, uniform_moment_scan, CellRecord,
};
use crate::davie::{
    check_horizon, estimate_L, short_horizon_bound, verify_short_horizon, BoundCheckConfig, FieldBounds,
    HorizonConditions,
};
use crate::error::{Error, Result};
use crate::integrate::{solve_localized_sde, solve_localized_wz, solve_strat_reference, solve_wz, solve_wz_refined};
use crate::rng::derive_seed;
use crate::roughlift::lift_piecewise_linear;

pub const RUNNING_MARKER: &str = "RUNNING";
pub const FAILED_MARKER: &str = "FAILED";
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Paths,
    Lift,
    Solve,
    Davie,
    Converge,
    Diagram,
    Verify,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Paths,
        Command::Lift,
        Command::Solve,
        Command::Davie,
        Command::Converge,
        Command::Diagram,
        Command::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Paths => "paths",
            Command::Lift => "lift",
            Command::Solve => "solve",
            Command::Davie => "davie",
            Command::Converge => "converge",
            Command::Diagram => "diagram",
            Command::Verify => "verify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub config_sha256: String,
    #[serde(skip)]
    pub dir: PathBuf,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Process exit code: 0 success, 2 config error, 3 blow-up, 4 failed check, 1 anything else.
pub fn exit_code(result: &Result<RunSummary>) -> i32 {
    match result {
        Ok(s) if s.passed => 0,
        Ok(_) => 4,
        Err(Error::Config { .. }) => 2,
        Err(Error::BlowUp { .. }) => 3,
        Err(Error::HorizonCondition(_)) => 4,
        Err(_) => 1,
    }
}

static ACTIVE_DIR: Mutex<Option<PathBuf>> = Mutex::new(None);

/// Installs a Ctrl-C handler that marks the active run as failed and exits with 130.
pub fn install_interrupt_handler() -> Result<()> {
    ctrlc::set_handler(|| {
        if let Ok(guard) = ACTIVE_DIR.lock() {
            if let Some(dir) = guard.as_ref() {
                let _ = fs::write(dir.join(FAILED_MARKER), "interrupted\n");
                let _ = fs::remove_file(dir.join(RUNNING_MARKER));
            }
        }
        std::process::exit(130);
    })
    .map_err(|e| Error::param(format!("cannot install interrupt handler: {e}")))
}

fn set_active(dir: Option<PathBuf>) {
    if let Ok(mut guard) = ACTIVE_DIR.lock() {
        *guard = dir;
    }
}

/// Resolves the output directory: `--out`, then `[output] dir`, then
/// `$WZLAB_OUT_DIR/<name>`, then `wzlab-runs/<name>`.
pub fn output_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    if let Some(out) = &opts.out {
        return out.clone();
    }
    if let Some(dir) = &cfg.output.dir {
        return dir.clone();
    }
    let parent = std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("wzlab-runs"));
    parent.join(&cfg.experiment.name)
}

/// Loads `config`, applies `opts` and runs `command`.
pub fn run_file(command: Command, config: &Path, opts: &RunOptions) -> Result<RunSummary> {
    run(command, ExperimentConfig::load(config)?, opts)
}

pub fn run(command: Command, mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    if let Some(seed) = opts.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(workers) = opts.workers {
        cfg.experiment.workers = workers;
    }
    cfg.validate()?;
    let dir = output_dir(&cfg, opts);
    fs::create_dir_all(&dir)?;
    for stale in [FAILED_MARKER, MANIFEST] {
        let p = dir.join(stale);
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    let config_text = cfg.to_toml_string()?;
    fs::write(dir.join("config.toml"), &config_text)?;
    fs::write(dir.join(RUNNING_MARKER), format!("{command}\n"))?;
    set_active(Some(dir.clone()));
    log::info!("{command}: writing to {}", dir.display());

    let mut out = Outputs {
        dir: dir.clone(),
        files: Vec::new(),
    };
    let result = dispatch(command, &cfg, &mut out);
    set_active(None);
    let _ = fs::remove_file(dir.join(RUNNING_MARKER));
    let checks = match result {
        Ok(checks) => checks,
        Err(e) => {
            fs::write(dir.join(FAILED_MARKER), format!("{e}\n"))?;
            return Err(e);
        }
    };
    let mut artifacts = Vec::new();
    for file in &out.files {
        artifacts.push(Artifact {
            file: file.clone(),
            sha256: sha256_hex(&fs::read(dir.join(file))?),
        });
    }
    let summary = RunSummary {
        command: command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.experiment.seed,
        workers: cfg.experiment.workers,
        config_sha256: sha256_hex(config_text.as_bytes()),
        passed: checks.iter().all(|c| c.pass),
        checks,
        artifacts,
        dir,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(summary.dir.join(MANIFEST), text)?;
    Ok(summary)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        self.write(name, |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(header)?;
            for row in rows {
                c.write_record(&row)?;
            }
            c.flush()?;
            Ok(())
        })
    }
}

fn dispatch(command: Command, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Check>> {
    let field = cfg.field.build()?;
    let field = field.as_ref();
    match command {
        Command::Paths => paths(cfg, field, out),
        Command::Lift => lift(cfg, field, out),
        Command::Solve => solve(cfg, field, out),
        Command::Davie => davie(cfg, field, out),
        Command::Converge => converge(cfg, field, out),
        Command::Diagram => diagram(cfg, field, out),
        Command::Verify => verify(cfg, field, out),
    }
}

fn sample_path(cfg: &ExperimentConfig, index: usize, dim: usize, level: u32) -> Result<NestedBrownianPath> {
    let e = &cfg.experiment;
    NestedBrownianPath::sample(derive_seed(e.seed, index as u64), e.horizon, dim, level)
}

fn sci(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Serialize)]
struct PathRecord {
    index: usize,
    seed: u64,
    level: u32,
    terminal: Vec<f64>,
    /// `Σ |ΔB|² / (r T)` at each level of `d_list`.
    quadratic_variation_ratio: Vec<(u32, f64)>,
}

fn paths(cfg: &ExperimentConfig, field: &dyn CoefficientField, out: &mut Outputs) -> Result<Vec<Check>> {
    let e = &cfg.experiment;
    let level = cfg.paths.level.unwrap_or_else(|| cfg.d_ref());
    let r = field.noise_dim();
    let mut records = Vec::new();
    let mut checks = Vec::new();
    for k in 0..cfg.paths.count {
        let path = sample_path(cfg, k, r, level)?;
        if cfg.paths.binary {
            let name = format!("path_{k}.bin");
            out.write(&name, |w| path.write_binary(w))?;
            let back = NestedBrownianPath::read_binary(fs::File::open(out.dir.join(&name))?)?;
            checks.push(Check::new(&format!("binary_round_trip_{k}"), back == path, name));
        }
        let refined = path.refine()?;
        let nested = (0..=level).all(|d| path.level_values(d).ok() == refined.level_values(d).ok());
        checks.push(Check::new(&format!("nesting_{k}"), nested, format!("levels 0..={level} kept after refine")));
        let mut qv = Vec::new();
        for &d in e.d_list.iter().filter(|&&d| d <= level) {
            out.write(&format!("path_{k}_d{d}.csv"), |w| path.write_csv(d, w))?;
            let vals = path.level_values(d)?;
            let sum: f64 = vals.windows(2 * r).step_by(r).map(|w| (0..r).map(|c| (w[r + c] - w[c]).powi(2)).sum::<f64>()).sum();
            qv.push((d, sum / (r as f64 * e.horizon)));
        }
        let n = (1usize << level) * r;
        let fine = path.level_values(level)?;
        let sum: f64 = fine.windows(2 * r).step_by(r).map(|w| (0..r).map(|c| (w[r + c] - w[c]).powi(2)).sum::<f64>()).sum();
        let ratio = sum / (r as f64 * e.horizon);
        let tol = 6.0 * (2.0 / n as f64).sqrt();
        checks.push(Check::new(
            &format!("quadratic_variation_{k}"),
            (ratio - 1.0).abs() <= tol,
            format!("ratio {ratio:.6} at level {level}, tolerance {tol:.2e}"),
        ));
        records.push(PathRecord {
            index: k,
            seed: path.seed(),
            level,
            terminal: path.value(level, 1 << level)?.to_vec(),
            quadratic_variation_ratio: qv,
        });
    }
    out.json("paths.json", &records)?;
    Ok(checks)
}

#[derive(Serialize)]
struct LiftRecord {
    d: u32,
    hoelder: crate::roughlift::HoelderNorm,
    chen_residual: f64,
    geometricity_defect: f64,
    triples: usize,
}

fn lift(cfg: &ExperimentConfig, field: &dyn CoefficientField, out: &mut Outputs) -> Result<Vec<Check>> {
    const TRIPLES: usize = 1000;
    let e = &cfg.experiment;
    let d_max = *e.d_list.last().unwrap();
    let path = sample_path(cfg, cfg.solve.sample, field.noise_dim(), d_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(e.seed, u64::MAX));
    let mut records = Vec::new();
    for &d in &e.d_list {
        let rp = lift_piecewise_linear(&path.interpolant(d)?, e.alpha)?;
        let n = rp.num_intervals();
        let times = rp.times().to_vec();
        let (mut chen, mut defect) = (0.0f64, 0.0f64);
        for _ in 0..TRIPLES {
            let mut idx = [0usize; 3];
            for x in idx.iter_mut() {
                *x = (rng.next_u64() % (n as u64 + 1)) as usize;
            }
            idx.sort_unstable();
            let [s, u, t] = idx;
            let joined = rp.increment_between(s, u).concat(&rp.increment_between(u, t));
            let direct = rp.increment_between(s, t);
            for (a, b) in joined.level1.iter().chain(&joined.level2).zip(direct.level1.iter().chain(&direct.level2)) {
                chen = chen.max((a - b).abs());
            }
            if s < t {
                for x in rp.geometricity_defect(times[s], times[t])? {
                    defect = defect.max(x.abs());
                }
            }
        }
        if d == d_max {
            out.write(&format!("lift_d{d}.csv"), |w| rp.write_csv(w))?;
        }
        records.push(LiftRecord {
            d,
            hoelder: rp.hoelder_norm(e.pair_budget),
            chen_residual: chen,
            geometricity_defect: defect,
            triples: TRIPLES,
        });
    }
    out.json("lift.json", &records)?;
    let worst_chen = records.iter().fold(0.0f64, |m, r| m.max(r.chen_residual));
    let worst_defect = records.iter().fold(0.0f64, |m, r| m.max(r.geometricity_defect));
    Ok(vec![
        Check::new("chen", worst_chen <= 1e-10, format!("max residual {worst_chen:e}")),
        Check::new("geometric", worst_defect <= 1e-10, format!("max defect {worst_defect:e}")),
    ])
}

#[derive(Serialize)]
struct SolveRecord {
    file: String,
    kind: &'static str,
    d: Option<u32>,
    n: Option<f64>,
    final_state: Vec<f64>,
    blow_up: Option<f64>,
    /// `sup |Y_t − X_t|²` on the reference grid.
    sup_sq_distance: Option<f64>,
}

fn solve(cfg: &ExperimentConfig, field: &dyn CoefficientField, out: &mut Outputs) -> Result<Vec<Check>> {
    let e = &cfg.experiment;
    let d_ref = cfg.d_ref();
    let d_max = *e.d_list.last().unwrap();
    let path = sample_path(cfg, cfg.solve.sample, field.noise_dim(), d_ref)?;
    let x = solve_strat_reference(field, &path, d_ref, &e.x0, e.reference, e.substeps)?;
    let mut records = Vec::new();
    let mut push = |out: &mut Outputs, file: String, kind, d, n, t: &crate::integrate::Trajectory| -> Result<()> {
        out.write(&file, |w| t.write_csv(w))?;
        let dist = if t.blew_up() || x.blew_up() { None } else { Some(t.sup_sq_distance(&x)?) };
        records.push(SolveRecord {
            file,
            kind,
            d,
            n,
            final_state: t.final_state().to_vec(),
            blow_up: t.blow_up,
            sup_sq_distance: dist,
        });
        Ok(())
    };
    push(out, "solve_reference.csv".into(), "reference", None, None, &x)?;
    for &d in &e.d_list {
        let xd = solve_wz_refined(field, &path.interpolant(d)?, &e.x0, e.substeps, d_ref - d)?;
        push(out, format!("solve_wz_d{d}.csv"), "wong_zakai", Some(d), None, &xd)?;
    }
    let driver = path.interpolant(d_max)?;
    for &n in &e.n_list {
        let xn = solve_localized_sde(field, n, &path, d_ref, &e.x0, e.localized_scheme, e.substeps)?;
        push(out, format!("solve_localized_n{n}.csv"), "localized", None, Some(n), &xn)?;
        let xdn = solve_localized_wz(field, n, &driver, &e.x0, e.substeps, d_ref - d_max)?;
        push(out, format!("solve_wz_d{d_max}_n{n}.csv"), "localized_wong_zakai", Some(d_max), Some(n), &xdn)?;
    }
    out.json("solve.json", &records)?;
    let blowups = records.iter().filter(|r| r.blow_up.is_some()).count();
    if blowups > 0 {
        return Err(Error::BlowUp {
            blowups,
            samples: records.len(),
        });
    }
    Ok(Vec::new())
}

#[derive(Serialize)]
struct DavieLevel {
    d: u32,
    l: crate::davie::LEstimate,
}

#[derive(Serialize)]
struct DavieOutput {
    bounds: FieldBounds,
    l_estimates: Vec<DavieLevel>,
    horizon: crate::davie::HorizonReport,
    bound: Option<crate::davie::HorizonBound>,
    bound_error: Option<String>,
}

fn davie(cfg: &ExperimentConfig, field: &dyn CoefficientField, out: &mut Outputs) -> Result<Vec<Check>> {
    let e = &cfg.experiment;
    let dv = &cfg.davie;
    let d_max = *e.d_list.last().unwrap();
    let probe = ProbeBox::new(dv.probe_radius).with_seed(e.seed);
    let bounds = FieldBounds::from_field(field, &e.x0, probe, dv.probe_samples)?;
    let path = sample_path(cfg, cfg.solve.sample, field.noise_dim(), d_max)?;
    let mut l_estimates = Vec::new();
    let mut driver_norm = 0.0;
    for &d in &e.d_list {
        let driver = path.interpolant(d)?;
        let traj = solve_wz(field, &driver, &e.x0, e.substeps)?;
        if traj.blew_up() {
            return Err(Error::BlowUp { blowups: 1, samples: 1 });
        }
        let rp = lift_piecewise_linear(&driver, e.alpha)?;
        if d == d_max {
            driver_norm = rp.hoelder_norm(e.pair_budget).value;
        }
        l_estimates.push(DavieLevel {
            d,
            l: estimate_L(&traj, &rp, field, e.alpha, e.pair_budget)?,
        });
    }
    let hc = HorizonConditions::new(e.horizon.powf(e.alpha), e.alpha, dv.m, dv.k2, bounds.clone(), driver_norm)?;
    let horizon = check_horizon(&hc);
    let x0_norm = e.x0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (bound, bound_error) = match short_horizon_bound(&hc, x0_norm) {
        Ok(b) => (Some(b), None),
        Err(err) => (None, Some(err.to_string())),
    };
    let samples = verify_short_horizon(
        field,
        &bounds,
        &e.x0,
        &BoundCheckConfig {
            alpha: e.alpha,
            m: dv.m,
            k2: dv.k2,
            level: dv.bound_level,
            samples: dv.bound_samples,
            seed: e.seed,
            start_horizon: dv.start_horizon,
            substeps: e.substeps,
            pair_budget: e.pair_budget,
        },
    )?;
    let rows = samples
        .iter()
        .map(|s| {
            vec![
                s.seed.to_string(),
                sci(s.horizon),
                sci(s.mu),
                sci(s.driver_norm),
                sci(s.empirical),
                sci(s.bound),
                s.dominated.to_string(),
            ]
        })
        .collect();
    out.csv(
        "davie_bound.csv",
        &["seed", "horizon", "mu", "driver_norm", "empirical", "bound", "dominated"],
        rows,
    )?;
    let finite = l_estimates.iter().all(|l| l.l.value.is_finite());
    let worst = l_estimates.iter().fold(0.0f64, |m, l| m.max(l.l.value));
    let dominated = samples.iter().filter(|s| s.dominated).count();
    out.json(
        "davie.json",
        &DavieOutput {
            bounds,
            l_estimates,
            horizon,
            bound,
            bound_error,
        },
    )?;
    Ok(vec![
        Check::new("l_finite", finite, format!("max L {worst:e}")),
        Check::new(
            "bound_dominates",
            dominated == samples.len(),
            format!("{dominated} of {} samples dominated", samples.len()),
        ),
    ])
}

fn decreasing(cells: &[&CellRecord]) -> bool {
    cells.windows(2).all(|w| {
        let se = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].estimate <= w[0].estimate + 2.0 * se
    })
}

fn converge(cfg: &ExperimentConfig, field: &dyn CoefficientField, out: &mut Outputs) -> Result<Vec<Check>> {
    let e = &cfg.experiment;
    let mc = cfg.monte_carlo();
    let report = convergence_experiment(field, &e.x0, &e.d_list, cfg.d_ref(), e.reference, &mc)?;
    out.write("converge.csv", |w| report.write_csv(w))?;
    out.write("plot.csv", |w| report.write_plot_data(w))?;
    let rows = report
        .cells
        .iter()
        .filter_map(|c| {
            c.d.map(|d| {
                vec![
                    d.to_string(),
                    sci(e.horizon / 2f64.powi(d as i32)),
                    sci(c.estimate),
                    sci(c.stderr),
                ]
            })
        })
        .collect();
    out.csv("rate.csv", &["d", "delta", "error", "stderr"], rows)?;
    let moments = uniform_moment_scan(field, &e.x0, &e.d_list, &mc)?;
    let rows = moments
        .cells
        .iter()
        .map(|c| vec![c.d.unwrap_or(0).to_string(), sci(c.estimate), sci(c.stderr)])
        .collect();
    out.csv("moments.csv", &["d", "sup_moment", "stderr"], rows)?;
    out.json("converge.json", &report)?;
    let cells: Vec<&CellRecord> = report.cells.iter().collect();
    let mut checks = vec![Check::new(
        "errors_decrease",
        decreasing(&cells),
        cells.iter().map(|c| sci(c.estimate)).collect::<Vec<_>>().join(" "),
    )];
    checks.push(match &report.fit {
        Some(fit) => Check::new(
            "positive_rate",
            fit.slope > 0.0,
            format!("slope {:.4} [{:.4}, {:.4}]", fit.slope, fit.ci_low, fit.ci_high),
        ),
        None => Check::new("positive_rate", true, "fewer than 3 positive errors; no fit"),
    });
    checks.push(Check::new(
        "moments_stable",
        moments.max.is_finite() && moments.stable,
        format!(
            "max {:e} at d = {}, relative variation {:.3e}",
            moments.max, moments.max_level, moments.relative_variation
        ),
    ));
    Ok(checks)
}

fn diagram(cfg: &ExperimentConfig, field: &dyn CoefficientField, out: &mut Outputs) -> Result<Vec<Check>> {
    let e = &cfg.experiment;
    let mc = cfg.monte_carlo();
    let report = diagram_experiment(field, &e.x0, &e.d_list, &e.n_list, cfg.d_ref(), e.localized_scheme, &mc)?;
    out.write("diagram.csv", |w| report.write_csv(w))?;
    out.write("plot.csv", |w| report.write_plot_data(w))?;
    let exits = exit_probability(field, &e.x0, &e.d_list, &e.n_list, &mc)?;
    let rows = exits
        .iter()
        .map(|x| {
            vec![
                x.d.to_string(),
                sci(x.n),
                sci(x.probability),
                sci(x.probability_stderr),
                sci(x.markov_bound),
                sci(x.markov_stderr),
                x.pass.to_string(),
            ]
        })
        .collect();
    out.csv(
        "exit.csv",
        &["d", "n", "probability", "stderr", "markov_bound", "markov_stderr", "pass"],
        rows,
    )?;
    out.json("diagram.json", &report)?;
    let summary = report
        .diagram
        .as_ref()
        .ok_or_else(|| Error::param("diagram summary missing"))?;
    let c = &summary.corner;
    let violations = exits.iter().filter(|x| !x.pass).count();
    Ok(vec![
        Check::new(
            "uniform_edge_monotone",
            summary.uniform_edge_monotone,
            summary
                .uniform_edge
                .iter()
                .map(|u| format!("n={}: {:e}", u.n, u.max_error))
                .collect::<Vec<_>>()
                .join(", "),
        ),
        Check::new(
            "corner_consistent",
            c.consistent,
            format!("difference {:e} ± {:e} at d = {}, n = {}", c.mean_difference, c.difference_stderr, c.d, c.n),
        ),
        Check::new("exit_below_markov", violations == 0, format!("{violations} violations")),
    ])
}

fn verify(cfg: &ExperimentConfig, field: &dyn CoefficientField, out: &mut Outputs) -> Result<Vec<Check>> {
    let probe = ProbeBox::new(cfg.verify.probe_radius).with_seed(cfg.experiment.seed);
    let report = verify_assumptions(field, probe, cfg.verify.samples);
    out.json("verify.json", &report)?;
    let detail = if report.growth_flags.is_empty() {
        format!("mc estimate {:e}", report.mc_estimate)
    } else {
        format!("growth in {}", report.growth_flags.join(", "))
    };
    Ok(vec![Check::new("bounded_derivatives", report.satisfied, detail)])
}
