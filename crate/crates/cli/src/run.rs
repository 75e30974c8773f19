//! Experiment drivers behind the subcommands.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use uwfosls::adaptivity::{adapt_loop, AdaptOptions};
use uwfosls::assembly::QuadDegrees;
use uwfosls::fields::{sample, PairField, Reference};
use uwfosls::linalg::EigenOptions;
use uwfosls::mesh::PointLocator;
use uwfosls::metrics::{best_1k_error, best_u_error, error_degree, fosls_errors, galerkin_errors};
use uwfosls::problems::{
    default_direction, plane_wave_problem, scattering_nontrapping, scattering_trapping, ProblemError, ProblemSpec,
    RunRecord,
};
use uwfosls::reference::{reference_solution, ReferenceError, ReferenceOptions};
use uwfosls::solver::{
    boosted, galerkin_solution, pollution_fosls, pollution_galerkin, solve_fosls, FoslsSetup, PollutionReport,
    SolverError,
};
use uwfosls::spaces::build_lagrange;
use uwfosls::{Context, Mesh};

use crate::config::{Command, Config, ConfigError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("configuration: {0}")]
    Problem(#[from] ProblemError),
    #[error("output {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("numerical failure: {0}")]
    Solver(#[from] SolverError),
    #[error("reference solution: {0}")]
    Reference(#[from] ReferenceError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Problem(_) | RunError::Io { .. } => 2,
            RunError::Solver(_) | RunError::Reference(_) => 3,
        }
    }
}

type Rows = Result<Vec<RunRecord>, RunError>;

/// Runs `jobs` on `workers` threads and returns the results in job order.
fn pool<'a>(jobs: Vec<Box<dyn Fn() -> Rows + Send + Sync + 'a>>, workers: usize) -> Rows {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Rows>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.min(jobs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                *slots[i].lock().unwrap() = Some(job());
            });
        }
    });
    let mut rows = Vec::new();
    for slot in slots {
        rows.extend(slot.into_inner().unwrap().expect("every job ran")?);
    }
    Ok(rows)
}

fn context(cfg: &Config) -> Result<Context, ConfigError> {
    Context::new(cfg.kappa, cfg.sigma).map_err(|e| ConfigError(e.to_string()))
}

fn direction(cfg: &Config) -> [f64; 2] {
    cfg.direction
        .map(|a| [a.cos(), a.sin()])
        .unwrap_or_else(|| default_direction(&cfg.problem))
}

/// The problem on its initial mesh; `n` sizes the plane-wave mesh.
fn problem(cfg: &Config, n: usize) -> Result<ProblemSpec, ProblemError> {
    let ctx = context(cfg).map_err(|e| ProblemError::Unknown(e.0))?;
    let r = direction(cfg);
    let mesh = cfg.mesh.as_deref();
    match cfg.problem.as_str() {
        "plane_wave" => plane_wave_problem(ctx, r, n),
        "scatter_nontrap" => scattering_nontrapping(ctx, r, mesh),
        "scatter_trap" => scattering_trapping(ctx, r, mesh),
        other => Err(ProblemError::Unknown(other.into())),
    }
}

/// Sweep meshes: criss-cross `n` for the plane wave, else uniform
/// bisection rounds of the initial mesh.
fn sweep_meshes(cfg: &Config) -> Result<Vec<(ProblemSpec, Mesh)>, ProblemError> {
    if cfg.problem == "plane_wave" {
        cfg.n
            .iter()
            .map(|&n| {
                let prob = problem(cfg, n)?;
                let mesh = prob.mesh.clone();
                Ok((prob, mesh))
            })
            .collect()
    } else {
        let prob = problem(cfg, 1)?;
        Ok(cfg
            .levels
            .iter()
            .map(|&l| {
                let mesh = (0..l).fold(prob.mesh.clone(), |m, _| m.refine_uniform());
                (prob.clone(), mesh)
            })
            .collect())
    }
}

fn eigen_options(cfg: &Config) -> EigenOptions {
    EigenOptions {
        tol: cfg.eig_tol,
        seed: cfg.seed,
        strategy: cfg.strategy,
        ..EigenOptions::default()
    }
}

fn pollution_record(rep: &PollutionReport, ptilde: usize, ctx: Context, mesh: &Mesh, start: Instant) -> RunRecord {
    let mut rec = RunRecord::new(rep.method.name(), rep.p, ptilde, ctx);
    rec.ndof_trial = rep.ndof_trial;
    rec.ndof_test = rep.ndof_test;
    rec.h = mesh.max_edge_length();
    rec.pollution = rep.factor;
    rec.iters = rep.iterations;
    rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    rec
}

fn pollution(cfg: &Config) -> Rows {
    let ctx = context(cfg)?;
    let meshes = sweep_meshes(cfg)?;
    let opts = eigen_options(cfg);
    let mut jobs: Vec<Box<dyn Fn() -> Rows + Send + Sync + '_>> = Vec::new();
    for (p, pt) in cfg.orders() {
        for (_, mesh) in &meshes {
            if cfg.method.fosls {
                jobs.push(Box::new(move || {
                    let start = Instant::now();
                    let rep = pollution_fosls(mesh, p, pt, &ctx, &opts)?;
                    Ok(vec![pollution_record(&rep, pt, ctx, mesh, start)])
                }));
            }
            if cfg.method.galerkin {
                let q = cfg.q_enrich;
                jobs.push(Box::new(move || {
                    let start = Instant::now();
                    let rep = pollution_galerkin(mesh, p, q, &ctx, &opts)?;
                    Ok(vec![pollution_record(&rep, q, ctx, mesh, start)])
                }));
            }
        }
    }
    pool(jobs, cfg.jobs)
}

/// Cached fine-mesh reference when the problem has no exact solution.
fn reference_field(cfg: &Config, prob: &ProblemSpec) -> Result<Option<Box<dyn PairField + Send + Sync>>, RunError> {
    if prob.exact.is_some() || cfg.reference_dofs == 0 {
        return Ok(None);
    }
    let mut opts = ReferenceOptions::new(cfg.reference_dofs);
    opts.cache_dir = Some(cfg.output.join("cache"));
    log::info!("computing reference solution with at least {} DOFs", cfg.reference_dofs);
    Ok(Some(Box::new(reference_solution(prob, &opts, cfg.strategy)?)))
}

fn degrees(cfg: &Config, p: usize, pt: usize) -> (QuadDegrees, usize) {
    match cfg.quad_degree {
        Some(d) => (QuadDegrees { matrix: d, data: d }, d),
        None => (QuadDegrees::for_orders(p, pt), error_degree(p, pt)),
    }
}

fn fosls_rows(
    cfg: &Config,
    prob: &ProblemSpec,
    mesh: &Mesh,
    p: usize,
    pt: usize,
    reference: Option<Reference<'_>>,
) -> Rows {
    let start = Instant::now();
    let ctx = prob.ctx;
    let (quad, degree) = degrees(cfg, p, pt);
    let setup = FoslsSetup::with_degrees(mesh, p, pt, &ctx, &prob.data, quad)?;
    let sol = solve_fosls(&setup.system, cfg.strategy)?;
    let mut rec = RunRecord::new("fosls", p, pt, ctx);
    rec.ndof_trial = setup.trial.dof_count();
    rec.ndof_test = setup.test.free_dof_count();
    rec.h = mesh.max_edge_length();
    rec.iters = sol.iterations;
    let mut bst = rec.clone();
    bst.method = "fosls_boosted".into();
    if let Some(r) = reference {
        let e = fosls_errors(mesh, &setup.trial, &setup.test, &ctx, &sol, r, degree)?;
        rec.err_l2_phi = e.l2_phi;
        rec.err_u = e.u;
        rec.err_1k = e.one_kappa;
        rec.best_u = best_u_error(mesh, &setup.trial, r, degree)?;
        let x = build_lagrange(mesh, p, true, true).map_err(SolverError::from)?;
        rec.best_1k = best_1k_error(mesh, &x, &ctx, r, degree)?;
        bst.err_u = e.boosted;
        bst.best_u = rec.best_u;
    }
    rec.set_estimator(sol.estimator);
    rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    bst.wall_ms = rec.wall_ms;
    Ok(vec![rec, bst])
}

fn galerkin_rows(prob: &ProblemSpec, mesh: &Mesh, p: usize, reference: Option<Reference<'_>>) -> Rows {
    let start = Instant::now();
    let ctx = prob.ctx;
    let (x, coeffs) = galerkin_solution(mesh, p, &ctx, &prob.data)?;
    let mut rec = RunRecord::new("galerkin", p, p, ctx);
    rec.ndof_trial = x.dof_count();
    rec.ndof_test = x.dof_count();
    rec.h = mesh.max_edge_length();
    if let Some(r) = reference {
        let degree = error_degree(p, p);
        let (l2, e1k) = galerkin_errors(mesh, &x, &ctx, &coeffs, r, degree)?;
        rec.err_l2_phi = l2;
        rec.err_1k = e1k;
        rec.best_1k = best_1k_error(mesh, &x, &ctx, r, degree)?;
    }
    rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(vec![rec])
}

fn as_reference<'a>(prob: &'a ProblemSpec, field: &'a Option<Box<dyn PairField + Send + Sync>>) -> Option<Reference<'a>> {
    match (&prob.exact, field) {
        (Some(e), _) => Some(Reference::Exact(e)),
        (None, Some(f)) => Some(Reference::Field(f.as_ref())),
        (None, None) => None,
    }
}

fn convergence(cfg: &Config) -> Rows {
    let meshes = sweep_meshes(cfg)?;
    let field = reference_field(cfg, &meshes[0].0)?;
    let field = &field;
    let mut jobs: Vec<Box<dyn Fn() -> Rows + Send + Sync + '_>> = Vec::new();
    for (p, pt) in cfg.orders() {
        for (prob, mesh) in &meshes {
            if cfg.method.fosls {
                jobs.push(Box::new(move || fosls_rows(cfg, prob, mesh, p, pt, as_reference(prob, field))));
            }
            if cfg.method.galerkin {
                jobs.push(Box::new(move || galerkin_rows(prob, mesh, p, as_reference(prob, field))));
            }
        }
    }
    pool(jobs, cfg.jobs)
}

fn adapt(cfg: &Config) -> Rows {
    let prob = problem(cfg, cfg.n[0])?;
    let field = reference_field(cfg, &prob)?;
    let (prob, field) = (&prob, &field);
    let mut jobs: Vec<Box<dyn Fn() -> Rows + Send + Sync + '_>> = Vec::new();
    for (p, pt) in cfg.orders() {
        jobs.push(Box::new(move || {
            let opts = AdaptOptions {
                p,
                ptilde: pt,
                theta: cfg.theta,
                max_dofs: cfg.max_dofs,
                max_iterations: cfg.max_iterations,
                strategy: cfg.strategy,
                quad_degree: cfg.quad_degree,
            };
            let reference = field.as_deref().map(|f| f as &dyn PairField);
            let steps = adapt_loop(prob, &opts, reference)?;
            Ok(steps.into_iter().map(|s| s.record).collect())
        }));
    }
    pool(jobs, cfg.jobs)
}

/// Solves once and samples `Re φ`, `Im φ` of the boosted field on a grid.
fn solve(cfg: &Config) -> Result<(Vec<RunRecord>, String), RunError> {
    let meshes = sweep_meshes(cfg)?;
    let (prob, mesh) = &meshes[0];
    let (p, pt) = cfg.orders()[0];
    let ctx = prob.ctx;
    let exact = prob.exact.as_ref().map(Reference::Exact);
    let rows = fosls_rows(cfg, prob, mesh, p, pt, exact)?;
    let (quad, _) = degrees(cfg, p, pt);
    let setup = FoslsSetup::with_degrees(mesh, p, pt, &ctx, &prob.data, quad)?;
    let sol = solve_fosls(&setup.system, cfg.strategy)?;
    let field = boosted(mesh, &setup.trial, &setup.test, &ctx, &sol);
    let (lo, hi) = mesh.vertices().iter().fold(([f64::MAX; 2], [f64::MIN; 2]), |(lo, hi), v| {
        ([lo[0].min(v[0]), lo[1].min(v[1])], [hi[0].max(v[0]), hi[1].max(v[1])])
    });
    let m = cfg.grid;
    let coord = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / (m - 1) as f64;
    let points: Vec<[f64; 2]> = (0..m).flat_map(|j| (0..m).map(move |i| [coord(0, i), coord(1, j)])).collect();
    let vals = sample(&field, &PointLocator::new(mesh), &points);
    let mut dump = String::from("x,y,re,im\n");
    for (x, v) in points.iter().zip(&vals) {
        let phi = v[0];
        if phi.re.is_nan() {
            writeln!(dump, "{:e},{:e},,", x[0], x[1]).unwrap();
        } else {
            writeln!(dump, "{:e},{:e},{:e},{:e}", x[0], x[1], phi.re, phi.im).unwrap();
        }
    }
    Ok((rows, dump))
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// CSV text: a versioned comment line, the configuration, the header and
/// one row per record.
pub fn csv_text(cfg: &Config, rows: &[RunRecord]) -> String {
    let mut out = format!(
        "# uwfosls-csv v{} command={} problem={}\n",
        RunRecord::SCHEMA_VERSION,
        cfg.command.name(),
        cfg.problem
    );
    let mut meta: Vec<String> = cfg.given.iter().map(|(k, v)| format!("{k}={v}")).collect();
    if cfg.command == Command::Adapt {
        meta.push("marking=dorfler-on-squared-indicators".into());
    }
    writeln!(out, "# {}", meta.join(" ")).unwrap();
    out.push_str(RunRecord::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Runs the configured experiment and returns the files written.
pub fn run(cfg: &Config) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(&cfg.output).map_err(|source| RunError::Io {
        path: cfg.output.clone(),
        source,
    })?;
    let stem = format!("{}_{}", cfg.command.name(), cfg.problem);
    let csv = cfg.output.join(format!("{stem}.csv"));
    let mut written = vec![csv.clone()];
    let rows = match cfg.command {
        Command::Pollution => pollution(cfg)?,
        Command::Convergence => convergence(cfg)?,
        Command::Adapt => adapt(cfg)?,
        Command::Solve => {
            let (rows, dump) = solve(cfg)?;
            let path = cfg.output.join(format!("{stem}_field.csv"));
            write(&path, &dump)?;
            written.push(path);
            rows
        }
    };
    write(&csv, &csv_text(cfg, &rows))?;
    Ok(written)
}
