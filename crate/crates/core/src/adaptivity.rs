//! Residual-lift error indicators, Dörfler marking and the adaptive loop.

use std::time::Instant;

use crate::assembly::{AssemblyError, QuadDegrees};
use crate::fields::{element_norms_squared, PairField, Reference, TestImageField};
use crate::linalg::SaddleStrategy;
use crate::metrics::{best_u_error, error_degree, fosls_errors};
use crate::problems::{ProblemSpec, RunRecord};
use crate::solver::{solve_fosls, FoslsSetup, FoslsSolution, SolverError};
use crate::{Context, Mesh, TestSpace};

/// Squared local U-norms of `B'𝕧^δ`, one per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSet {
    pub eta_sq: Vec<f64>,
}

impl IndicatorSet {
    pub fn total(&self) -> f64 {
        self.eta_sq.iter().sum::<f64>().sqrt()
    }
}

pub fn indicators(
    mesh: &Mesh,
    test: &TestSpace,
    ctx: &Context,
    sol: &FoslsSolution,
    degree: usize,
) -> Result<IndicatorSet, SolverError> {
    let field = TestImageField {
        mesh,
        test,
        ctx,
        coeffs: &sol.v,
    };
    let eta_sq = element_norms_squared(&field, degree).map_err(AssemblyError::from)?;
    Ok(IndicatorSet { eta_sq })
}

/// Smallest set, taken greedily by decreasing `η²` with ties broken by the
/// lower index, whose squared indicators sum to at least `θ` times the total.
///
/// # Panics
/// If `θ` is outside `(0, 1]`.
pub fn dorfler_mark(eta_sq: &[f64], theta: f64) -> Vec<usize> {
    assert!(theta > 0.0 && theta <= 1.0, "θ = {theta} outside (0, 1]");
    let mut order: Vec<usize> = (0..eta_sq.len()).collect();
    order.sort_by(|&a, &b| eta_sq[b].total_cmp(&eta_sq[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&k| eta_sq[k]).sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let target = theta * total;
    let mut sum = 0.0;
    let mut marked = Vec::new();
    for k in order {
        if sum >= target {
            break;
        }
        sum += eta_sq[k];
        marked.push(k);
    }
    marked
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptOptions {
    pub p: usize,
    pub ptilde: usize,
    pub theta: f64,
    /// Stop once the trial space has at least this many DOFs.
    pub max_dofs: usize,
    pub max_iterations: usize,
    pub strategy: SaddleStrategy,
    /// Replaces the default degree of all quadratures.
    pub quad_degree: Option<usize>,
}

/// One solve-estimate-mark pass.
#[derive(Debug, Clone)]
pub struct AdaptStep {
    pub record: RunRecord,
    pub num_triangles: usize,
    /// Triangles marked for the next refinement, empty on the last step.
    pub marked: Vec<usize>,
    pub marked_centroids: Vec<[f64; 2]>,
}

/// Solve, estimate, mark and refine until `max_dofs` or `max_iterations`
/// is reached. Errors are measured against the exact solution of the
/// problem or else against `reference` when given.
pub fn adapt_loop(
    problem: &ProblemSpec,
    opts: &AdaptOptions,
    reference: Option<&dyn PairField>,
) -> Result<Vec<AdaptStep>, SolverError> {
    let ctx = &problem.ctx;
    let reference = match (&problem.exact, reference) {
        (Some(e), _) => Some(Reference::Exact(e)),
        (None, Some(f)) => Some(Reference::Field(f)),
        (None, None) => None,
    };
    let degree = opts.quad_degree.unwrap_or_else(|| error_degree(opts.p, opts.ptilde));
    let degrees = match opts.quad_degree {
        Some(d) => QuadDegrees { matrix: d, data: d },
        None => QuadDegrees::for_orders(opts.p, opts.ptilde),
    };
    let mut mesh = problem.mesh.clone();
    let mut steps = Vec::new();
    for it in 0..opts.max_iterations {
        let start = Instant::now();
        let setup = FoslsSetup::with_degrees(&mesh, opts.p, opts.ptilde, ctx, &problem.data, degrees)?;
        let sol = solve_fosls(&setup.system, opts.strategy)?;
        let ind = indicators(&mesh, &setup.test, ctx, &sol, degree)?;
        let mut rec = RunRecord::new("fosls", opts.p, opts.ptilde, *ctx);
        rec.ndof_trial = setup.trial.dof_count();
        rec.ndof_test = setup.test.free_dof_count();
        rec.h = mesh.max_edge_length();
        rec.iters = sol.iterations;
        if let Some(r) = reference {
            let e = fosls_errors(&mesh, &setup.trial, &setup.test, ctx, &sol, r, degree)?;
            rec.err_l2_phi = e.l2_phi;
            rec.err_u = e.u;
            rec.err_1k = e.one_kappa;
            rec.best_u = best_u_error(&mesh, &setup.trial, r, degree)?;
        }
        rec.set_estimator(ind.total());
        let last = it + 1 == opts.max_iterations || rec.ndof_trial >= opts.max_dofs;
        let marked = if last { Vec::new() } else { dorfler_mark(&ind.eta_sq, opts.theta) };
        rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let marked_centroids = marked.iter().map(|&t| mesh.centroid(t)).collect();
        steps.push(AdaptStep {
            record: rec,
            num_triangles: mesh.num_triangles(),
            marked: marked.clone(),
            marked_centroids,
        });
        if last || marked.is_empty() {
            break;
        }
        mesh = mesh.refine(&marked);
    }
    Ok(steps)
}
