//! FOSLS, LL* and Galerkin solves, and both pollution factors.

use thiserror::Error;

use crate::assembly::{
    assemble_fosls, assemble_galerkin, assemble_galerkin_pencil, AssemblyError, ProblemData, QuadDegrees, SaddleSystem,
    TrialSpace,
};
use crate::fields::{SumField, TestImageField, TrialField};
use crate::linalg::{
    smallest_gen_eig_galerkin, smallest_gen_eig_schur, EigenOptions, LinalgError, SaddleSolver, SaddleStrategy,
    SparseCholesky, SparseLu,
};
use crate::sparse::{dot, norm, CscMatrix};
use crate::spaces::{build_lagrange, SpaceError};
use crate::{Context, Mesh, Space, TestSpace, C64};

/// Relative residual accepted from every direct solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{what} residual {residual:.3e} exceeds {RESIDUAL_TOL:e}")]
    Residual { what: &'static str, residual: f64 },
}

/// Spaces and assembled saddle system of one FOSLS discretization.
pub struct FoslsSetup {
    pub trial: TrialSpace,
    pub test: TestSpace,
    pub system: SaddleSystem,
    pub degrees: QuadDegrees,
}

impl FoslsSetup {
    /// Continuous trial order `p`, test order `ptilde`.
    pub fn new(mesh: &Mesh, p: usize, ptilde: usize, ctx: &Context, data: &ProblemData) -> Result<Self, SolverError> {
        Self::with_degrees(mesh, p, ptilde, ctx, data, QuadDegrees::for_orders(p, ptilde))
    }

    pub fn with_degrees(
        mesh: &Mesh,
        p: usize,
        ptilde: usize,
        ctx: &Context,
        data: &ProblemData,
        degrees: QuadDegrees,
    ) -> Result<Self, SolverError> {
        let trial = TrialSpace::new(mesh, p, true)?;
        let test = TestSpace::new(mesh, ptilde, ctx)?;
        let system = assemble_fosls(mesh, &trial, &test, ctx, data, degrees)?;
        Ok(FoslsSetup {
            trial,
            test,
            system,
            degrees,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FoslsSolution {
    /// Trial coefficients of `𝕦^δ`.
    pub u: Vec<C64>,
    /// Free test coefficients of `𝕧^δ`.
    pub v: Vec<C64>,
    /// `‖B^H v‖ / ‖q‖`.
    pub orthogonality: f64,
    /// `‖M_V v + B u - q‖ / ‖q‖`.
    pub residual: f64,
    /// `‖B'𝕧^δ‖_U`.
    pub estimator: f64,
    pub iterations: usize,
}

fn relative(r: &[C64], scale: f64) -> f64 {
    if scale == 0.0 {
        norm(r)
    } else {
        norm(r) / scale
    }
}

fn block_residuals(sys: &SaddleSystem, v: &[C64], u: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let mv = sys.m_v.mul_vec(v);
    let bu = sys.b.mul_vec(u);
    let r1 = (0..v.len()).map(|i| sys.q[i] - mv[i] - bu[i]).collect();
    let r2 = sys.b.adjoint_mul_vec(v).iter().map(|x| -x).collect();
    (r1, r2)
}

/// Solves `M_V v + B u = q`, `B^H v = 0` with one step of iterative
/// refinement when the first residual is above round-off level.
pub fn solve_fosls(sys: &SaddleSystem, strategy: SaddleStrategy) -> Result<FoslsSolution, SolverError> {
    let qn = norm(&sys.q);
    let nv = sys.m_v.nrows();
    let nu = sys.m_u.nrows();
    if qn == 0.0 {
        return Ok(FoslsSolution {
            u: vec![C64::new(0.0, 0.0); nu],
            v: vec![C64::new(0.0, 0.0); nv],
            orthogonality: 0.0,
            residual: 0.0,
            estimator: 0.0,
            iterations: 0,
        });
    }
    let solver = SaddleSolver::new(&sys.m_v, &sys.b, &sys.m_u, strategy)?;
    let zero = vec![C64::new(0.0, 0.0); nu];
    let first = solver.solve(&sys.q, &zero)?;
    let (mut v, mut u, mut iterations) = (first.v, first.u, first.iterations);
    let (r1, r2) = block_residuals(sys, &v, &u);
    if relative(&r1, qn).max(relative(&r2, qn)) > 1e-13 {
        let corr = solver.solve(&r1, &r2)?;
        v.iter_mut().zip(&corr.v).for_each(|(a, b)| *a += b);
        u.iter_mut().zip(&corr.u).for_each(|(a, b)| *a += b);
        iterations += corr.iterations;
    }
    let (r1, r2) = block_residuals(sys, &v, &u);
    let residual = relative(&r1, qn);
    let orthogonality = relative(&r2, qn);
    if residual > RESIDUAL_TOL {
        return Err(SolverError::Residual {
            what: "saddle first block",
            residual,
        });
    }
    if orthogonality > RESIDUAL_TOL {
        return Err(SolverError::Residual {
            what: "saddle orthogonality",
            residual: orthogonality,
        });
    }
    let estimator = dot(&v, &sys.m_v.mul_vec(&v)).re.max(0.0).sqrt();
    Ok(FoslsSolution {
        u,
        v,
        orthogonality,
        residual,
        estimator,
        iterations,
    })
}

/// `𝕦^δ + B'𝕧^δ`.
pub fn boosted<'a>(
    mesh: &'a Mesh,
    trial: &'a TrialSpace,
    test: &'a TestSpace,
    ctx: &'a Context,
    sol: &'a FoslsSolution,
) -> SumField<TrialField<'a>, TestImageField<'a>> {
    SumField(
        TrialField {
            mesh,
            space: trial,
            coeffs: &sol.u,
        },
        TestImageField {
            mesh,
            test,
            ctx,
            coeffs: &sol.v,
        },
    )
}

/// `M_V v = q`; the approximation of `𝕦` is `B'𝕧`.
pub fn solve_ll_star(m_v: &CscMatrix, q: &[C64]) -> Result<Vec<C64>, SolverError> {
    if norm(q) == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); q.len()]);
    }
    let v = SparseCholesky::new(m_v)?.solve(q);
    let r: Vec<C64> = m_v.mul_vec(&v).iter().zip(q).map(|(a, b)| a - b).collect();
    let residual = norm(&r) / norm(q);
    if residual > RESIDUAL_TOL {
        return Err(SolverError::Residual { what: "LL*", residual });
    }
    Ok(v)
}

/// Direct solve of `L x = rhs` with one refinement step.
pub fn solve_galerkin(l: &CscMatrix, rhs: &[C64]) -> Result<Vec<C64>, SolverError> {
    let scale = norm(rhs);
    if scale == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); rhs.len()]);
    }
    let lu = SparseLu::new(l)?;
    let mut x = lu.solve(rhs);
    let res = |x: &[C64]| -> Vec<C64> { rhs.iter().zip(l.mul_vec(x)).map(|(b, a)| b - a).collect() };
    let r = res(&x);
    if norm(&r) / scale > 1e-13 {
        x.iter_mut().zip(lu.solve(&r)).for_each(|(a, b)| *a += b);
    }
    let residual = norm(&res(&x)) / scale;
    if !(residual <= RESIDUAL_TOL) {
        return Err(SolverError::Residual {
            what: "Galerkin",
            residual,
        });
    }
    Ok(x)
}

/// Galerkin space (Dirichlet DOFs removed) and its solution.
pub fn galerkin_solution(
    mesh: &Mesh,
    p: usize,
    ctx: &Context,
    data: &ProblemData,
) -> Result<(Space, Vec<C64>), SolverError> {
    let x = build_lagrange(mesh, p, true, true)?;
    let (l, rhs) = assemble_galerkin(mesh, &x, ctx, data, QuadDegrees::for_orders(p, p))?;
    let coeffs = solve_galerkin(&l, &rhs)?;
    Ok((x, coeffs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fosls,
    Galerkin,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fosls => "fosls",
            Method::Galerkin => "galerkin",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PollutionReport {
    pub method: Method,
    pub kappa: f64,
    pub p: usize,
    /// Test order for FOSLS, `p + q` for Galerkin.
    pub ptilde: usize,
    pub gamma: f64,
    pub factor: f64,
    pub ndof_trial: usize,
    pub ndof_test: usize,
    pub iterations: usize,
}

fn report(method: Method, ctx: &Context, p: usize, ptilde: usize, lambda: f64, dofs: (usize, usize), iterations: usize) -> PollutionReport {
    // Round-off can push λ marginally above its bound 1.
    let gamma = lambda.sqrt().min(1.0);
    PollutionReport {
        method,
        kappa: ctx.kappa,
        p,
        ptilde,
        gamma,
        factor: 1.0 / gamma,
        ndof_trial: dofs.0,
        ndof_test: dofs.1,
        iterations,
    }
}

/// `γ = sqrt(λ_min)` of `(B^H M_V^{-1} B, M_U)`.
pub fn pollution_fosls(
    mesh: &Mesh,
    p: usize,
    ptilde: usize,
    ctx: &Context,
    opts: &EigenOptions,
) -> Result<PollutionReport, SolverError> {
    let setup = FoslsSetup::new(mesh, p, ptilde, ctx, &ProblemData::default())?;
    let FoslsSetup { trial, test, system, .. } = setup;
    let dofs = (trial.dof_count(), test.free_dof_count());
    drop(test);
    let SaddleSystem { m_v, b, m_u, .. } = system;
    let res = smallest_gen_eig_schur(m_v, &b, &m_u, opts)?;
    Ok(report(Method::Fosls, ctx, p, ptilde, res.lambda_min, dofs, res.iterations))
}

/// `γ̂` of the Galerkin method on `S_p` with the dual norm taken over
/// `S_{p+q}`.
pub fn pollution_galerkin(
    mesh: &Mesh,
    p: usize,
    q: usize,
    ctx: &Context,
    opts: &EigenOptions,
) -> Result<PollutionReport, SolverError> {
    let x = build_lagrange(mesh, p, true, true)?;
    let y = build_lagrange(mesh, p + q, true, true)?;
    let pencil = assemble_galerkin_pencil(mesh, &x, &y, ctx, 2 * (p + q) + 2)?;
    let res = smallest_gen_eig_galerkin(&pencil.l, &pencil.l_tilde, &pencil.m_x, &pencil.m_y, opts)?;
    Ok(report(
        Method::Galerkin,
        ctx,
        p,
        p + q,
        res.lambda_min,
        (x.dof_count(), y.dof_count()),
        res.iterations,
    ))
}

/// `2πp / (κh)`.
pub fn points_per_wavelength(p: usize, kappa: f64, h: f64) -> f64 {
    2.0 * std::f64::consts::PI * p as f64 / (kappa * h)
}
