//! Benchmark problems and the record of one experiment run.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::assembly::ProblemData;
use crate::fields::ExactSolution;
use crate::mesh::MeshError;
use crate::{Context, Mesh, C64};

const NONTRAPPING_MESH: &str = include_str!("../data/nontrapping_initial.mesh");
const TRAPPING_MESH: &str = include_str!("../data/trapping_initial.mesh");

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("direction ({0}, {1}) is not a unit vector")]
    NotUnit(f64, f64),
    #[error("unknown problem `{0}` (expected plane_wave, scatter_nontrap or scatter_trap)")]
    Unknown(String),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
}

/// A benchmark instance on its initial mesh.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub mesh: Mesh,
    pub data: ProblemData,
    pub exact: Option<ExactSolution>,
    pub ctx: Context,
    pub direction: [f64; 2],
    /// Corners where the solution is singular.
    pub singular_corners: Vec<[f64; 2]>,
}

fn check_unit(r: [f64; 2]) -> Result<(), ProblemError> {
    if ((r[0] * r[0] + r[1] * r[1]) - 1.0).abs() > 1e-12 {
        return Err(ProblemError::NotUnit(r[0], r[1]));
    }
    Ok(())
}

/// `φ(x) = exp(-iκ r·x)`.
pub fn plane_wave(kappa: f64, r: [f64; 2], x: [f64; 2]) -> C64 {
    C64::new(0.0, -kappa * (r[0] * x[0] + r[1] * x[1])).exp()
}

/// Robin data `-i (r·n - σ) φ / κ` of the plane wave for outward normal `n`.
fn plane_wave_robin_data(ctx: Context, r: [f64; 2]) -> crate::assembly::BoundaryField {
    let sigma: f64 = ctx.sigma.value();
    Arc::new(move |x, n| {
        let rn = r[0] * n[0] + r[1] * n[1];
        C64::new(0.0, -(rn - sigma) / ctx.kappa) * plane_wave(ctx.kappa, r, x)
    })
}

/// The plane wave solution with its exact pair `(φ, -iφ r)`.
pub fn plane_wave_exact(kappa: f64, r: [f64; 2]) -> ExactSolution {
    ExactSolution {
        phi: Arc::new(move |x| plane_wave(kappa, r, x)),
        u: Arc::new(move |x| {
            let p = plane_wave(kappa, r, x) * C64::new(0.0, -1.0);
            [p * r[0], p * r[1]]
        }),
    }
}

/// Plane wave on the criss-cross mesh of the unit square, Robin everywhere.
pub fn plane_wave_problem(ctx: Context, r: [f64; 2], n: usize) -> Result<ProblemSpec, ProblemError> {
    check_unit(r)?;
    Ok(ProblemSpec {
        name: "plane_wave".into(),
        mesh: Mesh::criss_cross(n)?,
        data: ProblemData {
            g: Some(plane_wave_robin_data(ctx, r)),
            ..Default::default()
        },
        exact: Some(plane_wave_exact(ctx.kappa, r)),
        ctx,
        direction: r,
        singular_corners: Vec::new(),
    })
}

pub fn default_direction(name: &str) -> [f64; 2] {
    let angle = if name == "scatter_trap" { 9.0 * PI / 10.0 } else { PI / 3.0 };
    [angle.cos(), angle.sin()]
}

fn scattering(
    name: &str,
    ctx: Context,
    r: [f64; 2],
    mesh_path: Option<&Path>,
    embedded: &str,
    corners: Vec<[f64; 2]>,
) -> Result<ProblemSpec, ProblemError> {
    check_unit(r)?;
    let mesh = match mesh_path {
        Some(p) => Mesh::load(p)?,
        None => Mesh::from_text(embedded)?,
    };
    Ok(ProblemSpec {
        name: name.into(),
        mesh,
        data: ProblemData {
            g: Some(plane_wave_robin_data(ctx, r)),
            ..Default::default()
        },
        exact: None,
        ctx,
        direction: r,
        singular_corners: corners,
    })
}

/// Unit square minus the arrow-shaped obstacle with corners
/// `(1/2, 1/4)`, `(3/4, 3/4)`, `(1/2, 1/2)`, `(1/4, 3/4)`.
pub fn scattering_nontrapping(ctx: Context, r: [f64; 2], mesh_path: Option<&Path>) -> Result<ProblemSpec, ProblemError> {
    scattering(
        "scatter_nontrap",
        ctx,
        r,
        mesh_path,
        NONTRAPPING_MESH,
        vec![[0.5, 0.25], [0.75, 0.75], [0.25, 0.75]],
    )
}

/// Unit square minus a U-shaped cavity opening towards `+x`.
pub fn scattering_trapping(ctx: Context, r: [f64; 2], mesh_path: Option<&Path>) -> Result<ProblemSpec, ProblemError> {
    scattering(
        "scatter_trap",
        ctx,
        r,
        mesh_path,
        TRAPPING_MESH,
        vec![[0.3, 0.3], [0.3, 0.7], [0.6, 0.3], [0.6, 0.4], [0.6, 0.6], [0.6, 0.7]],
    )
}

/// Registry lookup; `n` sizes the plane-wave mesh.
pub fn by_name(name: &str, ctx: Context, r: Option<[f64; 2]>, n: usize) -> Result<ProblemSpec, ProblemError> {
    let r = r.unwrap_or_else(|| default_direction(name));
    match name {
        "plane_wave" => plane_wave_problem(ctx, r, n),
        "scatter_nontrap" => scattering_nontrapping(ctx, r, None),
        "scatter_trap" => scattering_trapping(ctx, r, None),
        _ => Err(ProblemError::Unknown(name.into())),
    }
}

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub p: usize,
    /// Test order for FOSLS, enrichment for Galerkin pencils.
    pub ptilde: usize,
    pub kappa: f64,
    pub sigma: i32,
    pub ndof_trial: usize,
    pub ndof_test: usize,
    pub h: f64,
    pub err_l2_phi: f64,
    pub err_u: f64,
    pub best_u: f64,
    pub err_1k: f64,
    pub best_1k: f64,
    pub estimator: f64,
    pub effectivity: f64,
    pub pollution: f64,
    pub iters: usize,
    pub wall_ms: f64,
}

impl RunRecord {
    pub const SCHEMA_VERSION: u32 = 1;
    pub const CSV_HEADER: &'static str = "method,p,ptilde,kappa,sigma,ndof_trial,ndof_test,h,err_l2_phi,err_U,best_U,err_1k,best_1k,estimator,effectivity,pollution,iters,wall_ms";

    pub fn new(method: &str, p: usize, ptilde: usize, ctx: Context) -> Self {
        RunRecord {
            method: method.into(),
            p,
            ptilde,
            kappa: ctx.kappa,
            sigma: ctx.sigma.value::<f64>() as i32,
            ndof_trial: 0,
            ndof_test: 0,
            h: f64::NAN,
            err_l2_phi: f64::NAN,
            err_u: f64::NAN,
            best_u: f64::NAN,
            err_1k: f64::NAN,
            best_1k: f64::NAN,
            estimator: f64::NAN,
            effectivity: f64::NAN,
            pollution: f64::NAN,
            iters: 0,
            wall_ms: f64::NAN,
        }
    }

    /// Sets the estimator and the effectivity against `err_u`.
    pub fn set_estimator(&mut self, estimator: f64) {
        self.estimator = estimator;
        self.effectivity = estimator / self.err_u;
    }

    pub fn csv_row(&self) -> String {
        let f = |x: f64| if x.is_nan() { String::new() } else { format!("{x:e}") };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.p,
            self.ptilde,
            self.kappa,
            if self.sigma > 0 { "+1" } else { "-1" },
            self.ndof_trial,
            self.ndof_test,
            f(self.h),
            f(self.err_l2_phi),
            f(self.err_u),
            f(self.best_u),
            f(self.err_1k),
            f(self.best_1k),
            f(self.estimator),
            f(self.effectivity),
            f(self.pollution),
            self.iters,
            f(self.wall_ms),
        )
    }
}
