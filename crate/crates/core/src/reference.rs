//! Fine-mesh boosted FOSLS solutions standing in for unknown exact ones.

use std::collections::hash_map::DefaultHasher;
use std::fs;
use std::hash::{Hash, Hasher};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::assembly::TrialSpace;
use crate::fields::OwnedTrialField;
use crate::linalg::SaddleStrategy;
use crate::mesh::MeshError;
use crate::problems::ProblemSpec;
use crate::solver::{solve_fosls, FoslsSetup, SolverError};
use crate::spaces::{build_lagrange, SpaceError};
use crate::{Mesh, TestSpace, C64};

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("reference cache: {0}")]
    Io(#[from] io::Error),
    #[error("reference cache mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("reference cache file {0} is corrupt")]
    Corrupt(PathBuf),
}

impl From<SpaceError> for ReferenceError {
    fn from(e: SpaceError) -> Self {
        ReferenceError::Solver(e.into())
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceOptions {
    pub p: usize,
    pub ptilde: usize,
    /// Minimal trial DOF count of the reference discretization.
    pub target_dofs: usize,
    /// Extra bisection rounds at the singular corners before uniform
    /// refinement.
    pub corner_rounds: usize,
    pub cache_dir: Option<PathBuf>,
}

impl ReferenceOptions {
    pub fn new(target_dofs: usize) -> Self {
        ReferenceOptions {
            p: 4,
            ptilde: 6,
            target_dofs,
            corner_rounds: 4,
            cache_dir: None,
        }
    }
}

fn cache_key(problem: &ProblemSpec, opts: &ReferenceOptions) -> u64 {
    let mut h = DefaultHasher::new();
    problem.name.hash(&mut h);
    problem.ctx.kappa.to_bits().hash(&mut h);
    problem.ctx.sigma.hash(&mut h);
    problem.direction.map(f64::to_bits).hash(&mut h);
    problem.mesh.to_text().hash(&mut h);
    (opts.p, opts.ptilde, opts.target_dofs, opts.corner_rounds).hash(&mut h);
    h.finish()
}

/// Mesh of the reference computation.
pub fn reference_mesh(problem: &ProblemSpec, opts: &ReferenceOptions) -> Result<Mesh, SpaceError> {
    let mut mesh = problem.mesh.refine_near_vertices(&problem.singular_corners, opts.corner_rounds);
    while 3 * build_lagrange(&mesh, opts.p, true, false)?.dof_count() < opts.target_dofs {
        mesh = mesh.refine_uniform();
    }
    Ok(mesh)
}

fn write_coeffs(path: &Path, u: &[C64], v: &[C64]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(16 + 16 * (u.len() + v.len()));
    buf.extend_from_slice(&(u.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for z in u.iter().chain(v) {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    fs::File::create(&tmp)?.write_all(&buf)?;
    fs::rename(tmp, path)
}

fn read_coeffs(path: &Path) -> Result<(Vec<C64>, Vec<C64>), ReferenceError> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let corrupt = || ReferenceError::Corrupt(path.to_path_buf());
    let word = |k: usize| -> Option<[u8; 8]> { buf.get(8 * k..8 * k + 8)?.try_into().ok() };
    let nu = u64::from_le_bytes(word(0).ok_or_else(corrupt)?) as usize;
    let nv = u64::from_le_bytes(word(1).ok_or_else(corrupt)?) as usize;
    if buf.len() != 16 + 16 * (nu + nv) {
        return Err(corrupt());
    }
    let mut vals = (0..nu + nv).map(|i| {
        let re = f64::from_le_bytes(word(2 + 2 * i).unwrap());
        let im = f64::from_le_bytes(word(3 + 2 * i).unwrap());
        C64::new(re, im)
    });
    let u = vals.by_ref().take(nu).collect();
    let v = vals.collect();
    Ok((u, v))
}

/// Boosted FOSLS solution of order `(p, p̃)` on a refinement of the
/// problem's initial mesh, read from or stored in the cache directory.
pub fn reference_solution(
    problem: &ProblemSpec,
    opts: &ReferenceOptions,
    strategy: SaddleStrategy,
) -> Result<OwnedTrialField, ReferenceError> {
    let ctx = problem.ctx;
    let paths = opts.cache_dir.as_ref().map(|d| {
        let stem = format!("reference-{:016x}", cache_key(problem, opts));
        (d.join(format!("{stem}.mesh")), d.join(format!("{stem}.bin")))
    });
    if let Some((mp, cp)) = &paths {
        if mp.exists() && cp.exists() {
            let mesh = Mesh::load(mp)?;
            let (u, v) = read_coeffs(cp)?;
            let trial = TrialSpace::new(&mesh, opts.p, true)?;
            let test = TestSpace::new(&mesh, opts.ptilde, &ctx)?;
            if u.len() != trial.dof_count() || v.len() != test.free_dof_count() {
                return Err(ReferenceError::Corrupt(cp.clone()));
            }
            return Ok(OwnedTrialField {
                mesh: Arc::new(mesh),
                trial,
                test,
                ctx,
                u,
                v,
            });
        }
    }
    let mesh = reference_mesh(problem, opts)?;
    let setup = FoslsSetup::new(&mesh, opts.p, opts.ptilde, &ctx, &problem.data)?;
    let sol = solve_fosls(&setup.system, strategy)?;
    if let Some((mp, cp)) = &paths {
        fs::create_dir_all(mp.parent().unwrap_or(Path::new(".")))?;
        mesh.save(mp)?;
        write_coeffs(cp, &sol.u, &sol.v)?;
    }
    Ok(OwnedTrialField {
        mesh: Arc::new(mesh),
        trial: setup.trial,
        test: setup.test,
        ctx,
        u: sol.u,
        v: sol.v,
    })
}
