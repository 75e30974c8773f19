//! Sparse matrices and load vectors of the FOSLS saddle system, the Galerkin
//! method, and the norm Grams.

use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{BoundaryLabel, MeshTopology};
use crate::quadrature::{edge_rule, triangle_rule, QuadratureError};
use crate::spaces::{
    build_lagrange, BasisTable, CoupledTestSpace, ElementMap, FESpace, LocalCoupling, SpaceError, SpaceKind,
    WaveContext, NO_DOF,
};
use crate::sparse::CscMatrix;
use crate::{Mesh, C64};

pub type ScalarField = Arc<dyn Fn([f64; 2]) -> C64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn([f64; 2]) -> [C64; 2] + Send + Sync>;
/// Boundary data as a function of position and outward unit normal.
pub type BoundaryField = Arc<dyn Fn([f64; 2], [f64; 2]) -> C64 + Send + Sync>;

/// Right-hand side data; `None` stands for zero.
#[derive(Clone, Default)]
pub struct ProblemData {
    pub f1: Option<ScalarField>,
    pub f2: Option<VectorField>,
    pub g_d: Option<BoundaryField>,
    pub g: Option<BoundaryField>,
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("incompatible spaces: {0}")]
    Incompatible(String),
}

/// Quadrature degrees for matrix entries and for data integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadDegrees {
    pub matrix: usize,
    pub data: usize,
}

impl QuadDegrees {
    /// `2 max(p, p̃) + 2` for both.
    pub fn for_orders(p: usize, ptilde: usize) -> Self {
        let d = 2 * p.max(ptilde) + 2;
        QuadDegrees { matrix: d, data: d }
    }
}

/// Trial space `S_p × S_p²` for `(φ, u)`, DOFs ordered `φ`, `u_1`, `u_2`.
#[derive(Debug, Clone)]
pub struct TrialSpace {
    scalar: FESpace<f64>,
}

impl TrialSpace {
    pub fn new(mesh: &Mesh, p: usize, continuous: bool) -> Result<Self, SpaceError> {
        Ok(TrialSpace {
            scalar: build_lagrange(mesh, p, continuous, false)?,
        })
    }

    pub fn scalar(&self) -> &FESpace<f64> {
        &self.scalar
    }

    pub fn order(&self) -> usize {
        self.scalar.order()
    }

    pub fn is_continuous(&self) -> bool {
        self.scalar.kind() == SpaceKind::LagrangeContinuous
    }

    /// DOFs per component.
    pub fn component_dofs(&self) -> usize {
        self.scalar.dof_count()
    }

    pub fn dof_count(&self) -> usize {
        3 * self.scalar.dof_count()
    }

    /// Trial DOFs of triangle `t`, component-major.
    pub fn element_dofs(&self, t: usize) -> Vec<usize> {
        let n = self.scalar.dof_count();
        let d = self.scalar.element_dofs(t);
        (0..3).flat_map(|c| d.iter().map(move |&g| c * n + g)).collect()
    }
}

/// Matrices and load of the practical saddle system.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    /// `<B'ψ_j, B'ψ_i>_U` on the free test DOFs.
    pub m_v: CscMatrix,
    /// `<φ_j, B'ψ_i>_U`, test rows and trial columns.
    pub b: CscMatrix,
    /// U-Gram of the trial basis.
    pub m_u: CscMatrix,
    pub q: Vec<C64>,
}

/// `B'(η, v) = (-κ⁻¹ div v - η, κ⁻¹ ∇η - v)` at one point.
pub fn b_prime(kappa: f64, eta: C64, grad_eta: [C64; 2], v: [C64; 2], div_v: C64) -> [C64; 3] {
    let k = 1.0 / kappa;
    [-div_v * k - eta, grad_eta[0] * k - v[0], grad_eta[1] * k - v[1]]
}

/// Reference tables of one space at the interior points and at the points
/// of each of the three reference edges.
pub(crate) struct Tables {
    pub volume: BasisTable<f64>,
    pub edges: [BasisTable<f64>; 3],
}

pub(crate) const EDGE_START: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
pub(crate) const EDGE_TANGENT: [[f64; 2]; 3] = [[1.0, 0.0], [-1.0, 1.0], [0.0, -1.0]];

pub(crate) fn edge_points(i: usize, params: &[f64]) -> Vec<[f64; 2]> {
    params
        .iter()
        .map(|&s| {
            [
                EDGE_START[i][0] + s * EDGE_TANGENT[i][0],
                EDGE_START[i][1] + s * EDGE_TANGENT[i][1],
            ]
        })
        .collect()
}

impl Tables {
    pub fn new(space: &FESpace<f64>, volume: &[[f64; 2]], edge_params: &[f64]) -> Self {
        Tables {
            volume: space.tabulate(volume),
            edges: std::array::from_fn(|i| space.tabulate(&edge_points(i, edge_params))),
        }
    }
}

/// Physical data of local edge `i` of an element: end points, length and
/// outward unit normal.
pub(crate) fn edge_geometry(corners: &[[f64; 2]; 3], i: usize) -> ([f64; 2], [f64; 2], f64, [f64; 2]) {
    let (a, b) = (corners[i], corners[(i + 1) % 3]);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    (a, b, len, [(b[1] - a[1]) / len, (a[0] - b[0]) / len])
}

/// U-valued images `B'φ_l` of the local test basis at every point, laid out
/// `q * nloc + l` with the scalar functions first.
pub(crate) fn test_images(kappa: f64, scalar: &BasisTable<f64>, vector: &BasisTable<f64>, out: &mut Vec<[f64; 3]>) {
    let (ns, nv) = (scalar.ndofs, vector.ndofs);
    let nloc = ns + nv;
    let k = 1.0 / kappa;
    out.clear();
    out.resize(scalar.npts * nloc, [0.0; 3]);
    for q in 0..scalar.npts {
        for l in 0..ns {
            let (v, g) = (scalar.values[q * ns + l], scalar.grads[q * ns + l]);
            out[q * nloc + l] = [-v, k * g[0], k * g[1]];
        }
        for l in 0..nv {
            let (v, d) = (vector.vectors[q * nv + l], vector.divs[q * nv + l]);
            out[q * nloc + ns + l] = [-k * d, -v[0], -v[1]];
        }
    }
}

/// Element coupling as a dense `nloc x nfree` matrix with its free DOFs.
pub(crate) struct ElementCoupling {
    pub free: Vec<usize>,
    pub p: Vec<C64>,
}

impl ElementCoupling {
    pub fn new(test: &CoupledTestSpace<f64>, t: usize, scratch: &mut Vec<LocalCoupling<f64>>) -> Self {
        test.local_map(t, scratch);
        let mut free: Vec<usize> = scratch.iter().map(|c| c.free).collect();
        free.sort_unstable();
        free.dedup();
        let nloc = test.local_dim();
        let nf = free.len();
        let mut p = vec![C64::new(0.0, 0.0); nloc * nf];
        for c in scratch.iter() {
            let j = free.binary_search(&c.free).unwrap();
            p[c.local * nf + j] += c.coeff;
        }
        ElementCoupling { free, p }
    }

    pub fn free_set(test: &CoupledTestSpace<f64>, t: usize, scratch: &mut Vec<LocalCoupling<f64>>) -> Vec<usize> {
        test.local_map(t, scratch);
        let mut free: Vec<usize> = scratch.iter().map(|c| c.free).collect();
        free.sort_unstable();
        free.dedup();
        free
    }

    /// Element values of the local basis expansion of free coefficients.
    pub fn local_coefficients(&self, coeffs: &[C64]) -> Vec<C64> {
        let nf = self.free.len();
        let nloc = self.p.len() / nf.max(1);
        (0..nloc)
            .map(|l| {
                self.free
                    .iter()
                    .enumerate()
                    .map(|(j, &f)| self.p[l * nf + j] * coeffs[f])
                    .sum()
            })
            .collect()
    }
}

fn check(mesh: &Mesh, spaces: &[&FESpace<f64>]) -> Result<(), AssemblyError> {
    for s in spaces {
        s.check_mesh(mesh)?;
    }
    Ok(())
}

/// Assembles `M_V`, `B`, `M_U` and `q`.
pub fn assemble_fosls(
    mesh: &Mesh,
    trial: &TrialSpace,
    test: &CoupledTestSpace<f64>,
    ctx: &WaveContext<f64>,
    data: &ProblemData,
    degrees: QuadDegrees,
) -> Result<SaddleSystem, AssemblyError> {
    check(mesh, &[trial.scalar(), test.scalar(), test.vector()])?;
    let nt = mesh.num_triangles();
    let nfree = test.free_dof_count();
    let ntrial = trial.dof_count();
    let topo = mesh.topology();

    let mut scratch = Vec::new();
    let free_sets: Vec<Vec<usize>> = (0..nt).map(|t| ElementCoupling::free_set(test, t, &mut scratch)).collect();
    let trial_sets: Vec<Vec<usize>> = (0..nt)
        .map(|t| {
            let mut d = trial.element_dofs(t);
            d.sort_unstable();
            d
        })
        .collect();
    let mut m_v = CscMatrix::from_element_sets(nfree, nfree, &free_sets, &free_sets);
    let mut b = CscMatrix::from_element_sets(nfree, ntrial, &free_sets, &trial_sets);
    let mut m_u = CscMatrix::from_element_sets(ntrial, ntrial, &trial_sets, &trial_sets);
    drop(free_sets);
    drop(trial_sets);
    let mut q = vec![C64::new(0.0, 0.0); nfree];

    let rule = triangle_rule::<f64>(degrees.matrix)?;
    let drule = triangle_rule::<f64>(degrees.data)?;
    let erule = edge_rule::<f64>(degrees.data)?;
    let trial_tab = trial.scalar().tabulate(&rule.points);
    let s_tab = Tables::new(test.scalar(), &rule.points, &erule.points);
    let v_tab = Tables::new(test.vector(), &rule.points, &erule.points);
    let s_dtab = test.scalar().tabulate(&drule.points);
    let v_dtab = test.vector().tabulate(&drule.points);

    let np = trial.scalar().local_dim();
    let (ns, nvl) = (test.scalar().local_dim(), test.vector().local_dim());
    let nloc = ns + nvl;
    let mut s_el = BasisTable::default();
    let mut v_el = BasisTable::default();
    let mut images = Vec::new();
    let mut a_loc = vec![0.0; nloc * nloc];
    let mut b_loc = vec![0.0; nloc * 3 * np];
    let mut m_loc = vec![0.0; np * np];
    let has_data = data.f1.is_some() || data.f2.is_some() || data.g.is_some() || data.g_d.is_some();

    for t in 0..nt {
        let corners = mesh.corners(t);
        let map = ElementMap::from_corners(corners);
        let jac = map.det.abs();
        test.scalar().map_table(&s_tab.volume, &map, t, &mut s_el);
        test.vector().map_table(&v_tab.volume, &map, t, &mut v_el);
        test_images(ctx.kappa, &s_el, &v_el, &mut images);

        a_loc.iter_mut().for_each(|x| *x = 0.0);
        b_loc.iter_mut().for_each(|x| *x = 0.0);
        m_loc.iter_mut().for_each(|x| *x = 0.0);
        for (qi, &w) in rule.weights.iter().enumerate() {
            let wq = w * jac;
            let img = &images[qi * nloc..(qi + 1) * nloc];
            for m in 0..nloc {
                let wm = img[m];
                for l in 0..=m {
                    let wl = img[l];
                    a_loc[m * nloc + l] += wq * (wm[0] * wl[0] + wm[1] * wl[1] + wm[2] * wl[2]);
                }
            }
            let nvals = &trial_tab.values[qi * np..(qi + 1) * np];
            for m in 0..nloc {
                for c in 0..3 {
                    let wmc = wq * img[m][c];
                    for (j, &nj) in nvals.iter().enumerate() {
                        b_loc[m * 3 * np + c * np + j] += wmc * nj;
                    }
                }
            }
            for i in 0..np {
                for j in 0..np {
                    m_loc[i * np + j] += wq * nvals[i] * nvals[j];
                }
            }
        }
        for m in 0..nloc {
            for l in 0..m {
                a_loc[l * nloc + m] = a_loc[m * nloc + l];
            }
        }

        let coupling = ElementCoupling::new(test, t, &mut scratch);
        let nf = coupling.free.len();
        // M_V += P^H A P
        let mut ap = vec![C64::new(0.0, 0.0); nloc * nf];
        for m in 0..nloc {
            for l in 0..nloc {
                let a = a_loc[m * nloc + l];
                if a == 0.0 {
                    continue;
                }
                for j in 0..nf {
                    ap[m * nf + j] += coupling.p[l * nf + j] * a;
                }
            }
        }
        for (ia, &fa) in coupling.free.iter().enumerate() {
            for (jb, &fb) in coupling.free.iter().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for m in 0..nloc {
                    s += coupling.p[m * nf + ia].conj() * ap[m * nf + jb];
                }
                m_v.add(fa, fb, s);
            }
        }
        // B += P^H B_loc
        let tdofs = trial.element_dofs(t);
        for (ia, &fa) in coupling.free.iter().enumerate() {
            for (c, &g) in tdofs.iter().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for m in 0..nloc {
                    s += coupling.p[m * nf + ia].conj() * b_loc[m * 3 * np + c];
                }
                b.add(fa, g, s);
            }
        }
        let sd = trial.scalar().element_dofs(t);
        let nc = trial.component_dofs();
        for c in 0..3 {
            for i in 0..np {
                for j in 0..np {
                    m_u.add(c * nc + sd[i], c * nc + sd[j], C64::new(m_loc[i * np + j], 0.0));
                }
            }
        }

        if has_data {
            let q_loc = element_load(
                data,
                &topo,
                t,
                &corners,
                &map,
                test,
                (&s_dtab, &v_dtab),
                &drule.weights,
                &drule.points,
                (&s_tab, &v_tab),
                &erule.points,
                &erule.weights,
            );
            for (ia, &fa) in coupling.free.iter().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for m in 0..nloc {
                    s += coupling.p[m * nf + ia].conj() * q_loc[m];
                }
                q[fa] += s;
            }
        }
    }
    Ok(SaddleSystem { m_v, b, m_u, q })
}

/// Local load `q(φ_m)` for the unconstrained local test basis.
#[allow(clippy::too_many_arguments)]
fn element_load(
    data: &ProblemData,
    topo: &MeshTopology,
    t: usize,
    corners: &[[f64; 2]; 3],
    map: &ElementMap<f64>,
    test: &CoupledTestSpace<f64>,
    (s_dtab, v_dtab): (&BasisTable<f64>, &BasisTable<f64>),
    weights: &[f64],
    points: &[[f64; 2]],
    (s_tab, v_tab): (&Tables, &Tables),
    edge_params: &[f64],
    edge_weights: &[f64],
) -> Vec<C64> {
    let (ns, nv) = (test.scalar().local_dim(), test.vector().local_dim());
    let mut q = vec![C64::new(0.0, 0.0); ns + nv];
    let jac = map.det.abs();
    let mut s_el = BasisTable::default();
    let mut v_el = BasisTable::default();
    if data.f1.is_some() || data.f2.is_some() {
        test.scalar().map_table(s_dtab, map, t, &mut s_el);
        test.vector().map_table(v_dtab, map, t, &mut v_el);
        for (qi, (&w, &xh)) in weights.iter().zip(points).enumerate() {
            let x = map.point(xh);
            let wq = w * jac;
            if let Some(f1) = &data.f1 {
                let f = f1(x) * wq;
                for m in 0..ns {
                    q[m] += f * s_el.values[qi * ns + m];
                }
            }
            if let Some(f2) = &data.f2 {
                let f = f2(x);
                for m in 0..nv {
                    let v = v_el.vectors[qi * nv + m];
                    q[ns + m] += (f[0] * v[0] + f[1] * v[1]) * wq;
                }
            }
        }
    }
    for i in 0..3 {
        let label = match topo.edge_labels[topo.triangle_edges[t][i]] {
            Some(l) => l,
            None => continue,
        };
        let (a, b, len, n) = edge_geometry(corners, i);
        match label {
            BoundaryLabel::Dirichlet => {
                let Some(g_d) = &data.g_d else { continue };
                test.vector().map_table(&v_tab.edges[i], map, t, &mut v_el);
                for (qi, (&s, &w)) in edge_params.iter().zip(edge_weights).enumerate() {
                    let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    let g = g_d(x, n) * (w * len);
                    for m in 0..nv {
                        let v = v_el.vectors[qi * nv + m];
                        q[ns + m] -= g * (v[0] * n[0] + v[1] * n[1]);
                    }
                }
            }
            BoundaryLabel::Neumann | BoundaryLabel::Robin => {
                let Some(gf) = &data.g else { continue };
                test.scalar().map_table(&s_tab.edges[i], map, t, &mut s_el);
                for (qi, (&s, &w)) in edge_params.iter().zip(edge_weights).enumerate() {
                    let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    let g = gf(x, n) * (w * len);
                    for m in 0..ns {
                        q[m] += g * s_el.values[qi * ns + m];
                    }
                }
            }
        }
    }
    q
}

/// Real matrices `K`, `M` and `R` (Robin boundary mass) with rows from
/// `test` and columns from `trial`; both Lagrange on the same mesh.
#[derive(Debug, Clone)]
pub struct GalerkinParts {
    pub k: CscMatrix,
    pub m: CscMatrix,
    pub r: CscMatrix,
}

fn lagrange_sets(space: &FESpace<f64>) -> Vec<Vec<usize>> {
    (0..space.num_triangles())
        .map(|t| {
            let mut d: Vec<usize> = space.element_dofs(t).iter().copied().filter(|&g| g != NO_DOF).collect();
            d.sort_unstable();
            d
        })
        .collect()
}

pub fn assemble_galerkin_parts(
    mesh: &Mesh,
    test: &FESpace<f64>,
    trial: &FESpace<f64>,
    degree: usize,
) -> Result<GalerkinParts, AssemblyError> {
    check(mesh, &[test, trial])?;
    if test.is_vector() || trial.is_vector() {
        return Err(AssemblyError::Incompatible("Galerkin spaces must be Lagrange".into()));
    }
    let topo = mesh.topology();
    let rows = lagrange_sets(test);
    let cols = lagrange_sets(trial);
    let mut k = CscMatrix::from_element_sets(test.dof_count(), trial.dof_count(), &rows, &cols);
    let mut m = k.clone();
    // Robin pattern: only elements with a Robin edge contribute.
    let robin: Vec<bool> = (0..mesh.num_triangles())
        .map(|t| (0..3).any(|i| topo.edge_labels[topo.triangle_edges[t][i]] == Some(BoundaryLabel::Robin)))
        .collect();
    let empty = Vec::new();
    let rrows: Vec<Vec<usize>> = rows.iter().zip(&robin).map(|(r, &b)| if b { r.clone() } else { empty.clone() }).collect();
    let rcols: Vec<Vec<usize>> = cols.iter().zip(&robin).map(|(c, &b)| if b { c.clone() } else { empty.clone() }).collect();
    let mut r = CscMatrix::from_element_sets(test.dof_count(), trial.dof_count(), &rrows, &rcols);

    let rule = triangle_rule::<f64>(degree)?;
    let erule = edge_rule::<f64>(degree)?;
    let tt = Tables::new(test, &rule.points, &erule.points);
    let tr = Tables::new(trial, &rule.points, &erule.points);
    let (na, nb) = (test.local_dim(), trial.local_dim());
    let mut ea = BasisTable::default();
    let mut eb = BasisTable::default();
    let mut kl = vec![0.0; na * nb];
    let mut ml = vec![0.0; na * nb];
    for t in 0..mesh.num_triangles() {
        let corners = mesh.corners(t);
        let map = ElementMap::from_corners(corners);
        let jac = map.det.abs();
        test.map_table(&tt.volume, &map, t, &mut ea);
        trial.map_table(&tr.volume, &map, t, &mut eb);
        kl.iter_mut().for_each(|x| *x = 0.0);
        ml.iter_mut().for_each(|x| *x = 0.0);
        for (qi, &w) in rule.weights.iter().enumerate() {
            let wq = w * jac;
            for i in 0..na {
                let (vi, gi) = (ea.values[qi * na + i], ea.grads[qi * na + i]);
                for j in 0..nb {
                    let (vj, gj) = (eb.values[qi * nb + j], eb.grads[qi * nb + j]);
                    kl[i * nb + j] += wq * (gi[0] * gj[0] + gi[1] * gj[1]);
                    ml[i * nb + j] += wq * vi * vj;
                }
            }
        }
        let (da, db) = (test.element_dofs(t), trial.element_dofs(t));
        for i in 0..na {
            if da[i] == NO_DOF {
                continue;
            }
            for j in 0..nb {
                if db[j] == NO_DOF {
                    continue;
                }
                k.add(da[i], db[j], C64::new(kl[i * nb + j], 0.0));
                m.add(da[i], db[j], C64::new(ml[i * nb + j], 0.0));
            }
        }
        for e in 0..3 {
            if topo.edge_labels[topo.triangle_edges[t][e]] != Some(BoundaryLabel::Robin) {
                continue;
            }
            let (_, _, len, _) = edge_geometry(&corners, e);
            for (qi, &w) in erule.weights.iter().enumerate() {
                let va = &tt.edges[e].values[qi * na..(qi + 1) * na];
                let vb = &tr.edges[e].values[qi * nb..(qi + 1) * nb];
                for i in 0..na {
                    if da[i] == NO_DOF || va[i] == 0.0 {
                        continue;
                    }
                    for j in 0..nb {
                        if db[j] == NO_DOF || vb[j] == 0.0 {
                            continue;
                        }
                        r.add(da[i], db[j], C64::new(w * len * va[i] * vb[j], 0.0));
                    }
                }
            }
        }
    }
    Ok(GalerkinParts { k, m, r })
}

impl GalerkinParts {
    /// `κ⁻² K - M + σ (i/κ) R`
    pub fn operator(&self, ctx: &WaveContext<f64>) -> CscMatrix {
        let kappa = ctx.kappa;
        let km = self
            .k
            .combine(C64::new(1.0 / (kappa * kappa), 0.0), &self.m, C64::new(-1.0, 0.0));
        km.combine(
            C64::new(1.0, 0.0),
            &self.r,
            C64::new(0.0, ctx.sigma.value::<f64>() / kappa),
        )
    }

    /// `κ⁻² K + M`
    pub fn h1k_gram(&self, ctx: &WaveContext<f64>) -> CscMatrix {
        let kappa = ctx.kappa;
        self.k
            .combine(C64::new(1.0 / (kappa * kappa), 0.0), &self.m, C64::new(1.0, 0.0))
    }
}

/// Galerkin matrix and right-hand side on `x` (Dirichlet DOFs removed).
pub fn assemble_galerkin(
    mesh: &Mesh,
    x: &FESpace<f64>,
    ctx: &WaveContext<f64>,
    data: &ProblemData,
    degrees: QuadDegrees,
) -> Result<(CscMatrix, Vec<C64>), AssemblyError> {
    if x.kind() != SpaceKind::LagrangeContinuous {
        return Err(AssemblyError::Incompatible("Galerkin space must be continuous".into()));
    }
    let parts = assemble_galerkin_parts(mesh, x, x, degrees.matrix)?;
    let rhs = galerkin_rhs(mesh, x, ctx, data, degrees.data)?;
    Ok((parts.operator(ctx), rhs))
}

/// `f(η) + ∫ g η̄` with `f(η) = ∫ f1 η̄ + κ⁻¹ f2·∇η̄`.
pub fn galerkin_rhs(
    mesh: &Mesh,
    x: &FESpace<f64>,
    ctx: &WaveContext<f64>,
    data: &ProblemData,
    degree: usize,
) -> Result<Vec<C64>, AssemblyError> {
    x.check_mesh(mesh)?;
    let topo = mesh.topology();
    let rule = triangle_rule::<f64>(degree)?;
    let erule = edge_rule::<f64>(degree)?;
    let tab = Tables::new(x, &rule.points, &erule.points);
    let n = x.local_dim();
    let mut rhs = vec![C64::new(0.0, 0.0); x.dof_count()];
    let mut el = BasisTable::default();
    for t in 0..mesh.num_triangles() {
        let corners = mesh.corners(t);
        let map = ElementMap::from_corners(corners);
        let dofs = x.element_dofs(t);
        let mut local = vec![C64::new(0.0, 0.0); n];
        if data.f1.is_some() || data.f2.is_some() {
            x.map_table(&tab.volume, &map, t, &mut el);
            for (qi, (&w, &xh)) in rule.weights.iter().zip(&rule.points).enumerate() {
                let p = map.point(xh);
                let wq = w * map.det.abs();
                let f1 = data.f1.as_ref().map_or(C64::new(0.0, 0.0), |f| f(p));
                let f2 = data.f2.as_ref().map_or([C64::new(0.0, 0.0); 2], |f| f(p));
                for i in 0..n {
                    let g = el.grads[qi * n + i];
                    local[i] += (f1 * el.values[qi * n + i] + (f2[0] * g[0] + f2[1] * g[1]) / ctx.kappa) * wq;
                }
            }
        }
        if let Some(gf) = &data.g {
            for e in 0..3 {
                match topo.edge_labels[topo.triangle_edges[t][e]] {
                    Some(BoundaryLabel::Neumann | BoundaryLabel::Robin) => {}
                    _ => continue,
                }
                let (a, b, len, nrm) = edge_geometry(&corners, e);
                for (qi, (&s, &w)) in erule.points.iter().zip(&erule.weights).enumerate() {
                    let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    let g = gf(p, nrm) * (w * len);
                    for i in 0..n {
                        local[i] += g * tab.edges[e].values[qi * n + i];
                    }
                }
            }
        }
        for i in 0..n {
            if dofs[i] != NO_DOF {
                rhs[dofs[i]] += local[i];
            }
        }
    }
    Ok(rhs)
}

/// Gram matrix of `‖·‖_{1,κ}` on a Lagrange space.
pub fn assemble_h1k_gram(
    mesh: &Mesh,
    space: &FESpace<f64>,
    ctx: &WaveContext<f64>,
    degree: usize,
) -> Result<CscMatrix, AssemblyError> {
    Ok(assemble_galerkin_parts(mesh, space, space, degree)?.h1k_gram(ctx))
}

/// Matrices of the Galerkin pollution pencil.
#[derive(Debug, Clone)]
pub struct GalerkinPencil {
    /// `(Lφ_j)(φ_i)` on `X`.
    pub l: CscMatrix,
    /// `(Lψ_j)(φ_i)`, rows from `X`, columns from `Y`.
    pub l_tilde: CscMatrix,
    pub m_x: CscMatrix,
    pub m_y: CscMatrix,
}

pub fn assemble_galerkin_pencil(
    mesh: &Mesh,
    x: &FESpace<f64>,
    y: &FESpace<f64>,
    ctx: &WaveContext<f64>,
    degree: usize,
) -> Result<GalerkinPencil, AssemblyError> {
    if y.order() < x.order() {
        return Err(AssemblyError::Incompatible("Y must contain X".into()));
    }
    let xx = assemble_galerkin_parts(mesh, x, x, degree)?;
    let xy = assemble_galerkin_parts(mesh, x, y, degree)?;
    let yy = assemble_galerkin_parts(mesh, y, y, degree)?;
    Ok(GalerkinPencil {
        l: xx.operator(ctx),
        l_tilde: xy.operator(ctx),
        m_x: xx.h1k_gram(ctx),
        m_y: yy.h1k_gram(ctx),
    })
}

/// Values of `B'𝕧` on triangle `t` at reference `points` for free test
/// coefficients `coeffs`.
pub fn apply_b_prime(
    mesh: &Mesh,
    test: &CoupledTestSpace<f64>,
    ctx: &WaveContext<f64>,
    coeffs: &[C64],
    t: usize,
    points: &[[f64; 2]],
) -> Vec<[C64; 3]> {
    let mut scratch = Vec::new();
    let coupling = ElementCoupling::new(test, t, &mut scratch);
    let local = coupling.local_coefficients(coeffs);
    let s = test.scalar().evaluate(mesh, t, points);
    let v = test.vector().evaluate(mesh, t, points);
    let mut images = Vec::new();
    test_images(ctx.kappa, &s, &v, &mut images);
    let nloc = local.len();
    (0..points.len())
        .map(|q| {
            let mut out = [C64::new(0.0, 0.0); 3];
            for (l, c) in local.iter().enumerate() {
                let w = images[q * nloc + l];
                for k in 0..3 {
                    out[k] += c * w[k];
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Sign;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn b_prime_examples() {
        let z = c(0.0, 0.0);
        assert_eq!(b_prime(3.0, c(2.0, 0.0), [z; 2], [z; 2], z), [c(-2.0, 0.0), z, z]);
        let w = [c(1.0, 0.0), c(0.0, 2.0)];
        assert_eq!(b_prime(3.0, z, [z; 2], w, z), [z, -w[0], -w[1]]);
        // η = x1, v = x, κ = 2 at x = (0.3, 0.7)
        let x = [0.3, 0.7];
        let r = b_prime(2.0, c(x[0], 0.0), [c(1.0, 0.0), z], [c(x[0], 0.0), c(x[1], 0.0)], c(2.0, 0.0));
        assert!((r[0] - c(-1.0 - x[0], 0.0)).norm() < 1e-15);
        assert!((r[1] - c(0.5 - x[0], 0.0)).norm() < 1e-15);
        assert!((r[2] - c(-x[1], 0.0)).norm() < 1e-15);
    }

    #[test]
    fn p1_mass_matrix() {
        let mesh = Mesh::criss_cross(1).unwrap();
        let trial = TrialSpace::new(&mesh, 1, false).unwrap();
        let ctx = WaveContext::new(2.0, Sign::Plus).unwrap();
        let test = CoupledTestSpace::new(&mesh, 1, &ctx).unwrap();
        let sys = assemble_fosls(&mesh, &trial, &test, &ctx, &ProblemData::default(), QuadDegrees::for_orders(1, 1)).unwrap();
        let area = mesh.area(0);
        let d = trial.scalar().element_dofs(0);
        for i in 0..3 {
            for j in 0..3 {
                let expected = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((sys.m_u.get(d[i], d[j]).re - expected).abs() < 1e-15);
            }
        }
        assert!(sys.q.iter().all(|v| v.norm() == 0.0));
        assert!(sys.m_v.hermitian_defect() < 1e-14);
        assert!(sys.m_u.hermitian_defect() < 1e-14);
        assert_eq!((sys.b.nrows(), sys.b.ncols()), (test.free_dof_count(), trial.dof_count()));
    }

    #[test]
    fn galerkin_decomposition_and_sign_flip() {
        let mesh = Mesh::criss_cross(2).unwrap();
        let x = build_lagrange(&mesh, 2, true, true).unwrap();
        let plus = WaveContext::new(5.0, Sign::Plus).unwrap();
        let minus = WaveContext::new(5.0, Sign::Minus).unwrap();
        let parts = assemble_galerkin_parts(&mesh, &x, &x, 6).unwrap();
        let (lp, _) = assemble_galerkin(&mesh, &x, &plus, &ProblemData::default(), QuadDegrees::for_orders(2, 2)).unwrap();
        let (lm, _) = assemble_galerkin(&mesh, &x, &minus, &ProblemData::default(), QuadDegrees::for_orders(2, 2)).unwrap();
        for (r, col, v) in lp.iter() {
            let expected = parts.k.get(r, col) / 25.0 - parts.m.get(r, col) + parts.r.get(r, col) * c(0.0, 0.2);
            assert!((v - expected).norm() < 1e-14);
            // Flipping σ conjugates the Robin term only.
            let flipped = parts.k.get(r, col) / 25.0 - parts.m.get(r, col) - parts.r.get(r, col) * c(0.0, 0.2);
            assert!((lm.get(r, col) - flipped).norm() < 1e-14);
        }
    }

    #[test]
    fn h1k_gram_of_constant() {
        let mesh = Mesh::criss_cross(3).unwrap();
        let s = build_lagrange(&mesh, 2, true, false).unwrap();
        let ctx = WaveContext::new(1.0, Sign::Plus).unwrap();
        let g = assemble_h1k_gram(&mesh, &s, &ctx, 6).unwrap();
        let ones = vec![c(1.0, 0.0); s.dof_count()];
        let norm2: C64 = crate::sparse::dot(&ones, &g.mul_vec(&ones));
        assert!((norm2.re - 1.0).abs() < 1e-13);
    }

    #[test]
    fn pencil_nesting() {
        let mesh = Mesh::criss_cross(2).unwrap();
        let ctx = WaveContext::new(4.0, Sign::Plus).unwrap();
        let x = build_lagrange(&mesh, 1, true, true).unwrap();
        let y = build_lagrange(&mesh, 2, true, true).unwrap();
        let pencil = assemble_galerkin_pencil(&mesh, &x, &y, &ctx, 6).unwrap();
        assert_eq!(pencil.l_tilde.nrows(), x.dof_count());
        assert_eq!(pencil.l_tilde.ncols(), y.dof_count());
        // Embed X into Y by nodal interpolation: P1 hat values at P2 nodes.
        let mut e = vec![vec![C64::new(0.0, 0.0); x.dof_count()]; y.dof_count()];
        let xr = x.lagrange_reference().unwrap().clone();
        let yr = y.lagrange_reference().unwrap().clone();
        let mut vals = vec![0.0; xr.len()];
        for t in 0..mesh.num_triangles() {
            for (k, &gy) in y.element_dofs(t).iter().enumerate() {
                if gy == NO_DOF {
                    continue;
                }
                xr.eval(yr.node_point::<f64>(k), &mut vals);
                for (i, &gx) in x.element_dofs(t).iter().enumerate() {
                    if gx != NO_DOF {
                        e[gy][gx] = C64::new(vals[i], 0.0);
                    }
                }
            }
        }
        for j in 0..x.dof_count() {
            let col: Vec<C64> = (0..y.dof_count()).map(|r| e[r][j]).collect();
            let lt = pencil.l_tilde.mul_vec(&col);
            for i in 0..x.dof_count() {
                assert!((lt[i] - pencil.l.get(i, j)).norm() < 1e-13);
            }
        }
    }
}
