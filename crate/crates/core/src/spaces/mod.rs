//! Finite element spaces on a [`TriMesh`]: continuous and discontinuous
//! Lagrange, Raviart–Thomas, and the boundary-coupled test space.

mod dense;
pub mod lagrange;
pub mod rt;
mod test_space;

use thiserror::Error;

use crate::mesh::{BoundaryLabel, MeshTopology, TriMesh};
use crate::scalar::Real;

pub use lagrange::{LagrangeReference, NodeEntity};
pub use rt::RtReference;
pub use test_space::{CoupledTestSpace, LocalCoupling, Sign, WaveContext};

/// Marker for a local DOF without a global counterpart (removed on Γ_D).
pub const NO_DOF: usize = usize::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("continuous Lagrange spaces need order >= 1")]
    ContinuousOrderZero,
    #[error("order {0} exceeds the supported maximum of 8")]
    OrderTooHigh(usize),
    #[error("space was built on a mesh with {expected} triangles, got {found}")]
    MeshMismatch { expected: usize, found: usize },
    #[error("wavenumber must be positive, got {0}")]
    BadWavenumber(f64),
}

pub const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    LagrangeContinuous,
    LagrangeDiscontinuous,
    RaviartThomas,
}

/// Affine map `x = a + J x̂` of the reference triangle onto a mesh triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap<T> {
    pub origin: [T; 2],
    /// Columns are `b - a` and `c - a`.
    pub jacobian: [[T; 2]; 2],
    pub det: T,
}

impl<T: Real> ElementMap<T> {
    pub fn from_corners(corners: [[T; 2]; 3]) -> Self {
        let [a, b, c] = corners;
        let jacobian = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        ElementMap {
            origin: a,
            jacobian,
            det,
        }
    }

    pub fn point(&self, x: [T; 2]) -> [T; 2] {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * x[0] + j[0][1] * x[1],
            self.origin[1] + j[1][0] * x[0] + j[1][1] * x[1],
        ]
    }

    /// Reference coordinates of the physical point `p`.
    pub fn inverse(&self, p: [T; 2]) -> [T; 2] {
        let j = &self.jacobian;
        let d = [p[0] - self.origin[0], p[1] - self.origin[1]];
        [
            (j[1][1] * d[0] - j[0][1] * d[1]) / self.det,
            (-j[1][0] * d[0] + j[0][0] * d[1]) / self.det,
        ]
    }

    /// Physical gradient `J^{-T} ĝ`.
    pub fn gradient(&self, g: [T; 2]) -> [T; 2] {
        let j = &self.jacobian;
        [
            (j[1][1] * g[0] - j[1][0] * g[1]) / self.det,
            (-j[0][1] * g[0] + j[0][0] * g[1]) / self.det,
        ]
    }

    /// Contravariant Piola transform `J v̂ / det J`.
    pub fn piola(&self, v: [T; 2]) -> [T; 2] {
        let j = &self.jacobian;
        [
            (j[0][0] * v[0] + j[0][1] * v[1]) / self.det,
            (j[1][0] * v[0] + j[1][1] * v[1]) / self.det,
        ]
    }

    pub fn area(&self) -> T {
        self.det.abs() * T::lit(0.5)
    }
}

#[derive(Debug, Clone)]
enum Reference<T> {
    Lagrange(LagrangeReference),
    Rt(RtReference<T>),
}

/// Basis values at a set of points, stored point-major: entry `q * ndofs + i`
/// belongs to point `q` and basis function `i`. Lagrange tables fill
/// `values`/`grads`; Raviart–Thomas tables fill `vectors`/`divs`.
#[derive(Debug, Clone)]
pub struct BasisTable<T> {
    pub ndofs: usize,
    pub npts: usize,
    pub values: Vec<T>,
    pub grads: Vec<[T; 2]>,
    pub vectors: Vec<[T; 2]>,
    pub divs: Vec<T>,
}

impl<T> Default for BasisTable<T> {
    fn default() -> Self {
        BasisTable {
            ndofs: 0,
            npts: 0,
            values: Vec::new(),
            grads: Vec::new(),
            vectors: Vec::new(),
            divs: Vec::new(),
        }
    }
}

/// A DOF-managed finite element space.
#[derive(Debug, Clone)]
pub struct FESpace<T> {
    kind: SpaceKind,
    order: usize,
    dof_count: usize,
    num_triangles: usize,
    local_dim: usize,
    dofs: Vec<usize>,
    /// Orientation sign per local DOF (RT only).
    signs: Vec<i8>,
    reference: Reference<T>,
}

impl<T: Real> FESpace<T> {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn num_triangles(&self) -> usize {
        self.num_triangles
    }

    pub fn is_vector(&self) -> bool {
        self.kind == SpaceKind::RaviartThomas
    }

    /// Global DOFs of triangle `t`, [`NO_DOF`] for removed ones.
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.dofs[t * self.local_dim..(t + 1) * self.local_dim]
    }

    /// Orientation sign of local DOF `i` on triangle `t`.
    pub fn sign(&self, t: usize, i: usize) -> T {
        if self.signs.is_empty() || self.signs[t * self.local_dim + i] > 0 {
            T::one()
        } else {
            -T::one()
        }
    }

    pub fn lagrange_reference(&self) -> Option<&LagrangeReference> {
        match &self.reference {
            Reference::Lagrange(r) => Some(r),
            Reference::Rt(_) => None,
        }
    }

    pub fn check_mesh<M: Real>(&self, mesh: &TriMesh<M>) -> Result<(), SpaceError> {
        if mesh.num_triangles() != self.num_triangles {
            return Err(SpaceError::MeshMismatch {
                expected: self.num_triangles,
                found: mesh.num_triangles(),
            });
        }
        Ok(())
    }

    /// Reference basis at `points`.
    pub fn tabulate(&self, points: &[[T; 2]]) -> BasisTable<T> {
        let n = self.local_dim;
        let mut table = BasisTable {
            ndofs: n,
            npts: points.len(),
            ..Default::default()
        };
        match &self.reference {
            Reference::Lagrange(r) => {
                table.values = vec![T::zero(); n * points.len()];
                table.grads = vec![[T::zero(); 2]; n * points.len()];
                for (q, &x) in points.iter().enumerate() {
                    r.eval_with_grad(
                        x,
                        &mut table.values[q * n..(q + 1) * n],
                        &mut table.grads[q * n..(q + 1) * n],
                    );
                }
            }
            Reference::Rt(r) => {
                table.vectors = vec![[T::zero(); 2]; n * points.len()];
                table.divs = vec![T::zero(); n * points.len()];
                for (q, &x) in points.iter().enumerate() {
                    r.eval(
                        x,
                        &mut table.vectors[q * n..(q + 1) * n],
                        &mut table.divs[q * n..(q + 1) * n],
                    );
                }
            }
        }
        table
    }

    /// Pushes a reference table forward to triangle `t`, applying orientation
    /// signs so the result holds restrictions of the global basis functions.
    pub fn map_table(&self, reference: &BasisTable<T>, map: &ElementMap<T>, t: usize, out: &mut BasisTable<T>) {
        let n = self.local_dim;
        out.ndofs = n;
        out.npts = reference.npts;
        match self.kind {
            SpaceKind::RaviartThomas => {
                out.vectors.resize(reference.vectors.len(), [T::zero(); 2]);
                out.divs.resize(reference.divs.len(), T::zero());
                out.values.clear();
                out.grads.clear();
                for q in 0..reference.npts {
                    for i in 0..n {
                        let s = self.sign(t, i);
                        let k = q * n + i;
                        let v = map.piola(reference.vectors[k]);
                        out.vectors[k] = [s * v[0], s * v[1]];
                        out.divs[k] = s * reference.divs[k] / map.det;
                    }
                }
            }
            _ => {
                out.values.clear();
                out.values.extend_from_slice(&reference.values);
                out.grads.resize(reference.grads.len(), [T::zero(); 2]);
                out.vectors.clear();
                out.divs.clear();
                for (g, &r) in out.grads.iter_mut().zip(&reference.grads) {
                    *g = map.gradient(r);
                }
            }
        }
    }

    /// Basis values on triangle `t` at reference `points`: values and
    /// gradients for Lagrange spaces, Piola-mapped values and divergences
    /// for Raviart–Thomas spaces.
    pub fn evaluate(&self, mesh: &TriMesh<T>, t: usize, points: &[[T; 2]]) -> BasisTable<T> {
        let reference = self.tabulate(points);
        let map = ElementMap::from_corners(mesh.corners(t));
        let mut out = BasisTable::default();
        self.map_table(&reference, &map, t, &mut out);
        out
    }
}

/// Lagrange space of order `p`. With `zero_on_dirichlet` the DOFs on
/// Dirichlet edges are removed (continuous spaces only).
pub fn build_lagrange<T: Real>(
    mesh: &TriMesh<T>,
    p: usize,
    continuous: bool,
    zero_on_dirichlet: bool,
) -> Result<FESpace<T>, SpaceError> {
    if continuous && p == 0 {
        return Err(SpaceError::ContinuousOrderZero);
    }
    if p > MAX_ORDER {
        return Err(SpaceError::OrderTooHigh(p));
    }
    let reference = LagrangeReference::new(p);
    let nloc = reference.len();
    let nt = mesh.num_triangles();
    if !continuous {
        return Ok(FESpace {
            kind: SpaceKind::LagrangeDiscontinuous,
            order: p,
            dof_count: nt * nloc,
            num_triangles: nt,
            local_dim: nloc,
            dofs: (0..nt * nloc).collect(),
            signs: Vec::new(),
            reference: Reference::Lagrange(reference),
        });
    }
    let topo = mesh.topology();
    let nv = mesh.num_vertices();
    let ne = topo.num_edges();
    let per_edge = p - 1;
    let nint = reference.num_interior();
    let mut dofs = Vec::with_capacity(nt * nloc);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let v = tri.vertices;
        for ent in reference.entities() {
            let g = match *ent {
                NodeEntity::Vertex(i) => v[i],
                NodeEntity::Edge(i, l) => {
                    let pos = if v[i] < v[(i + 1) % 3] { l } else { p - l };
                    nv + topo.triangle_edges[t][i] * per_edge + pos - 1
                }
                NodeEntity::Interior(k) => nv + ne * per_edge + t * nint + k,
            };
            dofs.push(g);
        }
    }
    let mut total = nv + ne * per_edge + nt * nint;
    if zero_on_dirichlet {
        let mut removed = vec![false; total];
        for (e, label) in topo.edge_labels.iter().enumerate() {
            if *label == Some(BoundaryLabel::Dirichlet) {
                let [a, b] = topo.edges[e];
                removed[a] = true;
                removed[b] = true;
                for k in 0..per_edge {
                    removed[nv + e * per_edge + k] = true;
                }
            }
        }
        let mut renumber = vec![NO_DOF; total];
        let mut next = 0;
        for (g, r) in removed.iter().enumerate() {
            if !r {
                renumber[g] = next;
                next += 1;
            }
        }
        for d in dofs.iter_mut() {
            *d = renumber[*d];
        }
        total = next;
    }
    Ok(FESpace {
        kind: SpaceKind::LagrangeContinuous,
        order: p,
        dof_count: total,
        num_triangles: nt,
        local_dim: nloc,
        dofs,
        signs: Vec::new(),
        reference: Reference::Lagrange(reference),
    })
}

/// Raviart–Thomas space of index `k` (normal traces of degree `k`).
pub fn build_rt<T: Real>(mesh: &TriMesh<T>, k: usize) -> Result<FESpace<T>, SpaceError> {
    if k > MAX_ORDER {
        return Err(SpaceError::OrderTooHigh(k));
    }
    let topo = mesh.topology();
    build_rt_with(mesh, &topo, k)
}

pub(crate) fn build_rt_with<T: Real>(
    mesh: &TriMesh<T>,
    topo: &MeshTopology,
    k: usize,
) -> Result<FESpace<T>, SpaceError> {
    let reference = RtReference::<T>::new(k);
    let nloc = reference.len();
    let nt = mesh.num_triangles();
    let ne = topo.num_edges();
    let nint = reference.num_interior();
    let mut dofs = Vec::with_capacity(nt * nloc);
    let mut signs = Vec::with_capacity(nt * nloc);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let v = tri.vertices;
        for i in 0..3 {
            let aligned = v[i] < v[(i + 1) % 3];
            for j in 0..=k {
                dofs.push(topo.triangle_edges[t][i] * (k + 1) + j);
                // Reversed edges flip the normal and mirror the Legendre
                // parameter, which contributes (-1)^j.
                signs.push(if aligned || j % 2 == 1 { 1 } else { -1 });
            }
        }
        for m in 0..nint {
            dofs.push(ne * (k + 1) + t * nint + m);
            signs.push(1);
        }
    }
    Ok(FESpace {
        kind: SpaceKind::RaviartThomas,
        order: k,
        dof_count: ne * (k + 1) + nt * nint,
        num_triangles: nt,
        local_dim: nloc,
        dofs,
        signs,
        reference: Reference::Rt(reference),
    })
}
