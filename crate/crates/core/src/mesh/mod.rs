//! Conforming triangulations of planar polygonal domains.
//!
//! A [`TriMesh`] stores vertex coordinates, positively oriented triangles
//! together with their newest-vertex-bisection refinement edge, and the list of
//! labelled boundary edges. Local edge `i` of a triangle joins its vertices `i`
//! and `(i + 1) % 3`.

mod io;
mod locate;
mod refine;
mod topology;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::scalar::Real;

pub use locate::PointLocator;
pub use topology::{MeshTopology, NO_TRIANGLE};

/// Boundary condition attached to a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryLabel {
    Dirichlet,
    Neumann,
    Robin,
}

impl BoundaryLabel {
    pub fn code(self) -> char {
        match self {
            BoundaryLabel::Dirichlet => 'D',
            BoundaryLabel::Neumann => 'N',
            BoundaryLabel::Robin => 'R',
        }
    }
}

impl fmt::Display for BoundaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl FromStr for BoundaryLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "D" => Ok(BoundaryLabel::Dirichlet),
            "N" => Ok(BoundaryLabel::Neumann),
            "R" => Ok(BoundaryLabel::Robin),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triangle {
    pub vertices: [usize; 3],
    /// Local index of the refinement edge.
    pub refine_edge: u8,
}

impl Triangle {
    /// Vertices rotated so that the refinement edge comes first:
    /// `(a, b, newest)` with `a -> b` the refinement edge.
    pub fn rotated(&self) -> [usize; 3] {
        let e = self.refine_edge as usize;
        [
            self.vertices[e],
            self.vertices[(e + 1) % 3],
            self.vertices[(e + 2) % 3],
        ]
    }

    pub fn edge(&self, local: usize) -> [usize; 2] {
        [self.vertices[local], self.vertices[(local + 1) % 3]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub label: BoundaryLabel,
}

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected {expected} {what} lines, found {found}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: vertex index {index} out of range (vertex count {count})")]
    IndexOutOfRange {
        line: usize,
        index: usize,
        count: usize,
    },
    #[error("line {line}: refinement edge {value} is not in 0..3")]
    BadRefineEdge { line: usize, value: usize },
    #[error("line {line}: unknown boundary label `{label}`")]
    BadLabel { line: usize, label: String },
    #[error("boundary edge ({0}, {1}) carries no label")]
    UnlabeledBoundaryEdge(usize, usize),
    #[error("edge ({0}, {1}) is labelled more than once")]
    DuplicateLabel(usize, usize),
    #[error("labelled edge ({0}, {1}) is not a boundary edge of the triangulation")]
    LabelOnInteriorEdge(usize, usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonConforming(usize, usize),
    #[error("triangle {0} is degenerate or negatively oriented")]
    BadOrientation(usize),
    #[error("mesh has no triangles")]
    Empty,
    #[error("criss-cross mesh needs at least one cell per direction")]
    ZeroCells,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Conforming triangulation with NVB tags and labelled boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh<T> {
    vertices: Vec<[T; 2]>,
    triangles: Vec<Triangle>,
    boundary: Vec<BoundaryEdge>,
    generation: Vec<u32>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<T: Real> TriMesh<T> {
    /// Builds and validates a mesh. Every triangle starts at generation 0.
    pub fn new(
        vertices: Vec<[T; 2]>,
        triangles: Vec<Triangle>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let generation = vec![0; triangles.len()];
        let mesh = TriMesh {
            vertices,
            triangles,
            boundary,
            generation,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Builds a mesh whose refinement edges are chosen as the longest edge of
    /// every triangle, ties going to the edge whose opposite vertex has the
    /// smallest index.
    pub fn with_longest_edge_tags(
        vertices: Vec<[T; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let tris = triangles
            .into_iter()
            .map(|v| Triangle {
                vertices: v,
                refine_edge: longest_edge(&vertices, v),
            })
            .collect();
        Self::new(vertices, tris, boundary)
    }

    pub(crate) fn from_parts_unchecked(
        vertices: Vec<[T; 2]>,
        triangles: Vec<Triangle>,
        boundary: Vec<BoundaryEdge>,
        generation: Vec<u32>,
    ) -> Self {
        TriMesh {
            vertices,
            triangles,
            boundary,
            generation,
        }
    }

    /// Uniform criss-cross triangulation of the unit square: `n x n` cells,
    /// each split into four isosceles right triangles by its diagonals. Every
    /// boundary edge is labelled Robin.
    pub fn criss_cross(n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroCells);
        }
        let h = T::one() / T::of(n);
        let half = T::lit(0.5);
        let corner = |i: usize, j: usize| j * (n + 1) + i;
        let center = |i: usize, j: usize| (n + 1) * (n + 1) + j * n + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1) + n * n);
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([T::of(i) * h, T::of(j) * h]);
            }
        }
        for j in 0..n {
            for i in 0..n {
                vertices.push([(T::of(i) + half) * h, (T::of(j) + half) * h]);
            }
        }
        let mut triangles = Vec::with_capacity(4 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (c00, c10, c11, c01) = (
                    corner(i, j),
                    corner(i + 1, j),
                    corner(i + 1, j + 1),
                    corner(i, j + 1),
                );
                let m = center(i, j);
                for (a, b) in [(c00, c10), (c10, c11), (c11, c01), (c01, c00)] {
                    triangles.push(Triangle {
                        vertices: [a, b, m],
                        refine_edge: 0,
                    });
                }
            }
        }
        let mut boundary = Vec::with_capacity(4 * n);
        for i in 0..n {
            boundary.push([corner(i, 0), corner(i + 1, 0)]);
        }
        for j in 0..n {
            boundary.push([corner(n, j), corner(n, j + 1)]);
        }
        for i in (0..n).rev() {
            boundary.push([corner(i + 1, n), corner(i, n)]);
        }
        for j in (0..n).rev() {
            boundary.push([corner(0, j + 1), corner(0, j)]);
        }
        let boundary = boundary
            .into_iter()
            .map(|vertices| BoundaryEdge {
                vertices,
                label: BoundaryLabel::Robin,
            })
            .collect();
        Self::new(vertices, triangles, boundary)
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn generation(&self) -> &[u32] {
        &self.generation
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [[T; 2]; 3] {
        let v = self.triangles[t].vertices;
        [
            self.vertices[v[0]],
            self.vertices[v[1]],
            self.vertices[v[2]],
        ]
    }

    /// Signed area of triangle `t`.
    pub fn area(&self, t: usize) -> T {
        let [a, b, c] = self.corners(t);
        signed_area(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> [T; 2] {
        let [a, b, c] = self.corners(t);
        let three = T::lit(3.0);
        [(a[0] + b[0] + c[0]) / three, (a[1] + b[1] + c[1]) / three]
    }

    /// Longest edge length over all triangles.
    pub fn max_edge_length(&self) -> T {
        (0..self.num_triangles())
            .map(|t| self.diameter(t))
            .fold(T::zero(), T::max)
    }

    pub fn diameter(&self, t: usize) -> T {
        let c = self.corners(t);
        (0..3)
            .map(|i| distance(c[i], c[(i + 1) % 3]))
            .fold(T::zero(), T::max)
    }

    /// Smallest interior angle (radians) of triangle `t`.
    pub fn min_angle(&self, t: usize) -> T {
        let c = self.corners(t);
        (0..3)
            .map(|i| {
                let p = c[i];
                let u = sub(c[(i + 1) % 3], p);
                let v = sub(c[(i + 2) % 3], p);
                let cos = (u[0] * v[0] + u[1] * v[1]) / (norm(u) * norm(v));
                cos.max(-T::one()).min(T::one()).acos()
            })
            .fold(T::infinity(), T::min)
    }

    /// `h_min = min |K|^{1/2}` and `h_max = max |K|^{1/2}`.
    pub fn area_mesh_sizes(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for t in 0..self.num_triangles() {
            let h = self.area(t).sqrt();
            lo = lo.min(h);
            hi = hi.max(h);
        }
        (lo, hi)
    }

    /// Checks orientation, conformity and the boundary labelling.
    pub fn validate(&self) -> Result<(), MeshError> {
        if self.triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let nv = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&bad) = tri.vertices.iter().find(|&&v| v >= nv) {
                return Err(MeshError::IndexOutOfRange {
                    line: 0,
                    index: bad,
                    count: nv,
                });
            }
            if tri.refine_edge > 2 {
                return Err(MeshError::BadRefineEdge {
                    line: 0,
                    value: tri.refine_edge as usize,
                });
            }
            if !(self.area(t) > T::zero()) {
                return Err(MeshError::BadOrientation(t));
            }
        }
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for tri in &self.triangles {
            for i in 0..3 {
                let [a, b] = tri.edge(i);
                *count.entry(edge_key(a, b)).or_insert(0) += 1;
            }
        }
        if let Some((&(a, b), _)) = count.iter().find(|(_, &c)| c > 2) {
            return Err(MeshError::NonConforming(a, b));
        }
        let mut labelled: HashMap<(usize, usize), BoundaryLabel> = HashMap::new();
        for edge in &self.boundary {
            let [a, b] = edge.vertices;
            if a >= nv || b >= nv {
                return Err(MeshError::IndexOutOfRange {
                    line: 0,
                    index: a.max(b),
                    count: nv,
                });
            }
            let key = edge_key(a, b);
            if count.get(&key) != Some(&1) {
                return Err(MeshError::LabelOnInteriorEdge(a, b));
            }
            if labelled.insert(key, edge.label).is_some() {
                return Err(MeshError::DuplicateLabel(a, b));
            }
        }
        // Deterministic report of the first unlabelled boundary edge.
        for tri in &self.triangles {
            for i in 0..3 {
                let [a, b] = tri.edge(i);
                let key = edge_key(a, b);
                if count[&key] == 1 && !labelled.contains_key(&key) {
                    return Err(MeshError::UnlabeledBoundaryEdge(a, b));
                }
            }
        }
        Ok(())
    }

    /// Label of every boundary edge keyed by its sorted vertex pair.
    pub fn boundary_labels(&self) -> HashMap<(usize, usize), BoundaryLabel> {
        self.boundary
            .iter()
            .map(|e| (edge_key(e.vertices[0], e.vertices[1]), e.label))
            .collect()
    }

    /// Returns a copy whose boundary labels are recomputed by `select` from
    /// the edge end points and the current label.
    pub fn relabel(
        &self,
        mut select: impl FnMut([T; 2], [T; 2], BoundaryLabel) -> BoundaryLabel,
    ) -> Self {
        let mut out = self.clone();
        for edge in &mut out.boundary {
            let [a, b] = edge.vertices;
            edge.label = select(self.vertices[a], self.vertices[b], edge.label);
        }
        out
    }

    /// Refines with newest vertex bisection; see [`refine`](refine::refine_nvb).
    pub fn refine(&self, marked: &[usize]) -> Self {
        refine::refine_nvb(self, marked)
    }

    /// One uniform NVB round: every triangle is bisected once or more.
    pub fn refine_uniform(&self) -> Self {
        let all: Vec<usize> = (0..self.num_triangles()).collect();
        self.refine(&all)
    }

    /// Extra NVB rounds restricted to the triangles touching `corners`.
    pub fn refine_near_vertices(&self, corners: &[[T; 2]], rounds: usize) -> Self {
        let tol = T::lit(1e-12);
        let mut mesh = self.clone();
        for _ in 0..rounds {
            let marked: Vec<usize> = (0..mesh.num_triangles())
                .filter(|&t| {
                    mesh.corners(t).iter().any(|p| {
                        corners
                            .iter()
                            .any(|c| (p[0] - c[0]).abs() < tol && (p[1] - c[1]).abs() < tol)
                    })
                })
                .collect();
            mesh = mesh.refine(&marked);
        }
        mesh
    }

    pub fn topology(&self) -> MeshTopology {
        MeshTopology::new(self)
    }
}

pub(crate) fn signed_area<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2]) -> T {
    T::lit(0.5) * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn sub<T: Real>(a: [T; 2], b: [T; 2]) -> [T; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm<T: Real>(a: [T; 2]) -> T {
    (a[0] * a[0] + a[1] * a[1]).sqrt()
}

pub(crate) fn distance<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    norm(sub(a, b))
}

fn longest_edge<T: Real>(vertices: &[[T; 2]], v: [usize; 3]) -> u8 {
    let mut best = 0usize;
    let mut best_len = T::neg_infinity();
    for i in 0..3 {
        let len = distance(vertices[v[i]], vertices[v[(i + 1) % 3]]);
        let opposite = v[(i + 2) % 3];
        let tie = (len - best_len).abs() <= T::lit(1e-12) * len;
        if (len > best_len && !tie) || (tie && opposite < v[(best + 2) % 3]) {
            best = i;
            best_len = len.max(best_len);
        }
    }
    best as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criss_cross_counts() {
        let m = TriMesh::<f64>::criss_cross(1).unwrap();
        assert_eq!((m.num_triangles(), m.num_vertices()), (4, 5));
        let m = TriMesh::<f64>::criss_cross(4).unwrap();
        assert_eq!((m.num_triangles(), m.num_vertices()), (64, 41));
        for n in 1..=9 {
            let m = TriMesh::<f64>::criss_cross(n).unwrap();
            assert_eq!(m.num_triangles(), 4 * n * n);
            assert_eq!(m.num_vertices(), (n + 1) * (n + 1) + n * n);
            assert_eq!(m.boundary().len(), 4 * n);
        }
    }

    #[test]
    fn criss_cross_longest_edge() {
        let m = TriMesh::<f64>::criss_cross(80).unwrap();
        assert!((m.max_edge_length() - 1.0 / 80.0).abs() < 1e-15);
        let total: f64 = (0..m.num_triangles()).map(|t| m.area(t)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn criss_cross_tags_are_longest_edges() {
        let m = TriMesh::<f64>::criss_cross(3).unwrap();
        let retagged = TriMesh::with_longest_edge_tags(
            m.vertices().to_vec(),
            m.triangles().iter().map(|t| t.vertices).collect(),
            m.boundary().to_vec(),
        )
        .unwrap();
        assert_eq!(m, retagged);
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(matches!(
            TriMesh::<f64>::criss_cross(0),
            Err(MeshError::ZeroCells)
        ));
    }

    #[test]
    fn detects_bad_meshes() {
        let m = TriMesh::<f64>::criss_cross(1).unwrap();
        // Clockwise triangle.
        let mut tris = m.triangles().to_vec();
        tris[0].vertices.swap(0, 1);
        assert!(matches!(
            TriMesh::new(m.vertices().to_vec(), tris, m.boundary().to_vec()),
            Err(MeshError::BadOrientation(0)) | Err(MeshError::LabelOnInteriorEdge(..))
        ));
        // Missing label.
        let mut boundary = m.boundary().to_vec();
        boundary.pop();
        assert!(matches!(
            TriMesh::new(m.vertices().to_vec(), m.triangles().to_vec(), boundary),
            Err(MeshError::UnlabeledBoundaryEdge(..))
        ));
        // Label on an interior edge.
        let mut boundary = m.boundary().to_vec();
        boundary.push(BoundaryEdge {
            vertices: [0, 4],
            label: BoundaryLabel::Neumann,
        });
        assert!(matches!(
            TriMesh::new(m.vertices().to_vec(), m.triangles().to_vec(), boundary),
            Err(MeshError::LabelOnInteriorEdge(0, 4))
        ));
        // Three triangles on one edge.
        let mut tris = m.triangles().to_vec();
        tris.push(tris[0]);
        assert!(matches!(
            TriMesh::new(m.vertices().to_vec(), tris, m.boundary().to_vec()),
            Err(MeshError::NonConforming(..))
        ));
    }

    #[test]
    fn relabel_by_position() {
        let m = TriMesh::<f64>::criss_cross(2).unwrap();
        let m = m.relabel(|a, b, label| {
            if a[0] == 0.0 && b[0] == 0.0 {
                BoundaryLabel::Neumann
            } else {
                label
            }
        });
        let n = m
            .boundary()
            .iter()
            .filter(|e| e.label == BoundaryLabel::Neumann)
            .count();
        assert_eq!(n, 2);
    }
}
