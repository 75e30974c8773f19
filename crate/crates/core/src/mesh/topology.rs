use std::collections::HashMap;

use super::{edge_key, BoundaryLabel, TriMesh};
use crate::scalar::Real;

/// Marker for "no triangle on this side of the edge".
pub const NO_TRIANGLE: usize = usize::MAX;

/// Edge numbering and adjacency derived from a [`TriMesh`].
///
/// Global edges are numbered in order of first appearance while sweeping the
/// triangles, and are stored with their vertices sorted ascending: the global
/// edge direction runs from the lower to the higher vertex index.
#[derive(Debug, Clone)]
pub struct MeshTopology {
    pub edges: Vec<[usize; 2]>,
    /// Global edge of each local edge of each triangle.
    pub triangle_edges: Vec<[usize; 3]>,
    /// The (up to two) triangles adjacent to each edge.
    pub edge_triangles: Vec<[usize; 2]>,
    /// Boundary label of each edge, `None` for interior edges.
    pub edge_labels: Vec<Option<BoundaryLabel>>,
}

impl MeshTopology {
    pub fn new<T: Real>(mesh: &TriMesh<T>) -> Self {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_triangles = Vec::new();
        let mut triangle_edges = Vec::with_capacity(mesh.num_triangles());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let mut local = [0; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let [a, b] = tri.edge(i);
                let key = edge_key(a, b);
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_triangles.push([NO_TRIANGLE; 2]);
                    edges.len() - 1
                });
                let adj = &mut edge_triangles[e];
                if adj[0] == NO_TRIANGLE {
                    adj[0] = t;
                } else {
                    adj[1] = t;
                }
                *slot = e;
            }
            triangle_edges.push(local);
        }
        let mut edge_labels = vec![None; edges.len()];
        for b in mesh.boundary() {
            if let Some(&e) = index.get(&edge_key(b.vertices[0], b.vertices[1])) {
                edge_labels[e] = Some(b.label);
            }
        }
        MeshTopology {
            edges,
            triangle_edges,
            edge_triangles,
            edge_labels,
        }
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_boundary(&self, e: usize) -> bool {
        self.edge_triangles[e][1] == NO_TRIANGLE
    }

    /// Triangle across local edge `local` of triangle `t`, if any.
    pub fn neighbor(&self, t: usize, local: usize) -> Option<usize> {
        let [a, b] = self.edge_triangles[self.triangle_edges[t][local]];
        let other = if a == t { b } else { a };
        (other != NO_TRIANGLE).then_some(other)
    }
}
