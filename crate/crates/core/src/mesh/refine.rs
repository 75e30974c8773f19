//! Newest vertex bisection with conforming closure.

use std::collections::HashMap;

use super::{edge_key, BoundaryEdge, Triangle, TriMesh};
use crate::scalar::Real;

struct Bisector<'a, T> {
    marked: &'a HashMap<(usize, usize), bool>,
    vertices: Vec<[T; 2]>,
    midpoints: HashMap<(usize, usize), usize>,
    triangles: Vec<Triangle>,
    generation: Vec<u32>,
}

impl<T: Real> Bisector<'_, T> {
    fn is_marked(&self, a: usize, b: usize) -> bool {
        self.marked.get(&edge_key(a, b)).copied().unwrap_or(false)
    }

    fn midpoint(&mut self, a: usize, b: usize) -> usize {
        let key = edge_key(a, b);
        if let Some(&m) = self.midpoints.get(&key) {
            return m;
        }
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let half = T::lit(0.5);
        self.vertices
            .push([half * (pa[0] + pb[0]), half * (pa[1] + pb[1])]);
        let m = self.vertices.len() - 1;
        self.midpoints.insert(key, m);
        m
    }

    /// Bisects `(a, b, c)` (refinement edge `a -> b`) as long as the current
    /// refinement edge is marked; children are emitted depth first.
    fn split(&mut self, tri: Triangle, generation: u32) {
        let [a, b, c] = tri.rotated();
        if !self.is_marked(a, b) {
            self.triangles.push(tri);
            self.generation.push(generation);
            return;
        }
        let m = self.midpoint(a, b);
        // Children keep the orientation; the new vertex m is their newest
        // vertex, so their refinement edges are the old edges c-a and b-c.
        self.split(
            Triangle {
                vertices: [a, m, c],
                refine_edge: 2,
            },
            generation + 1,
        );
        self.split(
            Triangle {
                vertices: [m, b, c],
                refine_edge: 1,
            },
            generation + 1,
        );
    }
}

pub(super) fn refine_nvb<T: Real>(mesh: &TriMesh<T>, marked: &[usize]) -> TriMesh<T> {
    if marked.is_empty() {
        return mesh.clone();
    }
    let topo = mesh.topology();
    let mut edge_marked = vec![false; topo.num_edges()];
    let mut queue = Vec::new();
    let mark_ref = |t: usize, edge_marked: &mut Vec<bool>, queue: &mut Vec<usize>| {
        let e = topo.triangle_edges[t][mesh.triangles()[t].refine_edge as usize];
        if !edge_marked[e] {
            edge_marked[e] = true;
            queue.push(e);
        }
    };
    for &t in marked {
        mark_ref(t, &mut edge_marked, &mut queue);
    }
    // Closure: a triangle with any marked edge must also bisect its
    // refinement edge.
    while let Some(e) = queue.pop() {
        for &t in &topo.edge_triangles[e] {
            if t != super::NO_TRIANGLE {
                mark_ref(t, &mut edge_marked, &mut queue);
            }
        }
    }
    let marked_map: HashMap<(usize, usize), bool> = topo
        .edges
        .iter()
        .zip(&edge_marked)
        .filter(|(_, &m)| m)
        .map(|(e, _)| ((e[0], e[1]), true))
        .collect();

    let mut bisector = Bisector {
        marked: &marked_map,
        vertices: mesh.vertices().to_vec(),
        midpoints: HashMap::new(),
        triangles: Vec::with_capacity(mesh.num_triangles() * 2),
        generation: Vec::with_capacity(mesh.num_triangles() * 2),
    };
    for (t, tri) in mesh.triangles().iter().enumerate() {
        bisector.split(*tri, mesh.generation()[t]);
    }

    let mut boundary = Vec::with_capacity(mesh.boundary().len());
    for edge in mesh.boundary() {
        let [a, b] = edge.vertices;
        match bisector.midpoints.get(&edge_key(a, b)) {
            Some(&m) => {
                boundary.push(BoundaryEdge {
                    vertices: [a, m],
                    label: edge.label,
                });
                boundary.push(BoundaryEdge {
                    vertices: [m, b],
                    label: edge.label,
                });
            }
            None => boundary.push(*edge),
        }
    }
    TriMesh::from_parts_unchecked(
        bisector.vertices,
        bisector.triangles,
        boundary,
        bisector.generation,
    )
}
