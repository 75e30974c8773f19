use super::{MeshTopology, TriMesh};
use crate::scalar::Real;

/// Point location by walking across triangle neighbours, falling back to an
/// exhaustive scan when the walk leaves the domain (holes, reentrant corners).
pub struct PointLocator<'a, T> {
    mesh: &'a TriMesh<T>,
    topology: MeshTopology,
}

impl<'a, T: Real> PointLocator<'a, T> {
    pub fn new(mesh: &'a TriMesh<T>) -> Self {
        PointLocator {
            mesh,
            topology: mesh.topology(),
        }
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: [T; 2]) -> [T; 3] {
        let [a, b, c] = self.mesh.corners(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [T::one() - l1 - l2, l1, l2]
    }

    /// Triangle containing `p`, starting the walk at `hint`.
    pub fn locate(&self, p: [T; 2], hint: usize) -> Option<usize> {
        let tol = T::lit(-1e-12);
        let nt = self.mesh.num_triangles();
        let mut t = hint.min(nt - 1);
        for _ in 0..nt.min(10_000) {
            let bary = self.barycentric(t, p);
            if bary.iter().all(|&l| l >= tol) {
                return Some(t);
            }
            // Leave through the edge opposite the most negative coordinate.
            let (k, _) = bary
                .iter()
                .enumerate()
                .fold((0, T::infinity()), |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc });
            // Local edge (k+1, k+2) is opposite vertex k.
            match self.topology.neighbor(t, (k + 1) % 3) {
                Some(next) => t = next,
                None => break,
            }
        }
        (0..nt).find(|&s| self.barycentric(s, p).iter().all(|&l| l >= tol))
    }
}
