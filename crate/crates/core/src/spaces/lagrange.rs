//! Nodal Lagrange basis on the reference triangle with equispaced nodes.

use crate::scalar::Real;

/// Geometric entity a reference node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeEntity {
    Vertex(usize),
    /// Local edge and the node position `1..order` counted from its start.
    Edge(usize, usize),
    Interior(usize),
}

/// Nodal basis of `P_p` on the reference triangle. Nodes are ordered
/// vertices, then edge nodes (edge by edge, from the edge start), then
/// interior nodes.
#[derive(Debug, Clone)]
pub struct LagrangeReference {
    order: usize,
    /// Barycentric multi-indices `(a0, a1, a2)` with `a0 + a1 + a2 = order`.
    nodes: Vec<[usize; 3]>,
    entities: Vec<NodeEntity>,
}

impl LagrangeReference {
    pub fn new(order: usize) -> Self {
        let p = order;
        let mut nodes = Vec::new();
        let mut entities = Vec::new();
        if p == 0 {
            nodes.push([0, 0, 0]);
            entities.push(NodeEntity::Interior(0));
            return LagrangeReference {
                order,
                nodes,
                entities,
            };
        }
        for i in 0..3 {
            let mut a = [0; 3];
            a[i] = p;
            nodes.push(a);
            entities.push(NodeEntity::Vertex(i));
        }
        for i in 0..3 {
            for l in 1..p {
                let mut a = [0; 3];
                a[i] = p - l;
                a[(i + 1) % 3] = l;
                nodes.push(a);
                entities.push(NodeEntity::Edge(i, l));
            }
        }
        let mut k = 0;
        for a1 in 1..p {
            for a2 in 1..p - a1 {
                nodes.push([p - a1 - a2, a1, a2]);
                entities.push(NodeEntity::Interior(k));
                k += 1;
            }
        }
        LagrangeReference {
            order,
            nodes,
            entities,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn entities(&self) -> &[NodeEntity] {
        &self.entities
    }

    pub fn num_interior(&self) -> usize {
        if self.order == 0 {
            1
        } else {
            (self.order - 1) * (self.order.saturating_sub(2)) / 2
        }
    }

    /// Reference coordinates of node `i`.
    pub fn node_point<T: Real>(&self, i: usize) -> [T; 2] {
        let [_, a1, a2] = self.nodes[i];
        let p = T::of(self.order.max(1));
        [T::of(a1) / p, T::of(a2) / p]
    }

    /// Basis values at `x` written into `values`.
    pub fn eval<T: Real>(&self, x: [T; 2], values: &mut [T]) {
        let lambda = [T::one() - x[0] - x[1], x[0], x[1]];
        let p = T::of(self.order);
        for (v, a) in values.iter_mut().zip(&self.nodes) {
            *v = (0..3)
                .map(|k| factor(p, lambda[k], a[k]).0)
                .fold(T::one(), |acc, f| acc * f);
        }
    }

    /// Basis values and reference gradients at `x`.
    pub fn eval_with_grad<T: Real>(&self, x: [T; 2], values: &mut [T], grads: &mut [[T; 2]]) {
        let lambda = [T::one() - x[0] - x[1], x[0], x[1]];
        // d(lambda_k)/dx and d(lambda_k)/dy
        let dl = [[-T::one(), -T::one()], [T::one(), T::zero()], [T::zero(), T::one()]];
        let p = T::of(self.order);
        for ((v, g), a) in values.iter_mut().zip(grads.iter_mut()).zip(&self.nodes) {
            let f: [(T, T); 3] = std::array::from_fn(|k| factor(p, lambda[k], a[k]));
            *v = f[0].0 * f[1].0 * f[2].0;
            let d = [
                f[0].1 * f[1].0 * f[2].0,
                f[0].0 * f[1].1 * f[2].0,
                f[0].0 * f[1].0 * f[2].1,
            ];
            *g = [
                d[0] * dl[0][0] + d[1] * dl[1][0] + d[2] * dl[2][0],
                d[0] * dl[0][1] + d[1] * dl[1][1] + d[2] * dl[2][1],
            ];
        }
    }
}

/// `prod_{l < a} (p*lam - l) / (l + 1)` and its derivative in `lam`.
fn factor<T: Real>(p: T, lam: T, a: usize) -> (T, T) {
    let mut value = T::one();
    let mut deriv = T::zero();
    for l in 0..a {
        let denom = T::of(l + 1);
        let term = (p * lam - T::of(l)) / denom;
        deriv = deriv * term + value * p / denom;
        value *= term;
    }
    (value, deriv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        for p in 0..9 {
            let r = LagrangeReference::new(p);
            assert_eq!(r.len(), (p + 1) * (p + 2) / 2);
        }
    }

    #[test]
    fn nodal_property() {
        for p in 1..9 {
            let r = LagrangeReference::new(p);
            let mut vals = vec![0.0; r.len()];
            for i in 0..r.len() {
                r.eval(r.node_point::<f64>(i), &mut vals);
                for (j, &v) in vals.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expected).abs() < 1e-11, "p={p} i={i} j={j} v={v}");
                }
            }
        }
    }

    #[test]
    fn barycenter_p1() {
        let r = LagrangeReference::new(1);
        let mut vals = [0.0f64; 3];
        r.eval([1.0 / 3.0, 1.0 / 3.0], &mut vals);
        assert!(vals.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn partition_of_unity_and_gradients() {
        let pts = [[0.1, 0.2], [0.7, 0.05], [0.33, 0.4], [0.0, 1.0]];
        for p in 0..8 {
            let r = LagrangeReference::new(p);
            let mut v = vec![0.0; r.len()];
            let mut g = vec![[0.0; 2]; r.len()];
            for &x in &pts {
                r.eval_with_grad(x, &mut v, &mut g);
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let gx: f64 = g.iter().map(|d| d[0]).sum();
                let gy: f64 = g.iter().map(|d| d[1]).sum();
                assert!(gx.abs() < 1e-10 && gy.abs() < 1e-10);
                // Central differences.
                let h = 1e-6;
                let mut vp = vec![0.0; r.len()];
                let mut vm = vec![0.0; r.len()];
                r.eval([x[0] + h, x[1]], &mut vp);
                r.eval([x[0] - h, x[1]], &mut vm);
                for i in 0..r.len() {
                    let fd = (vp[i] - vm[i]) / (2.0 * h);
                    assert!((fd - g[i][0]).abs() < 1e-5 * (1.0 + fd.abs()));
                }
            }
        }
    }
}
