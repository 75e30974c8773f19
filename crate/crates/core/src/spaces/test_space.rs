//! Discrete test space `(S_p × RT_p) ∩ V`: the Raviart–Thomas normal
//! fluxes on Neumann edges vanish and on Robin edges equal `σ i η`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use super::{build_lagrange, build_rt_with, FESpace, NodeEntity, SpaceError, MAX_ORDER, NO_DOF};
use crate::mesh::{BoundaryLabel, TriMesh};
use crate::quadrature::edge_rule;
use crate::scalar::Real;

use super::rt::shifted_legendre;

/// Sign `σ` of the Robin condition `∂φ/∂n + σ iκφ = κ² g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value<T: Real>(self) -> T {
        match self {
            Sign::Plus => T::one(),
            Sign::Minus => -T::one(),
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

impl FromStr for Sign {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "+1" | "1" | "+" | "plus" => Ok(Sign::Plus),
            "-1" | "-" | "minus" => Ok(Sign::Minus),
            other => Err(format!("invalid sign `{other}`, expected +1 or -1")),
        }
    }
}

/// Wavenumber and Robin sign shared by every operator of one problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveContext<T> {
    pub kappa: T,
    pub sigma: Sign,
}

impl<T: Real> WaveContext<T> {
    pub fn new(kappa: T, sigma: Sign) -> Result<Self, SpaceError> {
        if !(kappa > T::zero()) || !kappa.is_finite() {
            return Err(SpaceError::BadWavenumber(kappa.to_f64_lossy()));
        }
        Ok(WaveContext { kappa, sigma })
    }
}

/// One entry of an element's local-to-free map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCoupling<T> {
    /// Local DOF, scalar DOFs first then RT DOFs.
    pub local: usize,
    pub free: usize,
    pub coeff: Complex<T>,
}

/// Test space with the boundary coupling eliminated. Free DOFs are the
/// scalar DOFs followed by the unconstrained RT DOFs in ascending order.
#[derive(Debug, Clone)]
pub struct CoupledTestSpace<T> {
    scalar: FESpace<T>,
    vector: FESpace<T>,
    sigma: Sign,
    /// Free index of each global RT DOF, [`NO_DOF`] if constrained.
    rt_free: Vec<usize>,
    /// Global RT DOF value as a combination of free scalar DOFs; empty for
    /// free DOFs and for DOFs on Neumann edges.
    constraints: Vec<Vec<(usize, Complex<T>)>>,
    constrained: usize,
    free_dof_count: usize,
}

impl<T: Real> CoupledTestSpace<T> {
    pub fn new(mesh: &TriMesh<T>, order: usize, ctx: &WaveContext<T>) -> Result<Self, SpaceError> {
        if order > MAX_ORDER {
            return Err(SpaceError::OrderTooHigh(order));
        }
        let scalar = build_lagrange(mesh, order, true, true)?;
        let topo = mesh.topology();
        let vector = build_rt_with(mesh, &topo, order)?;
        let k = order;
        let nrt = vector.dof_count();
        let mut rt_free = vec![0; nrt];
        let mut constraints = vec![Vec::new(); nrt];
        let mut is_constrained = vec![false; nrt];

        let reference = scalar.lagrange_reference().expect("scalar space").clone();
        let rule = edge_rule::<T>(2 * k).expect("edge rule");
        let starts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let tangents = [[1.0, 0.0], [-1.0, 1.0], [0.0, -1.0]];
        let sigma_i = Complex::new(T::zero(), ctx.sigma.value::<T>());
        let mut vals = vec![T::zero(); reference.len()];

        for (e, label) in topo.edge_labels.iter().enumerate() {
            let label = match label {
                Some(l @ (BoundaryLabel::Neumann | BoundaryLabel::Robin)) => *l,
                _ => continue,
            };
            for j in 0..=k {
                is_constrained[e * (k + 1) + j] = true;
            }
            if label == BoundaryLabel::Neumann {
                continue;
            }
            let t = topo.edge_triangles[e][0];
            let i = (0..3).find(|&i| topo.triangle_edges[t][i] == e).expect("edge of its triangle");
            let corners = mesh.corners(t);
            let (pa, pb) = (corners[i], corners[(i + 1) % 3]);
            let length = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            let on_edge: Vec<usize> = reference
                .entities()
                .iter()
                .enumerate()
                .filter(|(_, ent)| match **ent {
                    NodeEntity::Vertex(v) => v == i || v == (i + 1) % 3,
                    NodeEntity::Edge(ei, _) => ei == i,
                    NodeEntity::Interior(_) => false,
                })
                .map(|(m, _)| m)
                .collect();
            // moments[j][m] = int_0^1 N_m P_j dt along local edge i
            let mut moments = vec![vec![T::zero(); reference.len()]; k + 1];
            for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                let x = [
                    T::lit(starts[i][0]) + s * T::lit(tangents[i][0]),
                    T::lit(starts[i][1]) + s * T::lit(tangents[i][1]),
                ];
                reference.eval(x, &mut vals);
                for (j, row) in moments.iter_mut().enumerate() {
                    let pj = shifted_legendre(j, s);
                    for &m in &on_edge {
                        row[m] += w * pj * vals[m];
                    }
                }
            }
            let local_rt = &vector.element_dofs(t)[i * (k + 1)..(i + 1) * (k + 1)];
            let sdofs = scalar.element_dofs(t);
            for j in 0..=k {
                let g = local_rt[j];
                // Local flux moment is sigma i |E| int eta P_j; the global DOF
                // carries the orientation sign.
                let factor = sigma_i * vector.sign(t, i * (k + 1) + j) * length;
                constraints[g] = on_edge
                    .iter()
                    .filter(|&&m| sdofs[m] != NO_DOF)
                    .map(|&m| (sdofs[m], factor * moments[j][m]))
                    .collect();
            }
        }
        let ns = scalar.dof_count();
        let mut next = ns;
        for g in 0..nrt {
            if is_constrained[g] {
                rt_free[g] = NO_DOF;
            } else {
                rt_free[g] = next;
                next += 1;
            }
        }
        let constrained = is_constrained.iter().filter(|&&c| c).count();
        Ok(CoupledTestSpace {
            scalar,
            vector,
            sigma: ctx.sigma,
            rt_free,
            constraints,
            constrained,
            free_dof_count: next,
        })
    }

    pub fn scalar(&self) -> &FESpace<T> {
        &self.scalar
    }

    pub fn vector(&self) -> &FESpace<T> {
        &self.vector
    }

    pub fn sigma(&self) -> Sign {
        self.sigma
    }

    pub fn order(&self) -> usize {
        self.scalar.order()
    }

    pub fn free_dof_count(&self) -> usize {
        self.free_dof_count
    }

    pub fn num_constrained(&self) -> usize {
        self.constrained
    }

    /// Free index of global RT DOF `g`, `None` if it is eliminated.
    pub fn rt_free_index(&self, g: usize) -> Option<usize> {
        (self.rt_free[g] != NO_DOF).then_some(self.rt_free[g])
    }

    /// Expansion of an eliminated RT DOF in free scalar DOFs.
    pub fn constraint(&self, g: usize) -> &[(usize, Complex<T>)] {
        &self.constraints[g]
    }

    /// Local DOF count per element (scalar plus vector).
    pub fn local_dim(&self) -> usize {
        self.scalar.local_dim() + self.vector.local_dim()
    }

    /// Local-to-free map of triangle `t`. The RT entries refer to the
    /// signed element basis returned by [`FESpace::evaluate`].
    pub fn local_map(&self, t: usize, out: &mut Vec<LocalCoupling<T>>) {
        out.clear();
        let one = Complex::new(T::one(), T::zero());
        for (i, &d) in self.scalar.element_dofs(t).iter().enumerate() {
            if d != NO_DOF {
                out.push(LocalCoupling {
                    local: i,
                    free: d,
                    coeff: one,
                });
            }
        }
        let offset = self.scalar.local_dim();
        for (i, &g) in self.vector.element_dofs(t).iter().enumerate() {
            let local = offset + i;
            match self.rt_free[g] {
                NO_DOF => out.extend(self.constraints[g].iter().map(|&(free, coeff)| LocalCoupling {
                    local,
                    free,
                    coeff,
                })),
                free => out.push(LocalCoupling {
                    local,
                    free,
                    coeff: one,
                }),
            }
        }
    }

    /// Expands free coefficients into full scalar and RT coefficient vectors.
    pub fn expand(&self, free: &[Complex<T>]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let ns = self.scalar.dof_count();
        let eta = free[..ns].to_vec();
        let v = (0..self.vector.dof_count())
            .map(|g| match self.rt_free[g] {
                NO_DOF => self.constraints[g]
                    .iter()
                    .fold(Complex::new(T::zero(), T::zero()), |acc, &(s, c)| acc + c * free[s]),
                f => free[f],
            })
            .collect();
        (eta, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::ElementMap;
    use rand::{Rng, SeedableRng};

    fn ctx(sigma: Sign) -> WaveContext<f64> {
        WaveContext::new(3.0, sigma).unwrap()
    }

    /// Checks `int_e (v.n - σ i η) q ds = 0` on Robin edges and
    /// `v.n = 0` on Neumann edges for the member with free coefficients `c`.
    fn check_boundary(mesh: &TriMesh<f64>, space: &CoupledTestSpace<f64>, c: &[Complex<f64>], sigma: f64) {
        let (eta, v) = space.expand(c);
        let topo = mesh.topology();
        let k = space.order();
        let rule = edge_rule::<f64>(2 * k + 2).unwrap();
        for (e, label) in topo.edge_labels.iter().enumerate() {
            let Some(label) = label else { continue };
            if *label == BoundaryLabel::Dirichlet {
                continue;
            }
            let t = topo.edge_triangles[e][0];
            let i = (0..3).find(|&i| topo.triangle_edges[t][i] == e).unwrap();
            let corners = mesh.corners(t);
            let (pa, pb) = (corners[i], corners[(i + 1) % 3]);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            let n = [(pb[1] - pa[1]) / len, (pa[0] - pb[0]) / len];
            let map = ElementMap::from_corners(corners);
            let pts: Vec<[f64; 2]> = rule
                .points
                .iter()
                .map(|&s| map.inverse([pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]))
                .collect();
            let st = space.scalar().evaluate(mesh, t, &pts);
            let vt = space.vector().evaluate(mesh, t, &pts);
            let (ns, nv) = (space.scalar().local_dim(), space.vector().local_dim());
            for qdeg in 0..=k {
                let mut integral = Complex::new(0.0, 0.0);
                for (q, (&s, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    let mut et = Complex::new(0.0, 0.0);
                    for (m, &d) in space.scalar().element_dofs(t).iter().enumerate() {
                        if d != NO_DOF {
                            et += eta[d] * st.values[q * ns + m];
                        }
                    }
                    let mut vn = Complex::new(0.0, 0.0);
                    for (m, &g) in space.vector().element_dofs(t).iter().enumerate() {
                        let w2 = vt.vectors[q * nv + m];
                        vn += v[g] * (w2[0] * n[0] + w2[1] * n[1]);
                    }
                    let target = if *label == BoundaryLabel::Robin {
                        Complex::new(0.0, sigma) * et
                    } else {
                        Complex::new(0.0, 0.0)
                    };
                    integral += (vn - target) * w * s.powi(qdeg as i32);
                }
                assert!(integral.norm() < 1e-10, "edge {e} q={qdeg}: {integral}");
            }
        }
    }

    fn mixed_mesh() -> TriMesh<f64> {
        TriMesh::criss_cross(2).unwrap().refine(&[0, 3]).relabel(|a, b, l| {
            if a[1] == 0.0 && b[1] == 0.0 {
                BoundaryLabel::Neumann
            } else if a[0] == 0.0 && b[0] == 0.0 {
                BoundaryLabel::Dirichlet
            } else {
                l
            }
        })
    }

    #[test]
    fn random_members_satisfy_boundary_identity() {
        let mesh = mixed_mesh();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for sigma in [Sign::Plus, Sign::Minus] {
            for k in 1..5 {
                let space = CoupledTestSpace::new(&mesh, k, &ctx(sigma)).unwrap();
                let c: Vec<Complex<f64>> = (0..space.free_dof_count())
                    .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                check_boundary(&mesh, &space, &c, sigma.value());
            }
        }
    }

    #[test]
    fn free_dof_count_formula() {
        let mesh = mixed_mesh();
        let topo = mesh.topology();
        let k = 2;
        let space = CoupledTestSpace::new(&mesh, k, &ctx(Sign::Plus)).unwrap();
        let coupled_edges = topo
            .edge_labels
            .iter()
            .filter(|l| matches!(l, Some(BoundaryLabel::Neumann | BoundaryLabel::Robin)))
            .count();
        assert_eq!(space.num_constrained(), coupled_edges * (k + 1));
        assert_eq!(
            space.free_dof_count(),
            space.scalar().dof_count() + space.vector().dof_count() - coupled_edges * (k + 1)
        );
    }

    #[test]
    fn constant_trace_gives_constant_flux() {
        let mesh = TriMesh::<f64>::criss_cross(1).unwrap();
        let space = CoupledTestSpace::new(&mesh, 1, &ctx(Sign::Minus)).unwrap();
        let mut c = vec![Complex::new(0.0, 0.0); space.free_dof_count()];
        for x in c.iter_mut().take(space.scalar().dof_count()) {
            *x = Complex::new(1.0, 0.0);
        }
        check_boundary(&mesh, &space, &c, -1.0);
        // Higher moments of a constant trace vanish, the mean flux is -i.
        let (_, v) = space.expand(&c);
        let topo = mesh.topology();
        for e in (0..topo.num_edges()).filter(|&e| topo.is_boundary(e)) {
            assert!(v[e * 2 + 1].norm() < 1e-12);
            assert!((v[e * 2].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn neumann_fluxes_vanish() {
        let mesh = TriMesh::<f64>::criss_cross(2)
            .unwrap()
            .relabel(|_, _, _| BoundaryLabel::Neumann);
        let space = CoupledTestSpace::new(&mesh, 2, &ctx(Sign::Plus)).unwrap();
        let topo = mesh.topology();
        for e in (0..topo.num_edges()).filter(|&e| topo.is_boundary(e)) {
            for j in 0..3 {
                assert!(space.rt_free_index(e * 3 + j).is_none());
                assert!(space.constraint(e * 3 + j).is_empty());
            }
        }
    }

    #[test]
    fn sign_parsing() {
        assert_eq!("+1".parse::<Sign>().unwrap(), Sign::Plus);
        assert_eq!("-1".parse::<Sign>().unwrap(), Sign::Minus);
        assert!("0".parse::<Sign>().is_err());
        assert_eq!(Sign::Plus.to_string(), "+1");
        assert!(WaveContext::new(0.0, Sign::Plus).is_err());
    }
}
