//! Element-wise evaluable pairs `(φ, u)` in `U = L2 × L2²` and the norms of
//! their differences.

use std::sync::Arc;

use crate::assembly::{test_images, ElementCoupling, ScalarField, TrialSpace, VectorField};
use crate::mesh::PointLocator;
use crate::quadrature::{triangle_rule, QuadratureError};
use crate::spaces::{ElementMap, FESpace, NO_DOF};
use crate::{Context, Mesh, TestSpace, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// A piecewise smooth pair `(φ, u)` on a mesh.
pub trait PairField: Sync {
    fn mesh(&self) -> &Mesh;

    /// `[φ, u_1, u_2]` on triangle `t` at reference `points`.
    fn eval(&self, t: usize, points: &[[f64; 2]]) -> Vec<[C64; 3]>;
}

/// Exact solution as callbacks of physical position.
#[derive(Clone)]
pub struct ExactSolution {
    pub phi: ScalarField,
    /// `κ⁻¹ ∇φ - f2`.
    pub u: VectorField,
}

impl ExactSolution {
    pub fn at(&self, x: [f64; 2]) -> [C64; 3] {
        let u = (self.u)(x);
        [(self.phi)(x), u[0], u[1]]
    }
}

/// `(φ^δ, u^δ)` from trial coefficients, layout `[φ | u_1 | u_2]`.
pub struct TrialField<'a> {
    pub mesh: &'a Mesh,
    pub space: &'a TrialSpace,
    pub coeffs: &'a [C64],
}

impl PairField for TrialField<'_> {
    fn mesh(&self) -> &Mesh {
        self.mesh
    }

    fn eval(&self, t: usize, points: &[[f64; 2]]) -> Vec<[C64; 3]> {
        let s = self.space.scalar();
        let tab = s.evaluate(self.mesh, t, points);
        let nc = self.space.component_dofs();
        let dofs = s.element_dofs(t);
        let n = dofs.len();
        (0..points.len())
            .map(|q| {
                let mut out = [ZERO; 3];
                for (i, &g) in dofs.iter().enumerate() {
                    let w = tab.values[q * n + i];
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += self.coeffs[c * nc + g] * w;
                    }
                }
                out
            })
            .collect()
    }
}

/// `(φ, κ⁻¹ ∇φ)` for a Lagrange function; DOFs marked absent are zero.
pub struct GradientField<'a> {
    pub mesh: &'a Mesh,
    pub space: &'a FESpace<f64>,
    pub coeffs: &'a [C64],
    pub kappa: f64,
}

impl PairField for GradientField<'_> {
    fn mesh(&self) -> &Mesh {
        self.mesh
    }

    fn eval(&self, t: usize, points: &[[f64; 2]]) -> Vec<[C64; 3]> {
        let tab = self.space.evaluate(self.mesh, t, points);
        let dofs = self.space.element_dofs(t);
        let n = dofs.len();
        let k = 1.0 / self.kappa;
        (0..points.len())
            .map(|q| {
                let mut out = [ZERO; 3];
                for (i, &g) in dofs.iter().enumerate() {
                    if g == NO_DOF {
                        continue;
                    }
                    let c = self.coeffs[g];
                    let gr = tab.grads[q * n + i];
                    out[0] += c * tab.values[q * n + i];
                    out[1] += c * (k * gr[0]);
                    out[2] += c * (k * gr[1]);
                }
                out
            })
            .collect()
    }
}

/// `B'𝕧` for free test coefficients.
pub struct TestImageField<'a> {
    pub mesh: &'a Mesh,
    pub test: &'a TestSpace,
    pub ctx: &'a Context,
    pub coeffs: &'a [C64],
}

impl PairField for TestImageField<'_> {
    fn mesh(&self) -> &Mesh {
        self.mesh
    }

    fn eval(&self, t: usize, points: &[[f64; 2]]) -> Vec<[C64; 3]> {
        let mut scratch = Vec::new();
        let coupling = ElementCoupling::new(self.test, t, &mut scratch);
        let local = coupling.local_coefficients(self.coeffs);
        let s = self.test.scalar().evaluate(self.mesh, t, points);
        let v = self.test.vector().evaluate(self.mesh, t, points);
        let mut images = Vec::new();
        test_images(self.ctx.kappa, &s, &v, &mut images);
        let nloc = local.len();
        (0..points.len())
            .map(|q| {
                let mut out = [ZERO; 3];
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
}

/// Sum of two fields on the same mesh.
pub struct SumField<A, B>(pub A, pub B);

impl<A: PairField, B: PairField> PairField for SumField<A, B> {
    fn mesh(&self) -> &Mesh {
        self.0.mesh()
    }

    fn eval(&self, t: usize, points: &[[f64; 2]]) -> Vec<[C64; 3]> {
        let a = self.0.eval(t, points);
        let b = self.1.eval(t, points);
        a.into_iter()
            .zip(b)
            .map(|(x, y)| [x[0] + y[0], x[1] + y[1], x[2] + y[2]])
            .collect()
    }
}

/// A field whose values are owned, for storing reference solutions.
pub struct OwnedTrialField {
    pub mesh: Arc<Mesh>,
    pub trial: TrialSpace,
    pub test: TestSpace,
    pub ctx: Context,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
}

impl PairField for OwnedTrialField {
    fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Boosted field `𝕦^δ + B'𝕧^δ`.
    fn eval(&self, t: usize, points: &[[f64; 2]]) -> Vec<[C64; 3]> {
        SumField(
            TrialField {
                mesh: &self.mesh,
                space: &self.trial,
                coeffs: &self.u,
            },
            TestImageField {
                mesh: &self.mesh,
                test: &self.test,
                ctx: &self.ctx,
                coeffs: &self.v,
            },
        )
        .eval(t, points)
    }
}

/// What a numerical field is compared against.
#[derive(Clone, Copy)]
pub enum Reference<'a> {
    Exact(&'a ExactSolution),
    Field(&'a dyn PairField),
}

impl Reference<'_> {
    /// Values at physical points, located by walking from `hint`.
    pub fn at_points(&self, points: &[[f64; 2]], locator: Option<&PointLocator<'_, f64>>) -> Vec<[C64; 3]> {
        match self {
            Reference::Exact(e) => points.iter().map(|&x| e.at(x)).collect(),
            Reference::Field(f) => {
                let loc = locator.expect("field reference needs a locator");
                sample(*f, loc, points)
            }
        }
    }
}

/// Samples a field at physical points.
pub fn sample(field: &dyn PairField, locator: &PointLocator<'_, f64>, points: &[[f64; 2]]) -> Vec<[C64; 3]> {
    let mut hint = 0;
    points
        .iter()
        .map(|&x| match locator.locate(x, hint) {
            Some(t) => {
                hint = t;
                let b = locator.barycentric(t, x);
                field.eval(t, &[[b[1], b[2]]])[0]
            }
            None => [C64::new(f64::NAN, f64::NAN); 3],
        })
        .collect()
}

/// `‖φ_a - φ_b‖_{L2}` and the U-norm of the difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceNorms {
    pub l2_phi: f64,
    pub u: f64,
}

/// Norms of `field - reference` by quadrature of the given degree. A field
/// reference is integrated over its own mesh with `field` sampled there.
pub fn difference_norms(
    field: &dyn PairField,
    reference: Reference<'_>,
    degree: usize,
) -> Result<DifferenceNorms, QuadratureError> {
    let rule = triangle_rule::<f64>(degree)?;
    let (mut phi2, mut u2) = (0.0, 0.0);
    let mut add = |w: f64, a: &[C64; 3], b: &[C64; 3]| {
        let d0 = (a[0] - b[0]).norm_sqr();
        phi2 += w * d0;
        u2 += w * (d0 + (a[1] - b[1]).norm_sqr() + (a[2] - b[2]).norm_sqr());
    };
    match reference {
        Reference::Exact(e) => {
            let mesh = field.mesh();
            for t in 0..mesh.num_triangles() {
                let map = ElementMap::from_corners(mesh.corners(t));
                let vals = field.eval(t, &rule.points);
                for ((&w, x), a) in rule.weights.iter().zip(&rule.points).zip(&vals) {
                    add(w * map.det.abs(), a, &e.at(map.point(*x)));
                }
            }
        }
        Reference::Field(r) => {
            let same = std::ptr::eq(r.mesh(), field.mesh()) || r.mesh() == field.mesh();
            let mesh = r.mesh();
            let locator = PointLocator::new(field.mesh());
            for t in 0..mesh.num_triangles() {
                let map = ElementMap::from_corners(mesh.corners(t));
                let rv = r.eval(t, &rule.points);
                let fv = if same {
                    field.eval(t, &rule.points)
                } else {
                    let phys: Vec<[f64; 2]> = rule.points.iter().map(|&x| map.point(x)).collect();
                    sample(field, &locator, &phys)
                };
                for ((&w, a), b) in rule.weights.iter().zip(&fv).zip(&rv) {
                    add(w * map.det.abs(), a, b);
                }
            }
        }
    }
    Ok(DifferenceNorms {
        l2_phi: phi2.sqrt(),
        u: u2.sqrt(),
    })
}

/// Per-triangle squared U-norms of a field.
pub fn element_norms_squared(field: &dyn PairField, degree: usize) -> Result<Vec<f64>, QuadratureError> {
    let rule = triangle_rule::<f64>(degree)?;
    let mesh = field.mesh();
    Ok((0..mesh.num_triangles())
        .map(|t| {
            let map = ElementMap::from_corners(mesh.corners(t));
            let vals = field.eval(t, &rule.points);
            rule.weights
                .iter()
                .zip(&vals)
                .map(|(&w, v)| w * map.det.abs() * (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()))
                .sum()
        })
        .collect())
}
