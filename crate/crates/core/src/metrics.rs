//! Errors against an exact or reference pair and best approximations.

use crate::assembly::{assemble_galerkin_parts, assemble_h1k_gram, AssemblyError, TrialSpace};
use crate::fields::{difference_norms, sample, GradientField, Reference, TrialField};
use crate::linalg::SparseCholesky;
use crate::mesh::PointLocator;
use crate::quadrature::triangle_rule;
use crate::solver::{boosted, FoslsSolution, SolverError};
use crate::spaces::{ElementMap, NO_DOF};
use crate::{Context, Mesh, Space, TestSpace, C64};

/// Quadrature degree for error integrals.
pub fn error_degree(p: usize, ptilde: usize) -> usize {
    2 * p.max(ptilde) + 4
}

/// Reference values at the reference `points` of triangle `t` of `mesh`.
fn reference_values(
    reference: &Reference<'_>,
    mesh: &Mesh,
    t: usize,
    points: &[[f64; 2]],
    locator: Option<&PointLocator<'_, f64>>,
) -> Vec<[C64; 3]> {
    match reference {
        Reference::Field(f) if locator.is_none() => f.eval(t, points),
        _ => {
            let map = ElementMap::from_corners(mesh.corners(t));
            let phys: Vec<[f64; 2]> = points.iter().map(|&x| map.point(x)).collect();
            match reference {
                Reference::Exact(e) => phys.iter().map(|&x| e.at(x)).collect(),
                Reference::Field(f) => sample(*f, locator.expect("locator"), &phys),
            }
        }
    }
}

fn locator_for<'a>(reference: &Reference<'a>, mesh: &Mesh) -> Option<PointLocator<'a, f64>> {
    match reference {
        Reference::Field(f) if f.mesh() != mesh => Some(PointLocator::new(f.mesh())),
        _ => None,
    }
}

/// `‖𝕦 - Π𝕦‖_U` with `Π` the U-orthogonal projection onto the trial space.
pub fn best_u_error(mesh: &Mesh, trial: &TrialSpace, reference: Reference<'_>, degree: usize) -> Result<f64, SolverError> {
    let s = trial.scalar();
    let mass = assemble_galerkin_parts(mesh, s, s, degree)?.m;
    let rule = triangle_rule::<f64>(degree).map_err(AssemblyError::from)?;
    let locator = locator_for(&reference, mesh);
    let n = s.dof_count();
    let mut rhs = vec![vec![C64::new(0.0, 0.0); n]; 3];
    for t in 0..mesh.num_triangles() {
        let map = ElementMap::from_corners(mesh.corners(t));
        let tab = s.evaluate(mesh, t, &rule.points);
        let vals = reference_values(&reference, mesh, t, &rule.points, locator.as_ref());
        let dofs = s.element_dofs(t);
        let nl = dofs.len();
        for (q, (&w, val)) in rule.weights.iter().zip(&vals).enumerate() {
            let wq = w * map.det.abs();
            for (i, &g) in dofs.iter().enumerate() {
                let b = tab.values[q * nl + i] * wq;
                for c in 0..3 {
                    rhs[c][g] += val[c] * b;
                }
            }
        }
    }
    let chol = SparseCholesky::new(&mass)?;
    let coeffs: Vec<C64> = rhs.iter().flat_map(|r| chol.solve(r)).collect();
    let field = TrialField {
        mesh,
        space: trial,
        coeffs: &coeffs,
    };
    Ok(difference_norms(&field, reference, degree).map_err(AssemblyError::from)?.u)
}

/// `‖φ - Πφ‖_{1,κ}` with `Π` the `‖·‖_{1,κ}` projection onto a Lagrange
/// space; the reference vector part stands for `κ⁻¹∇φ`.
pub fn best_1k_error(
    mesh: &Mesh,
    space: &Space,
    ctx: &Context,
    reference: Reference<'_>,
    degree: usize,
) -> Result<f64, SolverError> {
    let gram = assemble_h1k_gram(mesh, space, ctx, degree)?;
    let rule = triangle_rule::<f64>(degree).map_err(AssemblyError::from)?;
    let locator = locator_for(&reference, mesh);
    let k = 1.0 / ctx.kappa;
    let mut rhs = vec![C64::new(0.0, 0.0); space.dof_count()];
    for t in 0..mesh.num_triangles() {
        let map = ElementMap::from_corners(mesh.corners(t));
        let tab = space.evaluate(mesh, t, &rule.points);
        let vals = reference_values(&reference, mesh, t, &rule.points, locator.as_ref());
        let dofs = space.element_dofs(t);
        let nl = dofs.len();
        for (q, (&w, val)) in rule.weights.iter().zip(&vals).enumerate() {
            let wq = w * map.det.abs();
            for (i, &g) in dofs.iter().enumerate() {
                if g == NO_DOF {
                    continue;
                }
                let gr = tab.grads[q * nl + i];
                rhs[g] += (val[0] * tab.values[q * nl + i] + (val[1] * gr[0] + val[2] * gr[1]) * k) * wq;
            }
        }
    }
    let coeffs = SparseCholesky::new(&gram)?.solve(&rhs);
    let field = GradientField {
        mesh,
        space,
        coeffs: &coeffs,
        kappa: ctx.kappa,
    };
    Ok(difference_norms(&field, reference, degree).map_err(AssemblyError::from)?.u)
}

/// Errors of a FOSLS solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoslsErrors {
    pub l2_phi: f64,
    pub u: f64,
    /// U-error of the boosted field.
    pub boosted: f64,
    /// `‖φ - φ^δ‖_{1,κ}`.
    pub one_kappa: f64,
}

pub fn fosls_errors(
    mesh: &Mesh,
    trial: &TrialSpace,
    test: &TestSpace,
    ctx: &Context,
    sol: &FoslsSolution,
    reference: Reference<'_>,
    degree: usize,
) -> Result<FoslsErrors, SolverError> {
    let plain = TrialField {
        mesh,
        space: trial,
        coeffs: &sol.u,
    };
    let d = difference_norms(&plain, reference, degree).map_err(AssemblyError::from)?;
    let bst = boosted(mesh, trial, test, ctx, sol);
    let b = difference_norms(&bst, reference, degree).map_err(AssemblyError::from)?;
    let phi = &sol.u[..trial.component_dofs()];
    let grad = GradientField {
        mesh,
        space: trial.scalar(),
        coeffs: phi,
        kappa: ctx.kappa,
    };
    let g = difference_norms(&grad, reference, degree).map_err(AssemblyError::from)?;
    Ok(FoslsErrors {
        l2_phi: d.l2_phi,
        u: d.u,
        boosted: b.u,
        one_kappa: g.u,
    })
}

/// `‖φ - φ_G‖_{L2}` and `‖φ - φ_G‖_{1,κ}` of a Galerkin solution.
pub fn galerkin_errors(
    mesh: &Mesh,
    space: &Space,
    ctx: &Context,
    coeffs: &[C64],
    reference: Reference<'_>,
    degree: usize,
) -> Result<(f64, f64), SolverError> {
    let field = GradientField {
        mesh,
        space,
        coeffs,
        kappa: ctx.kappa,
    };
    let d = difference_norms(&field, reference, degree).map_err(AssemblyError::from)?;
    Ok((d.l2_phi, d.u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{default_direction, plane_wave_exact};
    use crate::spaces::{build_lagrange, Sign};

    #[test]
    fn best_u_error_converges_at_rate_two() {
        let kappa = 5.0;
        let exact = plane_wave_exact(kappa, default_direction("plane_wave"));
        let errs: Vec<f64> = [4, 8]
            .iter()
            .map(|&n| {
                let mesh = Mesh::criss_cross(n).unwrap();
                let trial = TrialSpace::new(&mesh, 1, true).unwrap();
                best_u_error(&mesh, &trial, Reference::Exact(&exact), 8).unwrap()
            })
            .collect();
        let rate = (errs[0] / errs[1]).log2();
        assert!((rate - 2.0).abs() < 0.2, "rate {rate}");
    }

    #[test]
    fn projections_reproduce_discrete_fields() {
        let mesh = Mesh::criss_cross(2).unwrap();
        let ctx = Context::new(3.0, Sign::Minus).unwrap();
        let trial = TrialSpace::new(&mesh, 2, true).unwrap();
        let coeffs: Vec<C64> = (0..trial.dof_count())
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let f = TrialField {
            mesh: &mesh,
            space: &trial,
            coeffs: &coeffs,
        };
        assert!(best_u_error(&mesh, &trial, Reference::Field(&f), 8).unwrap() < 1e-10);

        let x = build_lagrange(&mesh, 2, true, false).unwrap();
        let g = GradientField {
            mesh: &mesh,
            space: &x,
            coeffs: &coeffs[..x.dof_count()],
            kappa: ctx.kappa,
        };
        assert!(best_1k_error(&mesh, &x, &ctx, Reference::Field(&g), 8).unwrap() < 1e-10);
        let (l2, h1k) = galerkin_errors(&mesh, &x, &ctx, &coeffs[..x.dof_count()], Reference::Field(&g), 8).unwrap();
        assert_eq!((l2, h1k), (0.0, 0.0));
    }

    #[test]
    fn one_kappa_norm_matches_u_norm_of_gradient_pair() {
        let kappa = 4.0;
        let exact = plane_wave_exact(kappa, [0.6, 0.8]);
        let mesh = Mesh::criss_cross(4).unwrap();
        let ctx = Context::new(kappa, Sign::Plus).unwrap();
        let x = build_lagrange(&mesh, 1, true, false).unwrap();
        let zero = vec![C64::new(0.0, 0.0); x.dof_count()];
        // ‖φ‖_{1,κ} of a unit-modulus plane wave over the unit square is √2.
        let (l2, h1k) = galerkin_errors(&mesh, &x, &ctx, &zero, Reference::Exact(&exact), 10).unwrap();
        assert!((l2 - 1.0).abs() < 1e-12);
        assert!((h1k - 2f64.sqrt()).abs() < 1e-12);
    }
}
