//! Residual of the elliptic system satisfied by the Gauss map of a surface of
//! prescribed weighted mean curvature, on a sphere chart under refinement, and
//! the first-order coefficients for a Hessian weight.

use weighted_curvature::geometry::{normal_equation_residual, EllipsoidChart, Hemisphere, JetField};
use weighted_curvature::grid::UniformGrid;
use weighted_curvature::problem::PrescribedCurvature;
use weighted_curvature::weights::{area_weight, hessian_weight, Integrand};

fn main() -> weighted_curvature::Result<()> {
    let sphere = EllipsoidChart::sphere(2, 1.0, Hemisphere::Lower)?;
    let aniso = hessian_weight(Integrand::from_expr(3, "sqrt(p1^2 + 2*p2^2 + 0.5*p3^2)")?)?;
    for h in [0.04, 0.02, 0.01] {
        let field = JetField::from_immersion(&sphere, UniformGrid::centered(&[0.0, 0.0], (0.3 / h) as usize, h)?)?;
        let area = normal_equation_residual(&field, &area_weight(), &PrescribedCurvature::constant(2.0))?;
        let hess = normal_equation_residual(&field, &aniso, &PrescribedCurvature::constant(2.0))?;
        println!("h = {h:<5} residual {:.3e}   Hessian-weight |P| {:.1e}", area.max_norm(), hess.p_max_norm());
    }
    Ok(())
}
