//! Weighted minimal graph over the unit disk with saddle boundary data, then
//! the a-priori estimates checked on the computed solution.

use weighted_curvature::domain::make_ball;
use weighted_curvature::estimates::verify_estimates;
use weighted_curvature::problem::{BoundaryData, PrescribedCurvature};
use weighted_curvature::solver::{homotopy_solve, DirichletProblem, SolveConfig};
use weighted_curvature::weights::epsilon_regularized_weight;

fn main() -> weighted_curvature::Result<()> {
    let problem = DirichletProblem {
        domain: make_ball(vec![0.0, 0.0], 1.0, 1.0 / 32.0)?,
        weight: epsilon_regularized_weight(0.5)?,
        curvature: PrescribedCurvature::zero(),
        boundary: BoundaryData::from_expr(2, "x1*x2")?,
    };
    let report = homotopy_solve(&problem, &SolveConfig::default())?;
    for step in &report.residual_history {
        println!("t = {:.2}: {} Newton iterations, accepted {}", step.t, step.iterations, step.accepted);
    }
    let est = verify_estimates(&report, &problem)?;
    println!("sup |u| = {:.4}, boundary sup = {:.4}", report.sup_u, report.sup_boundary_u);
    println!("C0 estimate {:?}, slack {:.4}", est.c0.status, est.c0.margin);
    println!(
        "gradient maximum {:?}: interior {:.4} vs boundary {:.4}",
        est.gradient_maximum.status, report.sup_grad_interior, report.sup_grad_boundary
    );
    if let (Some(c), Some(b)) = (est.barrier_constant, est.boundary_gradient_bound) {
        println!("barrier constant {c}, boundary gradient bound {b:.3}");
    }
    Ok(())
}
