//! H = 2.5 on the unit disk exceeds tr G / R = 2. The structural check flags
//! non-existence and the continuation breaks down before t = 1.

use weighted_curvature::conditions::{check_all, ConditionSettings};
use weighted_curvature::domain::make_ball;
use weighted_curvature::problem::{BoundaryData, PrescribedCurvature};
use weighted_curvature::solver::{homotopy_solve, DirichletProblem, SolveConfig};
use weighted_curvature::weights::area_weight;

fn main() -> weighted_curvature::Result<()> {
    let p = DirichletProblem {
        domain: make_ball(vec![0.0, 0.0], 1.0, 1.0 / 32.0)?,
        weight: area_weight(),
        curvature: PrescribedCurvature::constant(2.5),
        boundary: BoundaryData::zero(),
    };
    let v = check_all(&p.domain, &p.weight, &p.curvature, &p.boundary, &ConditionSettings::default())?;
    println!("smallness margin {:+.3}, nonexistence margin {:+.3} (triggered {})", v.smallness.margin, v.nonexistence.margin, v.nonexistence.triggered);

    let r = homotopy_solve(&p, &SolveConfig::default())?;
    for s in &r.residual_history {
        println!(
            "t = {:.4} accepted {:5} boundary |Du| {:9.3} trial {:9.3e}",
            s.t, s.accepted, s.sup_grad_boundary, s.trial_boundary_gradient
        );
    }
    println!("converged {}, t reached {:.4}, diagnosis {:?}", r.converged, r.t_reached, r.failure_diagnosis);
    Ok(())
}
