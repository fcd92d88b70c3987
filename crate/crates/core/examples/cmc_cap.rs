//! Constant mean curvature H = 1 over the unit disk with zero boundary values:
//! the solution is the spherical cap of radius 2, u = √3 − √(4 − |x|²).

use weighted_curvature::domain::make_ball;
use weighted_curvature::problem::{BoundaryData, PrescribedCurvature};
use weighted_curvature::report::observed_order;
use weighted_curvature::solver::{homotopy_solve, DirichletProblem, SolveConfig};
use weighted_curvature::weights::area_weight;

fn main() -> weighted_curvature::Result<()> {
    let mut levels = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let problem = DirichletProblem {
            domain: make_ball(vec![0.0, 0.0], 1.0, h)?,
            weight: area_weight(),
            curvature: PrescribedCurvature::constant(1.0),
            boundary: BoundaryData::zero(),
        };
        let r = homotopy_solve(&problem, &SolveConfig::default())?;
        let err = r
            .solution
            .rows()
            .map(|(x, u)| (u - (3f64.sqrt() - (4.0 - x[0] * x[0] - x[1] * x[1]).sqrt())).abs())
            .fold(0.0, f64::max);
        println!("h = 1/{:<3} converged {} max error {err:.3e}", (1.0 / h) as u32, r.converged);
        levels.push((h, err));
    }
    println!("observed order {:.3}", observed_order(&levels).unwrap_or(f64::NAN));
    Ok(())
}
