//! Weighted curvatures H_G^± of domain boundaries, from the distance function.
//! For the area weight on a circle of radius r, H_G^+ = 1/r and H_G^- = -1/r.

use weighted_curvature::domain::{make_ball, make_ellipse};
use weighted_curvature::weights::{area_weight, epsilon_regularized_weight};

fn main() -> weighted_curvature::Result<()> {
    let disk = make_ball(vec![0.0, 0.0], 0.8, 0.02)?;
    let c = disk.boundary_weighted_curvatures(&area_weight(), 8)?;
    println!("circle r = 0.8, area weight: H+ = {:.6?}", c.h_plus);

    let ellipse = make_ellipse([0.0, 0.0], [1.0, 0.5], 0.01)?;
    let w = epsilon_regularized_weight(0.5)?;
    let c = ellipse.boundary_weighted_curvatures(&w, 8)?;
    for ((x, hp), hm) in c.points.iter().zip(&c.h_plus).zip(&c.h_minus) {
        println!("ellipse at ({:+.3}, {:+.3}): H+ = {hp:.5}, H- = {hm:.5}", x[0], x[1]);
    }
    Ok(())
}
