//! H_G of the barrier c·d + φ near the boundary of the unit disk approaches
//! the boundary curvatures H_G^∓ as c → ±∞.

use weighted_curvature::domain::make_ball;
use weighted_curvature::estimates::barrier_curvature;
use weighted_curvature::problem::BoundaryData;
use weighted_curvature::weights::area_weight;

fn main() -> weighted_curvature::Result<()> {
    let dom = make_ball(vec![0.0, 0.0], 1.0, 1.0 / 32.0)?;
    let phi = BoundaryData::from_expr(2, "0.3*x1")?;
    for c in [1.0, 10.0, 100.0, 1000.0] {
        let up = barrier_curvature(c, &phi, &dom, &area_weight(), 128)?;
        let down = barrier_curvature(-c, &phi, &dom, &area_weight(), 128)?;
        println!(
            "c = {c:<6} max |H_G - H_G^-| {:.3e}   (c -> -c) max |H_G - H_G^+| {:.3e}",
            up.ring_deviation_minus(),
            down.ring_deviation_plus()
        );
    }
    Ok(())
}
