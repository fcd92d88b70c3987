//! Weighted mean curvature of round spheres, from exact jets and from sampled
//! positions. On a sphere of radius R, H_G(N) = tr G(N) / R.

use weighted_curvature::geometry::{EllipsoidChart, Hemisphere, JetField};
use weighted_curvature::grid::UniformGrid;
use weighted_curvature::weights::{area_weight, epsilon_regularized_weight};

fn main() -> weighted_curvature::Result<()> {
    let weights = [("area", area_weight()), ("eps = 0.5", epsilon_regularized_weight(0.5)?)];
    for (name, w) in &weights {
        for r in [0.5, 1.0, 2.0] {
            let chart = EllipsoidChart::sphere(2, r, Hemisphere::Lower)?;
            print!("{name:>9}  R = {r:<4}");
            for h in [0.05, 0.025, 0.0125] {
                let grid = UniformGrid::centered(&[0.0, 0.0], (0.3 / h) as usize, h)?;
                let sampled = JetField::sampled(&chart, grid)?;
                let err = sampled
                    .metric_data(w)?
                    .iter()
                    .map(|m| (m.weighted_mean_curvature() - m.weight.trace() / r).abs() / (m.weight.trace() / r))
                    .fold(0.0, f64::max);
                print!("  h = {h:<6} rel err {err:.2e}");
            }
            println!();
        }
    }
    Ok(())
}
