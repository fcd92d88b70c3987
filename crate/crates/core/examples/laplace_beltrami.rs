//! The weighted Laplace-Beltrami operator in divergence form and in covariant
//! form, on an ellipsoid chart.

use weighted_curvature::geometry::{weighted_laplace_beltrami, weighted_laplace_beltrami_covariant, EllipsoidChart, Hemisphere, JetField};
use weighted_curvature::grid::UniformGrid;
use weighted_curvature::weights::epsilon_regularized_weight;

fn main() -> weighted_curvature::Result<()> {
    let chart = EllipsoidChart::new(vec![1.0, 1.4, 0.8], Hemisphere::Lower)?;
    let w = epsilon_regularized_weight(0.5)?;
    for h in [0.04, 0.02, 0.01] {
        let field = JetField::from_immersion(&chart, UniformGrid::centered(&[0.0, 0.0], (0.4 / h) as usize, h)?)?;
        // ψ = x₁ x₃ restricted to the surface.
        let psi: Vec<f64> = field.jets.iter().map(|j| j.point()[0] * j.point()[2]).collect();
        let div = weighted_laplace_beltrami(&psi, &field, &w)?;
        let cov = weighted_laplace_beltrami_covariant(&psi, &field, &w)?;
        let gap = div
            .values
            .iter()
            .zip(&cov.values)
            .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
            .fold(0.0, f64::max);
        println!("h = {h:<5} max |Δ_G ψ| {:.4}  divergence vs covariant {gap:.3e}", div.max_abs());
    }
    Ok(())
}
