//! Axiom checks for the built-in weights, a Hessian weight from an expression,
//! and the constant identity matrix (which is not a weight).

use nalgebra::DMatrix;
use weighted_curvature::weights::{area_weight, epsilon_regularized_weight, hessian_weight, validate_weight, Integrand, WeightMatrix};

fn main() -> weighted_curvature::Result<()> {
    let candidates = [
        ("area", area_weight()),
        ("eps = 0.2", epsilon_regularized_weight(0.2)?),
        ("crystalline-ish", hessian_weight(Integrand::from_expr(3, "sqrt(p1^2 + 3*p2^2 + p3^2 + p1*p3)")?)?),
        ("identity", WeightMatrix::custom_unchecked(|p| DMatrix::identity(p.len(), p.len()))),
    ];
    for (name, w) in &candidates {
        let r = validate_weight(w, 3, 1000, 1);
        println!("{name:>16}: {}", r.summary());
    }
    Ok(())
}
