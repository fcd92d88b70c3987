use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use weighted_curvature::conditions::{check_nonexistence, check_smallness, ConditionSample, ConditionSettings};
use weighted_curvature::domain::{make_ball, make_ellipse, make_rectangle, DomainSpec};
use weighted_curvature::geometry::{
    curvature_energy_inequality_check, weighted_mean_curvature, EllipsoidChart, Hemisphere, Immersion, Reparametrized,
    SurfaceJet,
};
use weighted_curvature::problem::PrescribedCurvature;
use weighted_curvature::weights::{area_weight, epsilon_regularized_weight, hessian_weight, Integrand, WeightMatrix};

fn weight(kind: u8, eps: f64) -> WeightMatrix {
    match kind % 3 {
        0 => area_weight(),
        1 => epsilon_regularized_weight(eps).unwrap(),
        _ => hessian_weight(Integrand::from_expr(3, "sqrt(p1^2 + 2*p2^2 + 0.5*p3^2 + 0.2*p1*p2)").unwrap()).unwrap(),
    }
}

fn direction() -> impl Strategy<Value = DVector<f64>> {
    prop::array::uniform3(-1.0..1.0f64)
        .prop_filter("away from zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        .prop_map(|v| DVector::from_row_slice(&v))
}

fn domain(kind: u8, size: f64) -> DomainSpec {
    let h = size / 12.0;
    match kind % 3 {
        0 => make_ball(vec![0.0, 0.0], size, h).unwrap(),
        1 => make_ellipse([0.0, 0.0], [size, 0.6 * size], h).unwrap(),
        _ => make_rectangle(vec![-size, -0.7 * size], vec![size, 0.7 * size], h).unwrap(),
    }
}

fn sample(dom: &DomainSpec, w: &WeightMatrix) -> ConditionSample {
    let settings = ConditionSettings { p_samples: 200, ..ConditionSettings::default() };
    ConditionSample::new(dom, w, (-1.0, 1.0), &settings).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_symmetric_with_kernel_and_homogeneous(
        kind in 0u8..3, eps in 0.1..3.0f64, p in direction(), t in 0.05..20.0f64,
    ) {
        let w = weight(kind, eps);
        let g = w.eval(&p).unwrap();
        let scale = g.amax();
        prop_assert!((&g - g.transpose()).amax() <= 1e-12 * scale);
        prop_assert!((&g * &p).amax() <= 1e-9 * scale * p.norm());
        let gt = w.eval(&(&p * t)).unwrap() * t;
        prop_assert!((gt - &g).amax() <= 1e-9 * scale);
    }

    #[test]
    fn weights_are_elliptic_on_the_orthogonal_complement(kind in 0u8..3, eps in 0.1..3.0f64, p in direction(), q in direction()) {
        let w = weight(kind, eps);
        let g = w.eval(&p).unwrap();
        let pu = &p / p.norm();
        let v = &q - &pu * pu.dot(&q);
        prop_assume!(v.norm() > 1e-3);
        prop_assert!(v.dot(&(&g * &v)) > 0.0);
    }

    #[test]
    fn smallness_and_nonexistence_exclude_each_other(kind in 0u8..3, wk in 0u8..3, size in 0.5..2.0f64, h in -6.0..6.0f64) {
        let dom = domain(kind, size);
        let w = weight(wk, 0.5);
        let s = sample(&dom, &w);
        let hfun = PrescribedCurvature::constant(h);
        let small = check_smallness(&dom, &hfun, &s);
        let non = check_nonexistence(&dom, &hfun, &s);
        prop_assert!(!(small.passed && non.triggered), "H = {h}: smallness {small:?} and nonexistence {non:?}");
    }

    #[test]
    fn verdicts_are_monotone_in_curvature(kind in 0u8..3, wk in 0u8..3, size in 0.5..2.0f64, a in 0.0..6.0f64, b in 0.0..6.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let dom = domain(kind, size);
        let w = weight(wk, 0.5);
        let s = sample(&dom, &w);
        let small_lo = check_smallness(&dom, &PrescribedCurvature::constant(lo), &s);
        let small_hi = check_smallness(&dom, &PrescribedCurvature::constant(-hi), &s);
        prop_assert!(small_lo.margin >= small_hi.margin);
        prop_assert!(!small_hi.passed || small_lo.passed);
        let non_lo = check_nonexistence(&dom, &PrescribedCurvature::constant(lo), &s);
        let non_hi = check_nonexistence(&dom, &PrescribedCurvature::constant(hi), &s);
        prop_assert!(!non_lo.triggered || non_hi.triggered);
    }

    #[test]
    fn weighted_curvature_is_chart_invariant(
        lin in prop::array::uniform4(-1.0..1.0f64),
        quad in prop::array::uniform6(-0.3..0.3f64),
        y in prop::array::uniform2(-0.15..0.15f64),
        eps in 0.2..2.0f64,
    ) {
        let m = DMatrix::from_row_slice(2, 2, &lin);
        prop_assume!(m.determinant() > 0.2);
        let q = vec![
            DMatrix::from_row_slice(2, 2, &[quad[0], quad[1], quad[1], quad[2]]),
            DMatrix::from_row_slice(2, 2, &[quad[3], quad[4], quad[4], quad[5]]),
        ];
        let chart = EllipsoidChart::new(vec![1.2, 0.8, 1.5], Hemisphere::Upper).unwrap();
        let re = Reparametrized::new(chart.clone(), DVector::zeros(2), m, q).unwrap();
        let x = re.map(&y);
        prop_assume!(x.norm() < 0.8);
        let Ok(jet) = re.jet(&y) else { return Ok(()) };
        let w = epsilon_regularized_weight(eps).unwrap();
        let h1 = weighted_mean_curvature(&chart.jet(x.as_slice()).unwrap(), &w).unwrap();
        let h2 = weighted_mean_curvature(&jet, &w).unwrap();
        prop_assert!((h1 - h2).abs() <= 1e-9 * (1.0 + h1.abs()));
    }

    #[test]
    fn curvature_energy_inequality_holds(
        first in prop::array::uniform6(-2.0..2.0f64),
        second in prop::array::uniform9(-3.0..3.0f64),
        kind in 0u8..3,
        eps in 0.1..3.0f64,
    ) {
        let dx = DMatrix::from_column_slice(3, 2, &first);
        prop_assume!(dx.column(0).cross(&dx.column(1)).norm() > 0.1);
        let s: Vec<DVector<f64>> = second.chunks(3).map(DVector::from_row_slice).collect();
        let jet = SurfaceJet::new(DVector::zeros(3), dx, vec![s[0].clone(), s[1].clone(), s[1].clone(), s[2].clone()]).unwrap();
        let (lhs, rhs) = curvature_energy_inequality_check(&jet, &weight(kind, eps)).unwrap();
        prop_assert!(lhs >= rhs - 1e-10 * (1.0 + rhs.abs()), "{lhs} < {rhs}");
    }

    #[test]
    fn report_floats_round_trip(bits in any::<u64>()) {
        #[derive(serde::Serialize, serde::Deserialize)]
        struct Wrap(#[serde(with = "weighted_curvature::serde_float")] f64);
        let v = f64::from_bits(bits);
        let back: Wrap = serde_json::from_str(&serde_json::to_string(&Wrap(v)).unwrap()).unwrap();
        prop_assert!(back.0.to_bits() == v.to_bits() || (v.is_nan() && back.0.is_nan()));
    }
}
