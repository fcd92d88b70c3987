use weighted_curvature::domain::{make_ball, make_rectangle};
use weighted_curvature::estimates::{verify_estimates, EstimateStatus};
use weighted_curvature::problem::{BoundaryData, PrescribedCurvature};
use weighted_curvature::report::observed_order;
use weighted_curvature::solver::{homotopy_solve, DirichletProblem, JacobianChoice, SolveConfig, SolveReport};
use weighted_curvature::weights::{area_weight, epsilon_regularized_weight};

fn max_error(r: &SolveReport, exact: impl Fn(&[f64]) -> f64) -> f64 {
    r.solution.rows().map(|(x, u)| (u - exact(&x)).abs()).fold(0.0, f64::max)
}

#[test]
fn cap_respects_grid_symmetries() {
    let p = DirichletProblem {
        domain: make_ball(vec![0.0, 0.0], 1.0, 1.0 / 16.0).unwrap(),
        weight: area_weight(),
        curvature: PrescribedCurvature::constant(1.0),
        boundary: BoundaryData::zero(),
    };
    let r = homotopy_solve(&p, &SolveConfig::default()).unwrap();
    assert!(r.converged);
    let grid = &r.solution.grid;
    let at = |x: f64, y: f64| r.solution.value_at_node(grid.nearest(&[x, y]));
    for (x, u) in r.solution.rows() {
        for (a, b) in [(x[1], x[0]), (-x[0], x[1]), (x[0], -x[1])] {
            let v = at(a, b).expect("mirror node is an unknown");
            assert!((u - v).abs() < 1e-10, "{x:?}: {u} vs {v}");
        }
    }
    // Non-positive (zero only on boundary nodes), deepest at the centre.
    let centre = at(0.0, 0.0).unwrap();
    assert!(r.solution.rows().all(|(_, u)| u <= 0.0 && u >= centre - 1e-14));
}

#[test]
fn finite_difference_jacobian_reaches_the_same_solution() {
    let p = DirichletProblem {
        domain: make_ball(vec![0.0, 0.0], 1.0, 1.0 / 16.0).unwrap(),
        weight: epsilon_regularized_weight(0.5).unwrap(),
        curvature: PrescribedCurvature::zero(),
        boundary: BoundaryData::from_expr(2, "x1*x2").unwrap(),
    };
    let a = homotopy_solve(&p, &SolveConfig::default()).unwrap();
    let cfg = SolveConfig { jacobian: JacobianChoice::FiniteDifference, ..SolveConfig::default() };
    let b = homotopy_solve(&p, &cfg).unwrap();
    assert!(a.converged && b.converged);
    let gap = a
        .solution
        .values
        .iter()
        .zip(&b.solution.values)
        .filter_map(|(x, y)| Some((x.as_ref()? - y.as_ref()?).abs()))
        .fold(0.0, f64::max);
    assert!(gap < 1e-8, "{gap}");
}

#[test]
fn circular_arc_in_one_dimension() {
    // Curvature-one arc through (±1/2, 0), convex upward.
    let exact = |x: &[f64]| 0.75f64.sqrt() - (1.0 - x[0] * x[0]).sqrt();
    let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let errs: Vec<(f64, f64)> = hs
        .iter()
        .map(|&h| {
            let p = DirichletProblem {
                domain: make_ball(vec![0.0], 0.5, h).unwrap(),
                weight: area_weight(),
                curvature: PrescribedCurvature::constant(1.0),
                boundary: BoundaryData::zero(),
            };
            let r = homotopy_solve(&p, &SolveConfig::default()).unwrap();
            assert!(r.converged);
            (h, max_error(&r, exact))
        })
        .collect();
    let k = observed_order(&errs).unwrap();
    assert!(k > 1.8, "{errs:?} order {k}");
}

#[test]
fn scherk_surface_is_second_order() {
    let exact = |x: &[f64]| (x[1].cos() / x[0].cos()).ln();
    let boundary = BoundaryData::from_expr(2, "log(cos(x2)/cos(x1))").unwrap();
    let errs: Vec<(f64, f64)> = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]
        .iter()
        .map(|&h| {
            let p = DirichletProblem {
                domain: make_rectangle(vec![-1.0, -1.0], vec![1.0, 1.0], h).unwrap(),
                weight: area_weight(),
                curvature: PrescribedCurvature::zero(),
                boundary: boundary.clone(),
            };
            let r = homotopy_solve(&p, &SolveConfig::default()).unwrap();
            assert!(r.converged);
            assert_eq!(verify_estimates(&r, &p).unwrap().c0.status, EstimateStatus::Pass);
            (h, max_error(&r, exact))
        })
        .collect();
    let k = observed_order(&errs).unwrap();
    assert!(k > 1.8, "{errs:?} order {k}");
}

#[test]
fn supercritical_curvature_never_converges() {
    for h in [1.0 / 16.0, 1.0 / 24.0] {
        let p = DirichletProblem {
            domain: make_ball(vec![0.0, 0.0], 1.0, h).unwrap(),
            weight: area_weight(),
            curvature: PrescribedCurvature::constant(2.5),
            boundary: BoundaryData::zero(),
        };
        let r = homotopy_solve(&p, &SolveConfig::default()).unwrap();
        assert!(!r.converged);
        assert!(r.t_reached < 0.85, "{}", r.t_reached);
        assert!(r.condition_verdicts.as_ref().unwrap().nonexistence.triggered);
    }
}

#[test]
fn near_critical_cap_matches_sphere() {
    // H = 1.9 < tr G / R = 2: the spherical cap of radius 2/H = 1.05 still
    // spans the unit disk, with boundary slope about 3.
    let p = DirichletProblem {
        domain: make_ball(vec![0.0, 0.0], 1.0, 1.0 / 32.0).unwrap(),
        weight: area_weight(),
        curvature: PrescribedCurvature::constant(1.9),
        boundary: BoundaryData::zero(),
    };
    let r = homotopy_solve(&p, &SolveConfig::default()).unwrap();
    assert!(r.converged);
    assert!(r.max_boundary_gradient_seen < 1e3);
    let rho: f64 = 2.0 / 1.9;
    let exact = |x: &[f64]| (rho * rho - 1.0).sqrt() - (rho * rho - x[0] * x[0] - x[1] * x[1]).sqrt();
    let err = max_error(&r, exact);
    assert!(err < 1e-2, "{err}");
}
