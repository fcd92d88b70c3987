//! Damped Newton and homotopy continuation for the Dirichlet problem
//! `Σ G_ij(-∇u, 1) ∂_ij u = t·H(x, u)` in Ω, `u = t·φ` on ∂Ω.

use serde::{Deserialize, Serialize};

use crate::conditions::{check_all, ConditionSettings, ConditionVerdicts};
use crate::discretization::{BoundaryPoint, Discretization, JacobianMode};
use crate::domain::{DomainSpec, NodeKind};
use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::problem::{BoundaryData, PrescribedCurvature};
use crate::weights::WeightMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub homotopy_steps: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub damping: f64,
    pub min_step: f64,
    pub jacobian: JacobianChoice,
    pub max_bisections: usize,
    pub blowup_threshold: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            homotopy_steps: 10,
            newton_tol: 1e-10,
            max_newton_iters: 50,
            damping: 0.5,
            min_step: 1e-4,
            jacobian: JacobianChoice::Analytic,
            max_bisections: 6,
            blowup_threshold: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianChoice {
    Analytic,
    FiniteDifference,
}

impl From<JacobianChoice> for JacobianMode {
    fn from(c: JacobianChoice) -> Self {
        match c {
            JacobianChoice::Analytic => JacobianMode::Analytic,
            JacobianChoice::FiniteDifference => JacobianMode::FiniteDifference,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParam(what.to_string()));
        if self.homotopy_steps < 1 {
            return bad("homotopy_steps must be at least 1");
        }
        if !(self.newton_tol > 0.0) || self.max_newton_iters == 0 {
            return bad("newton_tol and max_newton_iters must be positive");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad("damping must lie in (0, 1)");
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return bad("min_step must lie in (0, 1]");
        }
        if !(self.blowup_threshold > 0.0) {
            return bad("blowup_threshold must be positive");
        }
        Ok(())
    }
}

/// A Dirichlet problem on a domain.
#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub domain: DomainSpec,
    pub weight: WeightMatrix,
    pub curvature: PrescribedCurvature,
    pub boundary: BoundaryData,
}

/// Discrete graph: values at unknown and boundary grid nodes, plus the
/// boundary values at arm crossings.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphField {
    pub grid: UniformGrid,
    /// `None` at exterior nodes.
    pub values: Vec<Option<f64>>,
    /// Boundary points with their (homotopy-scaled) values.
    pub boundary_points: Vec<BoundaryPoint>,
    pub t: f64,
}

impl GraphField {
    pub fn from_unknowns(disc: &Discretization, u: &[f64], t: f64) -> Self {
        let grid = disc.domain().grid().clone();
        let mut values = vec![None; grid.len()];
        for (s, v) in disc.stencils().iter().zip(u) {
            values[s.grid_index] = Some(*v);
        }
        let boundary_points: Vec<BoundaryPoint> = disc
            .boundary_points()
            .iter()
            .map(|b| BoundaryPoint { value: t * b.value, ..b.clone() })
            .collect();
        for b in &boundary_points {
            if let Some(i) = b.grid_index {
                values[i] = Some(b.value);
            }
        }
        Self { grid, values, boundary_points, t }
    }

    pub fn unknowns(&self, disc: &Discretization) -> Vec<f64> {
        disc.stencils().iter().map(|s| self.values[s.grid_index].unwrap_or(0.0)).collect()
    }

    pub fn value_at_node(&self, idx: usize) -> Option<f64> {
        self.values[idx]
    }

    /// Largest `|u|` over nodes and boundary points.
    pub fn sup_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .chain(self.boundary_points.iter().map(|b| &b.value))
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_boundary_abs(&self) -> f64 {
        self.boundary_points.iter().map(|b| b.value.abs()).fold(0.0, f64::max)
    }

    /// `(x, u)` rows for every node carrying a value, in grid order.
    pub fn rows(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (self.grid.coords(i), v)))
    }
}

#[derive(Debug)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Scaled residual ∞-norm at each iterate.
    pub residuals: Vec<f64>,
    /// `None` on convergence.
    pub failure: Option<Error>,
    /// Largest boundary gradient over the undamped Newton trial points.
    pub trial_boundary_gradient: f64,
}

impl NewtonOutcome {
    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }

    pub fn into_result(self) -> Result<(Vec<f64>, usize, Vec<f64>)> {
        match self.failure {
            None => Ok((self.u, self.iterations, self.residuals)),
            Some(e) => Err(e),
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton on the scaled discrete residual at homotopy parameter `t`.
///
/// The iteration count includes the final residual evaluation, so an exact
/// initial guess reports one iteration.
pub fn newton_solve(
    disc: &Discretization,
    u0: &[f64],
    w: &WeightMatrix,
    hfun: &PrescribedCurvature,
    cfg: &SolveConfig,
    t: f64,
) -> Result<NewtonOutcome> {
    if u0.len() != disc.len() {
        return Err(Error::ShapeMismatch(format!("{} initial values for {} unknowns", u0.len(), disc.len())));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("initial guess is not finite".into()));
    }
    let mode: JacobianMode = cfg.jacobian.into();
    let mut u = u0.to_vec();
    let mut r = disc.scaled_residual(&u, t, w, hfun)?;
    let mut residuals = Vec::new();
    let mut iterations = 0;
    let mut trial_boundary_gradient: f64 = 0.0;
    let stall = |iterations, residual| Some(Error::NewtonStall { iterations, residual });
    loop {
        iterations += 1;
        let norm = inf_norm(&r);
        residuals.push(norm);
        if norm <= cfg.newton_tol {
            return Ok(NewtonOutcome { u, iterations, residuals, failure: None, trial_boundary_gradient });
        }
        if !norm.is_finite() || iterations > cfg.max_newton_iters {
            return Ok(NewtonOutcome { u, iterations, residuals, failure: stall(iterations, norm), trial_boundary_gradient });
        }
        let jac = disc.jacobian(&u, t, w, hfun, mode)?;
        let delta = match disc.newton_direction(&jac, &r) {
            Ok(d) => d,
            Err(e) => return Ok(NewtonOutcome { u, iterations, residuals, failure: Some(e), trial_boundary_gradient }),
        };
        let full: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let g = gradient_sups(disc, &full, t).1;
        trial_boundary_gradient = trial_boundary_gradient.max(if g.is_finite() { g } else { f64::INFINITY });
        let f0 = l2(&r);
        let mut lambda = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            if let Ok(rt) = disc.scaled_residual(&trial, t, w, hfun) {
                let ft = l2(&rt);
                if ft.is_finite() && ft <= (1.0 - 1e-4 * lambda) * f0 {
                    break Some((trial, rt));
                }
            }
            lambda *= cfg.damping;
            if lambda < cfg.min_step {
                break None;
            }
        };
        match accepted {
            Some((un, rn)) => {
                u = un;
                r = rn;
            }
            None => {
                return Ok(NewtonOutcome {
                    u,
                    iterations,
                    residuals,
                    failure: stall(iterations, norm),
                    trial_boundary_gradient,
                });
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureDiagnosis {
    None,
    NewtonStall,
    BoundaryGradientBlowup,
    ConditionViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyStep {
    pub t: f64,
    pub accepted: bool,
    pub iterations: usize,
    #[serde(with = "crate::serde_float::vec")]
    pub residuals: Vec<f64>,
    #[serde(with = "crate::serde_float")]
    pub sup_grad_boundary: f64,
    #[serde(with = "crate::serde_float")]
    pub trial_boundary_gradient: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: GraphField,
    pub converged: bool,
    pub t_reached: f64,
    pub residual_history: Vec<HomotopyStep>,
    pub sup_u: f64,
    pub sup_boundary_u: f64,
    pub sup_grad_interior: f64,
    pub sup_grad_boundary: f64,
    /// Largest boundary gradient seen during continuation, over accepted
    /// solutions and undamped Newton trial points.
    pub max_boundary_gradient_seen: f64,
    pub condition_verdicts: Option<ConditionVerdicts>,
    pub failure_diagnosis: FailureDiagnosis,
    pub warnings: Vec<String>,
}

/// `(sup |∇u|` over nodes away from the boundary, `sup |∇u|` over nodes with
/// a stencil arm ending on the boundary`)`.
pub fn gradient_sups(disc: &Discretization, u: &[f64], t: f64) -> (f64, f64) {
    let mut interior: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    for (k, s) in disc.stencils().iter().enumerate() {
        let g = disc.gradient(u, t, k).iter().map(|v| v * v).sum::<f64>().sqrt();
        if s.boundary_adjacent {
            boundary = boundary.max(g);
        } else {
            interior = interior.max(g);
        }
    }
    (interior, boundary)
}

pub fn homotopy_solve(problem: &DirichletProblem, cfg: &SolveConfig) -> Result<SolveReport> {
    homotopy_solve_with(problem, cfg, &ConditionSettings::default())
}

pub fn homotopy_solve_with(problem: &DirichletProblem, cfg: &SolveConfig, settings: &ConditionSettings) -> Result<SolveReport> {
    cfg.validate()?;
    let DirichletProblem { domain, weight, curvature, boundary } = problem;
    let verdicts = check_all(domain, weight, curvature, boundary, settings)?;
    let mut warnings = verdicts.warnings();
    let disc = Discretization::new(domain, boundary)?;

    let phi_ext = disc.sample(|x| boundary.value(x));
    let mut u = vec![0.0; disc.len()];
    let mut t = 0.0;
    let mut history = Vec::new();
    let mut max_grad_seen: f64 = 0.0;
    let mut failure = None;

    let first = newton_solve(&disc, &u, weight, curvature, cfg, 0.0)?;
    history.push(HomotopyStep {
        t: 0.0,
        accepted: first.converged(),
        iterations: first.iterations,
        residuals: first.residuals.clone(),
        sup_grad_boundary: gradient_sups(&disc, &first.u, 0.0).1,
        trial_boundary_gradient: first.trial_boundary_gradient,
    });
    if first.converged() {
        u = first.u;
    } else {
        failure = first.failure;
    }

    let dt = 1.0 / cfg.homotopy_steps as f64;
    'intervals: for k in 0..cfg.homotopy_steps {
        if failure.is_some() {
            break;
        }
        let t_end = if k + 1 == cfg.homotopy_steps { 1.0 } else { (k + 1) as f64 * dt };
        let mut step = t_end - t;
        let mut bisections = 0;
        while t < t_end {
            let t_try = if t + step >= t_end - 1e-14 { t_end } else { t + step };
            // Predictor: shift by the interior extension of the change in
            // boundary data, so the guess carries no jump at the boundary.
            let guess: Vec<f64> = u.iter().zip(&phi_ext).map(|(a, p)| a + (t_try - t) * p).collect();
            let out = newton_solve(&disc, &guess, weight, curvature, cfg, t_try)?;
            let gb = gradient_sups(&disc, &out.u, t_try).1;
            // Near a fold the Jacobian degenerates and undamped Newton
            // corrections escape along the bulging mode, so trial points
            // count towards the blow-up diagnosis.
            let seen = gb.max(out.trial_boundary_gradient);
            max_grad_seen = max_grad_seen.max(if seen.is_finite() { seen } else { f64::INFINITY });
            history.push(HomotopyStep {
                t: t_try,
                accepted: out.converged(),
                iterations: out.iterations,
                residuals: out.residuals.clone(),
                sup_grad_boundary: gb,
                trial_boundary_gradient: out.trial_boundary_gradient,
            });
            if out.converged() {
                u = out.u;
                t = t_try;
            } else if bisections < cfg.max_bisections {
                bisections += 1;
                step *= 0.5;
            } else {
                failure = out.failure;
                break 'intervals;
            }
        }
    }

    let converged = failure.is_none() && t == 1.0;
    let (sup_grad_interior, sup_grad_boundary) = gradient_sups(&disc, &u, t);
    let failure_diagnosis = if converged {
        FailureDiagnosis::None
    } else if max_grad_seen > cfg.blowup_threshold {
        FailureDiagnosis::BoundaryGradientBlowup
    } else {
        FailureDiagnosis::NewtonStall
    };
    if let Some(e) = &failure {
        warnings.push(format!("continuation stopped at t = {t}: {e}"));
    }
    let solution = GraphField::from_unknowns(&disc, &u, t);
    Ok(SolveReport {
        sup_u: solution.sup_abs(),
        sup_boundary_u: solution.sup_boundary_abs(),
        solution,
        converged,
        t_reached: t,
        residual_history: history,
        sup_grad_interior,
        sup_grad_boundary,
        max_boundary_gradient_seen: max_grad_seen,
        condition_verdicts: Some(verdicts),
        failure_diagnosis,
        warnings,
    })
}

/// Solves the full problem (`t = 1`) directly from an initial guess.
pub fn solve_from(problem: &DirichletProblem, u0: impl Fn(&[f64]) -> f64, cfg: &SolveConfig) -> Result<(Discretization, NewtonOutcome)> {
    cfg.validate()?;
    let disc = Discretization::new(&problem.domain, &problem.boundary)?;
    let start = disc.sample(u0);
    let out = newton_solve(&disc, &start, &problem.weight, &problem.curvature, cfg, 1.0)?;
    Ok((disc, out))
}

/// Nodes of the grid that carry solution values.
pub fn carries_value(kind: &NodeKind) -> bool {
    !matches!(kind, NodeKind::Exterior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_ball;
    use crate::weights::{area_weight, epsilon_regularized_weight};

    fn disk_problem(h: f64, curv: PrescribedCurvature, phi: BoundaryData) -> DirichletProblem {
        DirichletProblem {
            domain: make_ball(vec![0.0, 0.0], 1.0, h).unwrap(),
            weight: area_weight(),
            curvature: curv,
            boundary: phi,
        }
    }

    #[test]
    fn zero_problem_one_iteration() {
        let p = disk_problem(0.1, PrescribedCurvature::zero(), BoundaryData::zero());
        let disc = Discretization::new(&p.domain, &p.boundary).unwrap();
        let out = newton_solve(&disc, &vec![0.0; disc.len()], &p.weight, &p.curvature, &SolveConfig::default(), 0.0).unwrap();
        assert!(out.converged());
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn affine_data_gives_affine_minimal_graph() {
        let p = disk_problem(0.1, PrescribedCurvature::zero(), BoundaryData::affine(vec![0.4, -0.3], 0.2));
        let r = homotopy_solve(&p, &SolveConfig::default()).unwrap();
        assert!(r.converged);
        for (x, v) in r.solution.rows() {
            assert!((v - (0.4 * x[0] - 0.3 * x[1] + 0.2)).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_data_constant_solution() {
        let mut p = disk_problem(0.1, PrescribedCurvature::zero(), BoundaryData::constant(0.7));
        p.weight = epsilon_regularized_weight(0.5).unwrap();
        let r = homotopy_solve(&p, &SolveConfig::default()).unwrap();
        assert!(r.converged && r.t_reached == 1.0);
        assert!(r.solution.rows().all(|(_, v)| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = SolveConfig { homotopy_steps: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolveConfig { damping: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
