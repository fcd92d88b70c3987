//! Subcommands behind the `wmc` binary. Each returns an exit code together
//! with the files it wrote; the binary only parses arguments.

use std::fs;
use std::path::{Path, PathBuf};

use crate::conditions::check_all;
use crate::config::{surface_from_name, RunConfig, WeightSection};
use crate::error::{Error, Result};
use crate::estimates::verify_estimates;
use crate::expr::{Bindings, Expr};
use crate::geometry::JetField;
use crate::report::{curvature_csv, field_csv, observed_order, to_json, CheckReport, OracleLevel, OracleReport, SolveSummary, WeightReport};
use crate::solver::{homotopy_solve_with, DirichletProblem, GraphField};
use crate::weights::validate_weight;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit: i32,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Usage and configuration problems exit with 2, mathematical failures with 1.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NotConverged
        | Error::NewtonStall { .. }
        | Error::LinearSolveFailure(_)
        | Error::SingularMetric { .. }
        | Error::ValidationFailed(_) => EXIT_FAILURE,
        _ => EXIT_USAGE,
    }
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

pub fn cmd_check(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.build_problem()?;
    let verdicts = check_all(&p.domain, &p.weight, &p.curvature, &p.boundary, &cfg.condition_settings())?;
    let report = CheckReport::new(verdicts);
    let mut files = Vec::new();
    write(&cfg.output.dir, &cfg.output.report, &to_json(&report), &mut files)?;
    let v = &report.verdicts;
    let summary = format!(
        "smallness {} ({:+.3e}), bracket {} ({:+.3e}), gradient {} ({:+.3e}), monotone {}, nonexistence {} ({:+.3e})",
        pf(v.smallness.passed),
        v.smallness.margin,
        pf(v.boundary_bracket.passed),
        v.boundary_bracket.margin,
        pf(v.gradient_condition.passed),
        v.gradient_condition.margin,
        pf(v.monotone.passed),
        if v.nonexistence.triggered { "triggered" } else { "not triggered" },
        v.nonexistence.margin,
    );
    let exit = if report.all_required_pass { EXIT_OK } else { EXIT_FAILURE };
    Ok(Outcome { exit, summary, files })
}

fn pf(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

fn oracle_error(field: &GraphField, exact: &Expr) -> f64 {
    field
        .rows()
        .map(|(x, u)| (u - exact.eval(&Bindings::x(&x)).unwrap_or(f64::NAN)).abs())
        .fold(0.0, |m, e| if e.is_nan() { f64::NAN } else { m.max(e) })
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.build_problem()?;
    let settings = cfg.condition_settings();
    let report = homotopy_solve_with(&problem, &cfg.solver, &settings)?;
    let estimates = if report.converged { Some(verify_estimates(&report, &problem)?) } else { None };

    let oracle = match &cfg.oracle {
        None => None,
        Some(o) => {
            let exact = Expr::parse(&o.exact)?;
            let mut levels = Vec::new();
            for &h in &o.refine {
                let p = DirichletProblem { domain: problem.domain.with_grid_h(h)?, ..problem.clone() };
                let r = homotopy_solve_with(&p, &cfg.solver, &settings)?;
                levels.push(OracleLevel { h, converged: r.converged, error_inf: oracle_error(&r.solution, &exact) });
            }
            let pairs: Vec<(f64, f64)> = levels.iter().filter(|l| l.converged).map(|l| (l.h, l.error_inf)).collect();
            Some(OracleReport {
                exact: o.exact.clone(),
                error_inf: oracle_error(&report.solution, &exact),
                observed_order: observed_order(&pairs),
                levels,
            })
        }
    };

    let summary_json = SolveSummary::new(&report, estimates.clone(), oracle.clone());
    let mut files = Vec::new();
    write(&cfg.output.dir, &cfg.output.report, &to_json(&summary_json), &mut files)?;
    write(&cfg.output.dir, &cfg.output.field, &field_csv(&report.solution), &mut files)?;

    let ok = report.converged && estimates.as_ref().is_some_and(|e| e.all_pass_or_na());
    let mut summary = format!(
        "converged {} at t = {}, diagnosis {:?}, sup|u| = {:.6e}, sup|Du| boundary {:.6e}",
        report.converged, report.t_reached, report.failure_diagnosis, report.sup_u, report.sup_grad_boundary
    );
    if let Some(e) = &estimates {
        summary.push_str(&format!(
            ", estimates C0 {:?} / gradient {:?} / boundary {:?}",
            e.c0.status, e.gradient_maximum.status, e.boundary_gradient.status
        ));
    }
    if let Some(o) = &oracle {
        summary.push_str(&format!(", oracle error {:.3e}", o.error_inf));
        if let Some(k) = o.observed_order {
            summary.push_str(&format!(", observed order {k:.3}"));
        }
    }
    Ok(Outcome { exit: if ok { EXIT_OK } else { EXIT_FAILURE }, summary, files })
}

/// Samples `H_G` of an analytic surface over its parameter grid. A surface
/// name on the command line replaces the `[surface]` section.
pub fn cmd_curvature(cfg: &RunConfig, surface: Option<&str>) -> Result<Outcome> {
    let section = match surface {
        Some(name) => {
            let n = cfg.surface.as_ref().map(|s| s.dim()).or_else(|| cfg.dim().ok()).unwrap_or(2);
            surface_from_name(name, n)?
        }
        None => cfg.surface.clone().ok_or_else(|| Error::Config("missing [surface] section".into()))?,
    };
    let n = section.dim();
    let weight = cfg.weight.clone().unwrap_or(WeightSection::Area).build(n + 1)?;
    let (immersion, grid) = section.build()?;
    let field = JetField::from_immersion(immersion.as_ref(), grid.clone())?;
    let values = field.weighted_mean_curvatures(&weight)?;
    let params: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.coords(i)).collect();
    let mut files = Vec::new();
    write(&cfg.output.dir, &cfg.output.curvature, &curvature_csv(&params, &values), &mut files)?;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Ok(Outcome {
        exit: EXIT_OK,
        summary: format!("{} samples, H_G in [{lo:.12}, {hi:.12}]", values.len()),
        files,
    })
}

pub fn cmd_validate_weight(cfg: &RunConfig) -> Result<Outcome> {
    let section = cfg.weight.clone().ok_or_else(|| Error::Config("missing [weight] section".into()))?;
    let n = cfg.dim().ok().or_else(|| cfg.surface.as_ref().map(|s| s.dim())).unwrap_or(2);
    let w = section.build(n + 1)?;
    let report = validate_weight(&w, n + 1, cfg.check.weight_samples, cfg.check.seed);
    let out = WeightReport {
        schema: crate::report::SCHEMA,
        weight: format!("{section:?}"),
        passed: report.passed(),
        validation: report.clone(),
    };
    let mut files = Vec::new();
    write(&cfg.output.dir, &cfg.output.report, &to_json(&out), &mut files)?;
    Ok(Outcome {
        exit: if out.passed { EXIT_OK } else { EXIT_FAILURE },
        summary: report.summary(),
        files,
    })
}
