//! TOML run configuration for the `wmc` front end.
//!
//! ```toml
//! [domain]
//! shape = "ball"
//! center = [0.0, 0.0]
//! radius = 1.0
//! h = 0.03125
//!
//! [weight]
//! kind = "epsilon"
//! epsilon = 0.5
//!
//! [curvature]
//! kind = "constant"
//! value = 0.0
//!
//! [boundary]
//! kind = "expr"
//! expr = "x1*x2"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conditions::ConditionSettings;
use crate::domain::{make_ball, make_ellipse, make_rectangle, make_sdf, make_sdf_grid, DomainSpec, SampledSdf};
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr};
use crate::geometry::{EllipsoidChart, GraphSurface, Hemisphere, Immersion, Plane};
use crate::grid::UniformGrid;
use crate::problem::{BoundaryData, PrescribedCurvature};
use crate::solver::{DirichletProblem, SolveConfig};
use crate::weights::{area_weight, epsilon_regularized_weight, hessian_weight, Integrand, WeightMatrix};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Option<DomainSection>,
    pub weight: Option<WeightSection>,
    pub curvature: Option<CurvatureSection>,
    pub boundary: Option<BoundarySection>,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default)]
    pub check: CheckSection,
    pub oracle: Option<OracleSection>,
    pub surface: Option<SurfaceSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSection {
    Ball { center: Vec<f64>, radius: f64, h: f64 },
    Rectangle { lo: Vec<f64>, hi: Vec<f64>, h: f64 },
    Ellipse { center: [f64; 2], semi_axes: [f64; 2], h: f64 },
    /// Signed distance given as an expression in `x1..xn`.
    SdfExpr { sdf: String, lo: Vec<f64>, hi: Vec<f64>, h: f64 },
    /// Signed distance sampled on a grid, read from a text file.
    SdfGrid { path: PathBuf, h: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSection {
    Area,
    Epsilon { epsilon: f64 },
    /// Hessian of a one-homogeneous convex integrand in `p1..p(n+1)`.
    Hessian { integrand: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurvatureSection {
    Constant { value: f64 },
    AffineInZ { a: f64, b: f64 },
    Radial { h0: f64, h2: f64 },
    Expr { expr: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundarySection {
    Constant { value: f64 },
    Affine { a: Vec<f64>, b: f64 },
    Trigonometric { amplitude: f64, k: f64, shift: f64 },
    Expr { expr: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub p_samples: usize,
    pub seed: u64,
    pub z_samples: usize,
    pub boundary_samples: usize,
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    /// Sample count for `validate-weight`.
    pub weight_samples: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        let c = ConditionSettings::default();
        Self {
            p_samples: c.p_samples,
            seed: c.seed,
            z_samples: c.z_samples,
            boundary_samples: c.boundary_samples,
            z_min: None,
            z_max: None,
            weight_samples: 1000,
        }
    }
}

/// Exact solution used to report errors, optionally over a refinement
/// sequence of grid spacings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub exact: String,
    #[serde(default)]
    pub refine: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SurfaceSection {
    Plane { n: usize, #[serde(default = "default_half")] half: usize, #[serde(default = "default_spacing")] spacing: f64 },
    Sphere {
        n: usize,
        radius: f64,
        #[serde(default)]
        upper: bool,
        #[serde(default = "default_half")]
        half: usize,
        #[serde(default = "default_spacing")]
        spacing: f64,
    },
    Graph { n: usize, expr: String, #[serde(default = "default_half")] half: usize, #[serde(default = "default_spacing")] spacing: f64 },
}

fn default_half() -> usize {
    8
}

fn default_spacing() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub report: String,
    pub field: String,
    pub curvature: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            report: "report.json".into(),
            field: "field.csv".into(),
            curvature: "curvature.csv".into(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid_h: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(DomainSection::SdfGrid { path: p, .. }) = &mut cfg.domain {
            if p.is_relative() {
                if let Some(base) = path.parent() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate().map_err(|e| Error::Config(format!("[solver] {e}")))?;
        if let Some(DomainSection::SdfGrid { path, .. }) = &self.domain {
            if !path.exists() {
                return Err(Error::Config(format!("[domain] path {} does not exist", path.display())));
            }
        }
        if let Some(d) = &self.domain {
            if !(d.h() > 0.0) {
                return Err(Error::Config("[domain] h must be positive".into()));
            }
        }
        if self.check.weight_samples == 0 || self.check.p_samples == 0 {
            return Err(Error::Config("[check] sample counts must be positive".into()));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if let Some(seed) = o.seed {
            self.check.seed = seed;
        }
        if let (Some(h), Some(d)) = (o.grid_h, &mut self.domain) {
            d.set_h(h);
        }
    }

    fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
        s.as_ref().ok_or_else(|| Error::Config(format!("missing [{name}] section")))
    }

    pub fn build_domain(&self) -> Result<DomainSpec> {
        Self::section(&self.domain, "domain")?.build()
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(Self::section(&self.domain, "domain")?.dim())
    }

    /// The weight on `R^{n+1}`.
    pub fn build_weight(&self, n: usize) -> Result<WeightMatrix> {
        Self::section(&self.weight, "weight")?.build(n + 1)
    }

    pub fn build_curvature(&self, n: usize) -> Result<PrescribedCurvature> {
        Ok(match Self::section(&self.curvature, "curvature")? {
            CurvatureSection::Constant { value } => PrescribedCurvature::constant(*value),
            CurvatureSection::AffineInZ { a, b } => PrescribedCurvature::affine_in_z(*a, *b),
            CurvatureSection::Radial { h0, h2 } => PrescribedCurvature::radial(*h0, *h2),
            CurvatureSection::Expr { expr } => PrescribedCurvature::from_expr(n, expr)?,
        })
    }

    pub fn build_boundary(&self, n: usize) -> Result<BoundaryData> {
        Ok(match Self::section(&self.boundary, "boundary")? {
            BoundarySection::Constant { value } => BoundaryData::constant(*value),
            BoundarySection::Affine { a, b } => {
                if a.len() != n {
                    return Err(Error::Config(format!("[boundary] a has {} entries, domain dimension is {n}", a.len())));
                }
                BoundaryData::affine(a.clone(), *b)
            }
            BoundarySection::Trigonometric { amplitude, k, shift } => BoundaryData::trigonometric(*amplitude, *k, *shift),
            BoundarySection::Expr { expr } => BoundaryData::from_expr(n, expr)?,
        })
    }

    pub fn build_problem(&self) -> Result<DirichletProblem> {
        let domain = self.build_domain()?;
        let n = domain.dim();
        Ok(DirichletProblem {
            weight: self.build_weight(n)?,
            curvature: self.build_curvature(n)?,
            boundary: self.build_boundary(n)?,
            domain,
        })
    }

    pub fn condition_settings(&self) -> ConditionSettings {
        let c = &self.check;
        ConditionSettings {
            p_samples: c.p_samples,
            seed: c.seed,
            z_samples: c.z_samples,
            boundary_samples: c.boundary_samples,
            z_range: match (c.z_min, c.z_max) {
                (Some(a), Some(b)) => Some((a, b)),
                _ => None,
            },
            ..ConditionSettings::default()
        }
    }
}

impl DomainSection {
    pub fn h(&self) -> f64 {
        match self {
            Self::Ball { h, .. }
            | Self::Rectangle { h, .. }
            | Self::Ellipse { h, .. }
            | Self::SdfExpr { h, .. }
            | Self::SdfGrid { h, .. } => *h,
        }
    }

    fn set_h(&mut self, new: f64) {
        match self {
            Self::Ball { h, .. }
            | Self::Rectangle { h, .. }
            | Self::Ellipse { h, .. }
            | Self::SdfExpr { h, .. }
            | Self::SdfGrid { h, .. } => *h = new,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Ball { center, .. } => center.len(),
            Self::Rectangle { lo, .. } | Self::SdfExpr { lo, .. } => lo.len(),
            Self::Ellipse { .. } => 2,
            Self::SdfGrid { path, .. } => std::fs::read_to_string(path)
                .ok()
                .and_then(|t| t.split_whitespace().next().and_then(|n| n.parse().ok()))
                .unwrap_or(2),
        }
    }

    pub fn build(&self) -> Result<DomainSpec> {
        match self {
            Self::Ball { center, radius, h } => make_ball(center.clone(), *radius, *h),
            Self::Rectangle { lo, hi, h } => make_rectangle(lo.clone(), hi.clone(), *h),
            Self::Ellipse { center, semi_axes, h } => make_ellipse(*center, *semi_axes, *h),
            Self::SdfExpr { sdf, lo, hi, h } => {
                let e = Expr::parse(sdf)?;
                let (nx, uses_z, np) = e.arity();
                if nx > lo.len() || uses_z || np > 0 {
                    return Err(Error::Config(format!("[domain] sdf `{sdf}` may only use x1..x{}", lo.len())));
                }
                make_sdf(move |x| e.eval(&Bindings::x(x)).unwrap_or(f64::NAN), lo.clone(), hi.clone(), *h)
            }
            Self::SdfGrid { path, h } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                make_sdf_grid(SampledSdf::parse(&text)?, *h)
            }
        }
    }
}

impl WeightSection {
    /// The weight on `R^d`.
    pub fn build(&self, d: usize) -> Result<WeightMatrix> {
        match self {
            Self::Area => Ok(area_weight()),
            Self::Epsilon { epsilon } => epsilon_regularized_weight(*epsilon),
            Self::Hessian { integrand } => hessian_weight(Integrand::from_expr(d, integrand)?),
        }
    }
}

impl SurfaceSection {
    /// The immersion and its parameter grid.
    pub fn build(&self) -> Result<(Box<dyn Immersion>, UniformGrid)> {
        match self {
            Self::Plane { n, half, spacing } => {
                Ok((Box::new(Plane { n: *n }), UniformGrid::centered(&vec![0.0; *n], *half, *spacing)?))
            }
            Self::Sphere { n, radius, upper, half, spacing } => {
                let side = if *upper { Hemisphere::Upper } else { Hemisphere::Lower };
                let s = EllipsoidChart::sphere(*n, *radius, side)?;
                // The chart is parametrised over the unit ball; stay inside
                // |y| < 1/√2, away from the equator.
                let reach = *half as f64 * spacing * (*n as f64).sqrt();
                if !(reach < 1.0 / 2f64.sqrt()) {
                    return Err(Error::Config(format!(
                        "[surface] parameter grid reaches |y| = {reach:.3}; the sphere chart needs |y| < 0.707"
                    )));
                }
                Ok((Box::new(s), UniformGrid::centered(&vec![0.0; *n], *half, *spacing)?))
            }
            Self::Graph { n, expr, half, spacing } => Ok((
                Box::new(GraphSurface::from_expr(*n, expr)?),
                UniformGrid::centered(&vec![0.0; *n], *half, *spacing)?,
            )),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Plane { n, .. } | Self::Sphere { n, .. } | Self::Graph { n, .. } => *n,
        }
    }
}

/// Parses a `[surface]` kind given on the command line, e.g. `sphere`.
pub fn surface_from_name(name: &str, n: usize) -> Result<SurfaceSection> {
    match name {
        "plane" => Ok(SurfaceSection::Plane { n, half: default_half(), spacing: default_spacing() }),
        "sphere" => Ok(SurfaceSection::Sphere {
            n,
            radius: 1.0,
            upper: false,
            half: default_half(),
            spacing: default_spacing(),
        }),
        "paraboloid" => Ok(SurfaceSection::Graph {
            n,
            expr: (1..=n).map(|i| format!("0.5*x{i}^2")).collect::<Vec<_>>().join(" + "),
            half: default_half(),
            spacing: default_spacing(),
        }),
        other => Err(Error::UnknownSurface(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
shape = "ball"
center = [0.0, 0.0]
radius = 1.0
h = 0.1

[weight]
kind = "area"

[curvature]
kind = "constant"
value = 0.0

[boundary]
kind = "expr"
expr = "x1*x2"

[solver]
homotopy_steps = 5
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.solver.homotopy_steps, 5);
        assert_eq!(cfg.solver.newton_tol, 1e-10);
        let p = cfg.build_problem().unwrap();
        assert_eq!(p.domain.dim(), 2);
        assert_eq!(p.boundary.value(&[0.5, 2.0]), 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let bad = MINIMAL.replace("homotopy_steps", "homotopy_stepz");
        let err = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("homotopy_stepz") && err.contains("line"), "{err}");
        let bad = MINIMAL.replace("[weight]", "[wieght]");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::parse(MINIMAL).unwrap();
        cfg.apply(&Overrides { out: Some("x".into()), seed: Some(7), grid_h: Some(0.05) });
        assert_eq!(cfg.domain.as_ref().unwrap().h(), 0.05);
        assert_eq!(cfg.check.seed, 7);
        assert_eq!(cfg.output.dir, PathBuf::from("x"));
    }

    #[test]
    fn invalid_solver_values_are_config_errors() {
        let bad = MINIMAL.replace("homotopy_steps = 5", "homotopy_steps = 0");
        let cfg = RunConfig::parse(&bad).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_surface() {
        assert!(matches!(surface_from_name("torus", 2), Err(Error::UnknownSurface(_))));
    }
}
