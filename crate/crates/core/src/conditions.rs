//! Sampled checks of the structural hypotheses on `(Ω, G, H)`.
//!
//! All checks quantify over `p ∈ S^n`, points `x` of Ω and heights `z` in a
//! finite band. `tr G(p)` does not depend on `(x, z)`, so its range over the
//! direction sample is computed once and combined with the `(x, z)` sample.

use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::linalg::sphere_directions;
use crate::problem::{BoundaryData, PrescribedCurvature};
use crate::weights::{trace_range, WeightMatrix};

/// Margin below which a strict inequality is reported as a boundary case.
pub const STRICT_TOL: f64 = 1e-9;

/// Round-off allowance for the non-strict inequalities, whose equality cases
/// are attained exactly in exact arithmetic.
pub const ROUNDOFF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSettings {
    pub p_samples: usize,
    pub seed: u64,
    /// Odd, so that `z = 0` is sampled when the band is symmetric.
    pub z_samples: usize,
    pub boundary_samples: usize,
    /// Overrides the a priori band `±(sup|φ| + R)`.
    pub z_range: Option<(f64, f64)>,
    /// Upper bound on the number of interior `x` samples.
    pub max_x_samples: usize,
}

impl Default for ConditionSettings {
    fn default() -> Self {
        Self {
            p_samples: 500,
            seed: 0,
            z_samples: 21,
            boundary_samples: 256,
            z_range: None,
            max_x_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    #[serde(with = "crate::serde_float")]
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketVerdict {
    pub passed: bool,
    /// Failing only because a margin is zero to within [`STRICT_TOL`].
    pub boundary_case: bool,
    /// `min (H - H_G^-)` over samples.
    #[serde(with = "crate::serde_float")]
    pub margin_lower: f64,
    /// `min (H_G^+ - H)` over samples.
    #[serde(with = "crate::serde_float")]
    pub margin_upper: f64,
    #[serde(with = "crate::serde_float")]
    pub margin: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceVerdict {
    pub triggered: bool,
    #[serde(with = "crate::serde_float")]
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdicts {
    pub smallness: Verdict,
    pub boundary_bracket: BracketVerdict,
    pub gradient_condition: Verdict,
    pub monotone: Verdict,
    pub nonexistence: NonexistenceVerdict,
    pub z_range: (f64, f64),
    pub trace_range: (f64, f64),
    pub settings: ConditionSettings,
}

impl ConditionVerdicts {
    /// All conditions required for existence hold and the non-existence
    /// criterion is not triggered.
    pub fn all_required_pass(&self) -> bool {
        self.smallness.passed
            && self.boundary_bracket.passed
            && self.gradient_condition.passed
            && self.monotone.passed
            && !self.nonexistence.triggered
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !self.smallness.passed {
            w.push(format!("smallness condition fails (margin {:.6e})", self.smallness.margin));
        }
        if !self.boundary_bracket.passed {
            let kind = if self.boundary_bracket.boundary_case { " (boundary case)" } else { "" };
            w.push(format!(
                "boundary curvature bracket fails{kind} at {:?} (margins {:.6e}, {:.6e})",
                self.boundary_bracket.worst_point, self.boundary_bracket.margin_lower, self.boundary_bracket.margin_upper
            ));
        }
        if !self.gradient_condition.passed {
            w.push(format!("gradient condition fails (margin {:.6e})", self.gradient_condition.margin));
        }
        if !self.monotone.passed {
            w.push(format!("H is not monotone in z (min H_z = {:.6e})", self.monotone.margin));
        }
        if self.nonexistence.triggered {
            w.push(format!("non-existence criterion triggered (margin {:.6e})", self.nonexistence.margin));
        }
        w
    }
}

/// Sample of `(x, z)` points and the direction-sampled range of `tr G`.
#[derive(Debug, Clone)]
pub struct ConditionSample {
    pub xs: Vec<Vec<f64>>,
    pub zs: Vec<f64>,
    pub trace_min: f64,
    pub trace_max: f64,
}

impl ConditionSample {
    pub fn new(dom: &DomainSpec, w: &WeightMatrix, z_range: (f64, f64), settings: &ConditionSettings) -> Result<Self> {
        let (lo, hi) = z_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParam(format!("z range [{lo}, {hi}] is not a finite interval")));
        }
        let dirs = sphere_directions(dom.dim() + 1, settings.p_samples.max(1), settings.seed);
        let (trace_min, trace_max) = trace_range(w, &dirs)?;
        let grid = dom.grid();
        let inside: Vec<usize> = (0..grid.len()).filter(|&i| dom.sdf(&grid.coords(i)) <= 0.0).collect();
        let stride = inside.len().div_ceil(settings.max_x_samples.max(1)).max(1);
        let mut xs: Vec<Vec<f64>> = inside.iter().step_by(stride).map(|&i| grid.coords(i)).collect();
        xs.extend(dom.boundary_samples(settings.boundary_samples));
        let m = settings.z_samples.max(1);
        let zs = if m == 1 || lo == hi {
            vec![0.5 * (lo + hi)]
        } else {
            (0..m).map(|k| lo + (hi - lo) * k as f64 / (m - 1) as f64).collect()
        };
        Ok(Self { xs, zs, trace_min, trace_max })
    }

    fn points(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.xs.iter().flat_map(move |x| self.zs.iter().map(move |&z| (x.as_slice(), z)))
    }
}

/// The a priori height band `±(sup_∂Ω |φ| + R)`.
pub fn default_z_range(dom: &DomainSpec, phi: &BoundaryData, boundary_samples: usize) -> (f64, f64) {
    let sup_phi = dom
        .boundary_samples(boundary_samples)
        .iter()
        .map(|x| phi.value(x).abs())
        .fold(0.0, f64::max);
    let m = sup_phi + dom.circumradius();
    (-m, m)
}

/// `R |H| ≤ min_p tr G(p)`.
pub fn check_smallness(dom: &DomainSpec, hfun: &PrescribedCurvature, sample: &ConditionSample) -> Verdict {
    let r = dom.circumradius();
    let sup_h = sample.points().map(|(x, z)| hfun.value(x, z).abs()).fold(0.0, f64::max);
    let margin = sample.trace_min - r * sup_h;
    Verdict { passed: margin >= -ROUNDOFF_TOL, margin }
}

/// `H² ≥ tr G(p) |∇H|` with the full `(x, z)` gradient.
pub fn check_gradient_condition(hfun: &PrescribedCurvature, sample: &ConditionSample) -> Verdict {
    let margin = sample
        .points()
        .map(|(x, z)| {
            let h = hfun.value(x, z);
            let g = hfun.grad(x, z).iter().map(|v| v * v).sum::<f64>().sqrt();
            h * h - sample.trace_max * g
        })
        .fold(f64::INFINITY, f64::min);
    Verdict { passed: margin >= -ROUNDOFF_TOL, margin }
}

/// `H_z ≥ 0`; the margin is the smallest sampled `H_z`.
pub fn check_monotone(hfun: &PrescribedCurvature, sample: &ConditionSample) -> Verdict {
    let margin = sample.points().map(|(x, z)| hfun.h_z(x, z)).fold(f64::INFINITY, f64::min);
    Verdict { passed: margin >= -ROUNDOFF_TOL, margin }
}

/// `H > max_p tr G(p) / R_in` everywhere, with `R_in` the inradius.
pub fn check_nonexistence(dom: &DomainSpec, hfun: &PrescribedCurvature, sample: &ConditionSample) -> NonexistenceVerdict {
    let inf_h = sample.points().map(|(x, z)| hfun.value(x, z)).fold(f64::INFINITY, f64::min);
    let margin = inf_h - sample.trace_max / dom.inradius();
    NonexistenceVerdict { triggered: margin > STRICT_TOL, margin }
}

/// `H_G^-(x) < H(x, z) < H_G^+(x)` at boundary samples and `|z| ≤ m`.
pub fn check_boundary_bracket(
    dom: &DomainSpec,
    w: &WeightMatrix,
    hfun: &PrescribedCurvature,
    z_range: (f64, f64),
    settings: &ConditionSettings,
) -> Result<BracketVerdict> {
    let bc = dom.boundary_weighted_curvatures(w, settings.boundary_samples)?;
    let m = settings.z_samples.max(2);
    let zs: Vec<f64> = (0..m).map(|k| z_range.0 + (z_range.1 - z_range.0) * k as f64 / (m - 1) as f64).collect();
    let mut margin_lower = f64::INFINITY;
    let mut margin_upper = f64::INFINITY;
    let mut worst = (f64::INFINITY, Vec::new());
    for ((x, hp), hm) in bc.points.iter().zip(&bc.h_plus).zip(&bc.h_minus) {
        for &z in &zs {
            let h = hfun.value(x, z);
            let (lo, up) = (h - hm, hp - h);
            margin_lower = margin_lower.min(lo);
            margin_upper = margin_upper.min(up);
            if lo.min(up) < worst.0 {
                worst = (lo.min(up), x.clone());
            }
        }
    }
    let margin = margin_lower.min(margin_upper);
    Ok(BracketVerdict {
        passed: margin > STRICT_TOL,
        boundary_case: margin.abs() <= STRICT_TOL,
        margin_lower,
        margin_upper,
        margin,
        worst_point: worst.1,
    })
}

pub fn check_all(
    dom: &DomainSpec,
    w: &WeightMatrix,
    hfun: &PrescribedCurvature,
    phi: &BoundaryData,
    settings: &ConditionSettings,
) -> Result<ConditionVerdicts> {
    let z_range = settings.z_range.unwrap_or_else(|| default_z_range(dom, phi, settings.boundary_samples));
    let sample = ConditionSample::new(dom, w, z_range, settings)?;
    Ok(ConditionVerdicts {
        smallness: check_smallness(dom, hfun, &sample),
        boundary_bracket: check_boundary_bracket(dom, w, hfun, z_range, settings)?,
        gradient_condition: check_gradient_condition(hfun, &sample),
        monotone: check_monotone(hfun, &sample),
        nonexistence: check_nonexistence(dom, hfun, &sample),
        z_range,
        trace_range: (sample.trace_min, sample.trace_max),
        settings: settings.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_ball, make_rectangle};
    use crate::weights::area_weight;

    fn disk() -> DomainSpec {
        make_ball(vec![0.0, 0.0], 1.0, 0.05).unwrap()
    }

    fn verdicts(dom: &DomainSpec, h: PrescribedCurvature) -> ConditionVerdicts {
        check_all(dom, &area_weight(), &h, &BoundaryData::zero(), &ConditionSettings::default()).unwrap()
    }

    #[test]
    fn zero_curvature_passes_everything() {
        let v = verdicts(&disk(), PrescribedCurvature::zero());
        assert!(v.all_required_pass(), "{:?}", v.warnings());
        assert!((v.smallness.margin - 2.0).abs() < 1e-12);
        assert_eq!(v.gradient_condition.margin, 0.0);
        assert!((v.boundary_bracket.margin_lower - 1.0).abs() < 1e-3);
        assert!((v.boundary_bracket.margin_upper - 1.0).abs() < 1e-3);
        assert!(!v.nonexistence.triggered);
    }

    #[test]
    fn smallness_equality_and_failure() {
        let v = verdicts(&disk(), PrescribedCurvature::constant(2.0));
        assert!(v.smallness.passed);
        assert!(v.smallness.margin.abs() < 1e-12);
        assert!(!v.nonexistence.triggered, "equality must not trigger");
        assert!(!verdicts(&disk(), PrescribedCurvature::constant(2.1)).smallness.passed);
    }

    #[test]
    fn nonexistence_margin() {
        let v = verdicts(&disk(), PrescribedCurvature::constant(2.5));
        assert!(v.nonexistence.triggered);
        assert!((v.nonexistence.margin - 0.5).abs() < 1e-12);
        assert!(!v.smallness.passed);
        assert!(!v.all_required_pass());
    }

    #[test]
    fn bracket_on_disk_and_square() {
        assert!(!verdicts(&disk(), PrescribedCurvature::constant(1.5)).boundary_bracket.passed);
        let sq = make_rectangle(vec![-1.0, -1.0], vec![1.0, 1.0], 0.05).unwrap();
        let zero = verdicts(&sq, PrescribedCurvature::zero()).boundary_bracket;
        assert!(!zero.passed && zero.boundary_case, "{zero:?}");
        let pos = verdicts(&sq, PrescribedCurvature::constant(0.1)).boundary_bracket;
        assert!(!pos.passed && !pos.boundary_case);
    }

    #[test]
    fn gradient_condition_fails_for_height_curvature() {
        let v = verdicts(&disk(), PrescribedCurvature::affine_in_z(0.0, 1.0));
        assert!(!v.gradient_condition.passed);
        assert!(v.monotone.passed);
        let dec = verdicts(&disk(), PrescribedCurvature::affine_in_z(0.0, -1.0));
        assert!(!dec.monotone.passed);
    }
}
