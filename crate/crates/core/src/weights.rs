//! Weight matrices `G(p)`: symmetric, homogeneous of degree −1, with `p` in
//! the kernel and positive definite on `p^⊥`. They define the anisotropy of
//! every weighted curvature in this crate.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Var};
use crate::linalg::{orthonormal_complement, random_unit, sphere_directions, sym_eig_range};

type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type DerivFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Relative step for finite differences in `p`.
pub const P_STEP: f64 = 1e-5;

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const KERNEL_TOL: f64 = 1e-10;
pub const HOMOGENEITY_TOL: f64 = 1e-9;
pub const HOMOGENEITY_SCALES: [f64; 3] = [0.5, 2.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    Area,
    HessianOfF,
    EpsilonRegularized { eps: f64 },
    Custom,
}

/// A weight matrix field `p ↦ G(p)` on `R^{n+1} \ {0}`.
#[derive(Clone)]
pub struct WeightMatrix {
    kind: WeightKind,
    eval: MatrixFn,
    deriv: Option<DerivFn>,
    symmetric_in_p: bool,
}

impl fmt::Debug for WeightMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightMatrix")
            .field("kind", &self.kind)
            .field("analytic_derivative", &self.deriv.is_some())
            .finish()
    }
}

impl WeightMatrix {
    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    /// True when `G(-p) = G(p)` is known to hold.
    pub fn is_even(&self) -> bool {
        self.symmetric_in_p
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn eval(&self, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        let norm = p.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        if !norm.is_finite() {
            return Err(Error::WeightUndefined { p: p.iter().copied().collect() });
        }
        let g = (self.eval)(p);
        if g.nrows() != p.len() || g.ncols() != p.len() {
            return Err(Error::ShapeMismatch(format!(
                "weight returned a {}x{} matrix for a vector of length {}",
                g.nrows(),
                g.ncols(),
                p.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::WeightUndefined { p: p.iter().copied().collect() });
        }
        Ok(g)
    }

    /// Directional derivative `d/ds G(p + s q)` at `s = 0`. Closed form when
    /// the weight provides one, otherwise the five-point central difference
    /// with step `P_STEP·|p|`.
    pub fn directional_derivative(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        if p.norm() == 0.0 {
            return Err(Error::ZeroVector);
        }
        if let Some(d) = &self.deriv {
            return Ok(d(p, q));
        }
        let qn = q.norm();
        if qn == 0.0 {
            return Ok(DMatrix::zeros(p.len(), p.len()));
        }
        let step = P_STEP * p.norm();
        let dir = q * (step / qn);
        let g = |k: f64| self.eval(&(p + &dir * k));
        let d = (g(1.0)? - g(-1.0)?) * 8.0 - (g(2.0)? - g(-2.0)?);
        Ok(d * (qn / (12.0 * step)))
    }

    /// `∂G/∂p_mu` at `p`.
    pub fn partial(&self, p: &DVector<f64>, mu: usize) -> Result<DMatrix<f64>> {
        let mut e = DVector::zeros(p.len());
        e[mu] = 1.0;
        self.directional_derivative(p, &e)
    }

    /// Shape-agnostic custom weight. Nothing is checked here; see
    /// [`WeightMatrix::custom`] for the validating constructor.
    pub fn custom_unchecked(f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Self {
            kind: WeightKind::Custom,
            eval: Arc::new(f),
            deriv: None,
            symmetric_in_p: false,
        }
    }

    /// Custom weight in `R^dim`, validated once at registration.
    pub fn custom(
        dim: usize,
        f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        let w = Self::custom_unchecked(f);
        let report = validate_weight(&w, dim, REGISTRATION_SAMPLES, 0);
        if !report.passed() {
            return Err(Error::ValidationFailed(report.summary()));
        }
        Ok(w)
    }

    /// Declares `G(-p) = G(p)`; used by boundary-curvature shortcuts and tests.
    pub fn with_even_symmetry(mut self, even: bool) -> Self {
        self.symmetric_in_p = even;
        self
    }
}

const REGISTRATION_SAMPLES: usize = 200;

/// `G(p) = |p|^{-3}(|p|^2 E - p p^T)`, the Hessian of `|p|`.
pub fn area_weight() -> WeightMatrix {
    WeightMatrix {
        kind: WeightKind::Area,
        eval: Arc::new(|p| quadratic_norm_hessian(p, 1.0)),
        deriv: Some(Arc::new(|p, q| quadratic_norm_hessian_derivative(p, q, 1.0))),
        symmetric_in_p: true,
    }
}

/// Hessian of `F_ε(p) = sqrt(p_1^2 + ... + p_n^2 + ε^2 p_{n+1}^2)`.
pub fn epsilon_regularized_weight(eps: f64) -> Result<WeightMatrix> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParam(format!("eps must be positive, got {eps}")));
    }
    let e2 = eps * eps;
    Ok(WeightMatrix {
        kind: WeightKind::EpsilonRegularized { eps },
        eval: Arc::new(move |p| quadratic_norm_hessian(p, e2)),
        deriv: Some(Arc::new(move |p, q| quadratic_norm_hessian_derivative(p, q, e2))),
        symmetric_in_p: true,
    })
}

fn diag_scale(v: &DVector<f64>, last: f64) -> DVector<f64> {
    let mut out = v.clone();
    let k = out.len() - 1;
    out[k] *= last;
    out
}

// F(p) = sqrt(p^T D p) with D = diag(1, .., 1, last). Hessian D/F - Dp (Dp)^T / F^3.
fn quadratic_norm_hessian(p: &DVector<f64>, last: f64) -> DMatrix<f64> {
    let dp = diag_scale(p, last);
    let f = p.dot(&dp).sqrt();
    let mut g = -(&dp * dp.transpose()) / (f * f * f);
    let d = p.len();
    for i in 0..d {
        g[(i, i)] += if i + 1 == d { last } else { 1.0 } / f;
    }
    g
}

fn quadratic_norm_hessian_derivative(p: &DVector<f64>, q: &DVector<f64>, last: f64) -> DMatrix<f64> {
    let dp = diag_scale(p, last);
    let dq = diag_scale(q, last);
    let f = p.dot(&dp).sqrt();
    let s = q.dot(&dp) / f;
    let f3 = f * f * f;
    let outer = &dp * dp.transpose();
    let mut m = -(&dq * dp.transpose() + &dp * dq.transpose()) / f3 + outer * (3.0 * s / (f3 * f));
    let d = p.len();
    for i in 0..d {
        m[(i, i)] -= if i + 1 == d { last } else { 1.0 } * s / (f * f);
    }
    m
}

/// A 1-homogeneous integrand `F(p)` with optional closed-form derivatives.
#[derive(Clone)]
pub struct Integrand {
    dim: usize,
    value: ScalarFn,
    gradient: Option<VectorFn>,
    hessian: Option<MatrixFn>,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("dim", &self.dim)
            .field("gradient", &self.gradient.is_some())
            .field("hessian", &self.hessian.is_some())
            .finish()
    }
}

impl Integrand {
    pub fn new(dim: usize, value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            gradient: None,
            hessian: None,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    /// `F(p) = |p|` with its closed-form gradient `p/|p|`.
    pub fn euclidean_norm(dim: usize) -> Self {
        Self::new(dim, |p| p.norm()).with_gradient(|p| p / p.norm())
    }

    /// `F_ε` with its closed-form gradient.
    pub fn epsilon_norm(dim: usize, eps: f64) -> Self {
        let e2 = eps * eps;
        Self::new(dim, move |p| p.dot(&diag_scale(p, e2)).sqrt()).with_gradient(move |p| {
            let dp = diag_scale(p, e2);
            let f = p.dot(&dp).sqrt();
            dp / f
        })
    }

    /// Integrand given as an expression in `p1..p{dim}`; gradient and Hessian
    /// are derived symbolically.
    pub fn from_expr(dim: usize, src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        let (nx, uses_z, np) = e.arity();
        if nx > 0 || uses_z {
            return Err(Error::Expr(format!("integrand `{src}` may only use p1..p{dim}")));
        }
        if np > dim {
            return Err(Error::Expr(format!("integrand `{src}` uses p{np} but dim is {dim}")));
        }
        let grad: Vec<Expr> = (0..dim).map(|i| e.derivative(Var::P(i))).collect();
        let hess: Vec<Vec<Expr>> = grad
            .iter()
            .map(|gi| (0..dim).map(|j| gi.derivative(Var::P(j))).collect())
            .collect();
        let eval = |ex: &Expr, p: &DVector<f64>| ex.eval(&Bindings::p(p.as_slice())).unwrap_or(f64::NAN);
        let value = e.clone();
        Ok(Self::new(dim, move |p| eval(&value, p))
            .with_gradient(move |p| DVector::from_iterator(dim, grad.iter().map(|g| eval(g, p))))
            .with_hessian(move |p| DMatrix::from_fn(dim, dim, |i, j| eval(&hess[i][j], p))))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, p: &DVector<f64>) -> f64 {
        (self.value)(p)
    }

    pub fn gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        match &self.gradient {
            Some(g) => g(p),
            None => {
                let step = 1e-6 * p.norm();
                DVector::from_fn(p.len(), |i, _| {
                    let mut e = DVector::zeros(p.len());
                    e[i] = step;
                    ((self.value)(&(p + &e)) - (self.value)(&(p - &e))) / (2.0 * step)
                })
            }
        }
    }

    /// Hessian: closed form, else five-point central differences of the
    /// gradient with step `P_STEP·|p|`, else second differences of the value.
    pub fn hessian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        if let Some(h) = &self.hessian {
            return h(p);
        }
        let d = p.len();
        let m = if let Some(g) = &self.gradient {
            let step = P_STEP * p.norm();
            let mut m = DMatrix::zeros(d, d);
            for j in 0..d {
                let mut e = DVector::zeros(d);
                e[j] = step;
                let col = ((g(&(p + &e)) - g(&(p - &e))) * 8.0 - (g(&(p + &e * 2.0)) - g(&(p - &e * 2.0))))
                    / (12.0 * step);
                m.set_column(j, &col);
            }
            m
        } else {
            let step = 1e-4 * p.norm();
            let f = |v: &DVector<f64>| (self.value)(v);
            DMatrix::from_fn(d, d, |i, j| {
                let mut ei = DVector::zeros(d);
                let mut ej = DVector::zeros(d);
                ei[i] = step;
                ej[j] = step;
                (f(&(p + &ei + &ej)) - f(&(p + &ei - &ej)) - f(&(p - &ei + &ej)) + f(&(p - &ei - &ej)))
                    / (4.0 * step * step)
            })
        };
        (&m + m.transpose()) * 0.5
    }

    /// Worst relative violation of `F(tp) = t F(p)` over sampled `p` and `t ∈ {0.5, 2}`.
    pub fn homogeneity_defect(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let p = random_unit(self.dim, &mut rng);
            let f = self.value(&p);
            for t in [0.5, 2.0] {
                let ft = self.value(&(&p * t));
                worst = worst.max((ft - t * f).abs() / f.abs().max(1e-300));
            }
        }
        worst
    }
}

/// Weight matrix given by the Hessian of a 1-homogeneous integrand. The
/// integrand's homogeneity and the resulting kernel and homogeneity
/// properties of `G` are checked here; ellipticity is left to
/// [`validate_weight`].
pub fn hessian_weight(f: Integrand) -> Result<WeightMatrix> {
    let defect = f.homogeneity_defect(64, 1);
    if defect > HOMOGENEITY_TOL {
        return Err(Error::ValidationFailed(format!(
            "integrand is not 1-homogeneous (relative defect {defect:e})"
        )));
    }
    let dim = f.dim();
    let even = {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        (0..16).all(|_| {
            let p = random_unit(dim, &mut rng);
            (f.value(&p) - f.value(&-&p)).abs() <= 1e-12 * f.value(&p).abs()
        })
    };
    let w = WeightMatrix {
        kind: WeightKind::HessianOfF,
        eval: Arc::new(move |p| f.hessian(p)),
        deriv: None,
        symmetric_in_p: even,
    };
    let report = validate_weight(&w, dim, 64, 3);
    if !(report.kernel.passed && report.homogeneity.passed && report.symmetry.passed) {
        return Err(Error::ValidationFailed(report.summary()));
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    /// Worst relative violation over all samples.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticityCheck {
    /// Smallest eigenvalue of `G(p)` restricted to `p^⊥`, over unit samples.
    pub min_eigenvalue: f64,
    /// Largest eigenvalue of `G(p)` restricted to `p^⊥`, over unit samples.
    pub max_eigenvalue: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub symmetry: AxiomCheck,
    pub kernel: AxiomCheck,
    pub homogeneity: AxiomCheck,
    pub ellipticity: EllipticityCheck,
    /// Evaluation failures (non-finite output, wrong shape).
    pub evaluation_errors: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.evaluation_errors == 0
            && self.symmetry.passed
            && self.kernel.passed
            && self.homogeneity.passed
            && self.ellipticity.passed
    }

    pub fn summary(&self) -> String {
        format!(
            "symmetry {:e} ({}), kernel {:e} ({}), homogeneity {:e} ({}), ellipticity min eig {:e} ({}), {} evaluation errors",
            self.symmetry.worst,
            verdict(self.symmetry.passed),
            self.kernel.worst,
            verdict(self.kernel.passed),
            self.homogeneity.worst,
            verdict(self.homogeneity.passed),
            self.ellipticity.min_eigenvalue,
            verdict(self.ellipticity.passed),
            self.evaluation_errors
        )
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

/// Spot-checks symmetry, kernel, homogeneity and ellipticity of `w` on
/// `samples` random directions in `R^dim`, each at a random log-uniform
/// radius in `[0.1, 10]`.
pub fn validate_weight(w: &WeightMatrix, dim: usize, samples: usize, seed: u64) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sym: f64 = 0.0;
    let mut ker: f64 = 0.0;
    let mut hom: f64 = 0.0;
    let mut eig_lo = f64::INFINITY;
    let mut eig_hi = f64::NEG_INFINITY;
    let mut errors = 0;
    for _ in 0..samples {
        let u = random_unit(dim, &mut rng);
        let r = 10f64.powf(rng.random_range(-1.0..1.0));
        let p = &u * r;
        let g = match w.eval(&p) {
            Ok(g) => g,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        let gn = g.norm();
        let rel = |v: f64| if gn > 0.0 { v / gn } else if v > 0.0 { f64::INFINITY } else { 0.0 };
        sym = sym.max(rel((&g - g.transpose()).norm()));
        ker = ker.max(rel((&g * &p).norm() / r));
        for t in HOMOGENEITY_SCALES {
            match w.eval(&(&p * t)) {
                Ok(gt) => hom = hom.max(rel((gt * t - &g).norm())),
                Err(_) => errors += 1,
            }
        }
        // Restrict the unit-radius matrix to p^⊥.
        let b = orthonormal_complement(&u);
        let (lo, hi) = sym_eig_range(&(b.transpose() * (&g * r) * &b));
        eig_lo = eig_lo.min(lo);
        eig_hi = eig_hi.max(hi);
    }
    if samples == 0 {
        eig_lo = 0.0;
        eig_hi = 0.0;
    }
    ValidationReport {
        dim,
        samples,
        seed,
        symmetry: AxiomCheck { worst: sym, tolerance: SYMMETRY_TOL, passed: sym <= SYMMETRY_TOL },
        kernel: AxiomCheck { worst: ker, tolerance: KERNEL_TOL, passed: ker <= KERNEL_TOL },
        homogeneity: AxiomCheck { worst: hom, tolerance: HOMOGENEITY_TOL, passed: hom <= HOMOGENEITY_TOL },
        ellipticity: EllipticityCheck {
            min_eigenvalue: eig_lo,
            max_eigenvalue: eig_hi,
            passed: samples > 0 && eig_lo > 0.0,
        },
        evaluation_errors: errors,
    }
}

/// Range of `tr G(p)` over `samples` deterministic directions `p ∈ S^n`.
pub fn trace_on_sphere_bound(w: &WeightMatrix, dim: usize, samples: usize) -> Result<(f64, f64)> {
    trace_range(w, &sphere_directions(dim, samples, 0))
}

pub fn trace_range(w: &WeightMatrix, dirs: &[DVector<f64>]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in dirs {
        let t = w.eval(p)?.trace();
        lo = lo.min(t);
        hi = hi.max(t);
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn area_weight_at_vertical_direction() {
        let g = area_weight().eval(&v(&[0.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(g, DMatrix::from_diagonal(&v(&[1.0, 1.0, 0.0])), epsilon = 1e-15);
    }

    #[test]
    fn area_weight_trace_and_kernel() {
        let w = area_weight();
        let p = v(&[0.3, -1.2, 2.0]);
        let g = w.eval(&p).unwrap();
        assert!((g.trace() - 2.0 / p.norm()).abs() < 1e-14);
        assert!((&g * &p).norm() < 1e-15);
    }

    #[test]
    fn zero_vector_is_rejected() {
        assert!(matches!(area_weight().eval(&DVector::zeros(3)), Err(Error::ZeroVector)));
    }

    #[test]
    fn eps_one_is_area_weight() {
        let a = area_weight();
        let e = epsilon_regularized_weight(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = random_unit(3, &mut rng) * 3.0;
            assert!((a.eval(&p).unwrap() - e.eval(&p).unwrap()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn eps_must_be_positive() {
        assert!(epsilon_regularized_weight(0.0).is_err());
        assert!(epsilon_regularized_weight(-1.0).is_err());
    }

    #[test]
    fn eps_weight_kernel_at_random_points() {
        let w = epsilon_regularized_weight(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = random_unit(3, &mut rng) * rng.random_range(0.1..5.0);
            let g = w.eval(&p).unwrap();
            assert!((&g * &p).norm() <= KERNEL_TOL * g.norm() * p.norm());
        }
    }

    #[test]
    fn analytic_derivative_matches_finite_difference() {
        let w = epsilon_regularized_weight(0.4).unwrap();
        let fd = WeightMatrix::custom_unchecked(move |p| quadratic_norm_hessian(p, 0.16));
        let p = v(&[0.2, -0.7, 1.1]);
        let q = v(&[1.0, 0.5, -0.3]);
        let exact = w.directional_derivative(&p, &q).unwrap();
        let approx = fd.directional_derivative(&p, &q).unwrap();
        assert!((exact - approx).abs().max() < 1e-8);
    }

    #[test]
    fn hessian_of_norm_matches_area_weight() {
        let h = hessian_weight(Integrand::euclidean_norm(3)).unwrap();
        let a = area_weight();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let p = random_unit(3, &mut rng) * rng.random_range(0.2..4.0);
            let diff = (h.eval(&p).unwrap() - a.eval(&p).unwrap()).abs().max();
            assert!(diff < 1e-9, "diff {diff:e}");
        }
    }

    #[test]
    fn hessian_of_eps_norm_matches_eps_weight() {
        let eps = 0.3;
        let h = hessian_weight(Integrand::epsilon_norm(3, eps)).unwrap();
        let e = epsilon_regularized_weight(eps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let p = random_unit(3, &mut rng) * rng.random_range(0.5..2.0);
            let diff = (h.eval(&p).unwrap() - e.eval(&p).unwrap()).abs().max();
            assert!(diff < 1e-9, "diff {diff:e}");
        }
    }

    #[test]
    fn expression_integrand_is_exact() {
        let f = Integrand::from_expr(3, "sqrt(p1^2 + p2^2 + 0.25*p3^2)").unwrap();
        let h = hessian_weight(f).unwrap();
        let e = epsilon_regularized_weight(0.5).unwrap();
        let p = v(&[0.4, -0.1, 0.9]);
        assert!((h.eval(&p).unwrap() - e.eval(&p).unwrap()).abs().max() < 1e-13);
        assert!(h.is_even());
    }

    #[test]
    fn linear_integrand_fails_ellipticity() {
        // F(p) = <a, p> is 1-homogeneous with zero Hessian.
        let f = Integrand::new(3, |p| 0.5 * p[0] + 2.0 * p[2]).with_gradient(|_| v(&[0.5, 0.0, 2.0]));
        let w = hessian_weight(f).unwrap();
        let report = validate_weight(&w, 3, 200, 0);
        assert!(!report.ellipticity.passed);
        assert!(report.kernel.passed);
    }

    #[test]
    fn non_homogeneous_integrand_is_rejected() {
        let f = Integrand::new(3, |p| p.norm_squared());
        assert!(matches!(hessian_weight(f), Err(Error::ValidationFailed(_))));
    }

    #[test]
    fn builtin_weights_validate() {
        for w in [area_weight(), epsilon_regularized_weight(0.5).unwrap(), epsilon_regularized_weight(0.1).unwrap()] {
            for dim in [2, 3, 4] {
                let r = validate_weight(&w, dim, 1000, 42);
                assert!(r.passed(), "{:?} dim {dim}: {}", w.kind(), r.summary());
            }
        }
    }

    #[test]
    fn identity_weight_fails_kernel_and_homogeneity() {
        let w = WeightMatrix::custom_unchecked(|p| DMatrix::identity(p.len(), p.len()));
        let r = validate_weight(&w, 3, 1000, 42);
        assert!(!r.kernel.passed);
        assert!(!r.homogeneity.passed);
        assert!(r.symmetry.passed);
        assert!(matches!(WeightMatrix::custom(3, |p| DMatrix::identity(p.len(), p.len())), Err(Error::ValidationFailed(_))));
    }

    #[test]
    fn non_convex_integrand_fails_ellipticity() {
        // F(p) = |p| - 2 p_3^2 / |p| has a negative curvature direction near
        // horizontal p.
        let f = Integrand::new(3, |p| p.norm() - 2.0 * p[2] * p[2] / p.norm()).with_gradient(|p| {
            let r = p.norm();
            let mut g = p / r + p * (2.0 * p[2] * p[2] / (r * r * r));
            g[2] -= 4.0 * p[2] / r;
            g
        });
        let w = hessian_weight(f).unwrap();
        let r = validate_weight(&w, 3, 1000, 42);
        assert!(!r.ellipticity.passed);
        assert!(r.ellipticity.min_eigenvalue < 0.0);
    }

    #[test]
    fn trace_bounds() {
        let (lo, hi) = trace_on_sphere_bound(&area_weight(), 3, 500).unwrap();
        assert!((lo - 2.0).abs() < 1e-14 && (hi - 2.0).abs() < 1e-14);
        let (lo, hi) = trace_on_sphere_bound(&epsilon_regularized_weight(0.5).unwrap(), 3, 500).unwrap();
        assert!(lo > 0.0 && lo < hi);
        // Extremes are attained on the axes: n - 1 + eps^2 horizontally, n / eps vertically.
        assert!((lo - 1.25).abs() < 1e-12);
        assert!((hi - 4.0).abs() < 1e-12);
    }
}
