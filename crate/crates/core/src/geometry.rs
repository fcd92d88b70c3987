//! Pointwise and sampled differential geometry of immersions
//! `X: U ⊂ R^n → R^{n+1}`.
//!
//! Conventions: `g_ij = <∂_iX, ∂_jX>`, `b_ij = <N, ∂_ijX>`, and `N` is the
//! normalised generalised cross product of `∂_1X, …, ∂_nX`. For a graph
//! `(x, u(x))` this is the upper normal `(-∇u, 1)/sqrt(1 + |∇u|^2)`. The
//! Weingarten equation `∂_iN = -b_ij g^{jk} ∂_kX` holds for either
//! orientation, so every identity below is orientation independent as long
//! as `N`, `b` and `H_G` are computed together.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Var};
use crate::grid::{hessian_field, partial, NodeField, UniformGrid};
use crate::problem::PrescribedCurvature;
use crate::weights::WeightMatrix;

/// Below this Gram determinant a chart is treated as degenerate.
pub const MIN_METRIC_DET: f64 = 1e-14;

/// Position, first and second derivatives of an immersion at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceJet {
    point: DVector<f64>,
    /// Columns are `∂_iX`.
    first: DMatrix<f64>,
    /// `∂_ijX` at `i * n + j`, stored symmetric.
    second: Vec<DVector<f64>>,
}

impl SurfaceJet {
    /// `first` holds the columns `∂_iX`; `second[i * n + j]` is `∂_ijX`.
    /// The second derivatives are symmetrised on construction.
    pub fn new(point: DVector<f64>, first: DMatrix<f64>, second: Vec<DVector<f64>>) -> Result<Self> {
        let n = first.ncols();
        let d = point.len();
        if n == 0 || d != n + 1 || first.nrows() != d {
            return Err(Error::ShapeMismatch(format!(
                "jet in R^{d} with a {}x{} derivative matrix",
                first.nrows(),
                n
            )));
        }
        if second.len() != n * n || second.iter().any(|v| v.len() != d) {
            return Err(Error::ShapeMismatch(format!(
                "expected {} second derivatives in R^{d}",
                n * n
            )));
        }
        let mut second = second;
        for i in 0..n {
            for j in (i + 1)..n {
                let s = (&second[i * n + j] + &second[j * n + i]) * 0.5;
                second[i * n + j] = s.clone();
                second[j * n + i] = s;
            }
        }
        Ok(Self { point, first, second })
    }

    pub fn dim(&self) -> usize {
        self.first.ncols()
    }

    pub fn point(&self) -> &DVector<f64> {
        &self.point
    }

    pub fn first(&self) -> &DMatrix<f64> {
        &self.first
    }

    pub fn first_deriv(&self, i: usize) -> DVector<f64> {
        self.first.column(i).into_owned()
    }

    pub fn second_deriv(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.second[i * self.dim() + j]
    }

    /// Jet of `X` composed with a chart map whose first derivative at the
    /// point is `jac` and whose second derivatives are `hess[a]` (the Hessian
    /// of the `a`-th component).
    pub fn reparametrize(&self, jac: &DMatrix<f64>, hess: Option<&[DMatrix<f64>]>) -> Result<Self> {
        let n = self.dim();
        if jac.nrows() != n || jac.ncols() != n {
            return Err(Error::ShapeMismatch("reparametrisation Jacobian must be n x n".into()));
        }
        let first = &self.first * jac;
        let mut second = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut v = DVector::zeros(n + 1);
                for a in 0..n {
                    for b in 0..n {
                        v += self.second_deriv(a, b) * (jac[(a, i)] * jac[(b, j)]);
                    }
                    if let Some(h) = hess {
                        v += self.first.column(a) * h[a][(i, j)];
                    }
                }
                second.push(v);
            }
        }
        Self::new(self.point.clone(), first, second)
    }

    /// Jet of `Q X + c` for an orthogonal `Q`.
    pub fn rigid_motion(&self, q: &DMatrix<f64>, shift: &DVector<f64>) -> Result<Self> {
        Self::new(
            q * &self.point + shift,
            q * &self.first,
            self.second.iter().map(|v| q * v).collect(),
        )
    }
}

/// Generalised cross product of the columns of a `(n+1) × n` matrix.
pub fn generalized_cross(dx: &DMatrix<f64>) -> DVector<f64> {
    let d = dx.nrows();
    let n = dx.ncols();
    DVector::from_fn(d, |mu, _| {
        let minor = dx.clone().remove_row(mu);
        let sign = if (mu + n) % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricData {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub det_g: f64,
    pub b: DMatrix<f64>,
    pub normal: DVector<f64>,
    /// Weighted first fundamental form `DX^T G(N) DX`.
    pub a_g: DMatrix<f64>,
    /// `G(N)` itself.
    pub weight: DMatrix<f64>,
}

impl MetricData {
    /// Shape operator `S = g^{-1} b`.
    pub fn shape_operator(&self) -> DMatrix<f64> {
        &self.g_inv * &self.b
    }

    pub fn weighted_mean_curvature(&self) -> f64 {
        (&self.g_inv * &self.a_g * &self.g_inv * &self.b).trace()
    }

    /// Classical mean curvature `tr S` (sum of principal curvatures).
    pub fn mean_curvature(&self) -> f64 {
        self.shape_operator().trace()
    }

    /// `tr(g^{-1} A_G S^2)`.
    pub fn weighted_s2_trace(&self) -> f64 {
        let s = self.shape_operator();
        (&self.g_inv * &self.a_g * &s * &s).trace()
    }

    /// Principal curvatures `κ_i` and the matching weights `λ_i`: the diagonal
    /// of `g^{-1}A_G` in a basis of principal directions, so that
    /// `H_G = Σ λ_i κ_i`.
    pub fn principal_weights(&self) -> (DVector<f64>, DVector<f64>) {
        let l = self.g.clone().cholesky().expect("metric is positive definite").l();
        let l_inv = l.try_inverse().expect("Cholesky factor is invertible");
        let s_tilde = &l_inv * &self.b * l_inv.transpose();
        let a_tilde = &l_inv * &self.a_g * l_inv.transpose();
        let sym = (&s_tilde + s_tilde.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let rotated = eig.eigenvectors.transpose() * a_tilde * &eig.eigenvectors;
        (eig.eigenvalues, rotated.diagonal())
    }
}

fn weight_at(w: &WeightMatrix, normal: &DVector<f64>) -> Result<DMatrix<f64>> {
    w.eval(normal).map_err(|e| match e {
        Error::ShapeMismatch(_) => e,
        _ => Error::WeightUndefined { p: normal.iter().copied().collect() },
    })
}

pub fn fundamental_forms(jet: &SurfaceJet, w: &WeightMatrix) -> Result<MetricData> {
    let dx = jet.first();
    let n = jet.dim();
    let g = dx.transpose() * dx;
    let det_g = g.determinant();
    if !(det_g > MIN_METRIC_DET) {
        return Err(Error::SingularMetric { det: det_g });
    }
    let g_inv = g.clone().cholesky().ok_or(Error::SingularMetric { det: det_g })?.inverse();
    let cross = generalized_cross(dx);
    let normal = &cross / cross.norm();
    let b = DMatrix::from_fn(n, n, |i, j| normal.dot(jet.second_deriv(i, j)));
    let weight = weight_at(w, &normal)?;
    let a_g = dx.transpose() * &weight * dx;
    Ok(MetricData {
        g,
        g_inv,
        det_g,
        b,
        normal,
        a_g,
        weight,
    })
}

/// `H_G = tr(g^{-1} A_G g^{-1} b)`.
pub fn weighted_mean_curvature(jet: &SurfaceJet, w: &WeightMatrix) -> Result<f64> {
    Ok(fundamental_forms(jet, w)?.weighted_mean_curvature())
}

/// Both sides of `tr(g^{-1} A_G S^2) · tr G(N) ≥ H_G^2`.
pub fn curvature_energy_inequality_check(jet: &SurfaceJet, w: &WeightMatrix) -> Result<(f64, f64)> {
    let md = fundamental_forms(jet, w)?;
    let h = md.weighted_mean_curvature();
    Ok((md.weighted_s2_trace() * md.weight.trace(), h * h))
}

// ---------------------------------------------------------------------------
// Analytic immersions

/// An immersion with closed-form derivatives.
pub trait Immersion: Send + Sync {
    /// Intrinsic dimension `n`.
    fn dim(&self) -> usize;

    fn jet(&self, x: &[f64]) -> Result<SurfaceJet>;

    fn point(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(self.jet(x)?.point)
    }
}

/// The coordinate plane `x ↦ (x, 0)`.
#[derive(Debug, Clone, Copy)]
pub struct Plane {
    pub n: usize,
}

impl Immersion for Plane {
    fn dim(&self) -> usize {
        self.n
    }

    fn jet(&self, x: &[f64]) -> Result<SurfaceJet> {
        check_arity(self.n, x)?;
        let n = self.n;
        let mut point = DVector::zeros(n + 1);
        point.rows_mut(0, n).copy_from_slice(x);
        let first = DMatrix::from_fn(n + 1, n, |r, c| if r == c { 1.0 } else { 0.0 });
        SurfaceJet::new(point, first, vec![DVector::zeros(n + 1); n * n])
    }
}

fn check_arity(n: usize, x: &[f64]) -> Result<()> {
    if x.len() != n {
        return Err(Error::ShapeMismatch(format!("chart point has {} coordinates, expected {n}", x.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    /// Last coordinate negative; the computed normal points inward.
    Lower,
    /// Last coordinate positive; the computed normal points outward.
    Upper,
}

impl Hemisphere {
    fn sign(self) -> f64 {
        match self {
            Hemisphere::Lower => -1.0,
            Hemisphere::Upper => 1.0,
        }
    }
}

/// Graph-type chart of an axis-aligned ellipsoid centred at the origin:
/// `x ↦ (a_1 x_1, …, a_n x_n, ±a_{n+1} sqrt(1 - |x|^2))` on the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidChart {
    axes: Vec<f64>,
    side: Hemisphere,
}

impl EllipsoidChart {
    pub fn new(axes: Vec<f64>, side: Hemisphere) -> Result<Self> {
        if axes.len() < 2 || axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParam(format!("ellipsoid semi-axes must be positive, got {axes:?}")));
        }
        Ok(Self { axes, side })
    }

    /// Sphere of radius `r` in `R^{n+1}`.
    pub fn sphere(n: usize, r: f64, side: Hemisphere) -> Result<Self> {
        Self::new(vec![r; n + 1], side)
    }

    pub fn axes(&self) -> &[f64] {
        &self.axes
    }
}

impl Immersion for EllipsoidChart {
    fn dim(&self) -> usize {
        self.axes.len() - 1
    }

    fn jet(&self, x: &[f64]) -> Result<SurfaceJet> {
        let n = self.dim();
        check_arity(n, x)?;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 >= 1.0 {
            return Err(Error::InvalidParam(format!("point {x:?} outside the unit chart disk")));
        }
        let sigma = (1.0 - r2).sqrt();
        let s = self.side.sign();
        let c = self.axes[n];
        let mut point = DVector::zeros(n + 1);
        let mut first = DMatrix::zeros(n + 1, n);
        for i in 0..n {
            point[i] = self.axes[i] * x[i];
            first[(i, i)] = self.axes[i];
            first[(n, i)] = -s * c * x[i] / sigma;
        }
        point[n] = s * c * sigma;
        let s3 = sigma * sigma * sigma;
        let mut second = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                let mut v = DVector::zeros(n + 1);
                v[n] = s * c * (-delta / sigma - x[i] * x[j] / s3);
                second.push(v);
            }
        }
        SurfaceJet::new(point, first, second)
    }
}

type ScalarMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// The graph `x ↦ (x, u(x))` of a function with known gradient and Hessian.
#[derive(Clone)]
pub struct GraphSurface {
    n: usize,
    u: ScalarMap,
    grad: VectorMap,
    /// Row-major `n × n`.
    hess: VectorMap,
}

impl std::fmt::Debug for GraphSurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GraphSurface").field("n", &self.n).finish_non_exhaustive()
    }
}

impl GraphSurface {
    pub fn new(
        n: usize,
        u: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hess: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            u: Arc::new(u),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
        }
    }

    /// Graph of an expression in `x1..xn`, differentiated symbolically.
    pub fn from_expr(n: usize, src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        let (nx, uses_z, np) = e.arity();
        if uses_z || np > 0 || nx > n {
            return Err(Error::Expr(format!("graph `{src}` may only use x1..x{n}")));
        }
        let grad: Vec<Expr> = (0..n).map(|i| e.derivative(Var::X(i))).collect();
        let hess: Vec<Expr> = (0..n * n).map(|k| grad[k / n].derivative(Var::X(k % n))).collect();
        let ev = |ex: &Expr, x: &[f64]| ex.eval(&Bindings::x(x)).unwrap_or(f64::NAN);
        Ok(Self::new(
            n,
            move |x| ev(&e, x),
            move |x| grad.iter().map(|g| ev(g, x)).collect(),
            move |x| hess.iter().map(|h| ev(h, x)).collect(),
        ))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.u)(x)
    }
}

impl Immersion for GraphSurface {
    fn dim(&self) -> usize {
        self.n
    }

    fn jet(&self, x: &[f64]) -> Result<SurfaceJet> {
        let n = self.n;
        check_arity(n, x)?;
        let grad = (self.grad)(x);
        let hess = (self.hess)(x);
        let mut point = DVector::zeros(n + 1);
        point.rows_mut(0, n).copy_from_slice(x);
        point[n] = (self.u)(x);
        let first = DMatrix::from_fn(n + 1, n, |r, c| {
            if r == n {
                grad[c]
            } else if r == c {
                1.0
            } else {
                0.0
            }
        });
        let second = (0..n * n)
            .map(|k| {
                let mut v = DVector::zeros(n + 1);
                v[n] = hess[k];
                v
            })
            .collect();
        SurfaceJet::new(point, first, second)
    }
}

/// `y ↦ X(c + M y + ½ Q(y, y))`, where `Q[a]` is the symmetric Hessian of
/// the `a`-th component of the chart map.
pub struct Reparametrized<S> {
    inner: S,
    offset: DVector<f64>,
    linear: DMatrix<f64>,
    quadratic: Vec<DMatrix<f64>>,
}

impl<S: Immersion> Reparametrized<S> {
    pub fn affine(inner: S, offset: DVector<f64>, linear: DMatrix<f64>) -> Result<Self> {
        let n = inner.dim();
        Self::new(inner, offset, linear, vec![DMatrix::zeros(n, n); n])
    }

    pub fn new(inner: S, offset: DVector<f64>, linear: DMatrix<f64>, quadratic: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = inner.dim();
        if offset.len() != n || linear.shape() != (n, n) || quadratic.len() != n {
            return Err(Error::ShapeMismatch("reparametrisation does not match the chart dimension".into()));
        }
        if !(linear.determinant() > 0.0) {
            return Err(Error::InvalidParam("reparametrisation must preserve orientation".into()));
        }
        let quadratic = quadratic.into_iter().map(|q| (&q + q.transpose()) * 0.5).collect();
        Ok(Self {
            inner,
            offset,
            linear,
            quadratic,
        })
    }

    /// Chart parameter of the inner immersion reached from `y`.
    pub fn map(&self, y: &[f64]) -> DVector<f64> {
        let y = DVector::from_column_slice(y);
        let mut x = &self.offset + &self.linear * &y;
        for (a, q) in self.quadratic.iter().enumerate() {
            x[a] += 0.5 * y.dot(&(q * &y));
        }
        x
    }

    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let y = DVector::from_column_slice(y);
        let mut j = self.linear.clone();
        for (a, q) in self.quadratic.iter().enumerate() {
            let row = q * &y;
            for i in 0..y.len() {
                j[(a, i)] += row[i];
            }
        }
        j
    }
}

impl<S: Immersion> Immersion for Reparametrized<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn jet(&self, y: &[f64]) -> Result<SurfaceJet> {
        check_arity(self.dim(), y)?;
        let x = self.map(y);
        let jac = self.jacobian(y);
        if !(jac.determinant() > 0.0) {
            return Err(Error::InvalidParam(format!("reparametrisation degenerates at {y:?}")));
        }
        self.inner.jet(x.as_slice())?.reparametrize(&jac, Some(&self.quadratic))
    }
}

impl<S: Immersion + ?Sized> Immersion for Box<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn jet(&self, x: &[f64]) -> Result<SurfaceJet> {
        (**self).jet(x)
    }
}

// ---------------------------------------------------------------------------
// Sampled surfaces

/// A surface sampled on a uniform chart grid: one jet per node.
#[derive(Debug, Clone)]
pub struct JetField {
    pub grid: UniformGrid,
    pub jets: Vec<SurfaceJet>,
}

impl JetField {
    /// Exact jets of an analytic immersion at every node.
    pub fn from_immersion(surface: &dyn Immersion, grid: UniformGrid) -> Result<Self> {
        if grid.dim() != surface.dim() {
            return Err(Error::ShapeMismatch(format!(
                "chart grid has dimension {}, surface has {}",
                grid.dim(),
                surface.dim()
            )));
        }
        let jets = (0..grid.len())
            .map(|i| surface.jet(&grid.coords(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, jets })
    }

    /// Jets reconstructed from sampled positions by second-order finite
    /// differences (one-sided at grid faces).
    pub fn from_points(grid: UniformGrid, points: &[DVector<f64>]) -> Result<Self> {
        grid.require_min_points(4)?;
        let n = grid.dim();
        if points.len() != grid.len() || points.iter().any(|p| p.len() != n + 1) {
            return Err(Error::ShapeMismatch(format!(
                "expected {} points in R^{}",
                grid.len(),
                n + 1
            )));
        }
        let comps: Vec<Vec<f64>> = (0..=n).map(|mu| points.iter().map(|p| p[mu]).collect()).collect();
        let hess: Vec<Vec<Vec<f64>>> = comps.iter().map(|c| hessian_field(&grid, c)).collect();
        let jets = (0..grid.len())
            .map(|idx| {
                let first = DMatrix::from_fn(n + 1, n, |mu, i| partial(&grid, &comps[mu], idx, i));
                let second = (0..n * n)
                    .map(|k| DVector::from_fn(n + 1, |mu, _| hess[mu][idx][k]))
                    .collect();
                SurfaceJet::new(points[idx].clone(), first, second)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, jets })
    }

    /// Samples positions of an immersion and reconstructs jets from them.
    pub fn sampled(surface: &dyn Immersion, grid: UniformGrid) -> Result<Self> {
        let points = (0..grid.len())
            .map(|i| surface.point(&grid.coords(i)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(grid, &points)
    }

    pub fn metric_data(&self, w: &WeightMatrix) -> Result<Vec<MetricData>> {
        self.jets.iter().map(|j| fundamental_forms(j, w)).collect()
    }

    pub fn weighted_mean_curvatures(&self, w: &WeightMatrix) -> Result<Vec<f64>> {
        self.jets.iter().map(|j| weighted_mean_curvature(j, w)).collect()
    }
}

// ---------------------------------------------------------------------------
// Connection and covariant derivatives

/// Dense `n × n × n` array addressed as `(a, b, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.n + b) * self.n + c]
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.n + b) * self.n + c] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionData {
    /// `Γ^l_ij` at `(l, i, j)`.
    pub christoffel: Tensor3,
    /// `∂_k g_ij` at `(k, i, j)`.
    pub metric_derivs: Tensor3,
}

/// `∂_k T_ij` at every node, as `(k, i, j)`.
fn matrix_partial_field(grid: &UniformGrid, field: &[DMatrix<f64>]) -> Vec<Tensor3> {
    let n = grid.dim();
    let mut out = vec![Tensor3::zeros(n); grid.len()];
    for i in 0..n {
        for j in 0..n {
            let comp: Vec<f64> = field.iter().map(|m| m[(i, j)]).collect();
            for k in 0..n {
                for (idx, t) in out.iter_mut().enumerate() {
                    t.set(k, i, j, partial(grid, &comp, idx, k));
                }
            }
        }
    }
    out
}

fn check_field_len(grid: &UniformGrid, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::ShapeMismatch(format!("field has {len} entries for {} nodes", grid.len())));
    }
    Ok(())
}

/// Christoffel symbols of a sampled metric, from central differences of `g`
/// (one-sided second order at grid faces).
pub fn christoffel(grid: &UniformGrid, metric: &[DMatrix<f64>]) -> Result<Vec<ConnectionData>> {
    grid.require_min_points(3)?;
    check_field_len(grid, metric.len())?;
    let n = grid.dim();
    if metric.iter().any(|g| g.shape() != (n, n)) {
        return Err(Error::ShapeMismatch(format!("metric entries must be {n}x{n}")));
    }
    let dg = matrix_partial_field(grid, metric);
    metric
        .iter()
        .zip(dg)
        .map(|(g, dg)| {
            let det = g.determinant();
            let g_inv = g.clone().try_inverse().ok_or(Error::SingularMetric { det })?;
            let mut gamma = Tensor3::zeros(n);
            for l in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let v: f64 = (0..n)
                            .map(|k| g_inv[(l, k)] * (dg.get(i, j, k) + dg.get(j, i, k) - dg.get(k, i, j)))
                            .sum::<f64>()
                            * 0.5;
                        gamma.set(l, i, j, v);
                        gamma.set(l, j, i, v);
                    }
                }
            }
            Ok(ConnectionData {
                christoffel: gamma,
                metric_derivs: dg,
            })
        })
        .collect()
}

/// `D_i T_j = ∂_i T_j - Γ^k_ij T_k`, returned as the matrix `(i, j)`.
pub fn covariant_derivative_cov1(
    grid: &UniformGrid,
    t: &[DVector<f64>],
    conn: &[ConnectionData],
) -> Result<Vec<DMatrix<f64>>> {
    check_field_len(grid, t.len())?;
    check_field_len(grid, conn.len())?;
    let n = grid.dim();
    if t.iter().any(|v| v.len() != n) {
        return Err(Error::ShapeMismatch(format!("covector entries must have length {n}")));
    }
    let comps: Vec<Vec<f64>> = (0..n).map(|j| t.iter().map(|v| v[j]).collect()).collect();
    Ok((0..grid.len())
        .map(|idx| {
            let gamma = &conn[idx].christoffel;
            DMatrix::from_fn(n, n, |i, j| {
                let corr: f64 = (0..n).map(|k| gamma.get(k, i, j) * t[idx][k]).sum();
                partial(grid, &comps[j], idx, i) - corr
            })
        })
        .collect())
}

/// `D_k T_ij = ∂_k T_ij - Γ^l_ik T_lj - Γ^l_jk T_il`, returned as `(k, i, j)`.
pub fn covariant_derivative_cov2(
    grid: &UniformGrid,
    t: &[DMatrix<f64>],
    conn: &[ConnectionData],
) -> Result<Vec<Tensor3>> {
    check_field_len(grid, t.len())?;
    check_field_len(grid, conn.len())?;
    let n = grid.dim();
    if t.iter().any(|m| m.shape() != (n, n)) {
        return Err(Error::ShapeMismatch(format!("tensor entries must be {n}x{n}")));
    }
    let dt = matrix_partial_field(grid, t);
    Ok(dt
        .into_iter()
        .enumerate()
        .map(|(idx, mut d)| {
            let gamma = &conn[idx].christoffel;
            let tm = &t[idx];
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let corr: f64 = (0..n)
                            .map(|l| gamma.get(l, i, k) * tm[(l, j)] + gamma.get(l, j, k) * tm[(i, l)])
                            .sum();
                        d.set(k, i, j, d.get(k, i, j) - corr);
                    }
                }
            }
            d
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Weighted Laplace–Beltrami operator

/// `√det g · g^{-1} A_G g^{-1}` at every node.
fn flux_coefficients(md: &[MetricData]) -> Vec<DMatrix<f64>> {
    md.iter()
        .map(|m| &m.g_inv * &m.a_g * &m.g_inv * m.det_g.sqrt())
        .collect()
}

fn check_operator_inputs(psi: &[f64], field: &JetField) -> Result<()> {
    field.grid.require_min_points(3)?;
    check_field_len(&field.grid, psi.len())?;
    check_field_len(&field.grid, field.jets.len())
}

fn flux_divergence(grid: &UniformGrid, psi: &[f64], coeff: &[DMatrix<f64>], det: &[f64], idx: usize) -> f64 {
    let n = grid.dim();
    let h = grid.h();
    let mut acc = 0.0;
    for i in 0..n {
        let p = grid.neighbor(idx, i, 1).expect("interior node");
        let m = grid.neighbor(idx, i, -1).expect("interior node");
        // Pure term: midpoint-averaged coefficient.
        let cp = 0.5 * (coeff[idx][(i, i)] + coeff[p][(i, i)]);
        let cm = 0.5 * (coeff[idx][(i, i)] + coeff[m][(i, i)]);
        acc += (cp * (psi[p] - psi[idx]) - cm * (psi[idx] - psi[m])) / (h * h);
        // Cross terms: central difference of the flux component.
        for l in (0..n).filter(|&l| l != i) {
            let fp = coeff[p][(i, l)] * partial(grid, psi, p, l);
            let fm = coeff[m][(i, l)] * partial(grid, psi, m, l);
            acc += (fp - fm) / (2.0 * h);
        }
    }
    acc / det[idx].sqrt()
}

/// `Δ_G ψ = (1/√det g) ∂_i(√det g · g^{ij} a_jk g^{kl} ∂_l ψ)` in flux form,
/// defined at nodes with a full neighbourhood.
pub fn weighted_laplace_beltrami(psi: &[f64], field: &JetField, w: &WeightMatrix) -> Result<NodeField<Option<f64>>> {
    check_operator_inputs(psi, field)?;
    let md = field.metric_data(w)?;
    Ok(laplace_from_metric(psi, &field.grid, &md))
}

fn laplace_from_metric(psi: &[f64], grid: &UniformGrid, md: &[MetricData]) -> NodeField<Option<f64>> {
    let coeff = flux_coefficients(md);
    let det: Vec<f64> = md.iter().map(|m| m.det_g).collect();
    NodeField::from_fn(grid.clone(), |idx| {
        grid.is_interior(idx)
            .then(|| flux_divergence(grid, psi, &coeff, &det, idx))
    })
}

/// Covariant form `g^{ij}(D_i a_jk) g^{kl} ∂_lψ + g^{ij} a_jk g^{kl} D_il ψ`
/// with `D_il ψ = ∂_il ψ - Γ^k_il ∂_k ψ`.
pub fn weighted_laplace_beltrami_covariant(
    psi: &[f64],
    field: &JetField,
    w: &WeightMatrix,
) -> Result<NodeField<Option<f64>>> {
    check_operator_inputs(psi, field)?;
    field.grid.require_min_points(4)?;
    let grid = &field.grid;
    let n = grid.dim();
    let md = field.metric_data(w)?;
    let metric: Vec<DMatrix<f64>> = md.iter().map(|m| m.g.clone()).collect();
    let a: Vec<DMatrix<f64>> = md.iter().map(|m| m.a_g.clone()).collect();
    let conn = christoffel(grid, &metric)?;
    let da = covariant_derivative_cov2(grid, &a, &conn)?;
    let hess = hessian_field(grid, psi);
    Ok(NodeField::from_fn(grid.clone(), |idx| {
        if !grid.is_interior(idx) {
            return None;
        }
        let gi = &md[idx].g_inv;
        let dpsi = DVector::from_fn(n, |l, _| partial(grid, psi, idx, l));
        let gamma = &conn[idx].christoffel;
        let cov_hess = DMatrix::from_fn(n, n, |i, l| {
            hess[idx][i * n + l] - (0..n).map(|k| gamma.get(k, i, l) * dpsi[k]).sum::<f64>()
        });
        let up = gi * &dpsi;
        let mut first = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    first += gi[(i, j)] * da[idx].get(i, j, k) * up[k];
                }
            }
        }
        let second = (gi * &a[idx] * gi * cov_hess.transpose()).trace();
        Some(first + second)
    }))
}

// ---------------------------------------------------------------------------
// Normal equation

#[derive(Debug, Clone)]
pub struct NormalEquationResidual {
    /// `Δ_G N + P^i ∂_iN + (tr(g^{-1}A_G S^2) - <∇H, N>) N + ∇H` at interior nodes.
    pub residual: NodeField<Option<DVector<f64>>>,
    /// The coefficients `P^i` at interior nodes.
    pub p_coefficients: NodeField<Option<DVector<f64>>>,
}

impl NormalEquationResidual {
    pub fn max_norm(&self) -> f64 {
        max_abs_entry(&self.residual)
    }

    pub fn p_max_norm(&self) -> f64 {
        max_abs_entry(&self.p_coefficients)
    }
}

fn max_abs_entry(f: &NodeField<Option<DVector<f64>>>) -> f64 {
    f.values.iter().flatten().fold(0.0, |m, v| m.max(v.amax()))
}

/// `V_jk^μ = <∂_jX, ∂_{N^μ}G(N) ∂_kX>`, indexed `[j * n + k][μ]`.
pub fn weight_variation_vectors(jet: &SurfaceJet, normal: &DVector<f64>, w: &WeightMatrix) -> Result<Vec<DVector<f64>>> {
    let n = jet.dim();
    let dx = jet.first();
    let partials = (0..=n).map(|mu| w.partial(normal, mu)).collect::<Result<Vec<_>>>()?;
    let projected: Vec<DMatrix<f64>> = partials.iter().map(|dg| dx.transpose() * dg * dx).collect();
    Ok((0..n * n)
        .map(|jk| DVector::from_fn(n + 1, |mu, _| projected[mu][(jk / n, jk % n)]))
        .collect())
}

/// Assembles the normal equation on a sampled surface. `D_i a_jk` is taken
/// from the discrete covariant derivative of the sampled `A_G`, `∂_iN` and
/// `Δ_G N` from finite differences of the sampled normal.
pub fn normal_equation_residual(
    field: &JetField,
    w: &WeightMatrix,
    hfun: &PrescribedCurvature,
) -> Result<NormalEquationResidual> {
    let grid = &field.grid;
    grid.require_min_points(3)?;
    let n = grid.dim();
    let md = field.metric_data(w)?;
    let normals: Vec<Vec<f64>> = (0..=n).map(|mu| md.iter().map(|m| m.normal[mu]).collect()).collect();
    let lap: Vec<NodeField<Option<f64>>> = normals.iter().map(|c| laplace_from_metric(c, grid, &md)).collect();

    let mut residual = Vec::with_capacity(grid.len());
    let mut p_coeffs = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        if !grid.is_interior(idx) {
            residual.push(None);
            p_coeffs.push(None);
            continue;
        }
        let m = &md[idx];
        let jet = &field.jets[idx];
        let gi = &m.g_inv;
        let dx = jet.first();
        // Weingarten: ∂_i N = -b_il g^{lp} ∂_p X, exact for the given jet.
        let dn = -(dx * gi * &m.b);
        let v = weight_variation_vectors(jet, &m.normal, w)?;
        // D_i a_jk = <V_jk, ∂_i N>: the normal part of D_i ∂_j X drops out
        // because G(N) N = 0.
        let da = |i: usize, j: usize, k: usize| v[j * n + k].dot(&dn.column(i));
        let mut p = DVector::zeros(n);
        for q in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        acc -= gi[(i, j)] * da(i, j, k) * gi[(k, q)];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let c = gi[(i, j)] * gi[(k, l)] * m.b[(l, i)];
                            if c == 0.0 {
                                continue;
                            }
                            for pp in 0..n {
                                acc -= c * v[j * n + k].dot(&dx.column(pp)) * gi[(pp, q)];
                            }
                        }
                    }
                }
            }
            p[q] = acc;
        }
        let x = jet.point();
        let grad_h = DVector::from_vec(hfun.gradient_at_point(x.as_slice())?);
        let coeff = m.weighted_s2_trace() - grad_h.dot(&m.normal);
        let lap_n = DVector::from_fn(n + 1, |mu, _| lap[mu].values[idx].expect("interior node"));
        let r = lap_n + &dn * &p + &m.normal * coeff + grad_h;
        residual.push(Some(r));
        p_coeffs.push(Some(p));
    }
    Ok(NormalEquationResidual {
        residual: NodeField::new(grid.clone(), residual)?,
        p_coefficients: NodeField::new(grid.clone(), p_coeffs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_rotation;
    use crate::weights::{area_weight, epsilon_regularized_weight};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere(r: f64) -> EllipsoidChart {
        EllipsoidChart::sphere(2, r, Hemisphere::Lower).unwrap()
    }

    #[test]
    fn plane_forms() {
        let md = fundamental_forms(&Plane { n: 2 }.jet(&[0.3, -0.1]).unwrap(), &area_weight()).unwrap();
        assert_eq!(md.g, DMatrix::identity(2, 2));
        assert_eq!(md.b, DMatrix::zeros(2, 2));
        assert_eq!(md.normal, DVector::from_vec(vec![0.0, 0.0, 1.0]));
        assert_eq!(md.a_g, DMatrix::identity(2, 2));
        assert_eq!(md.weighted_mean_curvature(), 0.0);
    }

    #[test]
    fn cross_product_gives_upper_normal_for_graphs() {
        let g = GraphSurface::from_expr(2, "0.3*x1 - 1.5*x2 + x1*x2").unwrap();
        let x = [0.2, 0.7];
        let md = fundamental_forms(&g.jet(&x).unwrap(), &area_weight()).unwrap();
        let grad = [0.3 + x[1], -1.5 + x[0]];
        let expect = DVector::from_vec(vec![-grad[0], -grad[1], 1.0]).normalize();
        assert!((&md.normal - &expect).norm() < 1e-14);
        let gx = DMatrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 } + grad[i] * grad[j]);
        assert!((md.g - gx).norm() < 1e-14);
    }

    #[test]
    fn curve_normal() {
        let c = GraphSurface::from_expr(1, "x1^2").unwrap();
        let md = fundamental_forms(&c.jet(&[0.5]).unwrap(), &area_weight()).unwrap();
        let expect = DVector::from_vec(vec![-1.0, 1.0]).normalize();
        assert!((&md.normal - &expect).norm() < 1e-14);
        // Curvature of y = x^2 at x = 1/2: 2 / (1 + 1)^{3/2}.
        assert!((md.weighted_mean_curvature() - 2.0 / 2f64.powf(1.5)).abs() < 1e-14);
    }

    #[test]
    fn sphere_shape_operator() {
        for side in [Hemisphere::Lower, Hemisphere::Upper] {
            let s = EllipsoidChart::sphere(2, 2.0, side).unwrap();
            let md = fundamental_forms(&s.jet(&[0.1, -0.3]).unwrap(), &area_weight()).unwrap();
            let sign = if side == Hemisphere::Lower { 1.0 } else { -1.0 };
            assert!((md.shape_operator() - DMatrix::identity(2, 2) * (sign / 2.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn singular_metric_is_rejected() {
        let jet = SurfaceJet::new(
            DVector::zeros(3),
            DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]),
            vec![DVector::zeros(3); 4],
        )
        .unwrap();
        assert!(matches!(fundamental_forms(&jet, &area_weight()), Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn jet_shapes_are_checked() {
        let r = SurfaceJet::new(DVector::zeros(3), DMatrix::zeros(3, 2), vec![DVector::zeros(3); 3]);
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn sphere_weighted_curvature_equals_trace_over_radius() {
        let w = epsilon_regularized_weight(0.5).unwrap();
        for r in [0.5, 1.0, 2.0] {
            for x in [[0.0, 0.0], [0.3, -0.2], [-0.6, 0.5]] {
                let md = fundamental_forms(&sphere(r).jet(&x).unwrap(), &w).unwrap();
                let expect = md.weight.trace() / r;
                assert!((md.weighted_mean_curvature() - expect).abs() <= 1e-12 * expect);
            }
        }
    }

    #[test]
    fn graph_weighted_form_is_upper_block() {
        let w = epsilon_regularized_weight(0.3).unwrap();
        let g = GraphSurface::from_expr(2, "sin(x1) * x2 + 0.5*x2^2").unwrap();
        let md = fundamental_forms(&g.jet(&[0.4, -0.8]).unwrap(), &w).unwrap();
        let inner = &md.g_inv * &md.a_g * &md.g_inv;
        let block = md.weight.view((0, 0), (2, 2)).into_owned();
        assert!((inner - block).abs().max() < 1e-10);
    }

    fn random_jet(rng: &mut ChaCha8Rng) -> SurfaceJet {
        let axes: Vec<f64> = (0..3).map(|_| rng.random_range(0.3..3.0)).collect();
        let side = if rng.random::<bool>() { Hemisphere::Lower } else { Hemisphere::Upper };
        let e = EllipsoidChart::new(axes, side).unwrap();
        let x = [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)];
        let q = random_rotation(3, rng);
        let shift = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        e.jet(&x).unwrap().rigid_motion(&q, &shift).unwrap()
    }

    #[test]
    fn lambda_weights_reproduce_curvature() {
        let w = epsilon_regularized_weight(0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let md = fundamental_forms(&random_jet(&mut rng), &w).unwrap();
            let (kappa, lambda) = md.principal_weights();
            let h = md.weighted_mean_curvature();
            assert!((kappa.dot(&lambda) - h).abs() <= 1e-9 * (1.0 + h.abs()));
        }
    }

    #[test]
    fn area_weight_gives_classical_mean_curvature() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let md = fundamental_forms(&random_jet(&mut rng), &area_weight()).unwrap();
            let (kappa, _) = md.principal_weights();
            assert!((md.weighted_mean_curvature() - kappa.sum()).abs() < 1e-9 * (1.0 + kappa.amax()));
        }
    }

    #[test]
    fn reparametrization_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = epsilon_regularized_weight(0.6).unwrap();
        for _ in 0..30 {
            let chart = EllipsoidChart::new(vec![1.0, 1.5, 0.7], Hemisphere::Lower).unwrap();
            let lin = loop {
                let m = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
                if m.determinant() > 0.2 {
                    break m;
                }
            };
            let quad = (0..2).map(|_| DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.3..0.3))).collect();
            let offset = DVector::from_fn(2, |_, _| rng.random_range(-0.3..0.3));
            let re = Reparametrized::new(chart.clone(), offset, lin, quad).unwrap();
            let y = [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)];
            let x = re.map(&y);
            let h1 = weighted_mean_curvature(&chart.jet(x.as_slice()).unwrap(), &w).unwrap();
            let h2 = weighted_mean_curvature(&re.jet(&y).unwrap(), &w).unwrap();
            assert!((h1 - h2).abs() <= 1e-9 * h1.abs());
        }
    }

    #[test]
    fn inequality_is_equality_on_spheres() {
        for w in [area_weight(), epsilon_regularized_weight(0.2).unwrap()] {
            let (lhs, rhs) = curvature_energy_inequality_check(&sphere(1.7).jet(&[0.2, 0.1]).unwrap(), &w).unwrap();
            assert!((lhs - rhs).abs() <= 1e-9);
        }
        let (lhs, rhs) = curvature_energy_inequality_check(&Plane { n: 2 }.jet(&[0.0, 0.0]).unwrap(), &area_weight()).unwrap();
        assert_eq!((lhs, rhs), (0.0, 0.0));
    }

    #[test]
    fn constant_metric_has_no_connection() {
        let grid = UniformGrid::centered(&[0.0, 0.0], 3, 0.1).unwrap();
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let conn = christoffel(&grid, &vec![g; grid.len()]).unwrap();
        assert!(conn.iter().all(|c| c.christoffel.max_abs() == 0.0));
    }

    #[test]
    fn polar_metric_christoffel() {
        let h = 0.01;
        let grid = UniformGrid::centered(&[1.5, 0.3], 4, h).unwrap();
        let metric: Vec<DMatrix<f64>> = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, x[0] * x[0]]))
            })
            .collect();
        let conn = christoffel(&grid, &metric).unwrap();
        for idx in (0..grid.len()).filter(|&i| grid.is_interior(i)) {
            let x = grid.coords(idx);
            let gm = &conn[idx].christoffel;
            assert!((gm.get(0, 1, 1) + x[0]).abs() < 1e-10);
            assert!((gm.get(1, 0, 1) - 1.0 / x[0]).abs() < 1e-4 * h);
            assert_eq!(gm.get(1, 0, 1), gm.get(1, 1, 0));
        }
    }

    #[test]
    fn christoffel_needs_three_points() {
        let grid = UniformGrid::new(vec![0.0, 0.0], vec![2, 5], 0.1).unwrap();
        let metric = vec![DMatrix::identity(2, 2); grid.len()];
        assert!(matches!(christoffel(&grid, &metric), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn cov1_on_flat_chart_is_plain_derivative() {
        let grid = UniformGrid::centered(&[0.0, 0.0], 3, 0.2).unwrap();
        let conn = christoffel(&grid, &vec![DMatrix::identity(2, 2); grid.len()]).unwrap();
        let t: Vec<DVector<f64>> = (0..grid.len()).map(|i| DVector::from_vec(grid.coords(i))).collect();
        let d = covariant_derivative_cov1(&grid, &t, &conn).unwrap();
        assert!(d.iter().all(|m| (m - DMatrix::identity(2, 2)).norm() < 1e-12));
        let zero = covariant_derivative_cov1(&grid, &vec![DVector::zeros(2); grid.len()], &conn).unwrap();
        assert!(zero.iter().all(|m| m.norm() == 0.0));
    }

    #[test]
    fn cov2_of_constant_on_flat_chart_vanishes() {
        let grid = UniformGrid::centered(&[0.0, 0.0], 3, 0.2).unwrap();
        let conn = christoffel(&grid, &vec![DMatrix::identity(2, 2); grid.len()]).unwrap();
        let t = vec![DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]); grid.len()];
        let d = covariant_derivative_cov2(&grid, &t, &conn).unwrap();
        assert!(d.iter().all(|m| m.max_abs() == 0.0));
    }

    #[test]
    fn laplace_of_constant_vanishes() {
        let grid = UniformGrid::centered(&[0.1, 0.0], 5, 0.05).unwrap();
        let field = JetField::from_immersion(&sphere(1.0), grid.clone()).unwrap();
        let out = weighted_laplace_beltrami(&vec![3.0; grid.len()], &field, &area_weight()).unwrap();
        assert!(out.max_abs() < 1e-12);
        assert!(out.values[0].is_none());
    }

    #[test]
    fn flat_laplace_matches_five_point_stencil() {
        let h = 0.05;
        let grid = UniformGrid::centered(&[0.0, 0.0], 6, h).unwrap();
        let field = JetField::from_immersion(&Plane { n: 2 }, grid.clone()).unwrap();
        let psi: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                (x[0] * 2.0).sin() * x[1].exp()
            })
            .collect();
        let out = weighted_laplace_beltrami(&psi, &field, &area_weight()).unwrap();
        for idx in (0..grid.len()).filter(|&i| grid.is_interior(i)) {
            let s = |a, st| psi[grid.neighbor(idx, a, st).unwrap()];
            let five = (s(0, 1) + s(0, -1) + s(1, 1) + s(1, -1) - 4.0 * psi[idx]) / (h * h);
            assert!((out.values[idx].unwrap() - five).abs() < 1e-10);
        }
    }
}
