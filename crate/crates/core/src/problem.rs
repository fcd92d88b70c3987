//! Data of a Dirichlet problem: prescribed curvature `H(x, z)` and boundary
//! values `φ(x)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Var};

type XzFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
type XzVecFn = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;
type XFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type XVecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A prescribed curvature `H(x, z)` on `R^n × R` with its `z`-derivative and
/// spatial gradient. In ambient contexts the point `X ∈ R^{n+1}` is read as
/// `(x, z)` and `∇H = (∂_x H, ∂_z H)`.
#[derive(Clone)]
pub struct PrescribedCurvature {
    label: String,
    value: XzFn,
    h_z: XzFn,
    grad_x: XzVecFn,
    /// `Some(c)` when `H ≡ c`.
    constant: Option<f64>,
}

impl fmt::Debug for PrescribedCurvature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrescribedCurvature").field("label", &self.label).finish_non_exhaustive()
    }
}

impl PrescribedCurvature {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        h_z: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        grad_x: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            value: Arc::new(value),
            h_z: Arc::new(h_z),
            grad_x: Arc::new(grad_x),
            constant: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut h = Self::new(format!("{c}"), move |_, _| c, |_, _| 0.0, |x, _| vec![0.0; x.len()]);
        h.constant = Some(c);
        h
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// `H = a + b z`.
    pub fn affine_in_z(a: f64, b: f64) -> Self {
        let mut h = Self::new(format!("{a} + {b}*z"), move |_, z| a + b * z, move |_, _| b, |x, _| vec![0.0; x.len()]);
        if b == 0.0 {
            h.constant = Some(a);
        }
        h
    }

    /// `H = h0 + h2 |x|^2`.
    pub fn radial(h0: f64, h2: f64) -> Self {
        let mut h = Self::new(
            format!("{h0} + {h2}*|x|^2"),
            move |x, _| h0 + h2 * x.iter().map(|v| v * v).sum::<f64>(),
            |_, _| 0.0,
            move |x, _| x.iter().map(|v| 2.0 * h2 * v).collect(),
        );
        if h2 == 0.0 {
            h.constant = Some(h0);
        }
        h
    }

    /// `H` given as an expression in `x1..xn` and `z`, differentiated
    /// symbolically.
    pub fn from_expr(n: usize, src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        let (nx, _, np) = e.arity();
        if nx > n || np > 0 {
            return Err(Error::Expr(format!("curvature `{src}` may only use x1..x{n} and z")));
        }
        let dz = e.derivative(Var::Z);
        let dx: Vec<Expr> = (0..n).map(|i| e.derivative(Var::X(i))).collect();
        let ev = |ex: &Expr, x: &[f64], z: f64| ex.eval(&Bindings::xz(x, z)).unwrap_or(f64::NAN);
        let label = src.to_string();
        let value = e.clone();
        let mut h = Self::new(
            label,
            move |x, z| ev(&value, x, z),
            move |x, z| ev(&dz, x, z),
            move |x, z| dx.iter().map(|d| ev(d, x, z)).collect(),
        );
        if let Expr::Const(c) = e {
            h.constant = Some(c);
        }
        Ok(h)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn value(&self, x: &[f64], z: f64) -> f64 {
        (self.value)(x, z)
    }

    pub fn h_z(&self, x: &[f64], z: f64) -> f64 {
        (self.h_z)(x, z)
    }

    pub fn grad_x(&self, x: &[f64], z: f64) -> Vec<f64> {
        (self.grad_x)(x, z)
    }

    /// Full gradient `(∂_x H, ∂_z H)` in `R^{n+1}`.
    pub fn grad(&self, x: &[f64], z: f64) -> Vec<f64> {
        let mut g = self.grad_x(x, z);
        g.push(self.h_z(x, z));
        g
    }

    /// `∇H` at an ambient point `(x, z)`.
    pub fn gradient_at_point(&self, point: &[f64]) -> Result<Vec<f64>> {
        let (z, x) = split_point(point)?;
        Ok(self.grad(x, z))
    }

    pub fn value_at_point(&self, point: &[f64]) -> Result<f64> {
        let (z, x) = split_point(point)?;
        Ok(self.value(x, z))
    }

    /// `t·H`, the curvature of the homotopy family at parameter `t`.
    pub fn scaled(&self, t: f64) -> Self {
        let (v, hz, gx) = (self.value.clone(), self.h_z.clone(), self.grad_x.clone());
        Self {
            label: format!("{t} * ({})", self.label),
            value: Arc::new(move |x, z| t * v(x, z)),
            h_z: Arc::new(move |x, z| t * hz(x, z)),
            grad_x: Arc::new(move |x, z| gx(x, z).into_iter().map(|g| t * g).collect()),
            constant: self.constant.map(|c| t * c),
        }
    }
}

fn split_point(point: &[f64]) -> Result<(f64, &[f64])> {
    point
        .split_last()
        .map(|(z, x)| (*z, x))
        .ok_or_else(|| Error::ShapeMismatch("empty point".into()))
}

/// Dirichlet data `φ(x)`, defined on all of `R^n` so that it doubles as its
/// own extension into the domain.
#[derive(Clone)]
pub struct BoundaryData {
    label: String,
    value: XFn,
    grad: XVecFn,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData").field("label", &self.label).finish_non_exhaustive()
    }
}

impl BoundaryData {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            value: Arc::new(value),
            grad: Arc::new(grad),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c, |x| vec![0.0; x.len()])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// `φ(x) = <a, x> + b`.
    pub fn affine(a: Vec<f64>, b: f64) -> Self {
        let a2 = a.clone();
        Self::new(
            format!("{a:?}·x + {b}"),
            move |x| b + a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>(),
            move |_| a2.clone(),
        )
    }

    /// `φ(x) = amplitude · Π_i sin(k x_i + shift)`.
    pub fn trigonometric(amplitude: f64, k: f64, shift: f64) -> Self {
        Self::new(
            format!("{amplitude} * prod sin({k} x_i + {shift})"),
            move |x| amplitude * x.iter().map(|v| (k * v + shift).sin()).product::<f64>(),
            move |x| {
                (0..x.len())
                    .map(|i| {
                        amplitude
                            * x.iter()
                                .enumerate()
                                .map(|(j, v)| if i == j { k * (k * v + shift).cos() } else { (k * v + shift).sin() })
                                .product::<f64>()
                    })
                    .collect()
            },
        )
    }

    pub fn from_expr(n: usize, src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        let (nx, uses_z, np) = e.arity();
        if nx > n || uses_z || np > 0 {
            return Err(Error::Expr(format!("boundary data `{src}` may only use x1..x{n}")));
        }
        let grad: Vec<Expr> = (0..n).map(|i| e.derivative(Var::X(i))).collect();
        let ev = |ex: &Expr, x: &[f64]| ex.eval(&Bindings::x(x)).unwrap_or(f64::NAN);
        Ok(Self::new(
            src,
            move |x| ev(&e, x),
            move |x| grad.iter().map(|g| ev(g, x)).collect(),
        ))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }

    /// `t·φ`.
    pub fn scaled(&self, t: f64) -> Self {
        let (v, g) = (self.value.clone(), self.grad.clone());
        Self {
            label: format!("{t} * ({})", self.label),
            value: Arc::new(move |x| t * v(x)),
            grad: Arc::new(move |x| g(x).into_iter().map(|d| t * d).collect()),
        }
    }
}
