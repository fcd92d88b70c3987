//! Computational domains `Ω ⊂ R^n` described by signed distance functions
//! (negative inside), with grid metadata, distance-function derivatives and
//! the weighted curvatures `H_G^±` of the boundary cylinder `∂Ω × R`.
//!
//! Formulas stated for the interior distance `d` are evaluated with
//! `d = -sdf`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::linalg::sphere_directions;
use crate::weights::WeightMatrix;

/// Nodes with `|sdf| <= ON_BOUNDARY_TOL · h` are treated as boundary nodes.
pub const ON_BOUNDARY_TOL: f64 = 1e-10;
/// Default collar width in grid cells.
pub const COLLAR_CELLS: f64 = 5.0;
/// Minimum inradius in grid cells.
pub const MIN_INRADIUS_CELLS: f64 = 3.0;

type SdfFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    Rectangle { lo: Vec<f64>, hi: Vec<f64> },
    /// Axis-aligned ellipse in the plane.
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
    Custom { sdf: SdfFn, lo: Vec<f64>, hi: Vec<f64> },
    Sampled(SampledSdf),
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Ball { center, radius } => write!(f, "Ball {{ center: {center:?}, radius: {radius} }}"),
            Shape::Rectangle { lo, hi } => write!(f, "Rectangle {{ lo: {lo:?}, hi: {hi:?} }}"),
            Shape::Ellipse { center, semi_axes } => {
                write!(f, "Ellipse {{ center: {center:?}, semi_axes: {semi_axes:?} }}")
            }
            Shape::Custom { lo, hi, .. } => write!(f, "Custom {{ lo: {lo:?}, hi: {hi:?} }}"),
            Shape::Sampled(s) => write!(f, "Sampled {{ counts: {:?}, h: {} }}", s.counts, s.h),
        }
    }
}

impl Shape {
    fn sdf(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Ball { center, radius } => dist(x, center) - radius,
            Shape::Rectangle { lo, hi } => box_sdf(x, lo, hi),
            Shape::Ellipse { center, semi_axes } => {
                ellipse_sdf(x[0] - center[0], x[1] - center[1], semi_axes[0], semi_axes[1])
            }
            Shape::Custom { sdf, .. } => sdf(x),
            Shape::Sampled(s) => s.eval(x),
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Shape::Rectangle { lo, hi } | Shape::Custom { lo, hi, .. } => (lo.clone(), hi.clone()),
            Shape::Ellipse { center, semi_axes } => (
                vec![center[0] - semi_axes[0], center[1] - semi_axes[1]],
                vec![center[0] + semi_axes[0], center[1] + semi_axes[1]],
            ),
            Shape::Sampled(s) => s.bounds(),
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn box_sdf(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let q: Vec<f64> = x
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(xi, (l, h))| {
            let c = 0.5 * (l + h);
            let half = 0.5 * (h - l);
            (xi - c).abs() - half
        })
        .collect();
    let outside = q.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
    let inside = q.iter().copied().fold(f64::NEG_INFINITY, f64::max).min(0.0);
    outside + inside
}

/// Signed distance from `(x, y)` to the ellipse `(x/a)^2 + (y/b)^2 = 1`,
/// by bisection on the closest-point equation (robust for all quadrants and
/// on the axes).
pub fn ellipse_sdf(x: f64, y: f64, a: f64, b: f64) -> f64 {
    let (e0, e1, y0, y1) = if a >= b { (a, b, x.abs(), y.abs()) } else { (b, a, y.abs(), x.abs()) };
    let d = distance_point_ellipse(e0, e1, y0, y1);
    if (y0 / e0).powi(2) + (y1 / e1).powi(2) < 1.0 {
        -d
    } else {
        d
    }
}

// Requires e0 >= e1 > 0 and y0, y1 >= 0.
fn distance_point_ellipse(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1) * (e0 / e1);
                let s = ellipse_root(r0, z0, z1, g);
                let x0 = r0 * y0 / (s + r0);
                let x1 = y1 / (s + 1.0);
                ((x0 - y0).powi(2) + (x1 - y1).powi(2)).sqrt()
            } else {
                0.0
            }
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).sqrt();
            ((x0 - y0).powi(2) + x1 * x1).sqrt()
        } else {
            (y0 - e0).abs()
        }
    }
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if gs > 0.0 {
            s0 = s;
        } else if gs < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Signed distance samples on a uniform grid centred at the origin, first
/// axis fastest, interpolated by cubic convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSdf {
    counts: Vec<usize>,
    h: f64,
    values: Vec<f64>,
}

impl SampledSdf {
    pub fn new(counts: Vec<usize>, h: f64, values: Vec<f64>) -> Result<Self> {
        if counts.is_empty() || counts.iter().any(|&c| c < 4) {
            return Err(Error::InvalidParam(format!("sdf grid needs at least 4 samples per axis, got {counts:?}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParam(format!("sdf grid spacing must be positive, got {h}")));
        }
        let expected: usize = counts.iter().product();
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "sdf grid declares {expected} samples but provides {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("sdf grid contains non-finite values".into()));
        }
        Ok(Self { counts, h, values })
    }

    /// Parses `n h nx ny [nz]` followed by the samples.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::Config(format!("sdf grid: missing {what}")))
        };
        let n: usize = next("dimension")?
            .parse()
            .map_err(|e| Error::Config(format!("sdf grid: bad dimension: {e}")))?;
        if !(2..=3).contains(&n) {
            return Err(Error::Config(format!("sdf grid: dimension must be 2 or 3, got {n}")));
        }
        let h: f64 = next("spacing")?
            .parse()
            .map_err(|e| Error::Config(format!("sdf grid: bad spacing: {e}")))?;
        let counts = (0..n)
            .map(|a| {
                next("axis count")?
                    .parse::<usize>()
                    .map_err(|e| Error::Config(format!("sdf grid: bad count for axis {}: {e}", a + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = tokens
            .enumerate()
            .map(|(i, t)| {
                t.parse::<f64>()
                    .map_err(|e| Error::Config(format!("sdf grid: bad sample {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(counts, h, values)
    }

    fn origin(&self, axis: usize) -> f64 {
        -0.5 * (self.counts[axis] - 1) as f64 * self.h
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let lo: Vec<f64> = (0..self.counts.len()).map(|a| self.origin(a)).collect();
        let hi = lo.iter().map(|l| -l).collect();
        (lo, hi)
    }

    fn sample(&self, idx: &[isize]) -> f64 {
        let mut flat = 0;
        let mut stride = 1;
        for (&i, &c) in idx.iter().zip(&self.counts) {
            flat += i.clamp(0, c as isize - 1) as usize * stride;
            stride *= c;
        }
        self.values[flat]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.counts.len();
        let mut base = vec![0isize; n];
        let mut weights = vec![[0.0; 4]; n];
        let mut excess = 0.0;
        for a in 0..n {
            let lo = self.origin(a);
            let hi = -lo;
            let xa = x[a].clamp(lo, hi);
            excess += (x[a] - xa).powi(2);
            let s = (xa - lo) / self.h;
            let i = (s.floor() as isize).min(self.counts[a] as isize - 2);
            let t = s - i as f64;
            base[a] = i - 1;
            weights[a] = keys_weights(t);
        }
        let mut acc = 0.0;
        let mut offs = vec![0isize; n];
        for k in 0..4usize.pow(n as u32) {
            let mut w = 1.0;
            let mut r = k;
            for a in 0..n {
                let o = r % 4;
                r /= 4;
                offs[a] = base[a] + o as isize;
                w *= weights[a][o];
            }
            acc += w * self.sample(&offs);
        }
        // Beyond the sampled box, continue at unit slope.
        acc + excess.sqrt()
    }
}

// Keys cubic convolution kernel with a = -1/2, for offsets -1, 0, 1, 2.
fn keys_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

/// A domain with its computational grid.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    shape: Shape,
    grid: UniformGrid,
    circumcenter: Vec<f64>,
    circumradius: f64,
    inradius: f64,
    collar: f64,
    reach: Option<f64>,
}

pub fn make_ball(center: Vec<f64>, radius: f64, h: f64) -> Result<DomainSpec> {
    if !(radius > 0.0 && radius.is_finite()) || center.is_empty() {
        return Err(Error::InvalidParam(format!("ball radius must be positive, got {radius}")));
    }
    DomainSpec::build(Shape::Ball { center, radius }, h)
}

pub fn make_rectangle(lo: Vec<f64>, hi: Vec<f64>, h: f64) -> Result<DomainSpec> {
    if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(&hi).any(|(l, h)| !(h > l)) {
        return Err(Error::InvalidParam(format!("degenerate box {lo:?} .. {hi:?}")));
    }
    DomainSpec::build(Shape::Rectangle { lo, hi }, h)
}

pub fn make_ellipse(center: [f64; 2], semi_axes: [f64; 2], h: f64) -> Result<DomainSpec> {
    if semi_axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidParam(format!("ellipse semi-axes must be positive, got {semi_axes:?}")));
    }
    DomainSpec::build(Shape::Ellipse { center, semi_axes }, h)
}

/// Domain from a user signed distance function whose zero set lies in the
/// box `lo .. hi`. The eikonal property is spot-checked in the collar.
pub fn make_sdf(
    sdf: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    lo: Vec<f64>,
    hi: Vec<f64>,
    h: f64,
) -> Result<DomainSpec> {
    if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(&hi).any(|(l, h)| !(h > l)) {
        return Err(Error::InvalidParam(format!("degenerate bounding box {lo:?} .. {hi:?}")));
    }
    let dom = DomainSpec::build(Shape::Custom { sdf: Arc::new(sdf), lo, hi }, h)?;
    let residual = dom.eikonal_residual();
    if residual > CUSTOM_EIKONAL_TOL {
        return Err(Error::InvalidParam(format!(
            "user sdf is not a distance function near the boundary (max ||∇sdf| - 1| = {residual:.3})"
        )));
    }
    Ok(dom)
}

const CUSTOM_EIKONAL_TOL: f64 = 0.1;

pub fn make_sdf_grid(samples: SampledSdf, h: f64) -> Result<DomainSpec> {
    DomainSpec::build(Shape::Sampled(samples), h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceHessian {
    /// `D^2 d` for the interior distance `d = -sdf`.
    pub hessian: DMatrix<f64>,
    /// `∇d`, pointing into the domain.
    pub gradient: DVector<f64>,
    /// `|(D^2 d) ∇d|`, which vanishes for an exact distance function.
    pub orthogonality_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurvatures {
    pub points: Vec<Vec<f64>>,
    pub h_plus: Vec<f64>,
    pub h_minus: Vec<f64>,
}

/// Classification of one grid node. Arms are listed as `+e_1, -e_1, +e_2, …`.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Interior,
    /// Inside, with at least one axis arm cut by the boundary. Each entry is
    /// the arm length as a fraction of `h`, in `(0, 1]`.
    BoundaryAdjacent { arms: Vec<f64> },
    /// On the boundary to within `ON_BOUNDARY_TOL · h`.
    Boundary,
    Exterior,
}

#[derive(Debug, Clone)]
pub struct GridClassification {
    pub kinds: Vec<NodeKind>,
}

impl GridClassification {
    pub fn is_unknown(&self, idx: usize) -> bool {
        matches!(self.kinds[idx], NodeKind::Interior | NodeKind::BoundaryAdjacent { .. })
    }

    pub fn count(&self, pred: impl Fn(&NodeKind) -> bool) -> usize {
        self.kinds.iter().filter(|k| pred(k)).count()
    }
}

impl DomainSpec {
    fn build(shape: Shape, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParam(format!("grid spacing must be positive, got {h}")));
        }
        let (lo, hi) = shape.bounds();
        // Nodes sit at integer multiples of h, padded by one cell beyond the box.
        let first: Vec<i64> = lo.iter().map(|l| (l / h - 1e-9).floor() as i64 - 1).collect();
        let last: Vec<i64> = hi.iter().map(|u| (u / h + 1e-9).ceil() as i64 + 1).collect();
        let counts: Vec<usize> = first.iter().zip(&last).map(|(f, l)| (l - f + 1) as usize).collect();
        let origin: Vec<f64> = first.iter().map(|f| *f as f64 * h).collect();
        let grid = UniformGrid::new(origin, counts, h)?;

        let (circumcenter, circumradius, inradius, reach) = match &shape {
            Shape::Ball { center, radius } => (center.clone(), *radius, *radius, Some(*radius)),
            Shape::Rectangle { lo, hi } => {
                let c: Vec<f64> = lo.iter().zip(hi).map(|(l, u)| 0.5 * (l + u)).collect();
                let r = 0.5 * dist(lo, hi);
                let inr = lo.iter().zip(hi).map(|(l, u)| 0.5 * (u - l)).fold(f64::INFINITY, f64::min);
                (c, r, inr, None)
            }
            Shape::Ellipse { center, semi_axes } => {
                let (a, b) = (semi_axes[0].max(semi_axes[1]), semi_axes[0].min(semi_axes[1]));
                (center.to_vec(), a, b, Some(b * b / a))
            }
            Shape::Custom { .. } | Shape::Sampled(_) => {
                let (c, r, inr) = sampled_radii(&shape, &grid);
                (c, r, inr, None)
            }
        };
        if !(inradius >= MIN_INRADIUS_CELLS * h) {
            return Err(Error::ResolutionTooCoarse(format!(
                "inradius {inradius:.4} is below {MIN_INRADIUS_CELLS} grid cells (h = {h})"
            )));
        }
        let collar = match reach {
            Some(r) => (COLLAR_CELLS * h).min(r),
            None => (COLLAR_CELLS * h).min(inradius),
        };
        Ok(Self {
            shape,
            grid,
            circumcenter,
            circumradius,
            inradius,
            collar,
            reach,
        })
    }

    /// The same shape on a grid with spacing `h`.
    pub fn with_grid_h(&self, h: f64) -> Result<Self> {
        Self::build(self.shape.clone(), h)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    /// Radius `R` of the reported enclosing ball `B_R(circumcenter) ⊇ Ω`.
    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    pub fn circumcenter(&self) -> &[f64] {
        &self.circumcenter
    }

    /// Radius of the largest inscribed ball.
    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    /// Width `μ` of the boundary collar.
    pub fn collar(&self) -> f64 {
        self.collar
    }

    pub fn reach(&self) -> Option<f64> {
        self.reach
    }

    pub fn sdf(&self, x: &[f64]) -> f64 {
        self.shape.sdf(x)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.sdf(x) < 0.0
    }

    pub fn in_collar(&self, x: &[f64]) -> bool {
        self.sdf(x).abs() < self.collar
    }

    /// Central-difference gradient of the sdf with step `step`.
    pub fn sdf_gradient(&self, x: &[f64], step: f64) -> DVector<f64> {
        let mut y = x.to_vec();
        DVector::from_fn(x.len(), |a, _| {
            y[a] = x[a] + step;
            let fp = self.sdf(&y);
            y[a] = x[a] - step;
            let fm = self.sdf(&y);
            y[a] = x[a];
            (fp - fm) / (2.0 * step)
        })
    }

    /// Central-difference Hessian of the sdf with step `step`.
    pub fn sdf_hessian(&self, x: &[f64], step: f64) -> DMatrix<f64> {
        let n = x.len();
        let f0 = self.sdf(x);
        let mut y = x.to_vec();
        let at = |y: &mut Vec<f64>, moves: &[(usize, f64)]| {
            for &(a, s) in moves {
                y[a] += s;
            }
            let v = self.sdf(y);
            for &(a, s) in moves {
                y[a] -= s;
            }
            v
        };
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            m[(a, a)] = (at(&mut y, &[(a, step)]) - 2.0 * f0 + at(&mut y, &[(a, -step)])) / (step * step);
            for b in (a + 1)..n {
                let v = (at(&mut y, &[(a, step), (b, step)]) - at(&mut y, &[(a, step), (b, -step)])
                    - at(&mut y, &[(a, -step), (b, step)])
                    + at(&mut y, &[(a, -step), (b, -step)]))
                    / (4.0 * step * step);
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        m
    }

    fn require_collar(&self, x: &[f64]) -> Result<()> {
        let s = self.sdf(x);
        if s.abs() >= self.collar {
            return Err(Error::OutsideCollar {
                point: x.to_vec(),
                sdf: s,
                collar: self.collar,
            });
        }
        Ok(())
    }

    /// Hessian and gradient of the interior distance `d = -sdf` by central
    /// differences with the grid step.
    pub fn distance_hessian(&self, x: &[f64]) -> Result<DistanceHessian> {
        self.distance_hessian_with_step(x, self.h())
    }

    pub fn distance_hessian_with_step(&self, x: &[f64], step: f64) -> Result<DistanceHessian> {
        self.require_collar(x)?;
        let hessian = -self.sdf_hessian(x, step);
        let gradient = -self.sdf_gradient(x, step);
        let orthogonality_residual = (&hessian * &gradient).norm();
        Ok(DistanceHessian {
            hessian,
            gradient,
            orthogonality_residual,
        })
    }

    /// `max ||∇sdf| - 1|` over grid nodes in the collar.
    pub fn eikonal_residual(&self) -> f64 {
        let h = self.h();
        (0..self.grid.len())
            .map(|i| self.grid.coords(i))
            .filter(|x| self.in_collar(x))
            .map(|x| (self.sdf_gradient(&x, h).norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Fraction `θ ∈ (0, 1]` of the segment `x → x + len·dir` at which it
    /// leaves the domain, or `None` if the far end is still inside or on the
    /// boundary.
    pub fn cut_fraction(&self, x: &[f64], dir: &[f64], len: f64) -> Option<f64> {
        let tol = ON_BOUNDARY_TOL * self.h();
        let at = |t: f64| {
            let y: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + t * len * d).collect();
            self.sdf(&y)
        };
        let f1 = at(1.0);
        if f1 <= tol {
            return None;
        }
        let (mut a, mut b) = (0.0, 1.0);
        let (mut fa, mut fb) = (at(0.0), f1);
        if fa >= 0.0 {
            return Some(0.0);
        }
        // Illinois variant of regula falsi, falling back to bisection.
        let mut side = 0;
        for _ in 0..200 {
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !(c > a && c < b) {
                c = 0.5 * (a + b);
            }
            let fc = at(c);
            if fc.abs() <= 1e-15 * len || (b - a) < 1e-15 {
                return Some(c);
            }
            if fc > 0.0 {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
        }
        Some(0.5 * (a + b))
    }

    pub fn classify_grid(&self) -> Result<GridClassification> {
        let grid = &self.grid;
        let n = grid.dim();
        let h = grid.h();
        let tol = ON_BOUNDARY_TOL * h;
        let kinds: Vec<NodeKind> = (0..grid.len())
            .map(|idx| {
                let x = grid.coords(idx);
                let s = self.sdf(&x);
                if s.abs() <= tol {
                    return NodeKind::Boundary;
                }
                if s > 0.0 {
                    return NodeKind::Exterior;
                }
                let mut arms = Vec::with_capacity(2 * n);
                for a in 0..n {
                    for sign in [1.0, -1.0] {
                        let mut dir = vec![0.0; n];
                        dir[a] = sign;
                        arms.push(self.cut_fraction(&x, &dir, h).unwrap_or(1.0));
                    }
                }
                if arms.iter().all(|&t| t == 1.0) {
                    NodeKind::Interior
                } else {
                    NodeKind::BoundaryAdjacent { arms }
                }
            })
            .collect();
        for (idx, k) in kinds.iter().enumerate() {
            if let NodeKind::BoundaryAdjacent { arms } = k {
                let connected = (0..n).any(|a| {
                    [1isize, -1].iter().enumerate().any(|(s, &step)| {
                        arms[2 * a + s] == 1.0
                            && grid
                                .neighbor(idx, a, step)
                                .is_some_and(|j| matches!(kinds[j], NodeKind::Interior | NodeKind::BoundaryAdjacent { .. }))
                    })
                });
                if !connected {
                    return Err(Error::ResolutionTooCoarse(format!(
                        "node at {:?} has no interior neighbour",
                        grid.coords(idx)
                    )));
                }
            }
        }
        Ok(GridClassification { kinds })
    }

    /// Closest boundary point, by Newton steps `x ← x - sdf(x) ∇sdf(x)`.
    pub fn project_to_boundary(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let step = 1e-6 * (1.0 + self.circumradius);
        for _ in 0..8 {
            let s = self.sdf(&y);
            if s.abs() < 1e-14 {
                break;
            }
            let g = self.sdf_gradient(&y, step);
            let gg = g.norm_squared().max(1e-300);
            for (yi, gi) in y.iter_mut().zip(g.iter()) {
                *yi -= s * gi / gg;
            }
        }
        y
    }

    /// Deterministic boundary sample points. Rectangles avoid a band of
    /// `2h + μ` around edges and corners, where the distance function is not
    /// smooth.
    pub fn boundary_samples(&self, count: usize) -> Vec<Vec<f64>> {
        let count = count.max(1);
        match &self.shape {
            Shape::Ball { center, radius } => sphere_directions(center.len(), count, 0)
                .into_iter()
                .map(|d| center.iter().zip(d.iter()).map(|(c, di)| c + radius * di).collect())
                .collect(),
            Shape::Ellipse { center, semi_axes } => (0..count)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / count as f64;
                    vec![center[0] + semi_axes[0] * t.cos(), center[1] + semi_axes[1] * t.sin()]
                })
                .collect(),
            Shape::Rectangle { lo, hi } => rectangle_samples(lo, hi, count, 2.0 * self.h() + self.collar),
            Shape::Custom { .. } | Shape::Sampled(_) => {
                let grid = &self.grid;
                let h = grid.h();
                let near: Vec<usize> = (0..grid.len())
                    .filter(|&i| {
                        let s = self.sdf(&grid.coords(i));
                        s <= 0.0 && s > -h
                    })
                    .collect();
                let stride = (near.len() / count).max(1);
                near.iter()
                    .step_by(stride)
                    .take(count)
                    .map(|&i| self.project_to_boundary(&grid.coords(i)))
                    .collect()
            }
        }
    }

    /// `H_G^+ = -Σ G_ij(∇d, 0) ∂_ij d` and `H_G^- = Σ G_ij(-∇d, 0) ∂_ij d` at
    /// `samples` boundary points.
    pub fn boundary_weighted_curvatures(&self, w: &WeightMatrix, samples: usize) -> Result<BoundaryCurvatures> {
        let points = self.boundary_samples(samples);
        let mut h_plus = Vec::with_capacity(points.len());
        let mut h_minus = Vec::with_capacity(points.len());
        for x in &points {
            let (hp, hm) = self.weighted_curvatures_at(x, w, self.h())?;
            h_plus.push(hp);
            h_minus.push(hm);
        }
        Ok(BoundaryCurvatures { points, h_plus, h_minus })
    }

    /// `(H_G^+, H_G^-)` at a collar point, with derivative step `step`.
    pub fn weighted_curvatures_at(&self, x: &[f64], w: &WeightMatrix, step: f64) -> Result<(f64, f64)> {
        let dh = self.distance_hessian_with_step(x, step)?;
        let hp = -weighted_trace(w, &dh.gradient, &dh.hessian)?;
        let hm = weighted_trace(w, &(-&dh.gradient), &dh.hessian)?;
        Ok((hp, hm))
    }
}

/// `Σ_{i,j ≤ n} G_ij(p, 0) m_ij`.
pub fn weighted_trace(w: &WeightMatrix, p: &DVector<f64>, m: &DMatrix<f64>) -> Result<f64> {
    let n = p.len();
    let mut q = DVector::zeros(n + 1);
    q.rows_mut(0, n).copy_from(p);
    let g = w.eval(&q)?;
    Ok((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| g[(i, j)] * m[(i, j)]).sum())
}

fn sampled_radii(shape: &Shape, grid: &UniformGrid) -> (Vec<f64>, f64, f64) {
    let n = grid.dim();
    let inside: Vec<(Vec<f64>, f64)> = (0..grid.len())
        .map(|i| grid.coords(i))
        .map(|x| {
            let s = shape.sdf(&x);
            (x, s)
        })
        .filter(|(_, s)| *s <= 0.0)
        .collect();
    if inside.is_empty() {
        return (vec![0.0; n], 0.0, 0.0);
    }
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (x, _) in &inside {
        for a in 0..n {
            lo[a] = lo[a].min(x[a]);
            hi[a] = hi[a].max(x[a]);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| 0.5 * (l + u)).collect();
    // Every point of Ω is within h/2·sqrt(n) of an inside node, up to the
    // boundary layer; pad by one cell.
    let r = inside.iter().map(|(x, _)| dist(x, &center)).fold(0.0, f64::max) + grid.h();
    let inr = inside.iter().map(|(_, s)| -s).fold(0.0, f64::max);
    (center, r, inr)
}

fn rectangle_samples(lo: &[f64], hi: &[f64], count: usize, margin: f64) -> Vec<Vec<f64>> {
    let n = lo.len();
    let faces = 2 * n;
    let per_face = count.div_ceil(faces).max(1);
    let mut out = Vec::with_capacity(per_face * faces);
    for a in 0..n {
        for side in [lo[a], hi[a]] {
            for k in 0..per_face {
                // One free coordinate can be varied along each face; the
                // others sit at the face centre.
                let mut x: Vec<f64> = lo.iter().zip(hi).map(|(l, u)| 0.5 * (l + u)).collect();
                x[a] = side;
                if n > 1 {
                    let b = (a + 1 + k % (n - 1)) % n;
                    let (l, u) = (lo[b] + margin, hi[b] - margin);
                    if u > l {
                        let t = (k as f64 + 0.5) / per_face as f64;
                        x[b] = l + t * (u - l);
                    }
                }
                out.push(x);
            }
        }
    }
    out.truncate(count.max(faces));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{area_weight, epsilon_regularized_weight};

    #[test]
    fn unit_ball_basics() {
        let d = make_ball(vec![0.0, 0.0], 1.0, 1.0 / 16.0).unwrap();
        assert_eq!(d.sdf(&[0.0, 0.0]), -1.0);
        assert_eq!(d.sdf(&[2.0, 0.0]), 1.0);
        assert_eq!(d.circumradius(), 1.0);
        assert_eq!(d.collar(), 5.0 / 16.0);
    }

    #[test]
    fn square_circumradius() {
        let d = make_rectangle(vec![-1.0, -1.0], vec![1.0, 1.0], 0.125).unwrap();
        assert!((d.circumradius() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(d.inradius(), 1.0);
        assert_eq!(d.sdf(&[0.5, 0.0]), -0.5);
        assert!((d.sdf(&[2.0, 2.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn invalid_domains() {
        assert!(matches!(make_ball(vec![0.0, 0.0], 0.0, 0.1), Err(Error::InvalidParam(_))));
        assert!(matches!(make_rectangle(vec![0.0, 0.0], vec![1.0, 0.0], 0.1), Err(Error::InvalidParam(_))));
        assert!(matches!(make_ball(vec![0.0, 0.0], 0.25, 0.1), Err(Error::ResolutionTooCoarse(_))));
    }

    #[test]
    fn ellipse_sdf_is_a_distance() {
        let (a, b) = (2.0, 0.7);
        for k in 0..40 {
            let t = 0.157 * k as f64;
            let (px, py) = (a * t.cos(), b * t.sin());
            // Outward normal of the ellipse at the parameter point.
            let nrm = (px / (a * a)).hypot(py / (b * b));
            let (nx, ny) = (px / (a * a) / nrm, py / (b * b) / nrm);
            for s in [-0.1, 0.05, 0.3] {
                let d = ellipse_sdf(px + s * nx, py + s * ny, a, b);
                assert!((d - s).abs() < 1e-12, "t {t} s {s}: {d}");
            }
        }
        assert!((ellipse_sdf(0.0, 0.0, a, b) + b).abs() < 1e-15);
        assert!((ellipse_sdf(3.0, 0.0, a, b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ball_distance_hessian() {
        let r = 0.8;
        let h = 1.0 / 64.0;
        let d = make_ball(vec![0.1, -0.2], r, h).unwrap();
        let x = [0.1 + r * 0.6, -0.2 + r * 0.8];
        let dh = d.distance_hessian(&x).unwrap();
        let eig = dh.hessian.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        assert!((lo + 1.0 / r).abs() < 2.0 * h * h);
        assert!(hi.abs() < 2.0 * h * h);
        assert!(dh.orthogonality_residual < 2.0 * h * h);
        assert!(matches!(d.distance_hessian(&[0.1, -0.2]), Err(Error::OutsideCollar { .. })));
    }

    #[test]
    fn half_space_distance_hessian_vanishes() {
        let d = make_sdf(|x| x[1] - 1.0, vec![-2.0, -2.0], vec![2.0, 1.0], 0.1).unwrap();
        let dh = d.distance_hessian(&[0.3, 0.9]).unwrap();
        assert!(dh.hessian.amax() < 1e-9);
        let (hp, hm) = d.weighted_curvatures_at(&[0.3, 0.9], &area_weight(), 0.1).unwrap();
        assert!(hp.abs() < 1e-9 && hm.abs() < 1e-9);
    }

    #[test]
    fn disk_boundary_curvatures() {
        let rho = 0.75;
        let d = make_ball(vec![0.0, 0.0], rho, 1.0 / 64.0).unwrap();
        let bc = d.boundary_weighted_curvatures(&area_weight(), 32).unwrap();
        for (hp, hm) in bc.h_plus.iter().zip(&bc.h_minus) {
            assert!((hp - 1.0 / rho).abs() < 1e-3);
            assert!((hm + 1.0 / rho).abs() < 1e-3);
        }
    }

    #[test]
    fn even_weight_gives_opposite_boundary_curvatures() {
        let d = make_ellipse([0.0, 0.0], [1.2, 0.8], 1.0 / 32.0).unwrap();
        let bc = d.boundary_weighted_curvatures(&epsilon_regularized_weight(0.3).unwrap(), 40).unwrap();
        for (hp, hm) in bc.h_plus.iter().zip(&bc.h_minus) {
            assert!((hp + hm).abs() <= 1e-9 * hp.abs().max(1.0));
            assert!(*hp > 0.0);
        }
    }

    #[test]
    fn aligned_square_has_no_cut_nodes() {
        let d = make_rectangle(vec![-1.0, -1.0], vec![1.0, 1.0], 0.125).unwrap();
        let c = d.classify_grid().unwrap();
        assert_eq!(c.count(|k| matches!(k, NodeKind::BoundaryAdjacent { .. })), 0);
        assert_eq!(c.count(|k| matches!(k, NodeKind::Interior)), 15 * 15);
        assert_eq!(c.count(|k| matches!(k, NodeKind::Boundary)), 4 * 16);
    }

    #[test]
    fn disk_cut_distances() {
        let d = make_ball(vec![0.0, 0.0], 1.0, 0.1).unwrap();
        let c = d.classify_grid().unwrap();
        let mut seen = 0;
        for k in &c.kinds {
            if let NodeKind::BoundaryAdjacent { arms } = k {
                seen += 1;
                assert!(arms.iter().all(|&t| t > 0.0 && t <= 1.0));
                assert!(arms.iter().any(|&t| t < 1.0));
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn sampled_sdf_reproduces_disk() {
        let h = 0.05;
        let values: Vec<f64> = (0..61 * 61)
            .map(|k| {
                let (i, j) = (k % 61, k / 61);
                let x = -1.5 + i as f64 * h;
                let y = -1.5 + j as f64 * h;
                x.hypot(y) - 1.0
            })
            .collect();
        let mut text = String::from("2 0.05 61 61\n");
        for v in &values {
            text.push_str(&format!("{v}\n"));
        }
        let s = SampledSdf::parse(&text).unwrap();
        assert!((s.eval(&[0.33, -0.41]) - (0.33f64.hypot(-0.41) - 1.0)).abs() < 1e-3);
        let d = make_sdf_grid(s, 0.1).unwrap();
        assert!((d.circumradius() - 1.0).abs() < 0.2);
        assert!(d.inradius() > 0.9);
        assert!(d.eikonal_residual() < 0.05);
    }

    #[test]
    fn sampled_sdf_header_errors() {
        assert!(SampledSdf::parse("2 0.1 5").is_err());
        assert!(SampledSdf::parse("2 0.1 4 4 1 2 3").is_err());
        assert!(SampledSdf::parse("4 0.1 4 4").is_err());
    }

    #[test]
    fn non_distance_sdf_is_rejected() {
        let r = make_sdf(|x| 3.0 * (x[0].hypot(x[1]) - 1.0), vec![-1.0, -1.0], vec![1.0, 1.0], 0.05);
        assert!(matches!(r, Err(Error::InvalidParam(_))));
    }

    #[test]
    fn rectangle_samples_avoid_corners() {
        let d = make_rectangle(vec![-1.0, -1.0], vec![1.0, 1.0], 0.05).unwrap();
        for x in d.boundary_samples(64) {
            assert!(d.sdf(&x).abs() < 1e-15);
            let from_corner = x.iter().map(|v| 1.0 - v.abs()).fold(f64::INFINITY, f64::min);
            let other = x.iter().map(|v| 1.0 - v.abs()).fold(0.0, f64::max);
            assert!(from_corner == 0.0 && other >= 0.1 + d.collar() - 1e-12);
        }
        let bc = d.boundary_weighted_curvatures(&area_weight(), 64).unwrap();
        assert!(bc.h_plus.iter().chain(&bc.h_minus).all(|v| v.abs() < 1e-9));
    }
}
