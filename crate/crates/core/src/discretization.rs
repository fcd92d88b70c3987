//! Finite-difference discretisation of
//! `Σ G_ij(-∇u, 1) ∂_ij u = t·H(x, u)` with Dirichlet data `t·φ`.
//!
//! Unknowns are grid nodes strictly inside the domain. Every unknown carries
//! line stencils along the coordinate axes and along the diagonals
//! `e_a ± e_b`. An arm that leaves the domain is shortened to the boundary
//! crossing (Shortley–Weller) and carries the boundary value there. Mixed
//! derivatives come from the two diagonal second differences,
//! `u_ab = (D²_{e_a+e_b} - D²_{e_a-e_b}) / 2`, which on full stencils is the
//! symmetric four-point cross.

use faer::linalg::solvers::Solve;
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::domain::{DomainSpec, GridClassification, NodeKind};
use crate::error::{Error, Result};
use crate::problem::{BoundaryData, PrescribedCurvature};
use crate::weights::WeightMatrix;
use nalgebra::DVector;

/// A linear combination of unknowns plus a contribution from boundary
/// values; the latter scales with the homotopy parameter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinComb {
    pub terms: Vec<(usize, f64)>,
    pub known: f64,
}

impl LinComb {
    pub fn eval(&self, u: &[f64], t: f64) -> f64 {
        self.terms.iter().map(|&(j, w)| w * u[j]).sum::<f64>() + t * self.known
    }

    fn add(&mut self, r: Ref, w: f64) {
        match r {
            Ref::Unknown(j) => match self.terms.iter_mut().find(|(k, _)| *k == j) {
                Some((_, v)) => *v += w,
                None => self.terms.push((j, w)),
            },
            Ref::Known(v) => self.known += w * v,
        }
    }

    fn axpy(&mut self, other: &LinComb, s: f64) {
        for &(j, w) in &other.terms {
            self.add(Ref::Unknown(j), s * w);
        }
        self.known += s * other.known;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ref {
    Unknown(usize),
    Known(f64),
}

#[derive(Debug, Clone, Copy)]
struct Arm {
    dist: f64,
    value: Ref,
    /// True when the arm ends at a grid node rather than a boundary crossing.
    full: bool,
}

/// Stencil data for one unknown.
#[derive(Debug, Clone)]
pub struct NodeStencil {
    pub grid_index: usize,
    pub x: Vec<f64>,
    /// `∂_a u`.
    pub d1: Vec<LinComb>,
    /// `∂_ab u`, row-major `n × n`.
    pub d2: Vec<LinComb>,
    /// Smallest arm fraction; residual rows are multiplied by it.
    pub scale: f64,
    /// True when some arm ends on the boundary.
    pub boundary_adjacent: bool,
    /// Unknowns this row depends on, sorted.
    pub deps: Vec<usize>,
}

/// Point carrying Dirichlet data: boundary grid nodes and arm crossings.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub x: Vec<f64>,
    /// Unscaled `φ(x)`.
    pub value: f64,
    /// Grid node index if the point is a boundary node.
    pub grid_index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianMode {
    /// Closed-form linearisation; `G` derivatives are analytic when the
    /// weight provides them, finite differences otherwise.
    #[default]
    Analytic,
    /// Coloured finite-difference columns of the discrete residual.
    FiniteDifference,
}

#[derive(Debug, Clone)]
pub struct Discretization {
    domain: DomainSpec,
    classification: GridClassification,
    boundary: BoundaryData,
    stencils: Vec<NodeStencil>,
    unknown_of: Vec<Option<usize>>,
    boundary_points: Vec<BoundaryPoint>,
}

impl Discretization {
    pub fn new(domain: &DomainSpec, boundary: &BoundaryData) -> Result<Self> {
        let classification = domain.classify_grid()?;
        let grid = domain.grid();
        let n = grid.dim();
        let h = grid.h();
        let mut unknown_of = vec![None; grid.len()];
        let mut count = 0;
        for (idx, slot) in unknown_of.iter_mut().enumerate() {
            if classification.is_unknown(idx) {
                *slot = Some(count);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::ResolutionTooCoarse("no grid nodes inside the domain".into()));
        }
        let mut boundary_points: Vec<BoundaryPoint> = (0..grid.len())
            .filter(|&i| classification.kinds[i] == NodeKind::Boundary)
            .map(|i| {
                let x = grid.coords(i);
                BoundaryPoint { value: boundary.value(&x), x, grid_index: Some(i) }
            })
            .collect();

        let mut stencils = Vec::with_capacity(count);
        for idx in (0..grid.len()).filter(|&i| unknown_of[i].is_some()) {
            let x = grid.coords(idx);
            let mut scale: f64 = 1.0;
            let mut adjacent = false;
            let mut arm = |offset: &[isize], mult: f64, cuts: &mut Vec<BoundaryPoint>| -> Option<Arm> {
                let len = h * mult * offset.iter().map(|o| (o * o) as f64).sum::<f64>().sqrt();
                let norm = offset.iter().map(|o| (o * o) as f64).sum::<f64>().sqrt();
                let dir: Vec<f64> = offset.iter().map(|&o| o as f64 / norm).collect();
                match domain.cut_fraction(&x, &dir, len) {
                    Some(theta) => {
                        let p: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + theta * len * d).collect();
                        let v = boundary.value(&p);
                        if mult > 1.0 {
                            // A far arm only supplies an extra value; it must
                            // stay clear of the full arm it extends.
                            return (theta * mult > 1.25).then_some(Arm { dist: theta * len, value: Ref::Known(v), full: false });
                        }
                        cuts.push(BoundaryPoint { x: p, value: v, grid_index: None });
                        scale = scale.min(theta);
                        adjacent = true;
                        Some(Arm { dist: theta * len, value: Ref::Known(v), full: false })
                    }
                    None => {
                        let off: Vec<isize> = offset.iter().map(|o| o * mult as isize).collect();
                        let j = grid.offset(idx, &off)?;
                        let value = match unknown_of[j] {
                            Some(k) => Ref::Unknown(k),
                            None => {
                                if mult == 1.0 {
                                    adjacent = true;
                                }
                                Ref::Known(boundary.value(&grid.coords(j)))
                            }
                        };
                        Some(Arm { dist: len, value, full: true })
                    }
                }
            };
            let me = Ref::Unknown(unknown_of[idx].unwrap());
            let mut cuts = Vec::new();
            let mut line = |offset: Vec<isize>, cuts: &mut Vec<BoundaryPoint>| -> Result<(LinComb, LinComb)> {
                let neg: Vec<isize> = offset.iter().map(|o| -o).collect();
                let p = arm(&offset, 1.0, cuts).ok_or_else(|| off_grid(&x))?;
                let m = arm(&neg, 1.0, cuts).ok_or_else(|| off_grid(&x))?;
                let first = three_point(&[(-m.dist, m.value), (0.0, me), (p.dist, p.value)], 1);
                let second = if p.full && m.full {
                    three_point(&[(-m.dist, m.value), (0.0, me), (p.dist, p.value)], 2)
                } else if p.full != m.full {
                    // Extra node two steps back on the uncut side keeps the
                    // second difference second-order accurate.
                    let (far_off, sign) = if p.full { (&offset, 1.0) } else { (&neg, -1.0) };
                    let mut scratch = Vec::new();
                    match arm(far_off, 2.0, &mut scratch) {
                        Some(f) => {
                            let pts = [(-m.dist, m.value), (0.0, me), (p.dist, p.value), (sign * f.dist, f.value)];
                            fd_comb(&pts, 2)
                        }
                        None => three_point(&[(-m.dist, m.value), (0.0, me), (p.dist, p.value)], 2),
                    }
                } else {
                    three_point(&[(-m.dist, m.value), (0.0, me), (p.dist, p.value)], 2)
                };
                Ok((first, second))
            };
            let mut d1 = vec![LinComb::default(); n];
            let mut d2 = vec![LinComb::default(); n * n];
            for a in 0..n {
                let mut o = vec![0isize; n];
                o[a] = 1;
                let (f, s) = line(o, &mut cuts)?;
                d1[a] = f;
                d2[a * n + a] = s;
            }
            for a in 0..n {
                for b in (a + 1)..n {
                    let mut plus = vec![0isize; n];
                    plus[a] = 1;
                    plus[b] = 1;
                    let mut minus = plus.clone();
                    minus[b] = -1;
                    let (_, sp) = line(plus, &mut cuts)?;
                    let (_, sm) = line(minus, &mut cuts)?;
                    let mut mixed = LinComb::default();
                    mixed.axpy(&sp, 0.5);
                    mixed.axpy(&sm, -0.5);
                    d2[a * n + b] = mixed.clone();
                    d2[b * n + a] = mixed;
                }
            }
            let mut deps: Vec<usize> = d1
                .iter()
                .chain(&d2)
                .flat_map(|c| c.terms.iter().map(|&(j, _)| j))
                .chain(std::iter::once(unknown_of[idx].unwrap()))
                .collect();
            deps.sort_unstable();
            deps.dedup();
            boundary_points.extend(cuts);
            stencils.push(NodeStencil {
                grid_index: idx,
                x,
                d1,
                d2,
                scale,
                boundary_adjacent: adjacent,
                deps,
            });
        }
        dedup_points(&mut boundary_points);
        Ok(Self {
            domain: domain.clone(),
            classification,
            boundary: boundary.clone(),
            stencils,
            unknown_of,
            boundary_points,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    pub fn classification(&self) -> &GridClassification {
        &self.classification
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    pub fn stencils(&self) -> &[NodeStencil] {
        &self.stencils
    }

    pub fn unknown_of(&self, grid_index: usize) -> Option<usize> {
        self.unknown_of[grid_index]
    }

    pub fn boundary_points(&self) -> &[BoundaryPoint] {
        &self.boundary_points
    }

    /// Unknown vector sampled from a function.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.stencils.iter().map(|s| f(&s.x)).collect()
    }

    /// Discrete gradient at unknown `k`.
    pub fn gradient(&self, u: &[f64], t: f64, k: usize) -> Vec<f64> {
        self.stencils[k].d1.iter().map(|c| c.eval(u, t)).collect()
    }

    /// `Σ G_ij(-∇u, 1) ∂_ij u` at unknown `k`.
    pub fn operator_at(&self, u: &[f64], t: f64, k: usize, w: &WeightMatrix) -> Result<f64> {
        let s = &self.stencils[k];
        let n = s.d1.len();
        let p = upper_normal_direction(&self.gradient(u, t, k));
        let g = w.eval(&p)?;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += g[(i, j)] * s.d2[i * n + j].eval(u, t);
            }
        }
        Ok(acc)
    }

    /// Unscaled residual `Σ G_ij(-∇u, 1) ∂_ij u - t·H(x, u)` at every unknown.
    pub fn assemble_residual(&self, u: &[f64], t: f64, w: &WeightMatrix, hfun: &PrescribedCurvature) -> Result<Vec<f64>> {
        self.check_len(u)?;
        (0..self.len())
            .map(|k| Ok(self.operator_at(u, t, k, w)? - t * hfun.value(&self.stencils[k].x, u[k])))
            .collect()
    }

    /// Residual with each row multiplied by its stencil scale.
    pub fn scaled_residual(&self, u: &[f64], t: f64, w: &WeightMatrix, hfun: &PrescribedCurvature) -> Result<Vec<f64>> {
        let mut r = self.assemble_residual(u, t, w, hfun)?;
        for (ri, s) in r.iter_mut().zip(&self.stencils) {
            *ri *= s.scale;
        }
        Ok(r)
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::ShapeMismatch(format!("{} values for {} unknowns", u.len(), self.len())));
        }
        Ok(())
    }

    /// Jacobian of the scaled residual as sparse triplets.
    pub fn jacobian(
        &self,
        u: &[f64],
        t: f64,
        w: &WeightMatrix,
        hfun: &PrescribedCurvature,
        mode: JacobianMode,
    ) -> Result<Vec<Triplet<usize, usize, f64>>> {
        self.check_len(u)?;
        match mode {
            JacobianMode::Analytic => self.analytic_jacobian(u, t, w, hfun),
            JacobianMode::FiniteDifference => self.fd_jacobian(u, t, w, hfun),
        }
    }

    fn analytic_jacobian(
        &self,
        u: &[f64],
        t: f64,
        w: &WeightMatrix,
        hfun: &PrescribedCurvature,
    ) -> Result<Vec<Triplet<usize, usize, f64>>> {
        let mut out = Vec::new();
        let mut row: Vec<(usize, f64)> = Vec::new();
        for (k, s) in self.stencils.iter().enumerate() {
            let n = s.d1.len();
            let grad = self.gradient(u, t, k);
            let p = upper_normal_direction(&grad);
            let g = w.eval(&p)?;
            let d2: Vec<f64> = s.d2.iter().map(|c| c.eval(u, t)).collect();
            // M_l = Σ_ij ∂G_ij/∂p_l ∂_ij u; ∂p_l/∂u = -∂(∂_l u)/∂u.
            let mut m_coef = vec![0.0; n];
            for (l, ml) in m_coef.iter_mut().enumerate() {
                let dg = w.partial(&p, l)?;
                *ml = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| dg[(i, j)] * d2[i * n + j]).sum();
            }
            row.clear();
            for i in 0..n {
                for j in 0..n {
                    for &(m, wt) in &s.d2[i * n + j].terms {
                        push_merge(&mut row, m, g[(i, j)] * wt);
                    }
                }
            }
            for (l, ml) in m_coef.iter().enumerate() {
                for &(m, wt) in &s.d1[l].terms {
                    push_merge(&mut row, m, -ml * wt);
                }
            }
            push_merge(&mut row, k, -t * hfun.h_z(&s.x, u[k]));
            out.extend(row.iter().map(|&(m, v)| Triplet::new(k, m, s.scale * v)));
        }
        Ok(out)
    }

    fn fd_jacobian(
        &self,
        u: &[f64],
        t: f64,
        w: &WeightMatrix,
        hfun: &PrescribedCurvature,
    ) -> Result<Vec<Triplet<usize, usize, f64>>> {
        let grid = self.domain.grid();
        let n = grid.dim();
        // Stencils reach two nodes per axis, so nodes congruent mod 5 in every
        // coordinate never share a row.
        let color_of = |k: usize| -> usize {
            let mi = grid.multi_index(self.stencils[k].grid_index);
            mi.iter().rev().fold(0, |acc, &m| acc * 5 + m % 5)
        };
        let colors = 5usize.pow(n as u32);
        let mut members = vec![Vec::new(); colors];
        for k in 0..self.len() {
            members[color_of(k)].push(k);
        }
        let mut out = Vec::new();
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        for cols in members.iter().filter(|c| !c.is_empty()) {
            let eps: Vec<f64> = cols.iter().map(|&m| 1e-6 * (1.0 + u[m].abs())).collect();
            for (&m, e) in cols.iter().zip(&eps) {
                up[m] = u[m] + e;
                um[m] = u[m] - e;
            }
            for &m in cols {
                // Rows depending on column m are exactly those listing it.
                for k in self.rows_touching(m) {
                    let s = &self.stencils[k];
                    let fp = self.operator_at(&up, t, k, w)? - t * hfun.value(&s.x, up[k]);
                    let fm = self.operator_at(&um, t, k, w)? - t * hfun.value(&s.x, um[k]);
                    let e = 1e-6 * (1.0 + u[m].abs());
                    out.push(Triplet::new(k, m, s.scale * (fp - fm) / (2.0 * e)));
                }
            }
            for &m in cols {
                up[m] = u[m];
                um[m] = u[m];
            }
        }
        Ok(out)
    }

    fn rows_touching(&self, m: usize) -> Vec<usize> {
        // Rows are local: scan the stencil neighbourhood of m's grid node.
        let grid = self.domain.grid();
        let n = grid.dim();
        let idx = self.stencils[m].grid_index;
        let mut rows = Vec::new();
        let span = 5usize.pow(n as u32);
        for c in 0..span {
            let mut off = vec![0isize; n];
            let mut r = c;
            for o in off.iter_mut() {
                *o = (r % 5) as isize - 2;
                r /= 5;
            }
            if let Some(j) = grid.offset(idx, &off) {
                if let Some(k) = self.unknown_of[j] {
                    if self.stencils[k].deps.binary_search(&m).is_ok() {
                        rows.push(k);
                    }
                }
            }
        }
        rows
    }

    /// Solves `J δ = -r` with a sparse LU factorisation.
    pub fn newton_direction(&self, triplets: &[Triplet<usize, usize, f64>], r: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, triplets)
            .map_err(|e| Error::LinearSolveFailure(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| Error::LinearSolveFailure(format!("{e:?}")))?;
        let b = Mat::<f64>::from_fn(n, 1, |i, _| -r[i]);
        let x = lu.solve(&b);
        let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolveFailure("singular Jacobian".into()));
        }
        Ok(out)
    }
}

fn off_grid(x: &[f64]) -> Error {
    Error::ResolutionTooCoarse(format!("stencil at {x:?} leaves the computational grid"))
}

fn push_merge(row: &mut Vec<(usize, f64)>, m: usize, v: f64) {
    match row.iter_mut().find(|(j, _)| *j == m) {
        Some((_, acc)) => *acc += v,
        None => row.push((m, v)),
    }
}

fn dedup_points(points: &mut Vec<BoundaryPoint>) {
    points.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap_or(std::cmp::Ordering::Equal));
    points.dedup_by(|a, b| a.x.iter().zip(&b.x).all(|(p, q)| (p - q).abs() < 1e-12));
}

/// `p = (-∇u, 1)`.
pub fn upper_normal_direction(grad: &[f64]) -> DVector<f64> {
    let n = grad.len();
    DVector::from_fn(n + 1, |i, _| if i < n { -grad[i] } else { 1.0 })
}

fn three_point(pts: &[(f64, Ref); 3], order: usize) -> LinComb {
    fd_comb(pts, order)
}

fn fd_comb(pts: &[(f64, Ref)], order: usize) -> LinComb {
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let w = fornberg_weights(&xs, order);
    let mut c = LinComb::default();
    for ((_, r), wt) in pts.iter().zip(w) {
        c.add(*r, wt);
    }
    c
}

/// Finite-difference weights at 0 for the derivative of order `m` on the
/// nodes `xs` (Fornberg's recursion).
pub fn fornberg_weights(xs: &[f64], m: usize) -> Vec<f64> {
    let np = xs.len();
    let mut c = vec![vec![0.0; m + 1]; np];
    let mut c1 = 1.0;
    let mut c4 = xs[0];
    c[0][0] = 1.0;
    for i in 1..np {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i];
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_ball, make_rectangle};
    use crate::weights::{area_weight, epsilon_regularized_weight};

    #[test]
    fn fornberg_reproduces_classic_stencils() {
        let w = fornberg_weights(&[-1.0, 0.0, 1.0], 2);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = fornberg_weights(&[-1.0, 0.0, 1.0], 1);
        assert_eq!(w, vec![-0.5, 0.0, 0.5]);
        let w = fornberg_weights(&[0.0, 1.0, 2.0, 3.0], 2);
        let expect = [2.0, -5.0, 4.0, -1.0];
        assert!(w.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn quadratics_are_differentiated_exactly() {
        let dom = make_ball(vec![0.0, 0.0], 1.0, 0.1).unwrap();
        let f = |x: &[f64]| 0.3 + x[0] - 2.0 * x[1] + 0.7 * x[0] * x[0] - 1.1 * x[0] * x[1] + 0.4 * x[1] * x[1];
        let phi = BoundaryData::new("q", f, |_| vec![]);
        let disc = Discretization::new(&dom, &phi).unwrap();
        let u = disc.sample(f);
        for (k, s) in disc.stencils().iter().enumerate() {
            let x = &s.x;
            let g = disc.gradient(&u, 1.0, k);
            assert!((g[0] - (1.0 + 1.4 * x[0] - 1.1 * x[1])).abs() < 1e-10);
            assert!((g[1] - (-2.0 - 1.1 * x[0] + 0.8 * x[1])).abs() < 1e-10);
            let d2: Vec<f64> = s.d2.iter().map(|c| c.eval(&u, 1.0)).collect();
            assert!((d2[0] - 1.4).abs() < 1e-8, "{:?}", d2);
            assert!((d2[1] + 1.1).abs() < 1e-8);
            assert!((d2[3] - 0.8).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_data_zero_residual() {
        let dom = make_ball(vec![0.0, 0.0], 1.0, 0.1).unwrap();
        let disc = Discretization::new(&dom, &BoundaryData::zero()).unwrap();
        let r = disc
            .assemble_residual(&vec![0.0; disc.len()], 1.0, &area_weight(), &PrescribedCurvature::zero())
            .unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn aligned_square_cut_free() {
        let dom = make_rectangle(vec![-1.0, -1.0], vec![1.0, 1.0], 0.125).unwrap();
        let disc = Discretization::new(&dom, &BoundaryData::zero()).unwrap();
        assert!(disc.stencils().iter().all(|s| s.scale == 1.0));
        assert_eq!(disc.boundary_points().len(), 64);
    }

    #[test]
    fn analytic_and_fd_jacobians_agree() {
        let dom = make_ball(vec![0.0, 0.0], 1.0, 0.125).unwrap();
        let phi = BoundaryData::from_expr(2, "x1*x2 + 0.3*x1").unwrap();
        let disc = Discretization::new(&dom, &phi).unwrap();
        let h = PrescribedCurvature::from_expr(2, "0.5 + 0.2*z").unwrap();
        let u = disc.sample(|x| 0.2 * x[0] * x[0] - 0.1 * x[1] + x[0] * x[1]);
        for w in [area_weight(), epsilon_regularized_weight(0.4).unwrap()] {
            let dense = |tr: Vec<Triplet<usize, usize, f64>>| {
                let mut m = nalgebra::DMatrix::<f64>::zeros(disc.len(), disc.len());
                for t in tr {
                    m[(t.row, t.col)] += t.val;
                }
                m
            };
            let a = dense(disc.jacobian(&u, 0.7, &w, &h, JacobianMode::Analytic).unwrap());
            let f = dense(disc.jacobian(&u, 0.7, &w, &h, JacobianMode::FiniteDifference).unwrap());
            let err = (&a - &f).amax() / a.amax();
            assert!(err < 1e-6, "relative Jacobian mismatch {err:e}");
        }
    }
}
