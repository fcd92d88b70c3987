//! Uniform tensor-product grids in `n` dimensions.
//!
//! Nodes are stored with the first axis varying fastest. The same grid type
//! backs parameter charts of immersions and the computational grid of a
//! domain.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    origin: Vec<f64>,
    counts: Vec<usize>,
    h: f64,
}

impl UniformGrid {
    pub fn new(origin: Vec<f64>, counts: Vec<usize>, h: f64) -> Result<Self> {
        if origin.len() != counts.len() || origin.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "origin has {} coordinates, counts has {}",
                origin.len(),
                counts.len()
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParam(format!("grid spacing must be positive, got {h}")));
        }
        if counts.contains(&0) {
            return Err(Error::InvalidParam("grid axis with zero nodes".into()));
        }
        Ok(Self { origin, counts, h })
    }

    /// Grid with `2 * half + 1` nodes per axis centred at `center`.
    pub fn centered(center: &[f64], half: usize, h: f64) -> Result<Self> {
        let origin = center.iter().map(|c| c - half as f64 * h).collect();
        Self::new(origin, vec![2 * half + 1; center.len()], h)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.counts[..axis].iter().product()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (m, c) in multi.iter().zip(&self.counts) {
            idx += m * stride;
            stride *= c;
        }
        idx
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|c| {
                let m = idx % c;
                idx /= c;
                m
            })
            .collect()
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .zip(&self.origin)
            .map(|(&m, o)| o + m as f64 * self.h)
            .collect()
    }

    /// Node at integer offset `offset` from `idx`, if it lies on the grid.
    pub fn offset(&self, idx: usize, offset: &[isize]) -> Option<usize> {
        let multi = self.multi_index(idx);
        let mut out = Vec::with_capacity(multi.len());
        for ((m, o), c) in multi.iter().zip(offset).zip(&self.counts) {
            let j = *m as isize + o;
            if j < 0 || j >= *c as isize {
                return None;
            }
            out.push(j as usize);
        }
        Some(self.index(&out))
    }

    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        let m = (idx / self.stride(axis)) % self.counts[axis];
        let j = m as isize + step;
        if j < 0 || j >= self.counts[axis] as isize {
            None
        } else {
            Some((idx as isize + step * self.stride(axis) as isize) as usize)
        }
    }

    /// True if the node is at least one node away from every grid face.
    pub fn is_interior(&self, idx: usize) -> bool {
        self.multi_index(idx)
            .iter()
            .zip(&self.counts)
            .all(|(&m, &c)| m > 0 && m + 1 < c)
    }

    pub fn require_min_points(&self, needed: usize) -> Result<()> {
        match self.counts.iter().copied().min() {
            Some(got) if got < needed => Err(Error::GridTooSmall { needed, got }),
            _ => Ok(()),
        }
    }

    /// Index of the node nearest to `x`, clamped onto the grid.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let multi: Vec<usize> = x
            .iter()
            .zip(&self.origin)
            .zip(&self.counts)
            .map(|((xi, o), &c)| (((xi - o) / self.h).round().max(0.0) as usize).min(c - 1))
            .collect();
        self.index(&multi)
    }
}

/// Values attached to every node of a grid.
#[derive(Debug, Clone)]
pub struct NodeField<T> {
    pub grid: UniformGrid,
    pub values: Vec<T>,
}

impl<T> NodeField<T> {
    pub fn new(grid: UniformGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: UniformGrid, mut f: impl FnMut(usize) -> T) -> Self {
        let values = (0..grid.len()).map(&mut f).collect();
        Self { grid, values }
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> NodeField<U> {
        NodeField {
            grid: self.grid.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }
}

impl NodeField<Option<f64>> {
    /// Largest absolute value over the nodes where the field is defined.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// First derivative along `axis`: central in the interior, one-sided
/// second-order at grid faces.
pub fn partial(grid: &UniformGrid, f: &[f64], idx: usize, axis: usize) -> f64 {
    let h = grid.h();
    match (grid.neighbor(idx, axis, -1), grid.neighbor(idx, axis, 1)) {
        (Some(m), Some(p)) => (f[p] - f[m]) / (2.0 * h),
        (None, Some(p)) => {
            let p2 = grid.neighbor(p, axis, 1).expect("at least three points per axis");
            (-3.0 * f[idx] + 4.0 * f[p] - f[p2]) / (2.0 * h)
        }
        (Some(m), None) => {
            let m2 = grid.neighbor(m, axis, -1).expect("at least three points per axis");
            (3.0 * f[idx] - 4.0 * f[m] + f[m2]) / (2.0 * h)
        }
        (None, None) => 0.0,
    }
}

/// Derivative field along `axis` for every node.
pub fn partial_field(grid: &UniformGrid, f: &[f64], axis: usize) -> Vec<f64> {
    (0..grid.len()).map(|i| partial(grid, f, i, axis)).collect()
}

/// Second derivatives `∂_a ∂_b f` at every node, as a row-major `n × n` block
/// per node. Pure second derivatives use the three-point stencil in the
/// interior and the four-point one-sided stencil at faces; mixed derivatives
/// are nested first differences, symmetrised.
pub fn hessian_field(grid: &UniformGrid, f: &[f64]) -> Vec<Vec<f64>> {
    let n = grid.dim();
    let h = grid.h();
    let firsts: Vec<Vec<f64>> = (0..n).map(|a| partial_field(grid, f, a)).collect();
    (0..grid.len())
        .map(|idx| {
            let mut out = vec![0.0; n * n];
            for a in 0..n {
                out[a * n + a] = match (grid.neighbor(idx, a, -1), grid.neighbor(idx, a, 1)) {
                    (Some(m), Some(p)) => (f[p] - 2.0 * f[idx] + f[m]) / (h * h),
                    (_, p) => {
                        let s: isize = if p.is_some() { 1 } else { -1 };
                        let f1 = f[grid.neighbor(idx, a, s).unwrap()];
                        let f2 = f[grid.neighbor(idx, a, 2 * s).unwrap()];
                        let f3 = f[grid.neighbor(idx, a, 3 * s).unwrap()];
                        (2.0 * f[idx] - 5.0 * f1 + 4.0 * f2 - f3) / (h * h)
                    }
                };
                for b in (a + 1)..n {
                    let ab = partial(grid, &firsts[b], idx, a);
                    let ba = partial(grid, &firsts[a], idx, b);
                    let v = 0.5 * (ab + ba);
                    out[a * n + b] = v;
                    out[b * n + a] = v;
                }
            }
            out
        })
        .collect()
}
