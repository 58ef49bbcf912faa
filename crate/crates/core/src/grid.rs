//! Boxes, rectangular grids, grid functions and scalar fields.
//!
//! A grid partitions a box into axis-aligned cells; the cell midpoints are the
//! grid points. Cells are closed at their lower face and open at their upper
//! face, except that the last cell along each axis is also closed at the top,
//! so the cells tile the box exactly and every point has a unique cell.
//! A [`GridFunction`] assigns a value to every grid point; reading it as a
//! cell-constant function of the box is [`lift`].

use std::sync::Arc;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice;
use crate::quad;

/// A compact axis-aligned box with nonempty interior.
#[derive(Clone, Debug, PartialEq)]
pub struct Cuboid {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Cuboid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidBox);
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidBox);
            }
        }
        Ok(Cuboid { lo, hi })
    }

    /// The unit box `[0, 1]^d`.
    pub fn unit(dim: usize) -> Self {
        Cuboid {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn edge(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// Longest edge of the box.
    pub fn max_edge(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.edge(i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.edge(i)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&xi, (&a, &b))| a <= xi && xi <= b)
    }

    /// The sub-box spanned by the given axes.
    pub fn restrict(&self, axes: &[usize]) -> Result<Cuboid> {
        let lo = axes.iter().map(|&i| self.lo[i]).collect();
        let hi = axes.iter().map(|&i| self.hi[i]).collect();
        Cuboid::new(lo, hi)
    }
}

impl Serialize for Cuboid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Cuboid", 2)?;
        st.serialize_field("lo", &self.lo)?;
        st.serialize_field("hi", &self.hi)?;
        st.end()
    }
}

/// A rectangular partition of a box into cells, with the cell midpoints as
/// grid points. Breakpoints per axis include both endpoints, so an axis with
/// `m` cells stores `m + 1` breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    domain: Cuboid,
    breakpoints: Vec<Vec<f64>>,
    uniform_axes: Vec<bool>,
    dyadic_level: Option<u32>,
}

/// Relative slack allowed when deciding whether an axis is equidistant;
/// breakpoints computed in floating point are never exactly evenly spaced.
const UNIFORMITY_RTOL: f64 = 1e-12;

impl GridSpec {
    pub fn from_breakpoints(domain: Cuboid, breakpoints: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: breakpoints.len(),
            });
        }
        let mut uniform_axes = Vec::with_capacity(domain.dim());
        for (axis, bps) in breakpoints.iter().enumerate() {
            if bps.len() < 2
                || bps.first() != Some(&domain.lo()[axis])
                || bps.last() != Some(&domain.hi()[axis])
                || bps.windows(2).any(|w| !(w[0] < w[1]))
            {
                return Err(Error::InvalidBreakpoints { axis });
            }
            let mut wmin = f64::INFINITY;
            let mut wmax = 0.0f64;
            for w in bps.windows(2) {
                let width = w[1] - w[0];
                wmin = wmin.min(width);
                wmax = wmax.max(width);
            }
            uniform_axes.push(wmax - wmin <= UNIFORMITY_RTOL * wmax);
        }
        let counts: Vec<usize> = breakpoints.iter().map(|b| b.len() - 1).collect();
        let dyadic_level = if uniform_axes.iter().all(|&u| u)
            && counts.windows(2).all(|w| w[0] == w[1])
            && counts[0].is_power_of_two()
        {
            Some(counts[0].trailing_zeros())
        } else {
            None
        };
        Ok(GridSpec {
            domain,
            breakpoints,
            uniform_axes,
            dyadic_level,
        })
    }

    /// Equidistant grid with the given cell count per axis.
    pub fn equidistant(domain: Cuboid, counts: &[usize]) -> Result<Self> {
        if counts.len() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: counts.len(),
            });
        }
        let mut breakpoints = Vec::with_capacity(counts.len());
        for (axis, &m) in counts.iter().enumerate() {
            if m == 0 {
                return Err(Error::InvalidBreakpoints { axis });
            }
            let lo = domain.lo()[axis];
            let hi = domain.hi()[axis];
            let edge = hi - lo;
            let mut bps = Vec::with_capacity(m + 1);
            bps.push(lo);
            for k in 1..m {
                bps.push(lo + edge * (k as f64 / m as f64));
            }
            bps.push(hi);
            breakpoints.push(bps);
        }
        GridSpec::from_breakpoints(domain, breakpoints)
    }

    /// Dyadic grid: `2^level` equal cells along every axis.
    pub fn dyadic(domain: Cuboid, level: u32) -> Result<Self> {
        let counts = vec![1usize << level; domain.dim()];
        GridSpec::equidistant(domain, &counts)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Cuboid {
        &self.domain
    }

    pub fn breakpoints(&self) -> &[Vec<f64>] {
        &self.breakpoints
    }

    /// Cells per axis.
    pub fn shape(&self) -> Vec<usize> {
        self.shape_vec()
    }

    pub fn num_points(&self) -> usize {
        self.breakpoints.iter().map(|b| b.len() - 1).product()
    }

    pub fn is_equidistant(&self) -> bool {
        self.uniform_axes.iter().all(|&u| u)
    }

    pub fn dyadic_level(&self) -> Option<u32> {
        self.dyadic_level
    }

    /// Longest cell edge over the whole grid.
    pub fn len_g(&self) -> f64 {
        self.breakpoints
            .iter()
            .flat_map(|bps| bps.windows(2).map(|w| w[1] - w[0]))
            .fold(0.0, f64::max)
    }

    /// Common cell volume of an equidistant grid; for general grids the
    /// minimum cell volume.
    pub fn vol_g(&self) -> f64 {
        self.breakpoints
            .iter()
            .map(|bps| {
                bps.windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(f64::INFINITY, f64::min)
            })
            .product()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        lattice::flatten(idx, &self.shape_vec())
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        lattice::unflatten(flat, &self.shape_vec())
    }

    pub(crate) fn shape_vec(&self) -> Vec<usize> {
        self.breakpoints.iter().map(|b| b.len() - 1).collect()
    }

    /// Grid point (cell midpoint) of the cell with the given multi-index.
    pub fn midpoint(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(axis, &k)| {
                let bps = &self.breakpoints[axis];
                0.5 * (bps[k] + bps[k + 1])
            })
            .collect()
    }

    pub fn cell_bounds(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let lo = idx
            .iter()
            .enumerate()
            .map(|(axis, &k)| self.breakpoints[axis][k])
            .collect();
        let hi = idx
            .iter()
            .enumerate()
            .map(|(axis, &k)| self.breakpoints[axis][k + 1])
            .collect();
        (lo, hi)
    }

    pub fn cell_volume(&self, idx: &[usize]) -> f64 {
        idx.iter()
            .enumerate()
            .map(|(axis, &k)| self.breakpoints[axis][k + 1] - self.breakpoints[axis][k])
            .product()
    }

    /// Multi-index of the cell containing `x`. Cells are closed below and open
    /// above, so a breakpoint belongs to the cell above it; the box's upper
    /// face belongs to the last cell. Errors outside the box.
    pub fn cell_of(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut idx = Vec::with_capacity(self.dim());
        for (axis, &xi) in x.iter().enumerate() {
            let bps = &self.breakpoints[axis];
            let m = bps.len() - 1;
            if !(xi >= bps[0] && xi <= bps[m]) {
                return Err(Error::OutsideDomain {
                    axis,
                    coordinate: xi,
                });
            }
            let k = bps.partition_point(|&t| t <= xi);
            idx.push((k - 1).min(m - 1));
        }
        Ok(idx)
    }
}

impl Serialize for GridSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("GridSpec", 2)?;
        st.serialize_field("box", &self.domain)?;
        st.serialize_field("breakpoints", &self.breakpoints)?;
        st.end()
    }
}

/// Values on the index lattice of a [`GridSpec`], with optional weight bounds
/// `(c_lo, c_hi)` recorded when the function is used as a weight.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: GridSpec,
    values: Vec<f64>,
    weight_bounds: Option<(f64, f64)>,
}

impl GridFunction {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_points(),
                got: values.len(),
            });
        }
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { index, value: v });
            }
        }
        Ok(GridFunction {
            grid,
            values,
            weight_bounds: None,
        })
    }

    /// Constant function, convenient for unit weights.
    pub fn constant(grid: GridSpec, value: f64) -> Result<Self> {
        let n = grid.num_points();
        GridFunction::new(grid, vec![value; n])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value_at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat_index(idx)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn with_weight_bounds(mut self, c_lo: f64, c_hi: f64) -> Self {
        self.weight_bounds = Some((c_lo, c_hi));
        self
    }

    pub fn declared_weight_bounds(&self) -> Option<(f64, f64)> {
        self.weight_bounds
    }

    /// Validates this function as a weight (finite, strictly positive) and
    /// returns its bounds: the declared ones if present, else min and max.
    pub fn weight_bounds(&self) -> Result<(f64, f64)> {
        for (index, &v) in self.values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidWeight { index, value: v });
            }
        }
        Ok(self.weight_bounds.unwrap_or((self.min(), self.max())))
    }

    pub(crate) fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

impl Serialize for GridFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("GridFunction", 3)?;
        st.serialize_field("box", &self.grid.domain)?;
        st.serialize_field("breakpoints", &self.grid.breakpoints)?;
        st.serialize_field("values", &self.values)?;
        st.end()
    }
}

/// Smoothness promise attached to a [`ScalarField`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regularity {
    Bounded,
    Continuous,
}

/// A real-valued function on a box: an evaluator plus a regularity tag.
#[derive(Clone)]
pub struct ScalarField {
    domain: Cuboid,
    regularity: Regularity,
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl ScalarField {
    pub fn new(
        domain: Cuboid,
        regularity: Regularity,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            domain,
            regularity,
            eval: Arc::new(eval),
        }
    }

    pub fn constant(domain: Cuboid, value: f64) -> Self {
        ScalarField::new(domain, Regularity::Continuous, move |_| value)
    }

    pub fn domain(&self) -> &Cuboid {
        &self.domain
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    /// Evaluates the field. Defined on the field's box; callers must not pass
    /// points outside it.
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// The field on the sub-box of `axes`, with the remaining coordinates
    /// frozen at `pin`.
    pub fn slice(&self, axes: &[usize], pin: &[f64]) -> Result<ScalarField> {
        if pin.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain.dim(),
                got: pin.len(),
            });
        }
        let sub = self.domain.restrict(axes)?;
        let axes = axes.to_vec();
        let pin = pin.to_vec();
        let inner = self.eval.clone();
        Ok(ScalarField {
            domain: sub,
            regularity: self.regularity,
            eval: Arc::new(move |xhat: &[f64]| {
                let mut x = pin.clone();
                for (slot, &axis) in axes.iter().enumerate() {
                    x[axis] = xhat[slot];
                }
                inner(&x)
            }),
        })
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("domain", &self.domain)
            .field("regularity", &self.regularity)
            .finish_non_exhaustive()
    }
}

fn check_sampling_domain(field: &ScalarField, grid: &GridSpec) -> Result<()> {
    let fd = field.domain();
    if fd.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: fd.dim(),
            got: grid.dim(),
        });
    }
    for axis in 0..fd.dim() {
        if grid.domain().lo()[axis] < fd.lo()[axis] || grid.domain().hi()[axis] > fd.hi()[axis] {
            return Err(Error::OutsideDomain {
                axis,
                coordinate: grid.domain().lo()[axis],
            });
        }
    }
    Ok(())
}

/// Samples the field at every grid point (cell midpoint).
pub fn sample_midpoints(field: &ScalarField, grid: &GridSpec) -> Result<GridFunction> {
    check_sampling_domain(field, grid)?;
    let shape = grid.shape_vec();
    let mut values = Vec::with_capacity(grid.num_points());
    let mut x = vec![0.0; grid.dim()];
    lattice::for_each_index(&shape, |idx| {
        for (axis, &k) in idx.iter().enumerate() {
            let bps = &grid.breakpoints()[axis];
            x[axis] = 0.5 * (bps[k] + bps[k + 1]);
        }
        values.push(field.eval(&x));
    });
    GridFunction::new(grid.clone(), values)
}

/// Replaces each cell's value by the cell average of the field, computed with
/// a tensor Gauss-Legendre rule of the given order per axis.
pub fn cell_average(field: &ScalarField, grid: &GridSpec, order: usize) -> Result<GridFunction> {
    check_sampling_domain(field, grid)?;
    let rule = quad::gauss_legendre(order);
    let shape = grid.shape_vec();
    let mut values = Vec::with_capacity(grid.num_points());
    let eval = |x: &[f64]| field.eval(x);
    lattice::for_each_index(&shape, |idx| {
        let (lo, hi) = grid.cell_bounds(idx);
        let integral = quad::integrate_cell(&eval, &lo, &hi, &rule);
        values.push(integral / grid.cell_volume(idx));
    });
    GridFunction::new(grid.clone(), values)
}

/// Reads a grid function as a cell-constant field on its box: the value at `x`
/// is the value of the cell containing `x`. On cell boundaries the cell above
/// wins, matching the cells' closed-below convention. Evaluating outside the
/// box panics.
pub fn lift(g: &GridFunction) -> ScalarField {
    let grid = g.grid().clone();
    let values = g.values().to_vec();
    let domain = grid.domain().clone();
    ScalarField::new(domain, Regularity::Bounded, move |x| {
        let idx = grid.cell_of(x).expect("lifted field evaluated outside its box");
        values[grid.flat_index(&idx)]
    })
}

/// Resamples onto a refinement: the value at each fine grid point is the value
/// of the coarse cell containing it.
pub(crate) fn resample_onto(g: &GridFunction, fine: &GridSpec) -> Result<GridFunction> {
    let shape = fine.shape_vec();
    let coarse = g.grid();
    let mut values = Vec::with_capacity(fine.num_points());
    let mut x = vec![0.0; fine.dim()];
    let mut err = None;
    lattice::for_each_index(&shape, |idx| {
        if err.is_some() {
            return;
        }
        for (axis, &k) in idx.iter().enumerate() {
            let bps = &fine.breakpoints()[axis];
            x[axis] = 0.5 * (bps[k] + bps[k + 1]);
        }
        match coarse.cell_of(&x) {
            Ok(c) => values.push(g.value_at(&c)),
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    GridFunction::new(fine.clone(), values)
}

/// The coarsest grid refining both arguments. Identical grids refine
/// themselves; otherwise both must be dyadic over the same box, where the
/// finer level refines the coarser.
pub fn common_refinement(a: &GridSpec, b: &GridSpec) -> Result<GridSpec> {
    if a == b {
        return Ok(a.clone());
    }
    if a.domain() == b.domain() {
        if let (Some(na), Some(nb)) = (a.dyadic_level(), b.dyadic_level()) {
            return Ok(if na >= nb { a.clone() } else { b.clone() });
        }
    }
    Err(Error::NoCommonRefinement)
}

/// Weighted 2-norm and sup norm of `g1 - g2`, computed exactly on a common
/// refinement. `w` defaults to the unit weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2_weighted: f64,
    pub sup: f64,
}

pub fn norms(g1: &GridFunction, g2: &GridFunction, w: Option<&GridFunction>) -> Result<Norms> {
    let mut fine = common_refinement(g1.grid(), g2.grid())?;
    if let Some(wf) = w {
        fine = common_refinement(&fine, wf.grid())?;
    }
    let a = resample_onto(g1, &fine)?;
    let b = resample_onto(g2, &fine)?;
    let wv = match w {
        Some(wf) => Some(resample_onto(wf, &fine)?),
        None => None,
    };
    let shape = fine.shape_vec();
    let mut sup: f64 = 0.0;
    let mut sum = 0.0;
    let mut flat = 0usize;
    lattice::for_each_index(&shape, |idx| {
        let d = a.values()[flat] - b.values()[flat];
        sup = sup.max(d.abs());
        let weight = wv.as_ref().map_or(1.0, |w| w.values()[flat]);
        sum += d * d * weight * fine.cell_volume(idx);
        flat += 1;
    });
    Ok(Norms {
        l2_weighted: sum.sqrt(),
        sup,
    })
}

/// Rectangular grid on the box with cells at most `eps` wide per axis and
/// the cell containing `x0` centered on `x0`, up to truncation at the box
/// walls. Centering matters: as `eps` shrinks, linear behavior of the data is
/// re-sampled at the same effective point, so the value of the fit at `x0`'s
/// cell settles at the rate of the data's curvature instead of wobbling with
/// the cell offset. Breakpoints sit at x0 + (m + 1/2)·eps; candidates within
/// a quarter cell of a wall are dropped, so boundary cells are between a
/// quarter and five quarters of `eps` wide. A coordinate on a wall gets a
/// half cell there and is never an interior breakpoint.
pub fn grid_around_point(domain: &Cuboid, x0: &[f64], eps: f64) -> Result<GridSpec> {
    if x0.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: x0.len(),
        });
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    for (axis, &xi) in x0.iter().enumerate() {
        if !(domain.lo()[axis] <= xi && xi <= domain.hi()[axis]) {
            return Err(Error::OutsideDomain {
                axis,
                coordinate: xi,
            });
        }
    }
    let mut all_bps = Vec::with_capacity(domain.dim());
    for axis in 0..domain.dim() {
        let lo = domain.lo()[axis];
        let hi = domain.hi()[axis];
        let h = eps.min(hi - lo);
        let xi = x0[axis];
        let m_lo = ((lo - xi) / h - 0.5).ceil() as i64;
        let m_hi = ((hi - xi) / h - 0.5).floor() as i64;
        let mut bps = vec![lo];
        for m in m_lo..=m_hi {
            let t = xi + (m as f64 + 0.5) * h;
            if t - lo >= 0.25 * h && hi - t >= 0.25 * h {
                bps.push(t);
            }
        }
        bps.push(hi);
        all_bps.push(bps);
    }
    GridSpec::from_breakpoints(domain.clone(), all_bps)
}
