//! Averaging formulas behind the fit, and pointwise evaluation built on them.
//!
//! The fitted value at a grid point is the min over lower sets through it of
//! the max over upper sets through it of the region's weighted mean, taken
//! with the measure w(x)dx, so cell volumes enter alongside the weights.
//! [`RegionMeans`] computes those means over arbitrary unions of cells;
//! [`volume_weighted_fit`] evaluates the whole formula at once through the
//! exact solver, which attains it by duality (the enumeration oracle
//! cross-checks this identity in the test suite).
//!
//! On an interval the formula collapses: the fitted value at x is the slope
//! of the greatest convex minorant of the cumulative curve
//! t ↦ (∫w, ∫fw) at t = x. [`univariate_value`] evaluates it directly from
//! trapezoid cumulative integrals, guarded by a mesh-doubling check.
//!
//! In any dimension, [`pointwise_value`] recovers the continuous fit at one
//! point by solving on grids built around that point with shrinking cells
//! and stopping when successive values settle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{cell_average, grid_around_point, sample_midpoints, GridFunction, ScalarField};
use crate::isotonic::{solve, Kahan};
use crate::lattice;
use crate::order::Signature;
use crate::projection::Discretization;

/// Weighted means over unions of grid cells, with the per-cell masses
/// precomputed so repeated queries touch each member cell once.
#[derive(Clone, Debug)]
pub struct RegionMeans {
    /// w·vol per cell.
    mass: Vec<f64>,
    /// f·w·vol per cell.
    moment: Vec<f64>,
}

impl RegionMeans {
    pub fn new(f: &GridFunction, w: &GridFunction) -> Result<Self> {
        f.same_grid(w)?;
        w.weight_bounds()?;
        let grid = f.grid();
        let shape = grid.shape();
        let mut mass = Vec::with_capacity(grid.num_points());
        let mut moment = Vec::with_capacity(grid.num_points());
        let mut flat = 0usize;
        lattice::for_each_index(&shape, |idx| {
            let m = w.values()[flat] * grid.cell_volume(idx);
            mass.push(m);
            moment.push(m * f.values()[flat]);
            flat += 1;
        });
        Ok(Self { mass, moment })
    }

    /// Mean over the cells with the given flat indices.
    pub fn over_cells(&self, cells: &[usize]) -> Result<f64> {
        if cells.is_empty() {
            return Err(Error::InvalidInput("mean over an empty region".into()));
        }
        let mut mass = Kahan::new();
        let mut moment = Kahan::new();
        for &c in cells {
            if c >= self.mass.len() {
                return Err(Error::InvalidInput(format!(
                    "cell index {c} outside the grid ({} cells)",
                    self.mass.len()
                )));
            }
            mass.add(self.mass[c]);
            moment.add(self.moment[c]);
        }
        Ok(moment.value() / mass.value())
    }

    /// Mean over the cells marked true.
    pub fn over_mask(&self, mask: &[bool]) -> Result<f64> {
        if mask.len() != self.mass.len() {
            return Err(Error::InvalidInput(format!(
                "mask covers {} cells, grid has {}",
                mask.len(),
                self.mass.len()
            )));
        }
        let cells: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        self.over_cells(&cells)
    }
}

/// One-off weighted mean over a union of cells.
pub fn region_mean(f: &GridFunction, w: &GridFunction, cells: &[usize]) -> Result<f64> {
    RegionMeans::new(f, w)?.over_cells(cells)
}

/// The min-max averaging formula over the whole grid: the fit of the cell
/// values under the measure w(x)dx, so cell volumes scale the weights. On
/// equidistant grids this coincides with the plain discrete fit.
pub fn volume_weighted_fit(
    f: &GridFunction,
    w: &GridFunction,
    sig: &Signature,
) -> Result<GridFunction> {
    Ok(volume_weighted_result(f, w, sig)?.into_fitted())
}

/// Full solver output for the volume-weighted measure, including the block
/// partition and certificate.
pub(crate) fn volume_weighted_result(
    f: &GridFunction,
    w: &GridFunction,
    sig: &Signature,
) -> Result<crate::isotonic::SolveResult> {
    f.same_grid(w)?;
    let grid = f.grid();
    let shape = grid.shape();
    let mut scaled = Vec::with_capacity(grid.num_points());
    let mut flat = 0usize;
    lattice::for_each_index(&shape, |idx| {
        scaled.push(w.values()[flat] * grid.cell_volume(idx));
        flat += 1;
    });
    let wv = GridFunction::new(grid.clone(), scaled)?;
    solve(f, &wv, sig)
}

/// The min-max averaging formula at one grid cell.
pub fn volume_weighted_value(
    f: &GridFunction,
    w: &GridFunction,
    sig: &Signature,
    cell: &[usize],
) -> Result<f64> {
    let shape = f.grid().shape();
    if cell.len() != shape.len() || cell.iter().zip(&shape).any(|(&c, &s)| c >= s) {
        return Err(Error::InvalidInput(format!(
            "cell index {cell:?} outside grid shape {shape:?}"
        )));
    }
    Ok(volume_weighted_fit(f, w, sig)?.value_at(cell))
}

/// Cumulative trapezoid curve t ↦ (∫w, ∫fw) on a uniform mesh of `m` cells.
fn cumulative_curve(f: &ScalarField, w: &ScalarField, m: usize) -> Vec<(f64, f64)> {
    let lo = f.domain().lo()[0];
    let hi = f.domain().hi()[0];
    let h = (hi - lo) / m as f64;
    let mut pts = Vec::with_capacity(m + 1);
    let mut mass = Kahan::new();
    let mut moment = Kahan::new();
    pts.push((0.0, 0.0));
    let mut wp = w.eval(&[lo]);
    let mut fwp = f.eval(&[lo]) * wp;
    for i in 1..=m {
        let t = if i == m { hi } else { lo + h * i as f64 };
        let wc = w.eval(&[t]);
        let fwc = f.eval(&[t]) * wc;
        mass.add(0.5 * h * (wp + wc));
        moment.add(0.5 * h * (fwp + fwc));
        pts.push((mass.value(), moment.value()));
        wp = wc;
        fwp = fwc;
    }
    pts
}

/// Slope of the greatest convex minorant of `pts` at abscissa `x`; `pts`
/// must be sorted by first coordinate with strictly increasing abscissas.
fn minorant_slope(pts: &[(f64, f64)], x: f64) -> f64 {
    // Lower convex hull, Andrew's scan.
    let cross = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    };
    let mut hull: Vec<usize> = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        while hull.len() >= 2
            && cross(pts[hull[hull.len() - 2]], pts[hull[hull.len() - 1]], pts[i]) <= 0.0
        {
            hull.pop();
        }
        hull.push(i);
    }
    // Segment containing x; endpoints clamp to the outermost segments.
    let k = hull.partition_point(|&i| pts[i].0 < x);
    let seg = k.clamp(1, hull.len() - 1);
    let a = pts[hull[seg - 1]];
    let b = pts[hull[seg]];
    (b.1 - a.1) / (b.0 - a.0)
}

/// Mesh cap for the univariate evaluator; it starts at 512 cells and
/// doubles until two successive meshes agree.
const UNIVARIATE_MAX_MESH: usize = 1 << 19;

/// Evaluates the one-dimensional continuous fit at `x0` from cumulative
/// integrals: the value is the slope of the greatest convex minorant of
/// t ↦ (∫w, ∫fw) at x0 (for `dir` = -1, the mirrored problem is solved).
/// The mesh doubles until two evaluations agree within `tol`.
pub fn univariate_value(
    f: &ScalarField,
    w: &ScalarField,
    dir: i8,
    x0: f64,
    tol: f64,
) -> Result<f64> {
    let domain = f.domain();
    if domain.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: domain.dim(),
        });
    }
    if w.domain() != domain {
        return Err(Error::InvalidInput(
            "data and weight fields live on different boxes".into(),
        ));
    }
    if !domain.contains(&[x0]) {
        return Err(Error::OutsideDomain {
            axis: 0,
            coordinate: x0,
        });
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance {tol} must be finite and > 0"
        )));
    }
    match dir {
        1 => {}
        -1 => {
            let fc = f.clone();
            let neg = ScalarField::new(domain.clone(), f.regularity(), move |x| -fc.eval(x));
            return Ok(-univariate_value(&neg, w, 1, x0, tol)?);
        }
        other => {
            return Err(Error::InvalidSignature {
                axis: 0,
                value: other as i32,
            })
        }
    }

    let value_at = |m: usize| {
        let pts = cumulative_curve(f, w, m);
        // Cumulative mass at x0 by the same trapezoid rule, for the lookup.
        let lo = domain.lo()[0];
        let h = (domain.hi()[0] - lo) / m as f64;
        let j = (((x0 - lo) / h).floor() as usize).min(m - 1);
        let t_j = lo + h * j as f64;
        let wx = pts[j].0 + 0.5 * (x0 - t_j) * (w.eval(&[t_j]) + w.eval(&[x0]));
        minorant_slope(&pts, wx)
    };

    let mut m = 512usize;
    let mut prev = value_at(m);
    loop {
        m *= 2;
        let cur = value_at(m);
        if (cur - prev).abs() <= tol {
            return Ok(cur);
        }
        if m >= UNIVARIATE_MAX_MESH {
            return Err(Error::PointwiseNoConvergence { prev, last: cur });
        }
        prev = cur;
    }
}

/// Controls for [`pointwise_value`].
#[derive(Clone, Debug)]
pub struct PointwiseOptions {
    /// Successive values must agree within this to accept.
    pub tol: f64,
    /// First and last cell-halving exponents: step k uses cells of size
    /// about max_edge / 2^k around the point.
    pub min_halvings: u32,
    pub max_halvings: u32,
    pub discretization: Discretization,
    pub quad_order: usize,
}

impl Default for PointwiseOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            min_halvings: 2,
            max_halvings: 12,
            discretization: Discretization::CellAverages,
            quad_order: 2,
        }
    }
}

/// One refinement step of the pointwise evaluation.
#[derive(Clone, Debug, Serialize)]
pub struct PointwiseStep {
    pub halvings: u32,
    /// Requested cell size at this step.
    pub eps: f64,
    pub grid_points: usize,
    pub value: f64,
}

/// A converged pointwise evaluation and the refinement trail behind it.
#[derive(Clone, Debug, Serialize)]
pub struct PointwiseReport {
    pub value: f64,
    pub steps: Vec<PointwiseStep>,
}

/// Evaluates the continuous fit at the point `x0` by solving on grids built
/// around it with shrinking cells; accepts once two successive values agree
/// within the tolerance, and reports the last two values otherwise.
pub fn pointwise_value(
    f: &ScalarField,
    w: &ScalarField,
    sig: &Signature,
    x0: &[f64],
    opts: &PointwiseOptions,
) -> Result<PointwiseReport> {
    let domain = f.domain();
    if w.domain() != domain {
        return Err(Error::InvalidInput(
            "data and weight fields live on different boxes".into(),
        ));
    }
    if sig.dim() != domain.dim() || x0.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: if x0.len() != domain.dim() {
                x0.len()
            } else {
                sig.dim()
            },
        });
    }
    for (axis, &xi) in x0.iter().enumerate() {
        if !(domain.lo()[axis] <= xi && xi <= domain.hi()[axis]) {
            return Err(Error::OutsideDomain {
                axis,
                coordinate: xi,
            });
        }
    }
    if !(opts.tol.is_finite() && opts.tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance {} must be finite and >= 0",
            opts.tol
        )));
    }
    if opts.min_halvings >= opts.max_halvings {
        return Err(Error::InvalidInput(format!(
            "halvings {}..={} leave no room for a convergence check",
            opts.min_halvings, opts.max_halvings
        )));
    }
    if opts.max_halvings > 26 {
        return Err(Error::InvalidInput(format!(
            "max_halvings {} would request more than 2^26 cells per axis",
            opts.max_halvings
        )));
    }

    let edge = domain.max_edge();
    let mut steps: Vec<PointwiseStep> = Vec::new();
    for k in opts.min_halvings..=opts.max_halvings {
        let eps = edge / (1u64 << k) as f64;
        let grid = grid_around_point(domain, x0, eps)?;
        let f_k = match opts.discretization {
            Discretization::CellAverages => cell_average(f, &grid, opts.quad_order)?,
            Discretization::Midpoints => sample_midpoints(f, &grid)?,
        };
        let w_k = match opts.discretization {
            Discretization::CellAverages => cell_average(w, &grid, opts.quad_order)?,
            Discretization::Midpoints => sample_midpoints(w, &grid)?,
        };
        let fit = volume_weighted_fit(&f_k, &w_k, sig)?;
        let cell = grid.cell_of(x0)?;
        let value = fit.value_at(&cell);
        let prev = steps.last().map(|s| s.value);
        steps.push(PointwiseStep {
            halvings: k,
            eps,
            grid_points: grid.num_points(),
            value,
        });
        if let Some(p) = prev {
            if (value - p).abs() <= opts.tol {
                return Ok(PointwiseReport { value, steps });
            }
        }
    }
    let last = steps[steps.len() - 1].value;
    let prev = steps[steps.len() - 2].value;
    Err(Error::PointwiseNoConvergence { prev, last })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cuboid, GridSpec, Regularity};
    use crate::isotonic::minmax_oracle;

    fn parabola() -> ScalarField {
        ScalarField::new(Cuboid::unit(1), Regularity::Continuous, |x| {
            (x[0] - 0.5) * (x[0] - 0.5)
        })
    }

    #[test]
    fn region_means_use_cell_volumes() {
        let grid =
            GridSpec::from_breakpoints(Cuboid::unit(1), vec![vec![0.0, 0.3, 1.0]]).unwrap();
        let f = GridFunction::new(grid.clone(), vec![2.0, 4.0]).unwrap();
        let w = GridFunction::new(grid, vec![1.0, 5.0]).unwrap();
        let means = RegionMeans::new(&f, &w).unwrap();
        let expect = (2.0 * 1.0 * 0.3 + 4.0 * 5.0 * 0.7) / (1.0 * 0.3 + 5.0 * 0.7);
        assert!((means.over_cells(&[0, 1]).unwrap() - expect).abs() <= 1e-15);
        assert_eq!(means.over_cells(&[1]).unwrap(), 4.0);
        assert!((means.over_mask(&[true, true]).unwrap() - expect).abs() <= 1e-15);
        assert!(means.over_cells(&[]).is_err());
        assert!(means.over_cells(&[7]).is_err());
        assert!(means.over_mask(&[true]).is_err());
    }

    #[test]
    fn volume_weighting_shows_on_uneven_grids() {
        // Cells of width 0.3 and 0.7: pooling weighs the wide cell more.
        let grid =
            GridSpec::from_breakpoints(Cuboid::unit(1), vec![vec![0.0, 0.3, 1.0]]).unwrap();
        let f = GridFunction::new(grid.clone(), vec![2.0, 0.0]).unwrap();
        let w = GridFunction::constant(grid, 1.0).unwrap();
        let sig = Signature::parse("+1").unwrap();
        let fit = volume_weighted_fit(&f, &w, &sig).unwrap();
        assert_eq!(fit.values(), &[0.6, 0.6]);
        assert_eq!(volume_weighted_value(&f, &w, &sig, &[0]).unwrap(), 0.6);
        assert!(volume_weighted_value(&f, &w, &sig, &[2]).is_err());
    }

    #[test]
    fn formula_matches_enumeration_on_equidistant_grids() {
        // Equal cell volumes cancel, so the plain discrete oracle applies.
        let grid = GridSpec::equidistant(Cuboid::unit(2), &[3, 3]).unwrap();
        let vals: Vec<f64> = (0..9).map(|i| ((i * 7 + 3) % 9) as f64 / 4.0).collect();
        let f = GridFunction::new(grid.clone(), vals).unwrap();
        let w = GridFunction::new(grid, (0..9).map(|i| 0.5 + (i % 3) as f64).collect()).unwrap();
        let sig = Signature::parse("+1,+1").unwrap();
        let fit = volume_weighted_fit(&f, &w, &sig).unwrap();
        let oracle = minmax_oracle(&f, &w, &sig).unwrap();
        for (a, b) in fit.values().iter().zip(oracle.values()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn minorant_slopes_equal_the_discrete_fit_of_increments() {
        let f = ScalarField::new(Cuboid::unit(1), Regularity::Continuous, |x| {
            (6.0 * x[0]).sin() + 0.5 * x[0]
        });
        let w = ScalarField::new(Cuboid::unit(1), Regularity::Continuous, |x| {
            1.0 + 0.5 * (9.0 * x[0]).cos()
        });
        let pts = cumulative_curve(&f, &w, 64);
        let mut increments = Vec::new();
        let mut masses = Vec::new();
        for i in 1..pts.len() {
            let dm = pts[i].0 - pts[i - 1].0;
            increments.push((pts[i].1 - pts[i - 1].1) / dm);
            masses.push(dm);
        }
        let fitted = crate::isotonic::fit_values(
            &increments,
            &masses,
            &[increments.len()],
            &[1],
            crate::isotonic::Engine::Partition,
        )
        .unwrap();
        for i in 0..increments.len() {
            let mid = 0.5 * (pts[i].0 + pts[i + 1].0);
            let slope = minorant_slope(&pts, mid);
            assert!(
                (slope - fitted[i]).abs() <= 1e-11,
                "cell {i}: slope {slope} vs fit {}",
                fitted[i]
            );
        }
    }

    #[test]
    fn univariate_values_match_the_parabola_solution() {
        let w = ScalarField::constant(Cuboid::unit(1), 1.0);
        let v = univariate_value(&parabola(), &w, 1, 0.25, 1e-4).unwrap();
        assert!((v - 1.0 / 16.0).abs() <= 1e-3, "{v}");
        let v = univariate_value(&parabola(), &w, 1, 0.9, 1e-4).unwrap();
        assert!((v - 0.16).abs() <= 1e-3, "{v}");
        // Mirrored direction: decreasing fit flattens the right half.
        let v = univariate_value(&parabola(), &w, -1, 0.6, 1e-4).unwrap();
        assert!((v - 1.0 / 16.0).abs() <= 1e-3, "{v}");
        let v = univariate_value(&parabola(), &w, -1, 0.1, 1e-4).unwrap();
        assert!((v - 0.16).abs() <= 1e-3, "{v}");
        // Monotone data is its own fit.
        let id = ScalarField::new(Cuboid::unit(1), Regularity::Continuous, |x| x[0]);
        let v = univariate_value(&id, &w, 1, 0.37, 1e-5).unwrap();
        assert!((v - 0.37).abs() <= 1e-4, "{v}");
        assert!(univariate_value(&id, &w, 0, 0.5, 1e-3).is_err());
        assert!(univariate_value(&id, &w, 1, 1.5, 1e-3).is_err());
    }

    #[test]
    fn pointwise_value_recovers_the_flat_level() {
        let w = ScalarField::constant(Cuboid::unit(1), 1.0);
        let sig = Signature::parse("+1").unwrap();
        let report = pointwise_value(
            &parabola(),
            &w,
            &sig,
            &[0.25],
            &PointwiseOptions::default(),
        )
        .unwrap();
        assert!((report.value - 1.0 / 16.0).abs() <= 2e-3, "{report:?}");
        assert!(report.steps.len() >= 2);
        let ks: Vec<u32> = report.steps.iter().map(|s| s.halvings).collect();
        assert!(ks.windows(2).all(|p| p[1] == p[0] + 1));
    }

    #[test]
    fn pointwise_value_on_a_plane_settles_immediately() {
        let f = ScalarField::new(Cuboid::unit(2), Regularity::Continuous, |x| x[0] + x[1]);
        let w = ScalarField::constant(Cuboid::unit(2), 1.0);
        let sig = Signature::parse("+1,+1").unwrap();
        let opts = PointwiseOptions {
            tol: 1e-2,
            max_halvings: 6,
            ..PointwiseOptions::default()
        };
        let report = pointwise_value(&f, &w, &sig, &[0.3, 0.7], &opts).unwrap();
        assert!((report.value - 1.0).abs() <= 1e-2, "{report:?}");
    }

    #[test]
    fn pointwise_value_reports_the_last_pair_on_failure() {
        let w = ScalarField::constant(Cuboid::unit(1), 1.0);
        let sig = Signature::parse("+1").unwrap();
        let opts = PointwiseOptions {
            tol: 0.0,
            min_halvings: 2,
            max_halvings: 5,
            ..PointwiseOptions::default()
        };
        match pointwise_value(&parabola(), &w, &sig, &[0.25], &opts) {
            Err(Error::PointwiseNoConvergence { prev, last }) => {
                assert!((prev - 1.0 / 16.0).abs() <= 1e-2);
                assert!((last - 1.0 / 16.0).abs() <= 1e-2);
            }
            other => panic!("expected no-convergence, got {other:?}"),
        }
    }
}
