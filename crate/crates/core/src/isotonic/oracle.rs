//! Independent reference solver: the discrete min-max averaging formula,
//! evaluated by brute-force enumeration of lower and upper sets.
//!
//! The fitted value at a point x0 is
//!   min over lower sets L containing x0 of
//!   max over upper sets U containing x0 of  Av_{f,w}(L ∩ U),
//! and the sup-inf variant with the roles swapped gives the same number. Both
//! are computed and compared, so this oracle shares nothing with the flow
//! solver beyond the covering-pair definition.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::lattice;
use crate::order::{closed_masks, SetKind, Signature, DEFAULT_ENUMERATION_CAP};

/// Agreement required between the inf-sup and sup-inf variants, relative to
/// the data's magnitude; disagreement means a broken enumeration, not data.
const VARIANT_RTOL: f64 = 1e-9;

pub fn minmax_oracle(
    f: &GridFunction,
    w: &GridFunction,
    sig: &Signature,
) -> Result<GridFunction> {
    f.same_grid(w)?;
    let grid = f.grid();
    if grid.dim() != sig.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: sig.dim(),
        });
    }
    w.weight_bounds()?;
    let shape = grid.shape();
    let dirs = sig.dirs();
    let active = sig.active_axes();
    let free = sig.free_axes();
    let mut out = vec![0.0; grid.num_points()];

    // The order never relates points that differ on a free axis, so each
    // assignment of the free coordinates is an independent sub-problem on the
    // active-axes lattice.
    let active_shape: Vec<usize> = active.iter().map(|&a| shape[a]).collect();
    let active_dirs: Vec<i8> = active.iter().map(|&a| dirs[a]).collect();
    let free_shape: Vec<usize> = free.iter().map(|&a| shape[a]).collect();
    let strides = lattice::strides(&shape);

    let scale = f
        .values()
        .iter()
        .fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
    let lowers = closed_masks(&active_shape, &active_dirs, SetKind::Lower, DEFAULT_ENUMERATION_CAP)?;
    let uppers = closed_masks(&active_shape, &active_dirs, SetKind::Upper, DEFAULT_ENUMERATION_CAP)?;
    let slice_points = lattice::num_points(&active_shape);

    let mut slice_flat = Vec::with_capacity(slice_points);
    let mut err = None;
    lattice::for_each_index(&free_shape, |free_idx| {
        if err.is_some() {
            return;
        }
        let base: usize = free_idx
            .iter()
            .zip(&free)
            .map(|(&k, &axis)| k * strides[axis])
            .sum();
        slice_flat.clear();
        lattice::for_each_index(&active_shape, |act_idx| {
            let offset: usize = act_idx
                .iter()
                .zip(&active)
                .map(|(&k, &axis)| k * strides[axis])
                .sum();
            slice_flat.push(base + offset);
        });
        // Weighted sums over every subset mask, built by peeling one member.
        let masks = 1usize << slice_points;
        let mut sum_w = vec![0.0f64; masks];
        let mut sum_wf = vec![0.0f64; masks];
        for mask in 1..masks {
            let i = mask.trailing_zeros() as usize;
            let rest = mask & (mask - 1);
            let g = slice_flat[i];
            sum_w[mask] = sum_w[rest] + w.values()[g];
            sum_wf[mask] = sum_wf[rest] + w.values()[g] * f.values()[g];
        }
        for (i, &g) in slice_flat.iter().enumerate() {
            let bit = 1u64 << i;
            let mut inf_sup = f64::INFINITY;
            for &l in lowers.iter().filter(|&&l| l & bit != 0) {
                let mut sup = f64::NEG_INFINITY;
                for &u in uppers.iter().filter(|&&u| u & bit != 0) {
                    let m = (l & u) as usize;
                    sup = sup.max(sum_wf[m] / sum_w[m]);
                }
                inf_sup = inf_sup.min(sup);
            }
            let mut sup_inf = f64::NEG_INFINITY;
            for &u in uppers.iter().filter(|&&u| u & bit != 0) {
                let mut inf = f64::INFINITY;
                for &l in lowers.iter().filter(|&&l| l & bit != 0) {
                    let m = (l & u) as usize;
                    inf = inf.min(sum_wf[m] / sum_w[m]);
                }
                sup_inf = sup_inf.max(inf);
            }
            if (inf_sup - sup_inf).abs() > VARIANT_RTOL * scale {
                err = Some(Error::InvalidInput(format!(
                    "averaging variants disagree at point {g}: {inf_sup} vs {sup_inf}"
                )));
                return;
            }
            out[g] = inf_sup;
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    GridFunction::new(grid.clone(), out)
}
