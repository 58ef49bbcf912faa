//! Discrete monotone least squares on grid functions.
//!
//! [`solve`] fits a grid function under the coordinatewise order prescribed
//! by a signature, minimizing the weighted sum of squared deviations over
//! the grid points. Points that differ on a free axis are never comparable,
//! so the fit decomposes into independent sub-problems, one per assignment
//! of the free coordinates; each sub-problem runs on the lattice of the
//! active axes.
//!
//! Two engines are available. [`Engine::Partition`] is exact: it recursively
//! splits each sub-problem at the mean via a maximum-weight closed-set
//! computation, and reduces to pool-adjacent-violators on chains.
//! [`Engine::Dykstra`] is an independent iterative scheme with a duality-gap
//! stopping rule, kept around as a cross-check and as a fallback shape for
//! constraint systems that are not closed-set friendly. Each result carries
//! a [`Certificate`] recording the optimality checks, and [`minmax_oracle`]
//! offers a third, enumeration-based route for small lattices.

mod certify;
mod dykstra;
mod flow;
mod oracle;
mod partition;
mod pava;

pub use certify::{certify, certify_fitted, Certificate, CertifyRoute};
pub use oracle::minmax_oracle;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::lattice;
use crate::order::{covering_pairs_flat, is_monotone_flat, Signature};

/// Tolerance for the optimality certificate attached to each solve, applied
/// to normalized residuals (see [`certify`]).
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// Adjacent fitted values closer than this (relative to the value scale) are
/// pooled into one exact block during cleanup.
const BLOCK_TIE_RTOL: f64 = 1e-12;

/// Compensated accumulator (Neumaier's variant), accurate even when a small
/// term arrives while the running sum is large and later cancels.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Which algorithm carries out the per-slice fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    /// Exact recursive partitioning via maximum-weight closed sets; chains
    /// short-circuit to pool-adjacent-violators.
    Partition,
    /// Cyclic pairwise corrections (Dykstra's scheme) run to a relative
    /// duality gap of 1e-10.
    Dykstra,
}

/// A level set of the fitted function: every grid point holding `value`.
#[derive(Clone, Debug, Serialize)]
pub struct Block {
    /// The shared fitted value, identical bits at every member.
    pub value: f64,
    /// Flat grid indices, ascending.
    pub members: Vec<usize>,
}

/// A fitted function together with its block structure, objective value, and
/// optimality certificate.
#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    fitted: GridFunction,
    blocks: Vec<Block>,
    objective: f64,
    certificate: Certificate,
}

impl SolveResult {
    pub fn fitted(&self) -> &GridFunction {
        &self.fitted
    }

    pub fn into_fitted(self) -> GridFunction {
        self.fitted
    }

    /// Level sets of the fitted values, ascending by value.
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Sum over grid points of w·(f − fit)².
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }
}

/// Fits `f` under the signature's order with the exact engine.
pub fn solve(f: &GridFunction, w: &GridFunction, sig: &Signature) -> Result<SolveResult> {
    solve_with(f, w, sig, Engine::Partition)
}

/// Fits `f` under the signature's order with the chosen engine.
///
/// `w` must be strictly positive; if it declares weight bounds, every value
/// must lie inside them. A monotone input is returned bit-for-bit, which
/// makes the fit idempotent in the strictest sense.
pub fn solve_with(
    f: &GridFunction,
    w: &GridFunction,
    sig: &Signature,
    engine: Engine,
) -> Result<SolveResult> {
    f.same_grid(w)?;
    let grid = f.grid();
    if grid.dim() != sig.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: sig.dim(),
        });
    }
    w.weight_bounds()?;
    if let Some((lo, hi)) = w.declared_weight_bounds() {
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
            return Err(Error::InvalidInput(format!(
                "declared weight bounds ({lo}, {hi}) must satisfy 0 < lo <= hi"
            )));
        }
        if let Some(i) = w.values().iter().position(|&v| v < lo || v > hi) {
            return Err(Error::InvalidInput(format!(
                "weight {} at flat index {i} lies outside the declared bounds ({lo}, {hi})",
                w.values()[i]
            )));
        }
    }

    let shape = grid.shape();
    let fitted_vals = fit_values(f.values(), w.values(), &shape, sig.dirs(), engine)?;

    let mut obj = Kahan::new();
    for i in 0..fitted_vals.len() {
        let r = f.values()[i] - fitted_vals[i];
        obj.add(w.values()[i] * r * r);
    }

    let certificate = certify::certify_values(f, w, &fitted_vals, sig, CERTIFICATE_TOL)?;
    let blocks = group_blocks(&fitted_vals);
    let fitted = GridFunction::new(grid.clone(), fitted_vals)?;
    Ok(SolveResult {
        fitted,
        blocks,
        objective: obj.value(),
        certificate,
    })
}

/// Core fit on raw values. Monotone inputs return bit-for-bit; a leading
/// descending direction is handled by negating values and directions, which
/// is exact in IEEE arithmetic.
pub(crate) fn fit_values(
    f: &[f64],
    w: &[f64],
    shape: &[usize],
    dirs: &[i8],
    engine: Engine,
) -> Result<Vec<f64>> {
    if is_monotone_flat(f, shape, dirs) {
        return Ok(f.to_vec());
    }
    if let Some(first) = dirs.iter().position(|&d| d != 0) {
        if dirs[first] == -1 {
            let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
            let neg_dirs: Vec<i8> = dirs.iter().map(|d| -d).collect();
            let inner = fit_values(&neg_f, w, shape, &neg_dirs, engine)?;
            return Ok(inner.into_iter().map(|v| -v).collect());
        }
    }

    let dim = shape.len();
    let strides = lattice::strides(shape);
    let active: Vec<usize> = (0..dim).filter(|&a| dirs[a] != 0).collect();
    let free: Vec<usize> = (0..dim).filter(|&a| dirs[a] == 0).collect();
    let active_shape: Vec<usize> = active.iter().map(|&a| shape[a]).collect();
    let active_dirs: Vec<i8> = active.iter().map(|&a| dirs[a]).collect();
    let free_shape: Vec<usize> = free.iter().map(|&a| shape[a]).collect();
    let slice_len = lattice::num_points(&active_shape);

    // Flat offsets of one slice relative to its base point, row-major in the
    // active axes; the per-slice solvers see this fixed ordering.
    let mut offs = Vec::with_capacity(slice_len);
    lattice::for_each_index(&active_shape, |idx| {
        let o: usize = idx.iter().zip(&active).map(|(&k, &a)| k * strides[a]).sum();
        offs.push(o);
    });
    let mut bases = Vec::new();
    lattice::for_each_index(&free_shape, |idx| {
        let b: usize = idx.iter().zip(&free).map(|(&k, &a)| k * strides[a]).sum();
        bases.push(b);
    });

    let chain = active.len() == 1;
    let pairs = if chain && engine == Engine::Partition {
        Vec::new()
    } else {
        covering_pairs_flat(&active_shape, &active_dirs)
    };

    let mut fitted = vec![0.0f64; f.len()];
    let mut fs = vec![0.0f64; slice_len];
    let mut ws = vec![0.0f64; slice_len];
    for &base in &bases {
        for i in 0..slice_len {
            fs[i] = f[base + offs[i]];
            ws[i] = w[base + offs[i]];
        }
        let sol = match engine {
            Engine::Partition if chain => pava::pava(&fs, &ws).0,
            Engine::Partition => partition::solve_dag(&fs, &ws, &pairs),
            Engine::Dykstra => dykstra::solve_dykstra(&fs, &ws, &pairs)?,
        };
        for i in 0..slice_len {
            fitted[base + offs[i]] = sol[i];
        }
    }

    // Pool residual rounding wobble so level sets share bits and the order
    // constraints hold exactly, not just within tolerance.
    let full_pairs = covering_pairs_flat(shape, dirs);
    Ok(pool_violators(&fitted, w, &full_pairs))
}

/// Pools pairs that violate (or tie within rounding of) their order relation
/// to the weighted mean of their classes, repeated to a fixed point. The
/// output satisfies every pair constraint exactly, and members of a pooled
/// class hold identical bits.
pub(crate) fn pool_violators(vals: &[f64], w: &[f64], pairs: &[(u32, u32)]) -> Vec<f64> {
    let n = vals.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut sw: Vec<f64> = w.to_vec();
    let mut swf: Vec<f64> = (0..n).map(|i| w[i] * vals[i]).collect();
    let mut val: Vec<f64> = vals.to_vec();
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tie = BLOCK_TIE_RTOL * scale;

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    loop {
        let mut merged = false;
        for &(a, b) in pairs {
            let ra = find(&mut parent, a as usize);
            let rb = find(&mut parent, b as usize);
            if ra == rb || val[ra] < val[rb] - tie {
                continue;
            }
            // Exact ties keep their value; the pooled mean of equal values
            // could drift an ulp through the division.
            let pooled = if val[ra].to_bits() == val[rb].to_bits() {
                val[ra]
            } else {
                (swf[ra] + swf[rb]) / (sw[ra] + sw[rb])
            };
            let (keep, gone) = if sw[ra] >= sw[rb] { (ra, rb) } else { (rb, ra) };
            parent[gone] = keep;
            sw[keep] += sw[gone];
            swf[keep] += swf[gone];
            val[keep] = pooled;
            merged = true;
        }
        if !merged {
            break;
        }
    }
    (0..n).map(|i| val[find(&mut parent, i)]).collect()
}

/// Groups equal fitted values into blocks, ascending by value.
fn group_blocks(vals: &[f64]) -> Vec<Block> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(i.cmp(&j)));
    let mut blocks: Vec<Block> = Vec::new();
    for i in order {
        match blocks.last_mut() {
            Some(b) if b.value.to_bits() == vals[i].to_bits() => b.members.push(i),
            _ => blocks.push(Block {
                value: vals[i],
                members: vec![i],
            }),
        }
    }
    blocks
}
