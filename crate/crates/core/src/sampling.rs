//! Seeded generators of random monotone grid functions, used as competitor
//! candidates when verifying minimizer properties and as test fixtures.
//!
//! Two constructions alternate. Fitting i.i.d. noise produces monotone
//! functions with irregular plateau patterns (the fit of anything is
//! monotone); separable cumulative sums produce strictly increasing ramps
//! with independent profiles on free axes. Both are rescaled affinely into
//! the requested range, which preserves the order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::isotonic::{fit_values, Engine};
use crate::lattice;
use crate::order::Signature;

/// Draws `count` independent monotone functions on the grid, with values in
/// `range`. The same seed reproduces the same functions bit for bit.
pub fn monotone_candidates(
    grid: &GridSpec,
    sig: &Signature,
    count: usize,
    range: (f64, f64),
    seed: u64,
) -> Result<Vec<GridFunction>> {
    if grid.dim() != sig.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: sig.dim(),
        });
    }
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidInput(format!(
            "target range ({lo}, {hi}) must be finite with lo <= hi"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let raw = if k % 2 == 0 {
            projected_noise(grid, sig, &mut rng)?
        } else {
            separable_ramp(grid, sig, &mut rng)
        };
        out.push(GridFunction::new(grid.clone(), rescale(raw, lo, hi))?);
    }
    Ok(out)
}

/// One random monotone function; see [`monotone_candidates`].
pub fn random_monotone(
    grid: &GridSpec,
    sig: &Signature,
    range: (f64, f64),
    seed: u64,
) -> Result<GridFunction> {
    Ok(monotone_candidates(grid, sig, 1, range, seed)?
        .pop()
        .expect("one candidate requested"))
}

/// Fit of i.i.d. uniform noise: monotone with plateaus where the noise ran
/// against the order.
fn projected_noise(grid: &GridSpec, sig: &Signature, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = grid.num_points();
    let noise: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let w = vec![1.0; n];
    fit_values(&noise, &w, &grid.shape(), sig.dirs(), Engine::Partition)
}

/// Sum of per-axis profiles: cumulative positive increments along active
/// axes (reversed for descending ones), arbitrary values along free axes.
/// Comparable points agree on the free axes, so those terms cancel and the
/// cumulative terms decide, making the sum monotone.
fn separable_ramp(grid: &GridSpec, sig: &Signature, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let shape = grid.shape();
    let profiles: Vec<Vec<f64>> = shape
        .iter()
        .zip(sig.dirs())
        .map(|(&m, &d)| {
            if d == 0 {
                (0..m).map(|_| rng.gen::<f64>()).collect()
            } else {
                let mut acc = 0.0;
                let mut p: Vec<f64> = (0..m)
                    .map(|_| {
                        acc += rng.gen::<f64>();
                        acc
                    })
                    .collect();
                if d == -1 {
                    p.reverse();
                }
                p
            }
        })
        .collect();
    let mut vals = Vec::with_capacity(grid.num_points());
    lattice::for_each_index(&shape, |idx| {
        vals.push(idx.iter().enumerate().map(|(a, &k)| profiles[a][k]).sum());
    });
    vals
}

/// Affine map of the values onto [lo, hi]; constant inputs land midway.
fn rescale(mut vals: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        let s = (hi - lo) / (max - min);
        for v in &mut vals {
            *v = lo + (*v - min) * s;
        }
    } else {
        vals.fill(0.5 * (lo + hi));
    }
    vals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cuboid;
    use crate::order::is_monotone;

    #[test]
    fn candidates_are_monotone_in_range_and_reproducible() {
        let grid = GridSpec::equidistant(Cuboid::unit(2), &[4, 3]).unwrap();
        let sig = Signature::parse("+1,-1").unwrap();
        let batch = monotone_candidates(&grid, &sig, 6, (0.5, 2.0), 42).unwrap();
        assert_eq!(batch.len(), 6);
        for g in &batch {
            assert!(is_monotone(g, &sig).unwrap());
            assert!(g.min() >= 0.5 && g.max() <= 2.0);
        }
        // Both constructions actually vary.
        assert!(batch[0].values() != batch[2].values());
        assert!(batch[1].values() != batch[3].values());

        let again = monotone_candidates(&grid, &sig, 6, (0.5, 2.0), 42).unwrap();
        for (a, b) in batch.iter().zip(&again) {
            assert_eq!(a.values(), b.values());
        }
        let other = monotone_candidates(&grid, &sig, 6, (0.5, 2.0), 43).unwrap();
        assert!(batch[0].values() != other[0].values());
    }

    #[test]
    fn free_axes_carry_unordered_variation() {
        let grid = GridSpec::equidistant(Cuboid::unit(2), &[3, 4]).unwrap();
        let sig = Signature::parse("+1,0").unwrap();
        let batch = monotone_candidates(&grid, &sig, 4, (0.0, 1.0), 7).unwrap();
        for g in &batch {
            assert!(is_monotone(g, &sig).unwrap());
        }
        // At least one candidate is not monotone along the free axis, which a
        // fully ordered signature would have forced.
        let ordered = Signature::parse("+1,+1").unwrap();
        assert!(batch.iter().any(|g| !is_monotone(g, &ordered).unwrap()));
    }

    #[test]
    fn degenerate_range_gives_a_constant() {
        let grid = GridSpec::equidistant(Cuboid::unit(1), &[5]).unwrap();
        let sig = Signature::parse("+1").unwrap();
        let g = random_monotone(&grid, &sig, (1.5, 1.5), 3).unwrap();
        assert!(g.values().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let grid = GridSpec::equidistant(Cuboid::unit(1), &[5]).unwrap();
        let sig2 = Signature::parse("+1,+1").unwrap();
        assert!(monotone_candidates(&grid, &sig2, 1, (0.0, 1.0), 0).is_err());
        let sig = Signature::parse("+1").unwrap();
        assert!(monotone_candidates(&grid, &sig, 1, (1.0, 0.0), 0).is_err());
        assert!(monotone_candidates(&grid, &sig, 1, (0.0, f64::NAN), 0).is_err());
    }
}
