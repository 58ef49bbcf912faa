//! Per-axis monotonicity directions and the partial order they induce.
//!
//! A [`Signature`] assigns each axis a direction: `+1` (increasing), `-1`
//! (decreasing) or `0` (free). Two points are comparable when they agree on
//! every free axis and are ordered according to the direction on every active
//! axis. Lower and upper sets of grid indices under this order are the
//! building blocks of the min-max averaging formulas and of the optimality
//! certificates; they are represented by [`IndexSet`] bit masks.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::lattice;

/// Number of candidate subsets the set enumerators are willing to scan.
/// `2^20` candidates corresponds to grids of at most 20 points.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 20;

/// Monotonicity directions per axis: `+1` increasing, `-1` decreasing, `0` free.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    dirs: Vec<i8>,
}

impl Signature {
    pub fn new(dirs: Vec<i8>) -> Result<Self> {
        for (axis, &d) in dirs.iter().enumerate() {
            if !(-1..=1).contains(&d) {
                return Err(Error::InvalidSignature {
                    axis,
                    value: d as i32,
                });
            }
        }
        Ok(Signature { dirs })
    }

    /// All axes increasing.
    pub fn isotone(dim: usize) -> Self {
        Signature { dirs: vec![1; dim] }
    }

    /// Parses `"+1,0,-1"`; entries may be written `+1`, `1`, `0`, `-1`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dirs = Vec::new();
        for (axis, part) in text.split(',').enumerate() {
            let d = match part.trim() {
                "+1" | "1" => 1,
                "0" => 0,
                "-1" => -1,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "signature entry `{other}` on axis {axis} (want +1, 0, or -1)"
                    )))
                }
            };
            dirs.push(d);
        }
        Ok(Signature { dirs })
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    pub fn dirs(&self) -> &[i8] {
        &self.dirs
    }

    /// Signature with every direction flipped.
    pub fn negated(&self) -> Signature {
        Signature {
            dirs: self.dirs.iter().map(|&d| -d).collect(),
        }
    }

    /// Axes with a nonzero direction.
    pub fn active_axes(&self) -> Vec<usize> {
        (0..self.dirs.len()).filter(|&i| self.dirs[i] != 0).collect()
    }

    /// Axes with direction `0`.
    pub fn free_axes(&self) -> Vec<usize> {
        (0..self.dirs.len()).filter(|&i| self.dirs[i] == 0).collect()
    }

    /// True when every direction is `0` (the order degenerates to equality).
    pub fn is_null(&self) -> bool {
        self.dirs.iter().all(|&d| d == 0)
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, d) in self.dirs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match d {
                1 => f.write_str("+1")?,
                0 => f.write_str("0")?,
                _ => f.write_str("-1")?,
            }
        }
        Ok(())
    }
}

/// The induced order on points: `x <= y` iff they agree on free axes and are
/// ordered by the direction on active axes.
pub fn leq_sigma(x: &[f64], y: &[f64], sig: &Signature) -> bool {
    assert_eq!(x.len(), sig.dim(), "point dimension differs from signature");
    assert_eq!(y.len(), sig.dim(), "point dimension differs from signature");
    x.iter()
        .zip(y)
        .zip(sig.dirs())
        .all(|((&xi, &yi), &d)| match d {
            1 => xi <= yi,
            -1 => xi >= yi,
            _ => xi == yi,
        })
}

/// The induced order on grid multi-indices (per-axis index positions stand in
/// for coordinates since breakpoints increase along every axis).
pub fn leq_indices(a: &[usize], b: &[usize], sig: &Signature) -> bool {
    assert_eq!(a.len(), sig.dim(), "index dimension differs from signature");
    assert_eq!(b.len(), sig.dim(), "index dimension differs from signature");
    a.iter()
        .zip(b)
        .zip(sig.dirs())
        .all(|((&ai, &bi), &d)| match d {
            1 => ai <= bi,
            -1 => ai >= bi,
            _ => ai == bi,
        })
}

/// Covering pairs `(a, b)` of the index lattice: `a` is immediately below `b`,
/// meaning the multi-indices differ by one step along exactly one active axis,
/// taken in that axis's direction. Every other order relation follows by
/// transitivity, so monotonicity checks need only these pairs.
pub(crate) fn covering_pairs_flat(shape: &[usize], dirs: &[i8]) -> Vec<(u32, u32)> {
    debug_assert_eq!(shape.len(), dirs.len());
    let n = lattice::num_points(shape);
    debug_assert!(n <= u32::MAX as usize);
    let strides = lattice::strides(shape);
    let mut pairs = Vec::new();
    for (axis, &d) in dirs.iter().enumerate() {
        if d == 0 || shape[axis] < 2 {
            continue;
        }
        let stride = strides[axis];
        let extent = shape[axis];
        for flat in 0..n {
            let k = (flat / stride) % extent;
            if k + 1 < extent {
                let lo = flat as u32;
                let hi = (flat + stride) as u32;
                if d == 1 {
                    pairs.push((lo, hi));
                } else {
                    pairs.push((hi, lo));
                }
            }
        }
    }
    pairs
}

/// Covering pairs of a grid's index lattice as flat row-major indices.
pub fn covering_pairs(grid: &GridSpec, sig: &Signature) -> Result<Vec<(usize, usize)>> {
    check_dims(grid, sig)?;
    Ok(covering_pairs_flat(&grid.shape(), sig.dirs())
        .into_iter()
        .map(|(a, b)| (a as usize, b as usize))
        .collect())
}

pub(crate) fn is_monotone_flat(values: &[f64], shape: &[usize], dirs: &[i8]) -> bool {
    covering_pairs_flat(shape, dirs)
        .iter()
        .all(|&(a, b)| values[a as usize] <= values[b as usize])
}

/// Whether the grid function increases along every covering pair of the order.
pub fn is_monotone(g: &GridFunction, sig: &Signature) -> Result<bool> {
    check_dims(g.grid(), sig)?;
    Ok(is_monotone_flat(g.values(), &g.grid().shape(), sig.dirs()))
}

fn check_dims(grid: &GridSpec, sig: &Signature) -> Result<()> {
    if grid.dim() != sig.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: sig.dim(),
        });
    }
    Ok(())
}

/// Whether an [`IndexSet`] is a lower or an upper set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SetKind {
    Lower,
    Upper,
}

/// A set of grid points given by a membership mask over flat indices,
/// tagged as a lower or upper set of the order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    kind: SetKind,
    mask: Vec<bool>,
}

impl IndexSet {
    pub fn new(kind: SetKind, mask: Vec<bool>) -> Self {
        IndexSet { kind, mask }
    }

    pub fn empty(kind: SetKind, len: usize) -> Self {
        IndexSet {
            kind,
            mask: vec![false; len],
        }
    }

    pub fn full(kind: SetKind, len: usize) -> Self {
        IndexSet {
            kind,
            mask: vec![true; len],
        }
    }

    pub(crate) fn from_bits(kind: SetKind, bits: u64, len: usize) -> Self {
        IndexSet {
            kind,
            mask: (0..len).map(|i| bits >> i & 1 == 1).collect(),
        }
    }

    pub fn kind(&self) -> SetKind {
        self.kind
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.iter().all(|&b| !b)
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.mask[flat]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Flat indices of the members, in increasing order.
    pub fn members(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    /// The complement of a lower set is an upper set and vice versa, so the
    /// complement flips both the mask and the kind.
    pub fn complement(&self) -> IndexSet {
        IndexSet {
            kind: match self.kind {
                SetKind::Lower => SetKind::Upper,
                SetKind::Upper => SetKind::Lower,
            },
            mask: self.mask.iter().map(|&b| !b).collect(),
        }
    }

    /// Verifies closure: an upper set contains everything above each member,
    /// a lower set everything below. Only covering pairs need checking.
    pub fn is_closed(&self, grid: &GridSpec, sig: &Signature) -> Result<bool> {
        check_dims(grid, sig)?;
        if grid.num_points() != self.mask.len() {
            return Err(Error::GridMismatch);
        }
        let pairs = covering_pairs_flat(&grid.shape(), sig.dirs());
        Ok(match self.kind {
            SetKind::Upper => pairs
                .iter()
                .all(|&(a, b)| !self.mask[a as usize] || self.mask[b as usize]),
            SetKind::Lower => pairs
                .iter()
                .all(|&(a, b)| !self.mask[b as usize] || self.mask[a as usize]),
        })
    }
}

/// Iterator over all lower or upper sets of a grid's index lattice, produced
/// by scanning every subset and keeping the closed ones.
#[derive(Debug)]
pub struct SetEnumeration {
    pairs: Vec<(u32, u32)>,
    points: usize,
    kind: SetKind,
    next_candidate: u64,
    candidates: u64,
}

impl SetEnumeration {
    fn new(grid: &GridSpec, sig: &Signature, kind: SetKind, cap: u64) -> Result<Self> {
        check_dims(grid, sig)?;
        let points = grid.num_points();
        let candidates: u128 = if points >= 64 {
            u128::MAX
        } else {
            1u128 << points
        };
        if candidates > cap as u128 {
            return Err(Error::EnumerationCap {
                points,
                candidates,
                cap,
            });
        }
        Ok(SetEnumeration {
            pairs: covering_pairs_flat(&grid.shape(), sig.dirs()),
            points,
            kind,
            next_candidate: 0,
            candidates: candidates as u64,
        })
    }

    fn closed(&self, bits: u64) -> bool {
        match self.kind {
            SetKind::Upper => self
                .pairs
                .iter()
                .all(|&(a, b)| bits >> a & 1 == 0 || bits >> b & 1 == 1),
            SetKind::Lower => self
                .pairs
                .iter()
                .all(|&(a, b)| bits >> b & 1 == 0 || bits >> a & 1 == 1),
        }
    }
}

impl Iterator for SetEnumeration {
    type Item = IndexSet;

    fn next(&mut self) -> Option<IndexSet> {
        while self.next_candidate < self.candidates {
            let bits = self.next_candidate;
            self.next_candidate += 1;
            if self.closed(bits) {
                return Some(IndexSet::from_bits(self.kind, bits, self.points));
            }
        }
        None
    }
}

/// All closed subsets of a raw lattice as bit masks, cheapest form for the
/// enumeration-based oracle and certificate routes.
pub(crate) fn closed_masks(
    shape: &[usize],
    dirs: &[i8],
    kind: SetKind,
    cap: u64,
) -> Result<Vec<u64>> {
    let points = lattice::num_points(shape);
    let candidates: u128 = if points >= 64 { u128::MAX } else { 1u128 << points };
    if candidates > cap as u128 {
        return Err(Error::EnumerationCap {
            points,
            candidates,
            cap,
        });
    }
    let pairs = covering_pairs_flat(shape, dirs);
    let closed = |bits: u64| match kind {
        SetKind::Upper => pairs
            .iter()
            .all(|&(a, b)| bits >> a & 1 == 0 || bits >> b & 1 == 1),
        SetKind::Lower => pairs
            .iter()
            .all(|&(a, b)| bits >> b & 1 == 0 || bits >> a & 1 == 1),
    };
    Ok((0..candidates as u64).filter(|&bits| closed(bits)).collect())
}

/// Enumerates every upper set of the grid's index lattice exactly once.
/// Refuses grids whose subset count exceeds `cap` candidates.
pub fn enumerate_upper_sets(grid: &GridSpec, sig: &Signature, cap: u64) -> Result<SetEnumeration> {
    SetEnumeration::new(grid, sig, SetKind::Upper, cap)
}

/// Enumerates every lower set of the grid's index lattice exactly once.
pub fn enumerate_lower_sets(grid: &GridSpec, sig: &Signature, cap: u64) -> Result<SetEnumeration> {
    SetEnumeration::new(grid, sig, SetKind::Lower, cap)
}
