//! Bregman-divergence objectives and the verification suite around them.
//!
//! The least-squares fit is simultaneously optimal for a whole family of
//! separable objectives: replace the squared distance by any Bregman
//! divergence of a convex potential and the same fitted function minimizes
//! the result over monotone candidates. This module does not re-optimize;
//! it evaluates those objectives and checks the claims numerically, which
//! is both cheaper and a much stronger test of the solver. It also checks
//! the residual identities behind the claim: the residual f − f* is
//! orthogonal to every bounded-variation transform of f*, and the data
//! averages over fitted level sets reproduce the fitted values.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::averaging::volume_weighted_result;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::isotonic::Kahan;
use crate::lattice;
use crate::order::Signature;
use crate::sampling::monotone_candidates;

/// Absolute slack allowed when comparing objectives of different candidates.
pub const MINIMIZER_TOL: f64 = 1e-9;
/// Relative agreement required between block values and recomputed means.
pub const BLOCK_MEAN_RTOL: f64 = 1e-12;

/// An interval of the real line, optionally open at finite ends. Used as the
/// domain of convexity of a potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
    lo_open: bool,
    hi_open: bool,
}

impl Interval {
    /// The whole real line.
    pub fn all() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            lo_open: true,
            hi_open: true,
        }
    }

    /// The open positive half-line (0, inf).
    pub fn positive() -> Self {
        Interval {
            lo: 0.0,
            hi: f64::INFINITY,
            lo_open: true,
            hi_open: true,
        }
    }

    /// Closed interval [lo, hi].
    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInput(format!(
                "interval [{lo}, {hi}] must satisfy lo <= hi"
            )));
        }
        Ok(Interval {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        })
    }

    /// Open interval (lo, hi).
    pub fn open(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidInput(format!(
                "interval ({lo}, {hi}) must satisfy lo < hi"
            )));
        }
        Ok(Interval {
            lo,
            hi,
            lo_open: true,
            hi_open: true,
        })
    }

    /// Whether `u` is a finite point of the interval.
    pub fn contains(&self, u: f64) -> bool {
        if !u.is_finite() {
            return false;
        }
        let above = if self.lo_open { u > self.lo } else { u >= self.lo };
        let below = if self.hi_open { u < self.hi } else { u <= self.hi };
        above && below
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_open { '(' } else { '[' };
        let r = if self.hi_open { ')' } else { ']' };
        write!(out, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

type Potential = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A convex potential Φ with a subgradient selection φ and its domain of
/// convexity. The divergence it generates is
/// Δ(u, v) = Φ(u) − Φ(v) − φ(v)(u − v), nonnegative on the domain.
///
/// Four potentials ship ready-made: [`square`](BregmanSpec::square),
/// [`entropy`](BregmanSpec::entropy), [`exp`](BregmanSpec::exp), and
/// [`neglog`](BregmanSpec::neglog). Custom ones must keep φ between the
/// one-sided derivatives of Φ; at kinks the midpoint is a safe choice.
#[derive(Clone)]
pub struct BregmanSpec {
    name: String,
    phi: Potential,
    dphi: Potential,
    domain: Interval,
    strictly_convex: bool,
}

impl fmt::Debug for BregmanSpec {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.debug_struct("BregmanSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("strictly_convex", &self.strictly_convex)
            .finish()
    }
}

impl BregmanSpec {
    /// Φ(u) = u² on the whole line; the divergence is the squared distance.
    pub fn square() -> Self {
        BregmanSpec {
            name: "square".into(),
            phi: Arc::new(|u| u * u),
            dphi: Arc::new(|u| 2.0 * u),
            domain: Interval::all(),
            strictly_convex: true,
        }
    }

    /// Φ(u) = u·ln u on (0, inf); the divergence is the Kullback-Leibler
    /// form u·ln(u/v) − u + v.
    pub fn entropy() -> Self {
        BregmanSpec {
            name: "entropy".into(),
            phi: Arc::new(|u| u * u.ln()),
            dphi: Arc::new(|u| u.ln() + 1.0),
            domain: Interval::positive(),
            strictly_convex: true,
        }
    }

    /// Φ(u) = e^u on the whole line.
    pub fn exp() -> Self {
        BregmanSpec {
            name: "exp".into(),
            phi: Arc::new(f64::exp),
            dphi: Arc::new(f64::exp),
            domain: Interval::all(),
            strictly_convex: true,
        }
    }

    /// Φ(u) = −ln u on (0, inf); the divergence is the Itakura-Saito form
    /// u/v − ln(u/v) − 1.
    pub fn neglog() -> Self {
        BregmanSpec {
            name: "neglog".into(),
            phi: Arc::new(|u| -u.ln()),
            dphi: Arc::new(|u| -1.0 / u),
            domain: Interval::positive(),
            strictly_convex: true,
        }
    }

    /// A user-supplied potential. `dphi` must be a subgradient selection of
    /// `phi`, monotone nondecreasing on the interior of `domain`.
    pub fn custom(
        name: impl Into<String>,
        domain: Interval,
        strictly_convex: bool,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dphi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        BregmanSpec {
            name: name.into(),
            phi: Arc::new(phi),
            dphi: Arc::new(dphi),
            domain,
            strictly_convex,
        }
    }

    /// Looks up a shipped potential by name: square, entropy, exp, neglog.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "square" => Ok(Self::square()),
            "entropy" => Ok(Self::entropy()),
            "exp" => Ok(Self::exp()),
            "neglog" => Ok(Self::neglog()),
            other => Err(Error::InvalidInput(format!(
                "unknown convexity spec `{other}`; expected square, entropy, exp, or neglog"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn strictly_convex(&self) -> bool {
        self.strictly_convex
    }

    /// Φ(u). Errors when `u` lies outside the domain of convexity.
    pub fn potential(&self, u: f64) -> Result<f64> {
        self.check(u)?;
        Ok((self.phi)(u))
    }

    /// φ(u), the subgradient selection. Same domain rule as [`potential`].
    ///
    /// [`potential`]: BregmanSpec::potential
    pub fn gradient(&self, u: f64) -> Result<f64> {
        self.check(u)?;
        Ok((self.dphi)(u))
    }

    fn check(&self, u: f64) -> Result<()> {
        if self.domain.contains(u) {
            Ok(())
        } else {
            Err(Error::BregmanDomain {
                spec: self.name.clone(),
                value: u,
            })
        }
    }

    fn check_values(&self, vals: &[f64]) -> Result<()> {
        for &v in vals {
            self.check(v)?;
        }
        Ok(())
    }
}

/// The divergence Δ(u, v) = Φ(u) − Φ(v) − φ(v)(u − v). Nonnegative for
/// arguments in the domain, zero at u = v, strictly positive off the
/// diagonal when the potential is strictly convex.
pub fn bregman(spec: &BregmanSpec, u: f64, v: f64) -> Result<f64> {
    spec.check(u)?;
    spec.check(v)?;
    Ok(divergence_unchecked(spec, u, v))
}

fn divergence_unchecked(spec: &BregmanSpec, u: f64, v: f64) -> f64 {
    (spec.phi)(u) - (spec.phi)(v) - (spec.dphi)(v) * (u - v)
}

/// The separable objective Σ Δ(f, g)·w·vol over the grid cells: the
/// divergence analogue of the weighted squared distance from `f` to `g`.
pub fn objective(
    spec: &BregmanSpec,
    f: &GridFunction,
    g: &GridFunction,
    w: &GridFunction,
) -> Result<f64> {
    f.same_grid(g)?;
    f.same_grid(w)?;
    w.weight_bounds()?;
    spec.check_values(f.values())?;
    spec.check_values(g.values())?;
    let grid = f.grid();
    let vols = cell_volumes(grid);
    let mut acc = Kahan::new();
    for i in 0..grid.num_points() {
        acc.add(divergence_unchecked(spec, f.values()[i], g.values()[i]) * w.values()[i] * vols[i]);
    }
    Ok(acc.value())
}

/// Outcome of [`verify_minimizer`]: objective comparisons between the fitted
/// function and randomly drawn monotone competitors.
#[derive(Clone, Debug, Serialize)]
pub struct MinimizerReport {
    pub spec: String,
    pub trials: usize,
    /// Objective of the fitted function itself.
    pub fit_objective: f64,
    /// min over competitors g of J(g) − J(f*); nonnegative (within tol)
    /// exactly when the fit beats every competitor.
    pub worst_excess: f64,
    /// min over competitors g of J(f,g) − J(f,f*) − J(f*,g); the excess of a
    /// competitor is at least the divergence from the fit to it, so this too
    /// must be nonnegative within tol.
    pub worst_decomposition_slack: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Checks that the least-squares fit also minimizes the divergence
/// objective: draws `trials` random monotone competitors with values in the
/// data range and compares objectives. The fit is taken in the volume
/// weighted measure, the same one the objective integrates against.
pub fn verify_minimizer(
    spec: &BregmanSpec,
    f: &GridFunction,
    w: &GridFunction,
    sig: &Signature,
    trials: usize,
    seed: u64,
) -> Result<MinimizerReport> {
    if trials == 0 {
        return Err(Error::InvalidInput(
            "verify_minimizer needs at least one trial".into(),
        ));
    }
    let result = volume_weighted_result(f, w, sig)?;
    let fitted = result.fitted();
    let fit_objective = objective(spec, f, fitted, w)?;
    let competitors = monotone_candidates(f.grid(), sig, trials, (f.min(), f.max()), seed)?;
    let mut worst_excess = f64::INFINITY;
    let mut worst_slack = f64::INFINITY;
    for g in &competitors {
        let jg = objective(spec, f, g, w)?;
        let cross = objective(spec, fitted, g, w)?;
        worst_excess = worst_excess.min(jg - fit_objective);
        worst_slack = worst_slack.min(jg - fit_objective - cross);
    }
    let pass = worst_excess >= -MINIMIZER_TOL && worst_slack >= -MINIMIZER_TOL;
    Ok(MinimizerReport {
        spec: spec.name.clone(),
        trials,
        fit_objective,
        worst_excess,
        worst_decomposition_slack: worst_slack,
        tol: MINIMIZER_TOL,
        pass,
    })
}

/// |⟨f − f*, φ∘f*⟩| in the volume-weighted inner product, where f* is the
/// fit of `f` and `phi` is any bounded-variation test function. The residual
/// is constant on fitted blocks and sums to zero over each, so this vanishes
/// for every such `phi` up to rounding.
pub fn orthogonality_check<F: Fn(f64) -> f64>(
    f: &GridFunction,
    w: &GridFunction,
    sig: &Signature,
    phi: F,
) -> Result<f64> {
    let fitted = volume_weighted_result(f, w, sig)?.into_fitted();
    Ok(pairing(f, w, &fitted, &phi).abs())
}

/// Σ (f − fitted)·φ(fitted)·w·vol, signed.
fn pairing<F: Fn(f64) -> f64>(
    f: &GridFunction,
    w: &GridFunction,
    fitted: &GridFunction,
    phi: &F,
) -> f64 {
    let vols = cell_volumes(f.grid());
    let mut acc = Kahan::new();
    for i in 0..f.grid().num_points() {
        let r = f.values()[i] - fitted.values()[i];
        acc.add(r * phi(fitted.values()[i]) * w.values()[i] * vols[i]);
    }
    acc.value()
}

/// One fitted block: its common value, size, and the recomputed weighted
/// mean of the data over it, which must reproduce the value.
#[derive(Clone, Debug, Serialize)]
pub struct BlockRow {
    pub value: f64,
    pub cells: usize,
    pub mean: f64,
    /// |mean − value| relative to the data scale.
    pub relative_gap: f64,
}

/// Outcome of [`level_set_report`].
#[derive(Clone, Debug, Serialize)]
pub struct LevelSetReport {
    /// Blocks in ascending value order.
    pub rows: Vec<BlockRow>,
    pub worst_relative_gap: f64,
    /// max over sampled lower sets L and block values c of
    /// c − Av(L ∩ {f* ≥ c}); at most rounding when averages behave.
    pub worst_lower_shortfall: f64,
    /// max over sampled upper sets U and block values c of
    /// Av({f* ≤ c} ∩ U) − c.
    pub worst_upper_overshoot: f64,
    pub pass: bool,
}

const SET_SAMPLES: usize = 8;
const SET_SAMPLE_SEED: u64 = 0x5eed;

/// Per-block audit of the fit: the weighted data mean over every fitted
/// level set must equal the fitted value there, averages over lower sets
/// intersected with {f* ≥ c} stay above c, and symmetrically from above.
/// Lower and upper sets are sampled by thresholding random monotone
/// functions at their value quartiles.
pub fn level_set_report(
    f: &GridFunction,
    w: &GridFunction,
    sig: &Signature,
) -> Result<LevelSetReport> {
    let result = volume_weighted_result(f, w, sig)?;
    let fitted = result.fitted().values();
    let vols = cell_volumes(f.grid());
    let scale = f
        .values()
        .iter()
        .fold(f64::MIN_POSITIVE, |m, &v| m.max(v.abs()));

    let mut rows = Vec::with_capacity(result.blocks().len());
    let mut worst_gap = 0.0f64;
    for block in result.blocks() {
        let mut mass = Kahan::new();
        let mut moment = Kahan::new();
        for &i in &block.members {
            let m = w.values()[i] * vols[i];
            mass.add(m);
            moment.add(m * f.values()[i]);
        }
        let mean = moment.value() / mass.value();
        let relative_gap = (mean - block.value).abs() / scale;
        worst_gap = worst_gap.max(relative_gap);
        rows.push(BlockRow {
            value: block.value,
            cells: block.members.len(),
            mean,
            relative_gap,
        });
    }

    // Sampled one-sided checks. Thresholding a monotone function gives a
    // lower set (below) and an upper set (above); the whole grid is both.
    let n = f.grid().num_points();
    let block_values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let mut lower_masks = vec![vec![true; n]];
    let mut upper_masks = vec![vec![true; n]];
    for h in monotone_candidates(f.grid(), sig, SET_SAMPLES, (0.0, 1.0), SET_SAMPLE_SEED)? {
        let mut sorted = h.values().to_vec();
        sorted.sort_by(f64::total_cmp);
        for q in [n / 4, n / 2, (3 * n) / 4] {
            let t = sorted[q.min(n - 1)];
            lower_masks.push(h.values().iter().map(|&v| v <= t).collect());
            upper_masks.push(h.values().iter().map(|&v| v >= t).collect());
        }
    }
    let masked_average = |keep: &dyn Fn(usize) -> bool| -> Option<f64> {
        let mut mass = Kahan::new();
        let mut moment = Kahan::new();
        let mut any = false;
        for i in 0..n {
            if keep(i) {
                any = true;
                let m = w.values()[i] * vols[i];
                mass.add(m);
                moment.add(m * f.values()[i]);
            }
        }
        any.then(|| moment.value() / mass.value())
    };
    let mut worst_lower = 0.0f64;
    let mut worst_upper = 0.0f64;
    for &c in &block_values {
        for mask in &lower_masks {
            if let Some(av) = masked_average(&|i| mask[i] && fitted[i] >= c) {
                worst_lower = worst_lower.max(c - av);
            }
        }
        for mask in &upper_masks {
            if let Some(av) = masked_average(&|i| mask[i] && fitted[i] <= c) {
                worst_upper = worst_upper.max(av - c);
            }
        }
    }

    let set_tol = MINIMIZER_TOL * scale;
    let pass =
        worst_gap <= BLOCK_MEAN_RTOL && worst_lower <= set_tol && worst_upper <= set_tol;
    Ok(LevelSetReport {
        rows,
        worst_relative_gap: worst_gap,
        worst_lower_shortfall: worst_lower,
        worst_upper_overshoot: worst_upper,
        pass,
    })
}

fn cell_volumes(grid: &GridSpec) -> Vec<f64> {
    let mut vols = Vec::with_capacity(grid.num_points());
    lattice::for_each_index(&grid.shape(), |idx| vols.push(grid.cell_volume(idx)));
    vols
}
