//! Optimality certificates for the discrete fit.
//!
//! The fit is optimal exactly when it is monotone, the residual f − f* is
//! w-orthogonal to f*, and no upper set carries positive residual mass (so no
//! lower set carries negative mass). The checks run on normalized copies
//! (values scaled by their sup, weights by their mean) so one absolute
//! tolerance serves all magnitudes. Small lattices check every upper and lower
//! set; larger ones check the family generated by the fitted level sets,
//! which carries the binding constraints of an optimal fit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::order::{closed_masks, is_monotone_flat, SetKind, Signature, DEFAULT_ENUMERATION_CAP};

use super::{Kahan, SolveResult};

/// How the set-wise residual conditions were checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertifyRoute {
    /// Every lower and upper set, by enumeration.
    Enumeration,
    /// Superlevel and strict-superlevel sets of the fitted values, and their
    /// complements.
    LevelSets,
}

/// Outcome of the optimality checks; `pass` is the conjunction.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub monotone: bool,
    /// |⟨f − f*, f*⟩_w| on the normalized copies.
    pub orthogonality_residual: f64,
    /// max over checked upper sets U of ⟨f − f*, χ_U⟩_w (≥ 0; optimality
    /// requires ≈ 0 from above).
    pub worst_upper_violation: f64,
    /// max over checked lower sets L of −⟨f − f*, χ_L⟩_w.
    pub worst_lower_violation: f64,
    pub route: CertifyRoute,
    pub tol: f64,
    pub pass: bool,
}

/// Checks a solve result against the optimality conditions; failures are
/// reported in the certificate, never raised.
pub fn certify(
    f: &GridFunction,
    w: &GridFunction,
    result: &SolveResult,
    sig: &Signature,
    tol: f64,
) -> Result<Certificate> {
    certify_fitted(f, w, result.fitted(), sig, tol)
}

/// Certifies an arbitrary candidate as the fit of `f`. Exists so external
/// audits can run the same checks on values the solver did not produce;
/// anything short of the exact fit fails at least one condition.
pub fn certify_fitted(
    f: &GridFunction,
    w: &GridFunction,
    fitted: &GridFunction,
    sig: &Signature,
    tol: f64,
) -> Result<Certificate> {
    f.same_grid(w)?;
    f.same_grid(fitted)?;
    certify_values(f, w, fitted.values(), sig, tol)
}

pub(crate) fn certify_values(
    f: &GridFunction,
    w: &GridFunction,
    fitted: &[f64],
    sig: &Signature,
    tol: f64,
) -> Result<Certificate> {
    let grid = f.grid();
    if grid.dim() != sig.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: sig.dim(),
        });
    }
    let n = grid.num_points();
    let shape = grid.shape();
    let monotone = is_monotone_flat(fitted, &shape, sig.dirs());

    // Normalize: one absolute tolerance should mean the same thing for data
    // of any magnitude. The solver is positively homogeneous, so checking the
    // scaled instance checks the original.
    let value_scale = f
        .values()
        .iter()
        .chain(fitted)
        .fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
    let mut wbar = Kahan::new();
    for &wi in w.values() {
        wbar.add(wi);
    }
    let weight_scale = wbar.value() / n as f64;
    // Normalized residual mass per point: ŵ·(f̂ − f̂*).
    let resid: Vec<f64> = (0..n)
        .map(|i| w.values()[i] / weight_scale * (f.values()[i] - fitted[i]) / value_scale)
        .collect();

    let mut orth = Kahan::new();
    for i in 0..n {
        orth.add(resid[i] * (fitted[i] / value_scale));
    }
    let orthogonality_residual = orth.value().abs();

    let enumerable = n <= 63 && (1u128 << n) <= DEFAULT_ENUMERATION_CAP as u128;
    let (route, worst_upper_violation, worst_lower_violation) = if enumerable {
        let uppers = closed_masks(&shape, sig.dirs(), SetKind::Upper, DEFAULT_ENUMERATION_CAP)?;
        // Sums over every subset, built by peeling the lowest member bit.
        let mut sums = vec![0.0f64; 1 << n];
        for mask in 1usize..1 << n {
            let i = mask.trailing_zeros() as usize;
            sums[mask] = sums[mask & (mask - 1)] + resid[i];
        }
        let mut worst_upper = 0.0f64;
        let mut worst_lower = 0.0f64;
        for &u in &uppers {
            worst_upper = worst_upper.max(sums[u as usize]);
            // Complements of upper sets are exactly the lower sets.
            let l = !u & ((1u64 << n) - 1);
            worst_lower = worst_lower.max(-sums[l as usize]);
        }
        (CertifyRoute::Enumeration, worst_upper, worst_lower)
    } else {
        // Level-set family: for each fitted value c, the superlevel set
        // {f* ≥ c} and its strict version are upper sets of any monotone f*;
        // their complements are the lower family.
        let mut cs: Vec<f64> = fitted.to_vec();
        cs.sort_by(f64::total_cmp);
        cs.dedup();
        let mut worst_upper = 0.0f64;
        let mut worst_lower = 0.0f64;
        for &c in &cs {
            let mut ge = Kahan::new();
            let mut gt = Kahan::new();
            let mut lt = Kahan::new();
            let mut le = Kahan::new();
            for i in 0..n {
                if fitted[i] >= c {
                    ge.add(resid[i]);
                } else {
                    lt.add(resid[i]);
                }
                if fitted[i] > c {
                    gt.add(resid[i]);
                } else {
                    le.add(resid[i]);
                }
            }
            worst_upper = worst_upper.max(ge.value()).max(gt.value());
            worst_lower = worst_lower.max(-lt.value()).max(-le.value());
        }
        (CertifyRoute::LevelSets, worst_upper, worst_lower)
    };

    let pass = monotone
        && orthogonality_residual <= tol
        && worst_upper_violation <= tol
        && worst_lower_violation <= tol;
    Ok(Certificate {
        monotone,
        orthogonality_residual,
        worst_upper_violation,
        worst_lower_violation,
        route,
        tol,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cuboid, GridSpec};

    fn grid(counts: &[usize]) -> GridSpec {
        GridSpec::equidistant(Cuboid::unit(counts.len()), counts).unwrap()
    }

    #[test]
    fn optimal_fit_passes_and_perturbed_fit_fails() {
        let g = grid(&[3]);
        let f = GridFunction::new(g.clone(), vec![3.0, 1.0, 2.0]).unwrap();
        let w = GridFunction::constant(g.clone(), 1.0).unwrap();
        let sig = Signature::parse("+1").unwrap();
        let cert = certify_values(&f, &w, &[2.0, 2.0, 2.0], &sig, 1e-9).unwrap();
        assert!(cert.pass, "{cert:?}");
        assert_eq!(cert.route, CertifyRoute::Enumeration);
        assert!(cert.orthogonality_residual <= 1e-15);

        // Monotone but wrong level: breaks orthogonality or a set condition.
        let cert = certify_values(&f, &w, &[2.001, 2.001, 2.001], &sig, 1e-9).unwrap();
        assert!(cert.monotone && !cert.pass);

        // Raw data is not monotone.
        let cert = certify_values(&f, &w, f.values(), &sig, 1e-9).unwrap();
        assert!(!cert.monotone && !cert.pass);
    }

    #[test]
    fn suboptimal_monotone_fit_fails_the_set_conditions() {
        let g = grid(&[2]);
        let f = GridFunction::new(g.clone(), vec![2.0, 0.0]).unwrap();
        let w = GridFunction::constant(g.clone(), 1.0).unwrap();
        let sig = Signature::parse("+1").unwrap();
        // Optimum is [1, 1]; the midpoint-violating candidate [0.9, 1.1] is
        // monotone and integral-preserving but not optimal.
        let cert = certify_values(&f, &w, &[0.9, 1.1], &sig, 1e-9).unwrap();
        assert!(cert.monotone);
        assert!(cert.worst_upper_violation > 0.1 || cert.orthogonality_residual > 1e-2);
        assert!(!cert.pass);
    }

    #[test]
    fn level_set_route_engages_on_large_grids() {
        // 30 points exceeds the enumeration budget.
        let g = grid(&[30]);
        let vals: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let f = GridFunction::new(g.clone(), vals).unwrap();
        let w = GridFunction::constant(g.clone(), 1.0).unwrap();
        let sig = Signature::parse("+1").unwrap();
        let (fitted, _) = super::super::pava::pava(f.values(), w.values());
        let cert = certify_values(&f, &w, &fitted, &sig, 1e-9).unwrap();
        assert_eq!(cert.route, CertifyRoute::LevelSets);
        assert!(cert.pass, "{cert:?}");
        // Shift the lowest block up by 1e-3: still monotone, no longer
        // optimal.
        let mut bad = fitted.clone();
        let first = bad[0];
        for v in bad.iter_mut().filter(|v| **v == first) {
            *v += 1e-3;
        }
        let cert = certify_values(&f, &w, &bad, &sig, 1e-9).unwrap();
        assert!(!cert.pass);
    }

    #[test]
    fn tolerance_scales_with_the_data() {
        // The same relative wobble passes or fails identically at any scale.
        let g = grid(&[3]);
        let w = GridFunction::constant(g.clone(), 1.0).unwrap();
        let sig = Signature::parse("+1").unwrap();
        for scale in [1.0, 1e8, 1e-8] {
            let f =
                GridFunction::new(g.clone(), vec![3.0 * scale, 1.0 * scale, 2.0 * scale]).unwrap();
            let fitted = [2.0 * scale; 3];
            let cert = certify_values(&f, &w, &fitted, &sig, 1e-9).unwrap();
            assert!(cert.pass, "scale {scale}: {cert:?}");
            let bad = [2.0 * scale * (1.0 + 1e-3); 3];
            let cert = certify_values(&f, &w, &bad, &sig, 1e-9).unwrap();
            assert!(!cert.pass, "scale {scale}: {cert:?}");
        }
    }
}
