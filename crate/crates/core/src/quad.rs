//! Tensor-product Gauss-Legendre quadrature over rectangular cells.

/// Nodes and weights on the reference interval `[-1, 1]`.
pub(crate) struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre rule of the given order (exact for polynomials of degree
/// `2*order - 1`). Roots of the Legendre polynomial are found by Newton
/// iteration from the Chebyshev initial guess.
pub(crate) fn gauss_legendre(order: usize) -> GaussRule {
    assert!((1..=64).contains(&order), "quadrature order out of range");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dpdx = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: (j+1) P_{j+1} = (2j+1) x P_j - j P_{j-1}.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 1..n {
                let p2 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p0) / (j + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            dpdx = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dpdx;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dpdx * dpdx);
    }
    GaussRule { nodes, weights }
}

/// Integrates `f` over the cell `[lo, hi]` with the tensor product of `rule`.
pub(crate) fn integrate_cell(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    rule: &GaussRule,
) -> f64 {
    let d = lo.len();
    debug_assert_eq!(hi.len(), d);
    let order = rule.nodes.len();
    let mut center = vec![0.0; d];
    let mut half = vec![0.0; d];
    let mut jacobian = 1.0;
    for i in 0..d {
        center[i] = 0.5 * (lo[i] + hi[i]);
        half[i] = 0.5 * (hi[i] - lo[i]);
        jacobian *= half[i];
    }
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    let points: usize = order.pow(d as u32);
    for _ in 0..points {
        let mut wt = 1.0;
        for i in 0..d {
            x[i] = center[i] + half[i] * rule.nodes[idx[i]];
            wt *= rule.weights[idx[i]];
        }
        total += wt * f(&x);
        for i in (0..d).rev() {
            idx[i] += 1;
            if idx[i] < order {
                break;
            }
            idx[i] = 0;
        }
    }
    total * jacobian
}
