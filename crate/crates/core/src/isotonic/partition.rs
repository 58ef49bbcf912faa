//! Exact solver for ≥ 2 active axes: recursive threshold partitioning.
//!
//! For a node set S with weighted mean c, the upper sets maximizing
//! Σ_U w·(f−c) sandwich the optimum's level cut at height c: every maximizer
//! lies between {f* > c} and {f* ≥ c}. If the maximum is zero, no upper set
//! averages above c and no lower set below, so the optimum is constant c on S.
//! Otherwise the restriction of the optimum to the maximizer (and to its
//! complement) solves the subproblem on that part alone, and recursion
//! terminates because a positive maximum rules out both ∅ and S itself.

use super::flow::max_closure;
use super::Kahan;

/// Relative slack for declaring a task's best upper-set gain to be zero;
/// absorbs the rounding of the flow arithmetic.
const SPLIT_RTOL: f64 = 1e-12;

struct Task {
    /// Flat indices into the caller's arrays.
    nodes: Vec<u32>,
    /// Covering pairs in task-local positions, `(below, above)`.
    pairs: Vec<(u32, u32)>,
}

/// Least-squares fit of `f` with weights `w` under the precedence constraints
/// `pairs` (global flat indices, `(below, above)`). Returns the fitted values;
/// every connected group of equal values carries its pooled weighted mean.
pub(crate) fn solve_dag(f: &[f64], w: &[f64], pairs: &[(u32, u32)]) -> Vec<f64> {
    let n = f.len();
    let mut fitted = vec![0.0; n];
    let mut stack = vec![Task {
        nodes: (0..n as u32).collect(),
        pairs: pairs.to_vec(),
    }];
    while let Some(task) = stack.pop() {
        let mut sw = Kahan::new();
        let mut swf = Kahan::new();
        for &g in &task.nodes {
            sw.add(w[g as usize]);
            swf.add(w[g as usize] * f[g as usize]);
        }
        let c = swf.value() / sw.value();
        let gains: Vec<f64> = task
            .nodes
            .iter()
            .map(|&g| w[g as usize] * (f[g as usize] - c))
            .collect();
        let scale: f64 = gains.iter().map(|x| x.abs()).sum();
        let members = if scale > f64::MIN_POSITIVE {
            max_closure(&gains, &task.pairs)
        } else {
            Vec::new()
        };
        let mut best = Kahan::new();
        for (i, &m) in members.iter().enumerate() {
            if m {
                best.add(gains[i]);
            }
        }
        let taken = members.iter().filter(|&&m| m).count();
        if best.value() <= SPLIT_RTOL * scale || taken == 0 || taken == task.nodes.len() {
            // taken == len is unreachable for a positive maximum (the full
            // set's gain is exactly zero); kept as a termination guard.
            for &g in &task.nodes {
                fitted[g as usize] = c;
            }
            continue;
        }
        let mut local = vec![0u32; task.nodes.len()];
        let mut hi = Vec::with_capacity(taken);
        let mut lo = Vec::with_capacity(task.nodes.len() - taken);
        for (i, &g) in task.nodes.iter().enumerate() {
            if members[i] {
                local[i] = hi.len() as u32;
                hi.push(g);
            } else {
                local[i] = lo.len() as u32;
                lo.push(g);
            }
        }
        let mut hi_pairs = Vec::new();
        let mut lo_pairs = Vec::new();
        for &(a, b) in &task.pairs {
            match (members[a as usize], members[b as usize]) {
                (true, true) => hi_pairs.push((local[a as usize], local[b as usize])),
                (false, false) => lo_pairs.push((local[a as usize], local[b as usize])),
                // Below-node outside, above-node inside: satisfied by the
                // split itself (the upper part ends up with larger values).
                (false, true) => {}
                (true, false) => unreachable!("max_closure returned a non-closed set"),
            }
        }
        stack.push(Task {
            nodes: hi,
            pairs: hi_pairs,
        });
        stack.push(Task {
            nodes: lo,
            pairs: lo_pairs,
        });
    }
    fitted
}
