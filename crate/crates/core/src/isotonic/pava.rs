//! Pool-adjacent-violators: exact 1D weighted isotonic regression on a chain.

/// A pooled block over a contiguous index range `[start, end)` with the sums
/// needed to compare and merge means without dividing.
#[derive(Clone, Copy, Debug)]
struct Block {
    start: usize,
    end: usize,
    sw: f64,
    swf: f64,
}

impl Block {
    /// Mean comparison by cross-multiplication; weights are positive, so the
    /// products keep the inequality's direction and no division noise enters.
    fn mean_exceeds(&self, other: &Block) -> bool {
        self.swf * other.sw > other.swf * self.sw
    }
}

/// Nondecreasing least-squares fit of `f` with weights `w` on a chain.
/// Returns the fitted values together with the block ranges `[start, end)`
/// partitioning `0..n`, in increasing order.
///
/// Violating neighbors merge until the pooled means increase strictly; equal
/// means also merge so the returned blocks are the maximal level sets.
pub(crate) fn pava(f: &[f64], w: &[f64]) -> (Vec<f64>, Vec<(usize, usize)>) {
    assert_eq!(f.len(), w.len());
    assert!(!f.is_empty());
    debug_assert!(w.iter().all(|&wi| wi > 0.0));
    let mut stack: Vec<Block> = Vec::with_capacity(f.len());
    for i in 0..f.len() {
        let mut block = Block {
            start: i,
            end: i + 1,
            sw: w[i],
            swf: w[i] * f[i],
        };
        // Invariant: means on the stack increase strictly; a new block merges
        // backward while the top's mean is >= the incoming pooled mean.
        while let Some(top) = stack.last() {
            if block.mean_exceeds(top) {
                break;
            }
            block.start = top.start;
            block.sw += top.sw;
            block.swf += top.swf;
            stack.pop();
        }
        stack.push(block);
    }
    let mut values = vec![0.0; f.len()];
    let mut ranges = Vec::with_capacity(stack.len());
    for b in &stack {
        let mean = b.swf / b.sw;
        for v in &mut values[b.start..b.end] {
            *v = mean;
        }
        ranges.push((b.start, b.end));
    }
    (values, ranges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_examples() {
        let (v, blocks) = pava(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0]);
        assert_eq!(v, vec![2.0, 2.0, 2.0]);
        assert_eq!(blocks, vec![(0, 3)]);

        let (v, blocks) = pava(&[1.0, 3.0, 2.0], &[1.0, 1.0, 1.0]);
        assert_eq!(v, vec![1.0, 2.5, 2.5]);
        assert_eq!(blocks, vec![(0, 1), (1, 3)]);

        // Weighted: pooled mean (2*1 + 0*3)/4.
        let (v, blocks) = pava(&[2.0, 0.0], &[1.0, 3.0]);
        assert_eq!(v, vec![0.5, 0.5]);
        assert_eq!(blocks, vec![(0, 2)]);
    }

    #[test]
    fn monotone_input_is_fixed() {
        let f = [1.0, 2.0, 2.0, 5.0];
        let (v, blocks) = pava(&f, &[1.0; 4]);
        assert_eq!(v, f);
        // Equal neighbors pool into one level block.
        assert_eq!(blocks, vec![(0, 1), (1, 3), (3, 4)]);
    }

    #[test]
    fn single_point_returns_itself() {
        let (v, blocks) = pava(&[7.5], &[2.0]);
        assert_eq!(v, vec![7.5]);
        assert_eq!(blocks, vec![(0, 1)]);
    }

    #[test]
    fn antitone_input_pools_to_the_global_mean() {
        let (v, blocks) = pava(&[4.0, 3.0, 2.0, 1.0], &[1.0; 4]);
        assert_eq!(v, vec![2.5; 4]);
        assert_eq!(blocks, vec![(0, 4)]);
    }

    #[test]
    fn block_means_reproduce_weighted_averages() {
        let f = [0.3, 2.0, -1.0, 0.5, 0.4, 3.0, 2.5];
        let w = [1.0, 0.5, 2.0, 1.0, 3.0, 0.25, 1.5];
        let (v, blocks) = pava(&f, &w);
        for &(s, e) in &blocks {
            let sw: f64 = w[s..e].iter().sum();
            let swf: f64 = f[s..e].iter().zip(&w[s..e]).map(|(a, b)| a * b).sum();
            for i in s..e {
                assert!((v[i] - swf / sw).abs() < 1e-15);
            }
        }
        // Fitted means increase strictly across blocks.
        for pair in blocks.windows(2) {
            assert!(v[pair[0].0] < v[pair[1].0]);
        }
    }

    #[test]
    fn objective_beats_random_monotone_competitors() {
        // Deterministic LCG; enough to sweep varied competitors.
        let f = [2.0, -1.0, 0.5, 0.0, 3.0, 1.0];
        let w = [1.0, 2.0, 0.5, 1.0, 1.0, 3.0];
        let (v, _) = pava(&f, &w);
        let obj = |g: &[f64]| -> f64 {
            g.iter()
                .zip(&f)
                .zip(&w)
                .map(|((gi, fi), wi)| wi * (fi - gi) * (fi - gi))
                .sum()
        };
        let best = obj(&v);
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..500 {
            let mut g: Vec<f64> = (0..f.len()).map(|_| next() * 6.0 - 2.0).collect();
            g.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert!(best <= obj(&g) + 1e-12);
        }
    }
}
