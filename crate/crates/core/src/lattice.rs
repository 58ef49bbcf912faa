//! Row-major index arithmetic shared by grid and order code.

/// Strides for row-major layout: the last axis is contiguous.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

pub(crate) fn num_points(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub(crate) fn flatten(idx: &[usize], shape: &[usize]) -> usize {
    debug_assert_eq!(idx.len(), shape.len());
    let mut flat = 0usize;
    for (i, &k) in idx.iter().enumerate() {
        debug_assert!(k < shape[i]);
        flat = flat * shape[i] + k;
    }
    flat
}

pub(crate) fn unflatten(flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0usize; shape.len()];
    let mut rest = flat;
    for i in (0..shape.len()).rev() {
        idx[i] = rest % shape[i];
        rest /= shape[i];
    }
    idx
}

/// Visits every multi-index of `shape` in row-major order. The empty shape
/// has exactly one index, the empty tuple, and is visited once.
pub(crate) fn for_each_index(shape: &[usize], mut visit: impl FnMut(&[usize])) {
    let n = num_points(shape);
    if n == 0 {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..n {
        visit(&idx);
        for axis in (0..shape.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_round_trip() {
        let shape = [3usize, 4, 5];
        assert_eq!(strides(&shape), vec![20, 5, 1]);
        for flat in 0..num_points(&shape) {
            assert_eq!(flatten(&unflatten(flat, &shape), &shape), flat);
        }
    }

    #[test]
    fn visits_all_indices_in_flat_order() {
        let shape = [2usize, 3];
        let mut seen = Vec::new();
        for_each_index(&shape, |idx| seen.push(flatten(idx, &shape)));
        assert_eq!(seen, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn empty_shape_is_visited_exactly_once() {
        let mut count = 0;
        for_each_index(&[], |idx| {
            assert!(idx.is_empty());
            count += 1;
        });
        assert_eq!(count, 1);
    }
}
