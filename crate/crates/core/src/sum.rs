//! Deterministic pairwise summation.
//!
//! Every particle sum in the crate goes through [`pairwise_sum_by`]. The
//! reduction tree depends only on the number of terms: ranges longer than
//! [`BLOCK`] are split at `len / 2`, and leaves are summed left to right.
//! Results are therefore bit-identical however the surrounding work is
//! scheduled across threads.

/// Leaf size of the reduction tree.
pub const BLOCK: usize = 16;

/// Sum of `term(j)` for `j` in `0..n` using the fixed pairwise tree.
#[inline]
pub fn pairwise_sum_by<F>(n: usize, term: F) -> f64
where
    F: Fn(usize) -> f64,
{
    sum_range(0, n, &term)
}

fn sum_range<F: Fn(usize) -> f64>(start: usize, end: usize, term: &F) -> f64 {
    let len = end - start;
    if len <= BLOCK {
        let mut acc = 0.0;
        for j in start..end {
            acc += term(j);
        }
        acc
    } else {
        let mid = start + len / 2;
        sum_range(start, mid, term) + sum_range(mid, end, term)
    }
}

/// Pairwise sum of a slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_by(values.len(), |j| values[j])
}

/// Component-wise pairwise sum of `n` vectors of length `dim`, written into `out`.
pub fn pairwise_sum_vec_by<F>(n: usize, dim: usize, out: &mut [f64], term: F)
where
    F: Fn(usize, &mut [f64]),
{
    debug_assert_eq!(out.len(), dim);
    let mut scratch = vec![0.0; dim];
    sum_vec_range(0, n, dim, out, &mut scratch, &term);
}

fn sum_vec_range<F: Fn(usize, &mut [f64])>(
    start: usize,
    end: usize,
    dim: usize,
    out: &mut [f64],
    scratch: &mut [f64],
    term: &F,
) {
    let len = end - start;
    out.iter_mut().for_each(|v| *v = 0.0);
    if len <= BLOCK {
        for j in start..end {
            term(j, scratch);
            for k in 0..dim {
                out[k] += scratch[k];
            }
        }
    } else {
        let mid = start + len / 2;
        let mut right = vec![0.0; dim];
        sum_vec_range(start, mid, dim, out, scratch, term);
        sum_vec_range(mid, end, dim, &mut right, scratch, term);
        for k in 0..dim {
            out[k] += right[k];
        }
    }
}
