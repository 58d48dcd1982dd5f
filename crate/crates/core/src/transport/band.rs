//! Greedy max-flow for staircase admissibility patterns.
//!
//! When row `i` can reach exactly the columns `lo[i]..=hi[i]` and both ends
//! are non-decreasing in `i`, filling each row from its leftmost column with
//! remaining demand is optimal. This covers the type lattices of binary
//! alphabets under costs monotone in the type index, and runs in linear time.

use super::flow::Capacity;

/// Row intervals `(lo, hi)` of a staircase pattern, or `None` if the pattern
/// is not a staircase. Empty rows are recorded as `None` entries.
pub(crate) fn staircase(
    rows: usize,
    admissible: impl Fn(usize, usize) -> bool,
    cols: usize,
) -> Option<Vec<Option<(usize, usize)>>> {
    let mut out = Vec::with_capacity(rows);
    let mut last: Option<(usize, usize)> = None;
    for i in 0..rows {
        let mut lo = None;
        let mut hi = None;
        for j in 0..cols {
            if admissible(i, j) {
                if lo.is_none() {
                    lo = Some(j);
                }
                if hi.is_some_and(|h| h + 1 != j) {
                    return None;
                }
                hi = Some(j);
            }
        }
        let iv = lo.zip(hi);
        if let (Some((l0, h0)), Some((l1, h1))) = (last, iv) {
            if l1 < l0 || h1 < h0 {
                return None;
            }
        }
        if iv.is_some() {
            last = iv;
        }
        out.push(iv);
    }
    Some(out)
}

/// Maximum flow for a staircase pattern with the given supplies and demands.
pub(crate) fn staircase_flow<C: Capacity>(
    supply: &[C],
    demand: &[C],
    intervals: &[Option<(usize, usize)>],
) -> C {
    let mut rem: Vec<C> = demand.to_vec();
    let mut ptr = 0usize;
    let mut total = C::zero();
    for (s, iv) in supply.iter().zip(intervals) {
        let Some((lo, hi)) = *iv else { continue };
        ptr = ptr.max(lo);
        let mut left = s.clone();
        while left.is_positive() && ptr <= hi {
            let take = left.min_of(&rem[ptr]);
            left = left.sub(&take);
            rem[ptr] = rem[ptr].sub(&take);
            total = total.add(&take);
            if !rem[ptr].is_positive() {
                ptr += 1;
            } else {
                break;
            }
        }
    }
    total
}
