use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::eval::check_finite;

/// Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).
///
/// `tau_b = (C - D) / sqrt((n0 - n1) (n0 - n2))` with `n0 = n(n-1)/2` and
/// `n1`, `n2` the pairs tied in `x` and in `y` respectively.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} x values but {} y values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("Kendall's tau needs at least two observations"));
    }
    check_finite("x", x)?;
    check_finite("y", y)?;
    let n = x.len() as i64;
    let n0 = n * (n - 1) / 2;

    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let tied_pairs = |eq: &dyn Fn(usize, usize) -> bool| -> i64 {
        let mut total = 0;
        let mut run = 1i64;
        for i in 1..pairs.len() {
            if eq(i - 1, i) {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total + run * (run - 1) / 2
    };
    let n1 = tied_pairs(&|a, b| pairs[a].0 == pairs[b].0);
    let n3 = tied_pairs(&|a, b| pairs[a].0 == pairs[b].0 && pairs[a].1 == pairs[b].1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_sort_swaps(&mut ys);
    let mut n2 = 0i64;
    let mut run = 1i64;
    for i in 1..ys.len() {
        if ys[i] == ys[i - 1] {
            run += 1;
        } else {
            n2 += run * (run - 1) / 2;
            run = 1;
        }
    }
    n2 += run * (run - 1) / 2;

    if n0 == n1 || n0 == n2 {
        return Err(Error::invalid("Kendall's tau is undefined for constant input"));
    }
    let numerator = n0 - n1 - n2 + n3 - 2 * swaps;
    Ok(numerator as f64 / ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt())
}

/// Sorts ascending and returns the number of strictly inverted pairs.
fn merge_sort_swaps(values: &mut [f64]) -> i64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_sort_swaps(&mut values[..mid]) + merge_sort_swaps(&mut values[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if values[j].total_cmp(&values[i]) == Ordering::Less {
            swaps += (mid - i) as i64;
            merged.push(values[j]);
            j += 1;
        } else {
            merged.push(values[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&values[i..mid]);
    merged.extend_from_slice(&values[j..]);
    values.copy_from_slice(&merged);
    swaps
}
