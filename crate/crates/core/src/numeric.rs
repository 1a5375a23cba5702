//! Deterministic floating-point reductions shared by the centroid and
//! statistics code.

/// Below this length a plain left-to-right sum is used.
const PAIRWISE_THRESHOLD: usize = 10_000;

/// Sums `values`, switching to pairwise summation for long slices.
///
/// The reduction order depends only on the slice length, so the result is
/// reproducible bit-for-bit.
pub fn sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_THRESHOLD {
        values.iter().sum()
    } else {
        pairwise(values)
    }
}

fn pairwise(values: &[f64]) -> f64 {
    if values.len() <= 128 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise(&values[..mid]) + pairwise(&values[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    sum(values) / values.len() as f64
}
