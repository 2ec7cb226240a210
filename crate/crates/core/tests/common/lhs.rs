//! Stratification check for Latin hypercube samples.

/// For every dimension, the stratum index `floor((x - lo) / width)` of each
/// point, collected and sorted, must be exactly `0..n`. Returns the first
/// offending `(dimension, sorted strata)` if any.
pub fn stratification_violation(lower: &[f64], upper: &[f64], pts: &[Vec<f64>]) -> Option<(usize, Vec<i64>)> {
    let n = pts.len();
    for d in 0..lower.len() {
        let width = (upper[d] - lower[d]) / n as f64;
        let mut strata: Vec<i64> = pts
            .iter()
            .map(|p| {
                assert!(p[d] >= lower[d] && p[d] <= upper[d], "point outside bounds");
                // Points sit strictly inside their stratum up to rounding at its edges.
                let s = ((p[d] - lower[d]) / width).floor() as i64;
                s.min(n as i64 - 1)
            })
            .collect();
        strata.sort();
        if strata != (0..n as i64).collect::<Vec<_>>() {
            return Some((d, strata));
        }
    }
    None
}
