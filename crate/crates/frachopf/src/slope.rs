//! Log-log slope fitting: the desk-scale surrogate for the asymptotic
//! liminf/limsup statements the growth criteria are phrased in.

/// Least-squares slope of `ln y` against `ln x`.
///
/// Returns `None` when fewer than two points are available or any value is
/// non-positive (the log is undefined there).
pub(crate) fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    if xs.iter().any(|&x| x <= 0.0) || ys.iter().any(|&y| y <= 0.0) {
        return None;
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Indices of the entries lying in the smallest decade `[min, 10 min]` of a
/// positive abscissa list.
pub(crate) fn smallest_decade_indices(xs: &[f64]) -> Vec<usize> {
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Vec::new();
    }
    let hi = 10.0 * min * (1.0 + 1e-12);
    xs.iter()
        .enumerate()
        .filter(|(_, &x)| x <= hi)
        .map(|(i, _)| i)
        .collect()
}

/// Slope fitted over the smallest decade only.
pub(crate) fn smallest_decade_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let idx = smallest_decade_indices(xs);
    if idx.len() < 3 {
        return None;
    }
    let fx: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
    let fy: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    fit_loglog_slope(&fx, &fy)
}
