//! Deterministic low-discrepancy sequences used for sample placement.

/// Van der Corput radical inverse of `k` in the given base; k = 0 maps to 0.
pub(crate) fn van_der_corput(mut k: usize, base: usize) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut x = 0.0;
    while k > 0 {
        x += (k % base) as f64 * inv;
        k /= base;
        inv /= b;
    }
    x
}

/// Deterministic points filling the open ball, low-discrepancy in radius and
/// angle. Never touches the boundary sphere (radii capped at `0.95 r`).
pub(crate) fn ball_points(center: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    let dim = center.len();
    let mut pts = Vec::with_capacity(count);
    for k in 0..count {
        let u = van_der_corput(k + 1, 2);
        match dim {
            1 => {
                let x = center[0] + radius * 0.95 * (2.0 * u - 1.0);
                pts.push(vec![x]);
            }
            2 => {
                // sqrt for an area-uniform radial distribution
                let r = radius * 0.95 * u.sqrt();
                let theta = 2.0 * std::f64::consts::PI * van_der_corput(k + 1, 3);
                pts.push(vec![center[0] + r * theta.cos(), center[1] + r * theta.sin()]);
            }
            _ => {
                let r = radius * 0.95 * (2.0 * u - 1.0);
                let axis = k % dim;
                let mut p = center.to_vec();
                p[axis] += r;
                pts.push(p);
            }
        }
    }
    pts
}
