//! Harmonic extension of a field to the upper half space via the Poisson
//! representation formula, the boundary difference quotient
//! `(U(x0, t) - U(x0, 0)) / t^{2s}`, and the limit identity tying that
//! quotient to the boundary kernel integral.
//!
//! The extension is always evaluated by quadrature of the representation
//! formula, never by discretizing the degenerate PDE it solves: the formula is
//! the unique solution and quadrature gives a controllable error.

use crate::error::{Error, Result};
use crate::fields::FunctionField;
use crate::nonlocal::KernelIntegralResult;
use crate::quad::{integrate_interval_with_breaks, Estimate, QuadSpec};
use crate::slope::smallest_decade_slope;
use crate::special::{frac_constants, FracParams};
use serde::Serialize;
use std::f64::consts::PI;

fn check_dims(u: &FunctionField, x: &[f64], params: &FracParams) -> Result<()> {
    if u.dimension() != params.dimension() {
        return Err(Error::DimensionMismatch {
            expected: params.dimension(),
            got: u.dimension(),
        });
    }
    if x.len() != params.dimension() {
        return Err(Error::DimensionMismatch {
            expected: params.dimension(),
            got: x.len(),
        });
    }
    if params.dimension() > 2 {
        return Err(Error::InvalidParams(
            "extension evaluation supports N in {1, 2}".into(),
        ));
    }
    Ok(())
}

/// Geometric breakpoints `t, 2t, 4t, ...` resolving the kernel peak scale.
fn peak_breaks(t: f64, up_to: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut x = t;
    while x < up_to {
        v.push(x);
        x *= 2.0;
    }
    v
}

/// Poisson-kernel evaluation of the extension:
/// `U(x, t) = P_{N,s} int u(y) t^{2s} / (|x - y|^2 + t^2)^{(N+2s)/2} dy`.
///
/// `t = 0` returns the trace `u(x)` exactly.
pub fn cs_extend_at(
    u: &FunctionField,
    x: &[f64],
    t: f64,
    params: &FracParams,
    spec: &QuadSpec,
) -> Result<Estimate> {
    check_dims(u, x, params)?;
    if t < 0.0 {
        return Err(Error::InvalidParams(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(Estimate::exact(u.eval(x)?));
    }
    let s = params.s();
    let p_ns = frac_constants(params).p_ns;
    let t2 = t * t;
    let pow = -(params.dimension() as f64 + 2.0 * s) / 2.0;

    let est = match params.dimension() {
        1 => {
            let support = u.support_radius().unwrap_or(spec.truncation_radius);
            if support == 0.0 {
                return Ok(Estimate::exact(0.0));
            }
            let (lo, hi) = (-support, support);
            let mut breaks = u.kinks_1d();
            // The kernel is a peak of width t centered at x; geometric panels
            // around it keep the error estimator honest at small t.
            for b in peak_breaks(t, (hi - lo).abs()) {
                breaks.push(x[0] - b);
                breaks.push(x[0] + b);
            }
            breaks.push(x[0]);
            let f = |y: f64| {
                let d = x[0] - y;
                u.value1(y) * (d * d + t2).powf(pow)
            };
            integrate_interval_with_breaks(f, lo, hi, &breaks, spec)
        }
        _ => {
            let outer = match u.vanishing_radius_from(x) {
                Some(r) if r > 0.0 => r,
                Some(_) => return Ok(Estimate::exact(0.0)),
                None => spec.truncation_radius,
            };
            let inner_spec = QuadSpec {
                rel_tol: (spec.rel_tol * 0.01).max(1e-13),
                abs_tol: spec.abs_tol * 0.1,
                ..spec.clone()
            };
            let radial = |rho: f64| {
                let ang = integrate_interval_with_breaks(
                    |theta: f64| {
                        let (sin_t, cos_t) = theta.sin_cos();
                        u.value(&[x[0] + rho * cos_t, x[1] + rho * sin_t])
                    },
                    0.0,
                    2.0 * PI,
                    &[0.5 * PI, PI, 1.5 * PI],
                    &inner_spec,
                );
                ang.value * rho * (rho * rho + t2).powf(pow)
            };
            let mut breaks = u.kink_radii_from(x);
            breaks.extend(peak_breaks(t, outer));
            integrate_interval_with_breaks(radial, 0.0, outer, &breaks, spec)
        }
    };
    Ok(est.scale(p_ns * t.powf(2.0 * s)))
}

/// Total mass of the Poisson kernel: `P_{N,s} int t^{2s} / (|y|^2 + t^2)^{(N+2s)/2} dy`.
///
/// Identically 1 for every `t`; computed by quadrature of the original
/// integrand (no analytic cancellation), with the far field mapped through
/// `rho -> 1/w` so no mass is truncated.
pub fn kernel_mass(params: &FracParams, t: f64, spec: &QuadSpec) -> Result<Estimate> {
    if !(t > 0.0) {
        return Err(Error::InvalidParams(format!("t must be positive, got {t}")));
    }
    if params.dimension() > 2 {
        return Err(Error::InvalidParams(
            "kernel_mass supports N in {1, 2}".into(),
        ));
    }
    let s = params.s();
    let n = params.dimension() as f64;
    let consts = frac_constants(params);
    let surface = n * consts.omega_n; // area of the unit sphere in R^N
    let split = 4.0 * t;
    let pow = -(n + 2.0 * s) / 2.0;

    let direct = integrate_interval_with_breaks(
        |rho: f64| rho.powf(n - 1.0) * (rho * rho + t * t).powf(pow),
        0.0,
        split,
        &peak_breaks(t * 0.25, split),
        spec,
    );
    // rho = 1/w turns the improper tail into an integrable endpoint
    // singularity w^{2s-1} on (0, 1/split].
    let tail = integrate_interval_with_breaks(
        |w: f64| w.powf(2.0 * s - 1.0) * (1.0 + t * t * w * w).powf(pow),
        0.0,
        1.0 / split,
        &[],
        spec,
    );
    Ok(direct
        .add(&tail)
        .scale(consts.p_ns * surface * t.powf(2.0 * s)))
}

/// The boundary difference quotient sampled on a decreasing t-grid.
#[derive(Debug, Clone, Serialize)]
pub struct QuotientCurve {
    pub t_values: Vec<f64>,
    pub q_values: Vec<f64>,
    /// Least-squares slope of `log q` vs `log t` over the smallest decade of
    /// t; `None` when the window contains non-positive values.
    pub fitted_slope: Option<f64>,
    /// Limit verdict derived from the curve alone (no kernel cross-check).
    pub limit: Estimate,
}

/// Default geometric grid: 12 points per decade from 1e-1 down to 1e-4.
pub fn default_t_grid() -> Vec<f64> {
    (0..=36).map(|j| 10f64.powf(-1.0 - j as f64 / 12.0)).collect()
}

/// Samples `q(t) = (U(x0, t) - u(x0)) / t^{2s}` on the grid and fits the
/// small-t slope.
pub fn quotient_curve(
    u: &FunctionField,
    x0: &[f64],
    params: &FracParams,
    t_grid: &[f64],
    spec: &QuadSpec,
) -> Result<QuotientCurve> {
    check_dims(u, x0, params)?;
    if t_grid.is_empty() {
        return Err(Error::InvalidParams("t grid must be non-empty".into()));
    }
    if t_grid.windows(2).any(|w| !(w[0] > w[1])) || t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParams(
            "t grid must be strictly decreasing and positive".into(),
        ));
    }
    let s = params.s();
    let u0 = u.eval(x0)?;
    let mut q_values = Vec::with_capacity(t_grid.len());
    let mut warned = None;
    for &t in t_grid {
        let est = cs_extend_at(u, x0, t, params, spec)?;
        if est.warning.is_some() && warned.is_none() {
            warned = est.warning.clone();
        }
        q_values.push((est.value - u0) / t.powf(2.0 * s));
    }
    let fitted_slope = smallest_decade_slope(t_grid, &q_values);
    let mut limit = limit_from_curve(t_grid, &q_values, fitted_slope, spec);
    if let Some(w) = warned {
        limit = limit.with_warning(&format!("extension quadrature warning: {w}"));
    }
    Ok(QuotientCurve {
        t_values: t_grid.to_vec(),
        q_values,
        fitted_slope,
        limit,
    })
}

fn limit_from_curve(
    ts: &[f64],
    qs: &[f64],
    slope: Option<f64>,
    spec: &QuadSpec,
) -> Estimate {
    let n = qs.len();
    let scale = qs.iter().fold(0.0f64, |a, q| a.max(q.abs()));
    if scale <= spec.abs_tol {
        return Estimate::exact(0.0);
    }
    match slope {
        Some(sl) if sl <= -0.1 => Estimate::diverged_positive(qs[n - 1]),
        maybe_slope => {
            // Finite-limit branch: Aitken extrapolation on the last points.
            let tail_monotone = {
                let idx = crate::slope::smallest_decade_indices(ts);
                let vals: Vec<f64> = idx.iter().map(|&i| qs[i]).collect();
                vals.windows(2).all(|w| w[1] >= w[0] - 1e-12 * scale)
                    || vals.windows(2).all(|w| w[1] <= w[0] + 1e-12 * scale)
            };
            if maybe_slope.is_none() && !tail_monotone {
                let mut e = Estimate::exact(qs[n - 1]);
                e.error_bound = scale;
                return e.with_warning(
                    "slope undefined and tail non-monotone: limit indeterminate",
                );
            }
            if n >= 3 {
                let (q2, q1, q0) = (qs[n - 1], qs[n - 2], qs[n - 3]);
                let d1 = q1 - q0;
                let d2 = q2 - q1;
                if d1.abs() > 0.0 && (d2 / d1).abs() < 1.0 {
                    let rho = d2 / d1;
                    let correction = d2 * rho / (1.0 - rho);
                    let value = q2 + correction;
                    let mut e = Estimate::exact(value);
                    e.error_bound = correction.abs() + d2.abs() * 1e-3 + spec.abs_tol;
                    if !tail_monotone && maybe_slope.map_or(true, |sl| sl.abs() < 0.1) {
                        e = e.with_warning("non-monotone tail in the dead band");
                    }
                    return e;
                }
            }
            let mut e = Estimate::exact(qs[n - 1]);
            e.error_bound = if n >= 2 {
                (qs[n - 1] - qs[n - 2]).abs() + spec.abs_tol
            } else {
                scale
            };
            e
        }
    }
}

/// Comparison of the extrapolated quotient limit against
/// `p_ns * kernel_integral`.
#[derive(Debug, Clone, Serialize)]
pub struct QuotientCrosscheck {
    pub kernel_diverged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_discrepancy: Option<f64>,
    pub passed: bool,
}

/// The quotient limit with its optional kernel cross-check.
#[derive(Debug, Clone, Serialize)]
pub struct QuotientLimit {
    pub estimate: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crosscheck: Option<QuotientCrosscheck>,
}

/// Extracts the `t -> 0` limit of the quotient curve.
///
/// Slope at or below -0.1 is declared a `+inf` divergence; otherwise the limit
/// is Aitken-extrapolated. When a kernel integral is supplied and both sides
/// are finite, the identity `limit = p_ns * kernel` is checked at 2% relative;
/// for a diverging pair the flags are compared instead.
pub fn quotient_limit(
    curve: &QuotientCurve,
    crosscheck: Option<&KernelIntegralResult>,
    params: &FracParams,
) -> Result<QuotientLimit> {
    if curve.t_values.len() < 8 {
        return Err(Error::InvalidParams(
            "quotient limit needs at least 8 curve points".into(),
        ));
    }
    let t_max = curve.t_values[0];
    let t_min = curve.t_values[curve.t_values.len() - 1];
    if t_max / t_min < 99.99 {
        return Err(Error::InvalidParams(
            "quotient limit needs a curve spanning at least 2 decades".into(),
        ));
    }
    let estimate = curve.limit.clone();
    let crosscheck = crosscheck.map(|k| {
        let p_ns = frac_constants(params).p_ns;
        if k.estimate.diverged || estimate.diverged {
            QuotientCrosscheck {
                kernel_diverged: k.estimate.diverged,
                kernel_value: None,
                target: None,
                rel_discrepancy: None,
                passed: k.estimate.diverged == estimate.diverged,
            }
        } else {
            let target = p_ns * k.estimate.value;
            let denom = target.abs().max(1e-300);
            let rel = (estimate.value - target).abs() / denom;
            QuotientCrosscheck {
                kernel_diverged: false,
                kernel_value: Some(k.estimate.value),
                target: Some(target),
                rel_discrepancy: Some(rel),
                passed: rel <= 0.02,
            }
        }
    });
    Ok(QuotientLimit {
        estimate,
        crosscheck,
    })
}

/// CSV export of a quotient curve: `#`-prefixed metadata lines, then `t,q`.
pub fn quotient_curve_csv(
    curve: &QuotientCurve,
    params: &FracParams,
    x0: &[f64],
    field_spec: &str,
) -> String {
    let mut out = String::new();
    out.push_str(&format!("# N={}\n", params.dimension()));
    out.push_str(&format!("# s={}\n", params.s()));
    out.push_str(&format!(
        "# x0={}\n",
        x0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    ));
    out.push_str(&format!("# field={field_spec}\n"));
    out.push_str("t,q\n");
    for (t, q) in curve.t_values.iter().zip(&curve.q_values) {
        out.push_str(&format!("{t},{q}\n"));
    }
    out
}
