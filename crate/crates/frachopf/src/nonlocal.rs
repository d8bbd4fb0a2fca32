//! Pointwise fractional Laplacian, the boundary kernel integral with its
//! three-way domain split, the certified far-field tail bound, the
//! minimum-principle hypothesis check, and the barrier verification.

use crate::error::{Error, Result};
use crate::fields::{sup_norm_negative_part, BallSpec, FunctionField, ProbePlan, Smoothness};
use crate::quad::{
    divergence_probe, integrate_interval_with_breaks, power_tail_closed_form, Estimate, QuadSpec,
};
use crate::seq::ball_points;
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
            "quadrature operators support N in {1, 2}".into(),
        ));
    }
    Ok(())
}

fn tighter(spec: &QuadSpec) -> QuadSpec {
    QuadSpec {
        rel_tol: (spec.rel_tol * 0.01).max(1e-13),
        abs_tol: spec.abs_tol * 0.1,
        ..spec.clone()
    }
}

/// Integral over the unit circle of `g(theta)`, exploiting nothing: plain
/// adaptive quadrature on [0, 2 pi).
fn angular_integral<G: Fn(f64) -> f64>(g: G, spec: &QuadSpec) -> f64 {
    integrate_interval_with_breaks(g, 0.0, 2.0 * PI, &[0.5 * PI, PI, 1.5 * PI], spec).value
}

/// Pointwise fractional Laplacian in the symmetrized second-difference form
///
/// `(C_{N,s}/2) int (2u(x) - u(x+y) - u(x-y)) / |y|^{N+2s} dy`,
///
/// which turns the principal value into an ordinary integrable singularity
/// for fields that are C^2 near `x`. Fields tagged `C0` are rejected.
pub fn frac_laplacian_at(
    u: &FunctionField,
    x: &[f64],
    params: &FracParams,
    spec: &QuadSpec,
) -> Result<Estimate> {
    check_dims(u, x, params)?;
    if u.smoothness() < Smoothness::C2Interior {
        return Err(Error::Smoothness(
            "pointwise fractional Laplacian needs interior C2 smoothness; \
             sampled/C0 fields only support kernel integrals and extension evaluation"
                .into(),
        ));
    }
    let s = params.s();
    let n = params.dimension();
    let constants = frac_constants(params);
    let ux = u.value(x);
    let outer = u
        .vanishing_radius_from(x)
        .unwrap_or(spec.truncation_radius)
        .max(1e-6);
    let breaks = u.kink_radii_from(x);

    let core = match n {
        1 => {
            let g = |y: f64| {
                let up = u.value1(x[0] + y);
                let um = u.value1(x[0] - y);
                (2.0 * ux - up - um) * y.powf(-1.0 - 2.0 * s)
            };
            // Integrand is even in y; fold onto (0, outer] and double, which
            // together with the C/2 prefactor gives a clean C * integral.
            integrate_interval_with_breaks(g, 0.0, outer, &breaks, spec).scale(2.0)
        }
        _ => {
            let inner_spec = tighter(spec);
            let radial = |rho: f64| {
                let a = angular_integral(
                    |theta| {
                        let (sin_t, cos_t) = theta.sin_cos();
                        let p = [x[0] + rho * cos_t, x[1] + rho * sin_t];
                        let q = [x[0] - rho * cos_t, x[1] - rho * sin_t];
                        2.0 * ux - u.value(&p) - u.value(&q)
                    },
                    &inner_spec,
                );
                a * rho.powf(-1.0 - 2.0 * s)
            };
            integrate_interval_with_breaks(radial, 0.0, outer, &breaks, spec)
        }
    };
    // Beyond `outer` both shifted evaluations vanish, so the remaining mass is
    // exactly u(x) times the closed-form kernel tail.
    let tail = Estimate::exact(ux * power_tail_closed_form(outer, s, n));
    Ok(core.scale(0.5).add(&tail).scale(constants.c_ns))
}

/// Kernel integral split over the near / middle / far decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct KernelIntegralResult {
    /// The whole integral `int u(x) / |x0 - x|^{N+2s} dx`.
    pub estimate: Estimate,
    /// Contribution of the ball `B_{near_radius}(x0)`, probed for divergence.
    pub near_boundary: Estimate,
    /// Contribution of the annulus between the two radii.
    pub near_rest: Estimate,
    /// Contribution outside `B_{far_radius}(x0)`.
    pub far: Estimate,
    pub near_radius: f64,
    pub far_radius: f64,
}

/// `int_{R^N} u(x) / |x0 - x|^{N+2s} dx` with divergence detection at `x0`.
///
/// The near-boundary part runs through the dyadic-shell probe, so a
/// non-integrable concentration at `x0` is reported as `+inf` rather than a
/// garbage number.
pub fn kernel_integral(
    u: &FunctionField,
    x0: &[f64],
    params: &FracParams,
    spec: &QuadSpec,
) -> Result<KernelIntegralResult> {
    check_dims(u, x0, params)?;
    let s = params.s();
    let n = params.dimension();
    let outer = u.vanishing_radius_from(x0).unwrap_or(spec.truncation_radius);
    if outer <= f64::MIN_POSITIVE {
        let z = Estimate::exact(0.0);
        return Ok(KernelIntegralResult {
            estimate: z.clone(),
            near_boundary: z.clone(),
            near_rest: z.clone(),
            far: z,
            near_radius: 0.0,
            far_radius: 0.0,
        });
    }
    let near_radius = outer / 8.0;
    let far_radius = outer / 2.0;

    let inner_spec = tighter(spec);
    let profile = |rho: f64| -> f64 {
        let k = rho.powf(-1.0 - 2.0 * s);
        match n {
            1 => (u.value1(x0[0] + rho) + u.value1(x0[0] - rho)) * k,
            _ => {
                let a = angular_integral(
                    |theta| {
                        let (sin_t, cos_t) = theta.sin_cos();
                        u.value(&[x0[0] + rho * cos_t, x0[1] + rho * sin_t])
                    },
                    &inner_spec,
                );
                a * k
            }
        }
    };
    let breaks = u.kink_radii_from(x0);

    let near_boundary = divergence_probe(&profile, near_radius, spec);
    let near_rest =
        integrate_interval_with_breaks(&profile, near_radius, far_radius, &breaks, spec);
    let far = integrate_interval_with_breaks(&profile, far_radius, outer, &breaks, spec);
    let estimate = near_boundary.add(&near_rest).add(&far);
    Ok(KernelIntegralResult {
        estimate,
        near_boundary,
        near_rest,
        far,
        near_radius,
        far_radius,
    })
}

/// Certified lower bound for the far-field kernel contribution:
/// `-||u^-||_inf * N omega_N int_r^inf z^{-1-2s} dz`,
/// with the sup norm estimated over the probe plan.
pub fn tail_lower_bound(
    u: &FunctionField,
    r: f64,
    params: &FracParams,
    probe: &ProbePlan,
) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParams(format!("radius must be positive, got {r}")));
    }
    let sup_neg = sup_norm_negative_part(u, probe)?;
    Ok(-sup_neg * power_tail_closed_form(r, params.s(), params.dimension()))
}

/// Outcome of the minimum-principle hypothesis check.
#[derive(Debug, Clone, Serialize)]
pub struct HopfConditionReport {
    pub pass: bool,
    pub worst_value: f64,
    pub worst_point: Vec<f64>,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Checks `int_{R^N \ B_r(y0)} g(x) / |x - y|^{N+2s} dx >= 0` for sample
/// points `y` covering the ball.
///
/// The continuum quantifier is relaxed to a deterministic sample: the ball
/// center, the 2N axis-extreme points at 0.9 r, and `y_samples`
/// low-discrepancy interior points. Pass means the sampled minimum is above
/// `-abs_tol`.
pub fn hopf_condition_check(
    g: &FunctionField,
    ball: &BallSpec,
    params: &FracParams,
    spec: &QuadSpec,
    y_samples: usize,
) -> Result<HopfConditionReport> {
    if y_samples == 0 {
        return Err(Error::InvalidParams("y_samples must be >= 1".into()));
    }
    check_dims(g, ball.center(), params)?;
    let n = params.dimension();
    let r = ball.radius();
    let c = ball.center();

    let mut samples: Vec<Vec<f64>> = vec![c.to_vec()];
    for axis in 0..n {
        for sign in [-1.0, 1.0] {
            let mut p = c.to_vec();
            p[axis] += sign * 0.9 * r;
            samples.push(p);
        }
    }
    samples.extend(ball_points(c, r, y_samples));

    let mut worst_value = f64::INFINITY;
    let mut worst_point = samples[0].clone();
    let mut note: Option<String> = None;
    for y in &samples {
        let est = exterior_kernel_integral(g, ball, y, params, spec)?;
        if est.diverged {
            return Ok(HopfConditionReport {
                pass: false,
                worst_value: est.value,
                worst_point: y.clone(),
                samples: samples.len(),
                note: Some("exterior integral diverged at a sample point".into()),
            });
        }
        if let Some(w) = &est.warning {
            note = Some(format!("quadrature warning at a sample point: {w}"));
        }
        if est.value < worst_value {
            worst_value = est.value;
            worst_point = y.clone();
        }
    }
    Ok(HopfConditionReport {
        pass: worst_value >= -spec.abs_tol,
        worst_value,
        worst_point,
        samples: samples.len(),
        note,
    })
}

/// `int_{R^N \ B_r(y0)} g(x) |x - y|^{-N-2s} dx` for a point y inside the ball.
fn exterior_kernel_integral(
    g: &FunctionField,
    ball: &BallSpec,
    y: &[f64],
    params: &FracParams,
    spec: &QuadSpec,
) -> Result<Estimate> {
    let s = params.s();
    let n = params.dimension();
    let r = ball.radius();
    let c = ball.center();
    let support = g.support_radius().unwrap_or(spec.truncation_radius);
    match n {
        1 => {
            let kinks = g.kinks_1d();
            let mut total = Estimate::exact(0.0);
            let left_hi = c[0] - r;
            let left_lo = (-support).min(left_hi);
            if left_lo < left_hi {
                let f = |x: f64| g.value1(x) * (x - y[0]).abs().powf(-1.0 - 2.0 * s);
                total = total.add(&integrate_interval_with_breaks(
                    f, left_lo, left_hi, &kinks, spec,
                ));
            }
            let right_lo = c[0] + r;
            let right_hi = support.max(right_lo);
            if right_lo < right_hi {
                let f = |x: f64| g.value1(x) * (x - y[0]).abs().powf(-1.0 - 2.0 * s);
                total = total.add(&integrate_interval_with_breaks(
                    f, right_lo, right_hi, &kinks, spec,
                ));
            }
            Ok(total)
        }
        _ => {
            // Polar around the ball center; the excluded ball is exactly rho < r.
            let outer = g.vanishing_radius_from(c).unwrap_or(spec.truncation_radius);
            if outer <= r {
                return Ok(Estimate::exact(0.0));
            }
            let inner_spec = tighter(spec);
            let radial = |rho: f64| {
                let a = angular_integral(
                    |theta| {
                        let (sin_t, cos_t) = theta.sin_cos();
                        let p = [c[0] + rho * cos_t, c[1] + rho * sin_t];
                        let d2 = (p[0] - y[0]) * (p[0] - y[0]) + (p[1] - y[1]) * (p[1] - y[1]);
                        g.value(&p) * d2.powf(-(2.0 + 2.0 * s) / 2.0)
                    },
                    &inner_spec,
                );
                a * rho
            };
            let breaks = g.kink_radii_from(c);
            Ok(integrate_interval_with_breaks(radial, r, outer, &breaks, spec))
        }
    }
}

/// Outcome of one barrier verification.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    pub pass: bool,
    /// Gap between the target threshold and the worst sampled value
    /// (positive means the inequality holds with room).
    pub margin: f64,
    pub worst_value: f64,
    pub worst_point: Vec<f64>,
    /// The right-hand side `-c_sup * sup(psi)`.
    pub threshold: f64,
}

/// Verifies the barrier inequality `(-Delta)^s (psi + alpha xi) <= -c_sup sup(psi)`
/// at sample points inside the ball, where `psi` is the torsion profile of the
/// ball and `xi` is the supplied bump supported at positive distance from it.
pub fn barrier_verify(
    ball: &BallSpec,
    bump: &FunctionField,
    alpha: f64,
    c_sup: f64,
    params: &FracParams,
    spec: &QuadSpec,
    x_samples: usize,
) -> Result<BarrierReport> {
    if alpha < 0.0 || c_sup < 0.0 {
        return Err(Error::InvalidParams(
            "alpha and c_sup must be nonnegative".into(),
        ));
    }
    check_disjoint(ball, bump)?;
    let psi = FunctionField::torsion(ball.clone(), params.s())?;
    let eta = FunctionField::lincomb(vec![(1.0, psi), (alpha, bump.clone())])?;
    let pts = barrier_sample_points(ball, x_samples);
    let sup_psi = torsion_sup(ball, params);
    let threshold = -c_sup * sup_psi;

    let mut worst_value = f64::NEG_INFINITY;
    let mut worst_point = pts[0].clone();
    for p in &pts {
        let est = frac_laplacian_at(&eta, p, params, spec)?;
        if est.value > worst_value {
            worst_value = est.value;
            worst_point = p.clone();
        }
    }
    let margin = threshold - worst_value;
    Ok(BarrierReport {
        pass: margin >= -spec.abs_tol,
        margin,
        worst_value,
        worst_point,
        threshold,
    })
}

/// Doubling search for the smallest power-of-two `alpha` that makes
/// [`barrier_verify`] pass. Exploits linearity of the operator: the two
/// component Laplacians are evaluated once and recombined per alpha.
pub fn barrier_alpha_search(
    ball: &BallSpec,
    bump: &FunctionField,
    c_sup: f64,
    params: &FracParams,
    spec: &QuadSpec,
    x_samples: usize,
    max_doublings: u32,
) -> Result<Option<(f64, BarrierReport)>> {
    check_disjoint(ball, bump)?;
    let psi = FunctionField::torsion(ball.clone(), params.s())?;
    let pts = barrier_sample_points(ball, x_samples);
    let lap_psi: Result<Vec<f64>> = pts
        .iter()
        .map(|p| frac_laplacian_at(&psi, p, params, spec).map(|e| e.value))
        .collect();
    let lap_bump: Result<Vec<f64>> = pts
        .iter()
        .map(|p| frac_laplacian_at(bump, p, params, spec).map(|e| e.value))
        .collect();
    let (lap_psi, lap_bump) = (lap_psi?, lap_bump?);
    let threshold = -c_sup * torsion_sup(ball, params);

    let mut alpha = 1.0f64;
    for _ in 0..=max_doublings {
        let mut worst_value = f64::NEG_INFINITY;
        let mut worst_point = pts[0].clone();
        for (i, p) in pts.iter().enumerate() {
            let v = lap_psi[i] + alpha * lap_bump[i];
            if v > worst_value {
                worst_value = v;
                worst_point = p.clone();
            }
        }
        let margin = threshold - worst_value;
        if margin >= -spec.abs_tol {
            return Ok(Some((
                alpha,
                BarrierReport {
                    pass: true,
                    margin,
                    worst_value,
                    worst_point,
                    threshold,
                },
            )));
        }
        alpha *= 2.0;
    }
    Ok(None)
}

fn check_disjoint(ball: &BallSpec, bump: &FunctionField) -> Result<()> {
    let bump_ball = bump.support_ball().ok_or_else(|| {
        Error::InvalidParams("the barrier bump must have a single-ball support".into())
    })?;
    if bump_ball.dimension() != ball.dimension() {
        return Err(Error::DimensionMismatch {
            expected: ball.dimension(),
            got: bump_ball.dimension(),
        });
    }
    let d: f64 = ball
        .center()
        .iter()
        .zip(bump_ball.center())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if d <= ball.radius() + bump_ball.radius() {
        return Err(Error::OverlappingSupports(format!(
            "center distance {d} <= sum of radii {}",
            ball.radius() + bump_ball.radius()
        )));
    }
    Ok(())
}

fn barrier_sample_points(ball: &BallSpec, x_samples: usize) -> Vec<Vec<f64>> {
    let n = ball.dimension();
    let r = ball.radius();
    let mut pts = vec![ball.center().to_vec()];
    let per_dir = x_samples.max(1);
    for i in 1..=per_dir {
        let f = 0.9 * (i as f64) / (per_dir as f64);
        for axis in 0..n {
            for sign in [-1.0, 1.0] {
                let mut p = ball.center().to_vec();
                p[axis] += sign * f * r;
                pts.push(p);
            }
        }
    }
    pts
}

fn torsion_sup(ball: &BallSpec, params: &FracParams) -> f64 {
    // gamma_{N,s} r^{2s}: the torsion profile peaks at the center.
    frac_constants(params).gamma_ns * ball.radius().powf(2.0 * params.s())
}
