//! Special functions and the derived constants shared by every other module.
//!
//! All constants are expressed through the Euler Gamma function, evaluated by a
//! Lanczos approximation accurate to better than 1e-13 relative on the range
//! the toolkit uses.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Dimension and fractional exponent; the pair every operator depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    #[serde(rename = "N")]
    dimension: usize,
    s: f64,
}

impl FracParams {
    pub fn new(dimension: usize, s: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParams("dimension must be >= 1".into()));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParams(format!(
                "s must lie in (0, 1), got {s}"
            )));
        }
        Ok(FracParams { dimension, s })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

/// The five constants attached to a `(N, s)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantSet {
    /// Pointwise-operator normalization, Fourier-consistent sign convention
    /// (`pi^{-N/2}`; see [`c_ns_flipped_pi`] for the other sign).
    pub c_ns: f64,
    /// Poisson kernel normalization of the harmonic extension.
    pub p_ns: f64,
    /// `(2s)^{2s} * p_ns`, the constant of the rescaled difference quotient.
    pub p_ns_tilde: f64,
    /// Torsion constant: `gamma_ns * (r^2 - |x-c|^2)_+^s` solves the unit
    /// right-hand side problem on the ball.
    pub gamma_ns: f64,
    /// Volume of the N-dimensional unit ball.
    pub omega_n: f64,
}

const LANCZOS_G: f64 = 671.0 / 128.0;
const LANCZOS_COEF: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    3.399_464_998_481_188_87e-5,
    4.652_362_892_704_857_56e-5,
    -9.837_447_530_487_956_46e-5,
    1.580_887_032_249_124_94e-4,
    -2.102_644_417_241_048_83e-4,
    2.174_396_181_152_126_43e-4,
    -1.643_181_065_367_638_9e-4,
    8.441_822_398_385_274_33e-5,
    -2.619_083_840_158_140_87e-5,
    3.689_918_265_953_162_34e-6,
];

fn ln_gamma_lanczos(x: f64) -> f64 {
    // Valid for x > 0. Shifted-series form with sqrt(2 pi) folded in.
    debug_assert!(x > 0.0);
    let tmp = x + LANCZOS_G;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = 0.999_999_999_999_997_1;
    let mut y = x;
    for c in LANCZOS_COEF {
        y += 1.0;
        ser += c / y;
    }
    tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

/// Euler Gamma function for positive arguments.
///
/// Uses the Lanczos series directly for x >= 0.5 and the reflection formula
/// below that, so the relative error stays below ~1e-13 across (0, 30].
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!(
            "gamma_fn requires a positive finite argument, got {x}"
        )));
    }
    Ok(gamma_positive(x))
}

fn gamma_positive(x: f64) -> f64 {
    if x < 0.5 {
        // Gamma(x) = pi / (sin(pi x) * Gamma(1 - x))
        PI / ((PI * x).sin() * ln_gamma_lanczos(1.0 - x).exp())
    } else {
        ln_gamma_lanczos(x).exp()
    }
}

/// All five constants for a given `(N, s)`.
///
/// `c_ns` follows the Fourier-consistent convention
/// `2^{2s} pi^{-N/2} Gamma((N+2s)/2) s (1-s) / Gamma(2-s)`; this is the sign
/// of the pi exponent that makes the torsion identity come out to exactly 1.
pub fn frac_constants(params: &FracParams) -> ConstantSet {
    let n = params.dimension() as f64;
    let s = params.s();
    let g_half_sum = gamma_positive((n + 2.0 * s) / 2.0);
    let c_ns = 2f64.powf(2.0 * s) * PI.powf(-n / 2.0) * g_half_sum * s * (1.0 - s)
        / gamma_positive(2.0 - s);
    let p_ns = PI.powf(-n / 2.0) * g_half_sum / gamma_positive(s);
    let p_ns_tilde = (2.0 * s).powf(2.0 * s) * p_ns;
    let gamma_ns =
        4f64.powf(-s) * gamma_positive(n / 2.0) / (g_half_sum * gamma_positive(1.0 + s));
    let omega_n = PI.powf(n / 2.0) / gamma_positive(n / 2.0 + 1.0);
    ConstantSet {
        c_ns,
        p_ns,
        p_ns_tilde,
        gamma_ns,
        omega_n,
    }
}

/// The operator constant with the opposite sign on the pi exponent
/// (`pi^{+N/2}` in place of `pi^{-N/2}`).
///
/// Some printed sources carry this variant; it differs from the adopted
/// constant by exactly `pi^N` and makes the torsion identity evaluate to
/// `pi^N` instead of 1. Kept so the convention can be diagnosed numerically.
pub fn c_ns_flipped_pi(params: &FracParams) -> f64 {
    let n = params.dimension() as f64;
    frac_constants(params).c_ns * PI.powf(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    #[test]
    fn gamma_known_values() {
        assert!((gamma_fn(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma_fn(0.5).unwrap() - SQRT_PI).abs() < 1e-12);
        assert!((gamma_fn(4.0).unwrap() - 6.0).abs() < 1e-12);
        assert!((gamma_fn(10.0).unwrap() - 362_880.0).abs() / 362_880.0 < 1e-13);
    }

    #[test]
    fn gamma_rejects_nonpositive() {
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-1.5).is_err());
        assert!(gamma_fn(f64::NAN).is_err());
    }

    #[test]
    fn gamma_recurrence_on_grid() {
        // |Gamma(x+1) - x Gamma(x)| <= 1e-10 * Gamma(x+1) on 100 points of [0.1, 20]
        for i in 0..100 {
            let x = 0.1 + 19.9 * (i as f64) / 99.0;
            let g1 = gamma_fn(x + 1.0).unwrap();
            let g0 = gamma_fn(x).unwrap();
            assert!(
                (g1 - x * g0).abs() <= 1e-10 * g1,
                "recurrence violated at x = {x}"
            );
        }
    }

    #[test]
    fn gamma_relative_error_spot_checks() {
        // Exact half-integer values: Gamma(n + 1/2) = (2n)! sqrt(pi) / (4^n n!)
        let mut exact = SQRT_PI;
        let mut x = 0.5;
        while x < 30.0 {
            let g = gamma_fn(x).unwrap();
            assert!(
                (g - exact).abs() / exact < 1e-12,
                "gamma({x}) off by {}",
                (g - exact).abs() / exact
            );
            exact *= x;
            x += 1.0;
        }
    }

    #[test]
    fn constants_n1_half() {
        let p = FracParams::new(1, 0.5).unwrap();
        let c = frac_constants(&p);
        let inv_pi = 1.0 / PI;
        assert!((c.c_ns - inv_pi).abs() < 1e-12);
        assert!((c.p_ns - inv_pi).abs() < 1e-12);
        assert!((c.gamma_ns - 1.0).abs() < 1e-12);
        assert!((c.omega_n - 2.0).abs() < 1e-12);
        assert!((c.p_ns_tilde - c.p_ns).abs() < 1e-12); // (2s)^{2s} = 1 at s = 1/2
    }

    #[test]
    fn constants_n2_half() {
        let p = FracParams::new(2, 0.5).unwrap();
        let c = frac_constants(&p);
        assert!((c.gamma_ns - 2.0 / PI).abs() < 1e-12);
        assert!((c.p_ns - 1.0 / (2.0 * PI)).abs() < 1e-12);
        assert!((c.omega_n - PI).abs() < 1e-12);
    }

    #[test]
    fn constants_all_positive_and_tilde_ratio() {
        for n in [1usize, 2, 3] {
            for i in 0..20 {
                let s = 0.05 + 0.9 * (i as f64) / 19.0;
                let p = FracParams::new(n, s).unwrap();
                let c = frac_constants(&p);
                for v in [c.c_ns, c.p_ns, c.p_ns_tilde, c.gamma_ns, c.omega_n] {
                    assert!(v > 0.0);
                }
                let ratio = c.p_ns_tilde / c.p_ns;
                let expect = (2.0 * s).powf(2.0 * s);
                assert!((ratio - expect).abs() <= 1e-14 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn constants_deterministic() {
        let p = FracParams::new(2, 0.37).unwrap();
        let a = frac_constants(&p);
        let b = frac_constants(&p);
        assert_eq!(a.c_ns.to_bits(), b.c_ns.to_bits());
        assert_eq!(a.p_ns.to_bits(), b.p_ns.to_bits());
        assert_eq!(a.p_ns_tilde.to_bits(), b.p_ns_tilde.to_bits());
        assert_eq!(a.gamma_ns.to_bits(), b.gamma_ns.to_bits());
        assert_eq!(a.omega_n.to_bits(), b.omega_n.to_bits());
    }

    #[test]
    fn flipped_pi_variant_is_pi_pow_n_times_adopted() {
        for n in [1usize, 2] {
            for s in [0.25, 0.5, 0.75] {
                let p = FracParams::new(n, s).unwrap();
                let adopted = frac_constants(&p).c_ns;
                let flipped = c_ns_flipped_pi(&p);
                let ratio = flipped / adopted;
                let expect = PI.powi(n as i32);
                assert!((ratio - expect).abs() / expect < 1e-10);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(FracParams::new(0, 0.5).is_err());
        assert!(FracParams::new(1, 0.0).is_err());
        assert!(FracParams::new(1, 1.0).is_err());
        assert!(FracParams::new(1, -0.3).is_err());
        assert!(FracParams::new(2, 0.5).is_ok());
    }
}
