//! Special functions needed for closed-form eigenfunction cross-checks.
//!
//! Macdonald's function is computed from its integral representation rather
//! than a series library: the closed forms here are diagnostics against the
//! quadrature eigenfunctions, so an independent route matters more than speed.

use crate::error::Result;
use crate::quad::{integrate_adaptive, QuadratureSpec};
use crate::real::{lit, Real};

/// Macdonald function K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt, z > 0.
pub fn bessel_k<T: Real>(nu: T, z: T) -> Result<T> {
    debug_assert!(z > T::zero());
    // cut where the exponent has decayed ~45 nats below its t=0 value
    let margin = lit::<T>(45.0);
    let nu_abs = nu.abs();
    let mut cut = ((z + margin + nu_abs * lit(5.0) + lit(10.0)) / z).acosh();
    let mut guard = 0;
    while z * cut.cosh() - nu_abs * cut < z + margin {
        cut = cut * lit(1.25);
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    let quad = QuadratureSpec {
        rel_tol: lit(1e-13),
        ..QuadratureSpec::default()
    };
    let f = |t: T| (-(z * t.cosh()) + (nu * t).abs().min(lit(700.0))).exp() * damp(nu * t);
    let (v, _) = integrate_adaptive(&f, T::zero(), cut, &quad)?;
    Ok(v)
}

// cosh(a) written as exp(|a|) * (1 + exp(-2|a|))/2 so the product with the
// exp(-z cosh t) factor above cannot overflow before it cancels
#[inline]
fn damp<T: Real>(a: T) -> T {
    let half = lit::<T>(0.5);
    (T::one() + (-(a.abs() + a.abs())).exp()) * half
}

/// Modified Bessel function I_{3/2} from its elementary closed form:
/// sqrt(2/(pi z)) (cosh z - sinh z / z).
pub fn bessel_i_three_halves<T: Real>(z: T) -> T {
    let two = lit::<T>(2.0);
    (two / (T::PI() * z)).sqrt() * (z.cosh() - z.sinh() / z)
}

/// ln Gamma by the Lanczos approximation (g = 7, 9 terms), x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    debug_assert!(x > 0.0);
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x - 1.0 + i as f64);
    }
    let t = x + 6.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x - 0.5) * t.ln() - t + acc.ln()
}

/// ln(n!) by direct summation; exact enough through the n <= 12 range used.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bessel_k_reference_values() {
        // frozen from the series identities K_{1/2}(z) = sqrt(pi/2z) e^{-z}
        let z = 0.8_f64;
        let exact = (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp();
        assert_relative_eq!(bessel_k(0.5, z).unwrap(), exact, max_relative = 1e-11);
        // recurrence K_{nu+1} - K_{nu-1} = (2 nu / z) K_nu
        let (k0, k1, k2) = (
            bessel_k(0.0, 1.3).unwrap(),
            bessel_k(1.0, 1.3).unwrap(),
            bessel_k(2.0, 1.3).unwrap(),
        );
        assert_relative_eq!(k2 - k0, 2.0 / 1.3 * k1, max_relative = 1e-10);
    }

    #[test]
    fn bessel_i_three_halves_matches_series() {
        // I_{3/2}(z) = sum_k (z/2)^{2k+3/2} / (k! Gamma(k + 5/2))
        let z = 1.7_f64;
        let mut series = 0.0;
        for k in 0..40 {
            let lg = ln_gamma(k as f64 + 2.5) + ln_factorial(k);
            series += ((2.0 * k as f64 + 1.5) * (z / 2.0).ln() - lg).exp();
        }
        assert_relative_eq!(bessel_i_three_halves(z), series, max_relative = 1e-12);
    }

    #[test]
    fn ln_gamma_reference_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-13);
        assert_relative_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), max_relative = 1e-13);
        assert_relative_eq!(ln_gamma(7.0), ln_factorial(6), max_relative = 1e-13);
    }
}
