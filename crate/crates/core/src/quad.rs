//! Composite Gauss-Legendre quadrature with panel doubling.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// How eigenfunction integrals are evaluated.
///
/// `kernel_power` is the semiclassical exponent w applied as (K_lambda)^w;
/// `truncation_margin` is the number of decades of decay demanded of the
/// integrand at the cut when the u-domain is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec<T: Real = f64> {
    pub n_panels: usize,
    pub rel_tol: T,
    pub truncation_margin: T,
    pub kernel_power: T,
}

impl<T: Real> Default for QuadratureSpec<T> {
    fn default() -> Self {
        Self {
            n_panels: 16,
            rel_tol: lit(1e-10),
            truncation_margin: lit(18.0),
            kernel_power: T::one(),
        }
    }
}

impl<T: Real> QuadratureSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_panels < 8 {
            return Err(Error::Config(format!(
                "n_panels must be at least 8, got {}",
                self.n_panels
            )));
        }
        if !(self.rel_tol > T::zero()) {
            return Err(Error::Config("rel_tol must be positive".into()));
        }
        if !(self.truncation_margin > T::zero()) {
            return Err(Error::Config("truncation_margin must be positive".into()));
        }
        if !(self.kernel_power > T::zero()) {
            return Err(Error::Config("kernel_power must be positive".into()));
        }
        Ok(())
    }

    pub fn with_kernel_power(mut self, w: T) -> Self {
        self.kernel_power = w;
        self
    }

    pub fn with_rel_tol(mut self, tol: T) -> Self {
        self.rel_tol = tol;
        self
    }
}

/// Nodes per panel; 16 keeps single panels spectral on smooth integrands.
pub(crate) const NODES_PER_PANEL: usize = 16;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// by Newton iteration on the Legendre recurrence.
pub(crate) fn gauss_legendre<T: Real>(n: usize) -> Vec<(T, T)> {
    let mut pairs = vec![(T::zero(), T::zero()); n];
    let nf = lit::<T>(n as f64);
    let one = T::one();
    let two = lit::<T>(2.0);
    for i in 0..n.div_ceil(2) {
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut z = lit::<T>(guess);
        let mut pp = T::zero();
        for _ in 0..100 {
            let mut p1 = one;
            let mut p2 = T::zero();
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = lit::<T>(j as f64);
                p1 = ((two * jf + one) * z * p2 - jf * p3) / (jf + one);
            }
            pp = nf * (z * p1 - p2) / (z * z - one);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= T::epsilon() * lit(4.0) {
                break;
            }
        }
        let w = two / ((one - z * z) * pp * pp);
        pairs[i] = (-z, w);
        pairs[n - 1 - i] = (z, w);
    }
    pairs
}

/// Composite Gauss-Legendre over [a, b] with a fixed panel count.
pub(crate) fn integrate_fixed<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    n_panels: usize,
    rule: &[(T, T)],
) -> T {
    let width = (b - a) / lit::<T>(n_panels as f64);
    let half = lit::<T>(0.5);
    let mut total = T::zero();
    for k in 0..n_panels {
        let lo = a + width * lit::<T>(k as f64);
        let mid = lo + width * half;
        let scale = width * half;
        let mut acc = T::zero();
        for &(node, weight) in rule {
            acc += weight * f(mid + scale * node);
        }
        total += scale * acc;
    }
    total
}

/// Panel-doubling integration: doubles the panel count until two consecutive
/// doublings both agree to `quad.rel_tol` (one agreement can be a spurious
/// crossing on wide intervals). Returns the value and the panel count it
/// stabilized at.
pub(crate) fn integrate_adaptive<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    quad: &QuadratureSpec<T>,
) -> Result<(T, usize)> {
    const MAX_PANELS: usize = 1 << 15;
    let rule = gauss_legendre::<T>(NODES_PER_PANEL);
    let mut n = quad.n_panels.max(8);
    let mut prev = integrate_fixed(f, a, b, n, &rule);
    let mut agreed = false;
    while n <= MAX_PANELS {
        n *= 2;
        let cur = integrate_fixed(f, a, b, n, &rule);
        let scale = cur.abs().max(prev.abs());
        if (cur - prev).abs() <= quad.rel_tol * scale || scale == T::zero() {
            if agreed {
                return Ok((cur, n));
            }
            agreed = true;
        } else {
            agreed = false;
        }
        prev = cur;
    }
    Err(Error::Convergence(format!(
        "panel doubling did not stabilize to rel_tol={} within {} panels",
        quad.rel_tol, MAX_PANELS
    )))
}

/// Adaptive integration of a ratio of two integrals sharing the grid,
/// doubling until the ratio stabilizes on two consecutive doublings.
pub(crate) fn integrate_ratio_adaptive<T: Real, F: Fn(T) -> T, G: Fn(T) -> T>(
    num: &F,
    den: &G,
    a: T,
    b: T,
    quad: &QuadratureSpec<T>,
) -> Result<T> {
    const MAX_PANELS: usize = 1 << 15;
    let rule = gauss_legendre::<T>(NODES_PER_PANEL);
    let mut n = quad.n_panels.max(8);
    let mut prev = integrate_fixed(num, a, b, n, &rule) / integrate_fixed(den, a, b, n, &rule);
    let mut agreed = false;
    while n <= MAX_PANELS {
        n *= 2;
        let cur = integrate_fixed(num, a, b, n, &rule) / integrate_fixed(den, a, b, n, &rule);
        if (cur - prev).abs() <= quad.rel_tol * cur.abs().max(T::one()) {
            if agreed {
                return Ok(cur);
            }
            agreed = true;
        } else {
            agreed = false;
        }
        prev = cur;
    }
    Err(Error::Convergence(
        "ratio quadrature did not stabilize under panel doubling".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_integrate_polynomials_exactly() {
        // 16-point rule is exact through degree 31
        let rule = gauss_legendre::<f64>(16);
        let val = integrate_fixed(&|x: f64| x.powi(20), -1.0, 1.0, 1, &rule);
        assert_relative_eq!(val, 2.0 / 21.0, max_relative = 1e-13);
        let weight_sum: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert_relative_eq!(weight_sum, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_matches_known_integrals() {
        let quad = QuadratureSpec::default();
        let (v, _) = integrate_adaptive(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, &quad).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
        let (v, _) = integrate_adaptive(&|x: f64| (-x * x).exp(), -8.0, 8.0, &quad).unwrap();
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn ratio_adaptive_stabilizes() {
        let quad = QuadratureSpec::default();
        // second moment of the standard normal restricted to [-8, 8]
        let r = integrate_ratio_adaptive(
            &|x: f64| x * x * (-0.5 * x * x).exp(),
            &|x: f64| (-0.5 * x * x).exp(),
            -8.0,
            8.0,
            &quad,
        )
        .unwrap();
        assert_relative_eq!(r, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn rejects_bad_spec() {
        let q = QuadratureSpec::<f64> {
            n_panels: 4,
            ..QuadratureSpec::default()
        };
        assert!(q.validate().is_err());
        let q = QuadratureSpec::<f64> {
            kernel_power: 0.0,
            ..QuadratureSpec::default()
        };
        assert!(q.validate().is_err());
    }
}
