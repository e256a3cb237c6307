//! Piecewise cubic Hermite interpolation, with an optional monotone
//! (Fritsch-Carlson) slope choice for CDF inversion.

use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// Cubic Hermite interpolant on a strictly increasing grid.
#[derive(Debug, Clone)]
pub struct CubicHermite<T: Real = f64> {
    xs: Vec<T>,
    ys: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Real> CubicHermite<T> {
    /// Build from values and externally supplied derivatives.
    pub fn with_slopes(xs: Vec<T>, ys: Vec<T>, slopes: Vec<T>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() || xs.len() != slopes.len() {
            return Err(Error::Config("interpolant needs >= 2 matched points".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("interpolation grid must be strictly increasing".into()));
        }
        Ok(Self { xs, ys, slopes })
    }

    /// Monotonicity-preserving slopes from the data alone (Fritsch-Carlson).
    pub fn monotone(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || n != ys.len() {
            return Err(Error::Config("interpolant needs >= 2 matched points".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("interpolation grid must be strictly increasing".into()));
        }
        let mut secants = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            secants.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        let mut slopes = vec![T::zero(); n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            slopes[i] = if a * b <= T::zero() {
                T::zero()
            } else {
                // harmonic mean keeps the interpolant monotone
                let w1 = lit::<T>(2.0) * (xs[i + 1] - xs[i]) + (xs[i] - xs[i - 1]);
                let w2 = (xs[i + 1] - xs[i]) + lit::<T>(2.0) * (xs[i] - xs[i - 1]);
                (w1 + w2) / (w1 / a + w2 / b)
            };
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn lo(&self) -> T {
        self.xs[0]
    }

    pub fn hi(&self) -> T {
        *self.xs.last().unwrap()
    }

    /// Evaluate at x, clamping to the grid range.
    pub fn eval(&self, x: T) -> T {
        let x = x.max(self.lo()).min(self.hi());
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= self.xs.len() => self.xs.len() - 2,
            k => k - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = three * t2 - two * t3;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reproduces_cubic_with_exact_slopes() {
        let f = |x: f64| x * x * x - 2.0 * x;
        let fp = |x: f64| 3.0 * x * x - 2.0;
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let ds: Vec<f64> = xs.iter().map(|&x| fp(x)).collect();
        let h = CubicHermite::with_slopes(xs, ys, ds).unwrap();
        for i in 0..40 {
            let x = i as f64 * 0.07;
            assert_relative_eq!(h.eval(x), f(x), max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn monotone_interpolant_stays_monotone() {
        let xs = vec![0.0, 0.1, 0.2, 0.5, 0.9, 1.0];
        let ys = vec![0.0, 0.001, 0.3, 0.31, 0.99, 1.0];
        let h = CubicHermite::monotone(xs, ys).unwrap();
        let mut prev = h.eval(0.0);
        for i in 1..=1000 {
            let v = h.eval(i as f64 / 1000.0);
            assert!(v >= prev - 1e-14, "not monotone at {i}: {v} < {prev}");
            prev = v;
        }
    }

    #[test]
    fn rejects_unsorted_grid() {
        assert!(CubicHermite::monotone(vec![0.0, 0.0, 1.0], vec![0.0, 0.5, 1.0]).is_err());
    }
}
