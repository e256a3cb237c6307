//! Noise-off tau-function checks for the semi-infinite Toda chain: heat-kernel
//! tau_n, the a_n = n/t ratio, the h_n fields and finite-difference residuals
//! for the 2d Toda relation and the chain equations of motion.
//!
//! Everything runs in log-space so factorial and Gaussian factors cannot
//! underflow through n = 12.

use crate::error::{Error, Result};
use crate::real::{lit, Real};
use crate::special::ln_factorial;

/// Maximum particle index kept within comfortable f64 range in log-space.
pub const MAX_N: usize = 12;

/// A point of the chain: particle index n at diffusion time t and 2d Toda
/// coordinates (x, y).
#[derive(Debug, Clone, Copy)]
pub struct TauChainPoint<T: Real = f64> {
    pub n: usize,
    pub t: T,
    pub x: T,
    pub y: T,
}

impl<T: Real> TauChainPoint<T> {
    pub fn new(n: usize, t: T, x: T, y: T) -> Result<Self> {
        if n == 0 || n > MAX_N {
            return Err(Error::Config(format!("particle index must be in 1..={MAX_N}, got {n}")));
        }
        if !(t > T::zero()) {
            return Err(Error::Config(format!("time must be positive, got {t}")));
        }
        Ok(Self { n, t, x, y })
    }
}

/// The heat kernel u(t, x, y) = exp(-(x-y)^2 / 2t) / sqrt(2 pi t).
pub fn heat_kernel<T: Real>(t: T, x: T, y: T) -> Result<T> {
    Ok(log_heat_kernel(t, x, y)?.exp())
}

pub fn log_heat_kernel<T: Real>(t: T, x: T, y: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::Config(format!("heat kernel needs t > 0, got {t}")));
    }
    let half = lit::<T>(0.5);
    let s = x - y;
    Ok(-s * s / (t + t) - half * (lit::<T>(2.0) * T::PI() * t).ln())
}

/// ln tau_n = -(n(n-1)/2) ln t + sum_{j=1}^{n-1} ln j! + n ln u(t,x,y),
/// with the convention tau_0 = 1.
pub fn log_tau<T: Real>(p: TauChainPoint<T>) -> Result<T> {
    log_tau_parts(p.n, p.t, p.x, p.y)
}

fn log_tau_parts<T: Real>(n: usize, t: T, x: T, y: T) -> Result<T> {
    if n == 0 {
        return Ok(T::zero());
    }
    let nf = lit::<T>(n as f64);
    let exponent = lit::<T>((n * (n - 1)) as f64 / 2.0);
    let factorials: f64 = (1..n).map(ln_factorial).sum();
    Ok(-exponent * t.ln() + lit::<T>(factorials) + nf * log_heat_kernel(t, x, y)?)
}

/// The field h_n = ln(tau_n / tau_{n-1}); h_0 is +infinity by convention and
/// is never evaluated here.
pub fn h_field<T: Real>(n: usize, t: T, x: T, y: T) -> Result<T> {
    if n == 0 {
        return Err(Error::Config("h_0 is +infinity by convention".into()));
    }
    Ok(log_tau_parts(n, t, x, y)? - log_tau_parts(n - 1, t, x, y)?)
}

/// Residuals of the 2d Toda relation at p:
/// r_xy = |(ln tau_n)_{xy} - n/t| and r_xx = |(ln tau_n)_{xx} + n/t|,
/// with central mixed/second differences of step h.
pub fn toda2d_residuals<T: Real>(p: TauChainPoint<T>, h: T) -> Result<(T, T)> {
    if !(h > T::zero()) {
        return Err(Error::Config("step h must be positive".into()));
    }
    let lt = |x: T, y: T| log_tau_parts(p.n, p.t, x, y);
    let (x, y) = (p.x, p.y);
    let four_h2 = lit::<T>(4.0) * h * h;
    let mixed = (lt(x + h, y + h)? - lt(x + h, y - h)? - lt(x - h, y + h)? + lt(x - h, y - h)?)
        / four_h2;
    let two = lit::<T>(2.0);
    let second = (lt(x + h, y)? - two * lt(x, y)? + lt(x - h, y)?) / (h * h);
    let a_n = lit::<T>(p.n as f64) / p.t;
    Ok(((mixed - a_n).abs(), (second + a_n).abs()))
}

/// Residual of the semi-infinite Toda chain equation of motion
/// (h_n)_{xx} = e^{h_n - h_{n-1}} - e^{h_{n+1} - h_n}, with e^{h_1 - h_0} = 0.
pub fn chain_residual<T: Real>(n: usize, t: T, x: T, y: T, h: T) -> Result<T> {
    if n == 0 || n + 1 > MAX_N {
        return Err(Error::Config(format!(
            "chain residual needs 1 <= n <= {}, got {n}",
            MAX_N - 1
        )));
    }
    if !(h > T::zero()) {
        return Err(Error::Config("step h must be positive".into()));
    }
    let two = lit::<T>(2.0);
    let hxx = (h_field(n, t, x + h, y)? - two * h_field(n, t, x, y)? + h_field(n, t, x - h, y)?)
        / (h * h);
    // h_n - h_{n-1} = ln a_{n-1}; the n = 1 term vanishes by the h_0 convention
    let lower = if n == 1 {
        T::zero()
    } else {
        (h_field(n, t, x, y)? - h_field(n - 1, t, x, y)?).exp()
    };
    let upper = (h_field(n + 1, t, x, y)? - h_field(n, t, x, y)?).exp();
    Ok((hxx - (lower - upper)).abs())
}
