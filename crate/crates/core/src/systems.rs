//! The four rank-one integrable systems and their kernel functions.
//!
//! Each system is defined by a kernel K(x,u) on an open domain D. The
//! log-gradients of K drive everything else: the Bäcklund flow, the drift of
//! the stochastic system, the Lax momentum and the quadrature eigenfunctions.
//! All gradients here are hand-derived closed forms; finite differences are
//! used only as test oracles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// Which integrable system a [`SystemSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SystemKind {
    Toda,
    RationalCm,
    HyperbolicI,
    HyperbolicII,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Toda => "toda",
            SystemKind::RationalCm => "rational",
            SystemKind::HyperbolicI => "hyperbolic1",
            SystemKind::HyperbolicII => "hyperbolic2",
        }
    }
}

/// A point (x, u) of the extended phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint<T: Real = f64> {
    pub x: T,
    pub u: T,
}

impl<T: Real> PhasePoint<T> {
    pub fn new(x: T, u: T) -> Self {
        Self { x, u }
    }
}

/// Integration bounds of the u-section of D at fixed x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum USection<T: Real = f64> {
    /// u ranges over (-x, x).
    Bounded(T, T),
    /// u ranges over the whole real line (truncated numerically).
    Unbounded,
}

/// One of the four systems together with its parameters (epsilon, mu).
///
/// Toda and rational Calogero-Moser carry no free parameters; epsilon and mu
/// are fixed at 1 internally so the hyperbolic formulas specialize correctly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemSpec<T: Real = f64> {
    kind: SystemKind,
    epsilon: T,
    mu: T,
}

impl<T: Real> SystemSpec<T> {
    /// Rank-one Toda lattice, K(x,u) = exp(-e^{-x} cosh u) on R^2.
    pub fn toda() -> Self {
        Self {
            kind: SystemKind::Toda,
            epsilon: T::one(),
            mu: T::one(),
        }
    }

    /// Rational Calogero-Moser, K(x,u) = (x^2-u^2)/x on {|u| < x}.
    pub fn rational_cm() -> Self {
        Self {
            kind: SystemKind::RationalCm,
            epsilon: T::one(),
            mu: T::one(),
        }
    }

    /// Hyperbolic Calogero-Moser with the sinh-product kernel on {|u| < x}.
    /// Requires mu >= 1.
    pub fn hyperbolic_i(epsilon: T, mu: T) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(mu >= T::one()) {
            return Err(Error::Config(format!("hyperbolic I requires mu >= 1, got {mu}")));
        }
        Ok(Self {
            kind: SystemKind::HyperbolicI,
            epsilon,
            mu,
        })
    }

    /// Hyperbolic Calogero-Moser with the tanh-sum kernel on (0,inf) x R.
    /// Requires mu >= 1/2.
    pub fn hyperbolic_ii(epsilon: T, mu: T) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(mu >= lit(0.5)) {
            return Err(Error::Config(format!("hyperbolic II requires mu >= 1/2, got {mu}")));
        }
        Ok(Self {
            kind: SystemKind::HyperbolicII,
            epsilon,
            mu,
        })
    }

    /// Build by kind, validating the per-kind parameter bounds.
    pub fn new(kind: SystemKind, epsilon: T, mu: T) -> Result<Self> {
        match kind {
            SystemKind::Toda => Ok(Self::toda()),
            SystemKind::RationalCm => Ok(Self::rational_cm()),
            SystemKind::HyperbolicI => Self::hyperbolic_i(epsilon, mu),
            SystemKind::HyperbolicII => Self::hyperbolic_ii(epsilon, mu),
        }
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    /// Largest |lambda| for which the eigenfunction integral converges:
    /// eps*mu for hyperbolic II, unrestricted otherwise.
    pub fn lambda_cap(&self) -> Option<T> {
        match self.kind {
            SystemKind::HyperbolicII => Some(self.epsilon * self.mu),
            _ => None,
        }
    }

    /// True iff p lies strictly inside the open domain D.
    pub fn in_domain(&self, p: PhasePoint<T>) -> bool {
        if !p.x.is_finite() || !p.u.is_finite() {
            return false;
        }
        match self.kind {
            SystemKind::Toda => true,
            SystemKind::RationalCm | SystemKind::HyperbolicI => p.x > T::zero() && p.u.abs() < p.x,
            SystemKind::HyperbolicII => p.x > T::zero(),
        }
    }

    /// True iff x lies in the x-section of D.
    pub fn x_in_domain(&self, x: T) -> bool {
        match self.kind {
            SystemKind::Toda => x.is_finite(),
            _ => x.is_finite() && x > T::zero(),
        }
    }

    /// The u-range of D at fixed x.
    pub fn u_section(&self, x: T) -> USection<T> {
        match self.kind {
            SystemKind::Toda | SystemKind::HyperbolicII => USection::Unbounded,
            SystemKind::RationalCm | SystemKind::HyperbolicI => USection::Bounded(-x, x),
        }
    }

    fn check_domain(&self, p: PhasePoint<T>) -> Result<()> {
        if self.in_domain(p) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "point (x={}, u={}) outside D for {}",
                p.x,
                p.u,
                self.kind.name()
            )))
        }
    }

    fn check_x(&self, x: T) -> Result<()> {
        if self.x_in_domain(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "x={} outside the x-section of D for {}",
                x,
                self.kind.name()
            )))
        }
    }

    /// ln K_lambda(x,u) = lambda*u + ln K(x,u).
    pub fn log_kernel(&self, lambda: T, p: PhasePoint<T>) -> Result<T> {
        self.check_domain(p)?;
        Ok(lambda * p.u + self.log_kernel_raw(p.x, p.u))
    }

    /// ln K without domain checks; callers guarantee (x,u) is interior.
    pub(crate) fn log_kernel_raw(&self, x: T, u: T) -> T {
        let half = lit::<T>(0.5);
        match self.kind {
            SystemKind::Toda => -(-x).exp() * u.cosh(),
            SystemKind::RationalCm => (x - u).ln() + (x + u).ln() - x.ln(),
            SystemKind::HyperbolicI => {
                let e = self.epsilon;
                let a = e * (x + u) * half;
                let c = e * (x - u) * half;
                self.mu * (a.sinh().ln() + c.sinh().ln() - (e * x).sinh().ln())
            }
            SystemKind::HyperbolicII => {
                let e = self.epsilon;
                let a = e * (x + u) * half;
                let c = e * (x - u) * half;
                // ln cosh with an overflow-safe tail for large |arguments|
                self.mu * ((e * x).sinh().ln() - ln_cosh(a) - ln_cosh(c))
            }
        }
    }

    /// Closed-form gradient (d/dx, d/du) of ln K_lambda at p.
    pub fn grad_log_kernel(&self, lambda: T, p: PhasePoint<T>) -> Result<(T, T)> {
        self.check_domain(p)?;
        let (gx, gu) = self.grad_raw(p.x, p.u);
        Ok((gx, gu + lambda))
    }

    /// Gradient of ln K (lambda = 0), unchecked.
    pub(crate) fn grad_raw(&self, x: T, u: T) -> (T, T) {
        let half = lit::<T>(0.5);
        match self.kind {
            SystemKind::Toda => {
                let emx = (-x).exp();
                (emx * u.cosh(), -emx * u.sinh())
            }
            SystemKind::RationalCm => {
                let ip = (x + u).recip();
                let im = (x - u).recip();
                (im + ip - x.recip(), ip - im)
            }
            SystemKind::HyperbolicI => {
                let e = self.epsilon;
                let me2 = self.mu * e * half;
                let cta = coth(e * (x + u) * half);
                let ctc = coth(e * (x - u) * half);
                (me2 * (cta + ctc) - self.mu * e * coth(e * x), me2 * (cta - ctc))
            }
            SystemKind::HyperbolicII => {
                let e = self.epsilon;
                let me2 = self.mu * e * half;
                let ta = (e * (x + u) * half).tanh();
                let tc = (e * (x - u) * half).tanh();
                (self.mu * e * coth(e * x) - me2 * (ta + tc), -me2 * (ta - tc))
            }
        }
    }

    /// b(x,u) = (d/dx + d/du) ln K, the drift added to dU in the rewritten flow.
    pub fn drift_b(&self, p: PhasePoint<T>) -> Result<T> {
        self.check_domain(p)?;
        Ok(self.drift_b_raw(p.x, p.u))
    }

    pub(crate) fn drift_b_raw(&self, x: T, u: T) -> T {
        let half = lit::<T>(0.5);
        match self.kind {
            SystemKind::Toda => (-u - x).exp(),
            SystemKind::RationalCm => lit::<T>(2.0) / (x + u) - x.recip(),
            SystemKind::HyperbolicI => {
                let e = self.epsilon;
                self.mu * e * (coth(e * (x + u) * half) - coth(e * x))
            }
            SystemKind::HyperbolicII => {
                let e = self.epsilon;
                self.mu * e * (coth(e * x) - (e * (x + u) * half).tanh())
            }
        }
    }

    /// Right-hand side of the first kernel identity:
    /// (d_x ln K)^2 - (d_u ln K)^2 = grad_rhs(x).
    pub fn grad_rhs(&self, x: T) -> T {
        match self.kind {
            SystemKind::Toda => (lit::<T>(-2.0) * x).exp(),
            SystemKind::RationalCm => (x * x).recip(),
            SystemKind::HyperbolicI | SystemKind::HyperbolicII => {
                let em = self.epsilon * self.mu;
                let s = (self.epsilon * x).sinh();
                em * em / (s * s)
            }
        }
    }

    /// Right-hand side of the second kernel identity:
    /// d_x^2 ln K - d_u^2 ln K = lap_rhs(x).
    pub fn lap_rhs(&self, x: T) -> T {
        match self.kind {
            SystemKind::Toda => T::zero(),
            SystemKind::RationalCm => (x * x).recip(),
            SystemKind::HyperbolicI => {
                let e = self.epsilon;
                let s = (e * x).sinh();
                e * e * self.mu / (s * s)
            }
            SystemKind::HyperbolicII => {
                let e = self.epsilon;
                let s = (e * x).sinh();
                -(e * e * self.mu / (s * s))
            }
        }
    }

    /// Classical force on the x-coordinate: xddot = force(x).
    pub fn force(&self, x: T) -> T {
        match self.kind {
            SystemKind::Toda => -(lit::<T>(-2.0) * x).exp(),
            SystemKind::RationalCm => -(x * x * x).recip(),
            SystemKind::HyperbolicI | SystemKind::HyperbolicII => {
                let e = self.epsilon;
                let em = e * self.mu;
                let s = (e * x).sinh();
                -(e * em * em * (e * x).cosh() / (s * s * s))
            }
        }
    }

    /// Off-diagonal entry of the 2x2 Lax matrix.
    pub fn lax_offdiag(&self, x: T) -> T {
        match self.kind {
            SystemKind::Toda => (-x).exp(),
            SystemKind::RationalCm => x.recip(),
            SystemKind::HyperbolicI | SystemKind::HyperbolicII => {
                self.epsilon * self.mu / (self.epsilon * x).sinh()
            }
        }
    }

    /// Potential V(x) of the quantum Hamiltonian H = (1/2) d^2/dx^2 - V(x).
    ///
    /// Note the two hyperbolic kernels pair with different couplings:
    /// mu(mu+1) for hyperbolic I, mu(mu-1) for hyperbolic II.
    pub fn quantum_potential(&self, x: T) -> T {
        let half = lit::<T>(0.5);
        match self.kind {
            SystemKind::Toda => half * (lit::<T>(-2.0) * x).exp(),
            SystemKind::RationalCm => (x * x).recip(),
            SystemKind::HyperbolicI => {
                let e = self.epsilon;
                let s = (e * x).sinh();
                half * e * e * self.mu * (self.mu + T::one()) / (s * s)
            }
            SystemKind::HyperbolicII => {
                let e = self.epsilon;
                let s = (e * x).sinh();
                half * e * e * self.mu * (self.mu - T::one()) / (s * s)
            }
        }
    }

    fn check_lambda_cap(&self, lambda: T) -> Result<()> {
        if let Some(cap) = self.lambda_cap() {
            if lambda.abs() >= cap {
                return Err(Error::Range(format!(
                    "hyperbolic II requires |lambda| < eps*mu = {cap}, got lambda = {lambda}"
                )));
            }
        }
        Ok(())
    }

    /// The unique u with d_u ln K_lambda(x, u) = 0 in the u-section of D.
    pub fn critical_point(&self, lambda: T, x: T) -> Result<T> {
        self.check_x(x)?;
        self.check_lambda_cap(lambda)?;
        match self.kind {
            SystemKind::Toda => Ok(asinh_stable(lambda * x.exp())),
            SystemKind::RationalCm => {
                // root of lambda*u^2 + 2u - lambda*x^2 = 0 in (-x, x),
                // written to stay finite as lambda -> 0
                let lx = lambda * x;
                Ok(lambda * x * x / (T::one() + (T::one() + lx * lx).sqrt()))
            }
            SystemKind::HyperbolicI | SystemKind::HyperbolicII => self.critical_point_solve(lambda, x),
        }
    }

    /// Safeguarded Newton on g(u) = d_u ln K_lambda(x, u), which is strictly
    /// decreasing in u for both hyperbolic kernels.
    fn critical_point_solve(&self, lambda: T, x: T) -> Result<T> {
        let tol = lit::<T>(1e-12).max(T::epsilon() * lit(32.0));
        let g = |u: T| self.grad_raw(x, u).1 + lambda;

        let (mut lo, mut hi) = match self.kind {
            SystemKind::HyperbolicI => {
                // open interval (-x, x); push brackets off the poles
                let edge = x * lit::<T>(1e-12).max(T::epsilon());
                (-x + edge, x - edge)
            }
            SystemKind::HyperbolicII => {
                // expand until the sign change is bracketed
                let mut hi = x + T::one();
                let mut lo = -hi;
                let mut guard = 0;
                while g(hi) > T::zero() {
                    hi = hi + hi + T::one();
                    guard += 1;
                    if guard > 200 {
                        return Err(Error::Convergence("critical point bracket (upper)".into()));
                    }
                }
                while g(lo) < T::zero() {
                    lo = lo + lo - T::one();
                    guard += 1;
                    if guard > 400 {
                        return Err(Error::Convergence("critical point bracket (lower)".into()));
                    }
                }
                (lo, hi)
            }
            _ => unreachable!(),
        };

        let half = lit::<T>(0.5);
        let mut u = (lo + hi) * half;
        for _ in 0..100 {
            let gu = g(u);
            if gu.abs() <= tol {
                return Ok(u);
            }
            if gu > T::zero() {
                lo = u;
            } else {
                hi = u;
            }
            // analytic derivative of g
            let e = self.epsilon;
            let quarter = self.mu * e * e * lit::<T>(0.25);
            let gp = match self.kind {
                SystemKind::HyperbolicI => {
                    let sa = (e * (x + u) * half).sinh();
                    let sc = (e * (x - u) * half).sinh();
                    -quarter * ((sa * sa).recip() + (sc * sc).recip())
                }
                SystemKind::HyperbolicII => {
                    let ca = (e * (x + u) * half).cosh();
                    let cc = (e * (x - u) * half).cosh();
                    -quarter * ((ca * ca).recip() + (cc * cc).recip())
                }
                _ => unreachable!(),
            };
            let step = gu / gp;
            let mut next = u - step;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = (lo + hi) * half;
            }
            u = next;
        }
        if g(u).abs() <= tol * lit(100.0) {
            Ok(u)
        } else {
            Err(Error::Convergence(format!(
                "critical point solve stalled at residual {}",
                g(u).abs()
            )))
        }
    }

    /// Residuals of the two kernel identities at p.
    ///
    /// `r_grad` uses the closed-form gradients and is exact algebra;
    /// `r_lap` estimates the second log-derivatives by central differences
    /// of step h and carries an O(h^2) truncation error.
    pub fn backlund_residuals(&self, p: PhasePoint<T>, h: T) -> Result<(T, T)> {
        self.check_domain(p)?;
        if !(h > T::zero()) {
            return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
        }
        for q in [
            PhasePoint::new(p.x + h, p.u),
            PhasePoint::new(p.x - h, p.u),
            PhasePoint::new(p.x, p.u + h),
            PhasePoint::new(p.x, p.u - h),
        ] {
            self.check_domain(q)?;
        }
        let (gx, gu) = self.grad_raw(p.x, p.u);
        let r_grad = (gx * gx - gu * gu - self.grad_rhs(p.x)).abs();

        let f0 = self.log_kernel_raw(p.x, p.u);
        let two = lit::<T>(2.0);
        let dxx = (self.log_kernel_raw(p.x + h, p.u) - two * f0 + self.log_kernel_raw(p.x - h, p.u))
            / (h * h);
        let duu = (self.log_kernel_raw(p.x, p.u + h) - two * f0 + self.log_kernel_raw(p.x, p.u - h))
            / (h * h);
        let r_lap = (dxx - duu - self.lap_rhs(p.x)).abs();
        Ok((r_grad, r_lap))
    }

    /// Conservation of the Lax eigenvalue on the iso-spectral manifold:
    /// with u = u_lambda(x) and p = d_x ln K, returns |p^2 - offdiag^2 - lambda^2|.
    pub fn lax_residual(&self, lambda: T, x: T) -> Result<T> {
        let u = self.critical_point(lambda, x)?;
        let (p, _) = self.grad_raw(x, u);
        let off = self.lax_offdiag(x);
        Ok((p * p - off * off - lambda * lambda).abs())
    }
}

/// coth with no intermediate overflow.
#[inline]
pub(crate) fn coth<T: Real>(z: T) -> T {
    z.tanh().recip()
}

/// ln cosh z, safe for |z| large where cosh would overflow.
#[inline]
pub(crate) fn ln_cosh<T: Real>(z: T) -> T {
    let a = z.abs();
    if a > lit(30.0) {
        // cosh z = e^|z| (1 + e^{-2|z|}) / 2
        a - lit::<T>(2.0).ln() + (-(a + a)).exp().ln_1p()
    } else {
        a.cosh().ln()
    }
}

/// asinh that stays accurate for very large arguments.
#[inline]
fn asinh_stable<T: Real>(z: T) -> T {
    z.asinh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;

    fn all_specs() -> Vec<SystemSpec> {
        vec![
            SystemSpec::toda(),
            SystemSpec::rational_cm(),
            SystemSpec::hyperbolic_i(1.0, 1.0).unwrap(),
            SystemSpec::hyperbolic_i(1.0, 2.5).unwrap(),
            SystemSpec::hyperbolic_ii(1.0, 1.0).unwrap(),
            SystemSpec::hyperbolic_ii(0.7, 2.0).unwrap(),
        ]
    }

    /// Random interior point, kept away from the boundary so finite
    /// differences have room.
    fn random_point(spec: &SystemSpec, rng: &mut RngStream) -> PhasePoint {
        let x = 0.4 + 2.2 * rng.uniform();
        let u = match spec.u_section(x) {
            USection::Bounded(..) => (2.0 * rng.uniform() - 1.0) * 0.8 * x,
            USection::Unbounded => 3.0 * (2.0 * rng.uniform() - 1.0),
        };
        PhasePoint::new(x, u)
    }

    #[test]
    fn construction_bounds() {
        assert!(SystemSpec::<f64>::hyperbolic_i(1.0, 0.8).is_err());
        assert!(SystemSpec::<f64>::hyperbolic_ii(1.0, 0.4).is_err());
        assert!(SystemSpec::<f64>::hyperbolic_ii(-1.0, 1.0).is_err());
        assert!(SystemSpec::<f64>::hyperbolic_ii(1.0, 0.5).is_ok());
    }

    #[test]
    fn domain_membership() {
        let rcm = SystemSpec::rational_cm();
        assert!(rcm.in_domain(PhasePoint::new(1.0, 0.5)));
        assert!(!rcm.in_domain(PhasePoint::new(1.0, 1.0)));
        assert!(!rcm.in_domain(PhasePoint::new(-1.0, 0.0)));
        let h2 = SystemSpec::hyperbolic_ii(1.0, 1.0).unwrap();
        assert!(h2.in_domain(PhasePoint::new(0.1, -50.0)));
        assert!(!h2.in_domain(PhasePoint::new(0.0, 0.0)));
        let toda = SystemSpec::toda();
        assert!(toda.in_domain(PhasePoint::new(-100.0, 100.0)));
    }

    #[test]
    fn log_kernel_values() {
        let toda = SystemSpec::toda();
        assert_relative_eq!(toda.log_kernel(0.0, PhasePoint::new(0.0, 0.0)).unwrap(), -1.0);
        let rcm = SystemSpec::rational_cm();
        assert_relative_eq!(rcm.log_kernel(0.0, PhasePoint::new(1.0, 0.0)).unwrap(), 0.0);
        let h2 = SystemSpec::hyperbolic_ii(1.0, 2.0).unwrap();
        let expect = 2.0 * (2.0 * 0.5f64.tanh()).ln();
        assert_relative_eq!(
            h2.log_kernel(0.0, PhasePoint::new(1.0, 0.0)).unwrap(),
            expect,
            max_relative = 1e-14
        );
        assert!(rcm.log_kernel(0.0, PhasePoint::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn gradient_closed_forms() {
        let toda = SystemSpec::toda();
        let (gx, gu) = toda.grad_log_kernel(0.0, PhasePoint::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(gx, 1.0);
        assert_relative_eq!(gu, 0.0);
        let rcm = SystemSpec::rational_cm();
        let (gx, gu) = rcm.grad_log_kernel(0.0, PhasePoint::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(gx, 1.0);
        assert_relative_eq!(gu, 0.0);
    }

    #[test]
    fn lambda_shifts_only_gu() {
        let mut rng = RngStream::new(7, 0);
        for spec in all_specs() {
            let p = random_point(&spec, &mut rng);
            let (gx0, gu0) = spec.grad_log_kernel(0.0, p).unwrap();
            let (gx3, gu3) = spec.grad_log_kernel(3.0, p).unwrap();
            assert_eq!(gx0, gx3);
            assert_relative_eq!(gu3 - gu0, 3.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        let mut rng = RngStream::new(42, 0);
        for spec in all_specs() {
            for _ in 0..100 {
                let p = random_point(&spec, &mut rng);
                let (gx, gu) = spec.grad_log_kernel(0.3, p).unwrap();
                let fd_x = (spec.log_kernel(0.3, PhasePoint::new(p.x + h, p.u)).unwrap()
                    - spec.log_kernel(0.3, PhasePoint::new(p.x - h, p.u)).unwrap())
                    / (2.0 * h);
                let fd_u = (spec.log_kernel(0.3, PhasePoint::new(p.x, p.u + h)).unwrap()
                    - spec.log_kernel(0.3, PhasePoint::new(p.x, p.u - h)).unwrap())
                    / (2.0 * h);
                assert!(
                    (gx - fd_x).abs() <= 1e-6,
                    "{}: gx={gx} fd={fd_x} at {p:?}",
                    spec.kind().name()
                );
                assert!(
                    (gu - fd_u).abs() <= 1e-6,
                    "{}: gu={gu} fd={fd_u} at {p:?}",
                    spec.kind().name()
                );
            }
        }
    }

    #[test]
    fn drift_values() {
        let toda = SystemSpec::toda();
        assert_relative_eq!(toda.drift_b(PhasePoint::new(0.0, 0.0)).unwrap(), 1.0);
        let rcm = SystemSpec::rational_cm();
        assert_relative_eq!(rcm.drift_b(PhasePoint::new(1.0, 0.0)).unwrap(), 1.0);
        let h2 = SystemSpec::hyperbolic_ii(1.0, 1.0).unwrap();
        let expect = 1.0 / 1.0f64.tanh() - 0.5f64.tanh();
        assert_relative_eq!(
            h2.drift_b(PhasePoint::new(1.0, 0.0)).unwrap(),
            expect,
            max_relative = 1e-14
        );
        // b = gx + gu at lambda = 0
        let mut rng = RngStream::new(3, 0);
        for spec in all_specs() {
            let p = random_point(&spec, &mut rng);
            let (gx, gu) = spec.grad_log_kernel(0.0, p).unwrap();
            assert_relative_eq!(spec.drift_b(p).unwrap(), gx + gu, max_relative = 1e-11, epsilon = 1e-13);
        }
    }

    #[test]
    fn critical_point_values() {
        let toda = SystemSpec::toda();
        assert_eq!(toda.critical_point(0.0, 1.7).unwrap(), 0.0);
        let rcm = SystemSpec::rational_cm();
        assert_relative_eq!(
            rcm.critical_point(1.0, 1.0).unwrap(),
            std::f64::consts::SQRT_2 - 1.0,
            max_relative = 1e-14
        );
        let h2 = SystemSpec::hyperbolic_ii(1.0, 1.0).unwrap();
        assert!(matches!(h2.critical_point(1.5, 1.0), Err(Error::Range(_))));
        assert!(matches!(rcm.critical_point(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn critical_point_residual_and_oddness() {
        let lambdas = [0.0, 0.2, 0.55, 0.9];
        let xs = [0.3, 0.9, 1.6, 2.5];
        for spec in all_specs() {
            let cap = spec.lambda_cap().unwrap_or(1.0);
            for &l in &lambdas {
                let lambda = l * cap;
                for &x in &xs {
                    let u = spec.critical_point(lambda, x).unwrap();
                    let (_, gu) = spec.grad_log_kernel(lambda, PhasePoint::new(x, u)).unwrap();
                    assert!(
                        gu.abs() <= 1e-12,
                        "{}: residual {} at lambda={lambda} x={x}",
                        spec.kind().name(),
                        gu.abs()
                    );
                    let um = spec.critical_point(-lambda, x).unwrap();
                    assert!(
                        (um + u).abs() <= 1e-12,
                        "{}: oddness violated at lambda={lambda} x={x}",
                        spec.kind().name()
                    );
                }
            }
        }
    }

    #[test]
    fn backlund_residual_values() {
        let toda = SystemSpec::toda();
        let (rg, _) = toda.backlund_residuals(PhasePoint::new(0.0, 0.0), 1e-4).unwrap();
        assert!(rg < 1e-14);
        let rcm = SystemSpec::rational_cm();
        let (rg, _) = rcm.backlund_residuals(PhasePoint::new(1.0, 0.0), 1e-4).unwrap();
        assert!(rg < 1e-14);
        let h2 = SystemSpec::hyperbolic_ii(1.0, 2.0).unwrap();
        let (rg, _) = h2.backlund_residuals(PhasePoint::new(1.0, 0.0), 1e-4).unwrap();
        assert!(rg < 1e-12);
    }

    #[test]
    fn backlund_residuals_on_random_grid() {
        let mut rng = RngStream::new(11, 0);
        for spec in all_specs() {
            for _ in 0..50 {
                let p = random_point(&spec, &mut rng);
                let (rg, rl) = spec.backlund_residuals(p, 1e-4).unwrap();
                assert!(rg <= 1e-10, "{}: r_grad = {rg} at {p:?}", spec.kind().name());
                // central second differences carry O(h^2) truncation plus
                // cancellation noise; the interior points above keep the
                // third derivatives O(100)
                assert!(rl <= 1e-4, "{}: r_lap = {rl} at {p:?}", spec.kind().name());
            }
        }
    }

    #[test]
    fn lax_residual_values() {
        let rcm = SystemSpec::rational_cm();
        assert!(rcm.lax_residual(1.0, 1.0).unwrap() < 1e-12);
        let toda = SystemSpec::toda();
        assert!(toda.lax_residual(0.0, 0.37).unwrap() < 1e-14);
        let h1 = SystemSpec::hyperbolic_i(1.0, 1.0).unwrap();
        assert!(h1.lax_residual(0.0, 1.0).unwrap() < 1e-12);
        // nonzero lambda across systems
        for spec in all_specs() {
            let cap = spec.lambda_cap().unwrap_or(1.0);
            for l in [0.3 * cap, -0.75 * cap] {
                for x in [0.5, 1.3, 2.1] {
                    let r = spec.lax_residual(l, x).unwrap();
                    assert!(r < 1e-10, "{}: lax residual {r} at lambda={l} x={x}", spec.kind().name());
                }
            }
        }
    }

    #[test]
    fn generic_scalar_smoke() {
        let spec32: SystemSpec<f32> = SystemSpec::toda();
        let v = spec32.log_kernel(0.0, PhasePoint::new(0.0f32, 0.0)).unwrap();
        assert!((v + 1.0).abs() < 1e-6);
    }
}
