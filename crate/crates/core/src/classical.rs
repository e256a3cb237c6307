//! Deterministic Bäcklund flows: explicit solutions, RK4 integration of the
//! rewritten evolution equations, and residual diagnostics along trajectories.

use std::io::Write;

use crate::error::{Error, Result};
use crate::real::{lit, Real};
use crate::systems::{PhasePoint, SystemKind, SystemSpec};

/// A flow trajectory on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real = f64> {
    pub times: Vec<T>,
    pub states: Vec<PhasePoint<T>>,
    pub spec: SystemSpec<T>,
    pub lambda: T,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dt(&self) -> T {
        self.times[1] - self.times[0]
    }

    pub fn endpoint(&self) -> PhasePoint<T> {
        *self.states.last().unwrap()
    }

    /// CSV with header `t,x,u`, 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,u")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e}",
                t.as_f64(),
                s.x.as_f64(),
                s.u.as_f64()
            )?;
        }
        Ok(())
    }
}

/// Residual summary of a trajectory, all maxima over interior grid points.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ConservationReport {
    /// max |du/dt - lambda| by central differences
    pub r_u: f64,
    /// max |p^2 - offdiag^2 - lambda^2| with p = dx/dt by central differences
    pub r_lax: f64,
    /// max |d2x/dt2 - force(x)| by central second differences
    pub r_eom: f64,
}

const LAMBDA_ZERO_SWITCH: f64 = 1e-14;

/// Explicit semi-global solution of the rewritten flow at time t,
/// started on the iso-spectral manifold at x(0) = x0.
pub fn flow_exact<T: Real>(spec: &SystemSpec<T>, lambda: T, x0: T, t: T) -> Result<PhasePoint<T>> {
    if !spec.x_in_domain(x0) {
        return Err(Error::Domain(format!(
            "x0={x0} outside the x-section of D for {}",
            spec.kind().name()
        )));
    }
    if !(t >= T::zero()) {
        return Err(Error::Config(format!("flow time must be >= 0, got {t}")));
    }
    if let Some(cap) = spec.lambda_cap() {
        if lambda.abs() >= cap {
            return Err(Error::Range(format!(
                "hyperbolic II flow requires |lambda| < eps*mu = {cap}, got {lambda}"
            )));
        }
    }
    let e = spec.epsilon();
    let mu = spec.mu();
    if lambda.abs() < lit(LAMBDA_ZERO_SWITCH) {
        // the lambda != 0 formulas degrade as 0/0 here
        let x = match spec.kind() {
            SystemKind::Toda => (x0.exp() + t).ln(),
            SystemKind::RationalCm => (x0 * x0 + lit::<T>(2.0) * t).sqrt(),
            SystemKind::HyperbolicI | SystemKind::HyperbolicII => {
                ((e * x0).cosh() + e * e * mu * t).acosh() / e
            }
        };
        return Ok(PhasePoint::new(x, T::zero()));
    }

    let u0 = spec.critical_point(lambda, x0)?;
    let u = u0 + lambda * t;
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let x = match spec.kind() {
        SystemKind::Toda => ln_sinh_over(u, lambda),
        SystemKind::RationalCm => (u * u + two * u / lambda).sqrt(),
        SystemKind::HyperbolicI => {
            let inner = e * mu / (two * lambda) * (e * u).sinh()
                + (e * u * half).cosh() * (e * u * half).cosh();
            two / e * inner.max(T::one()).sqrt().acosh()
        }
        SystemKind::HyperbolicII => {
            let s = (e * u * half).sinh();
            let inner = e * mu / (two * lambda) * (e * u).sinh() - s * s;
            two / e * inner.max(T::one()).sqrt().acosh()
        }
    };
    Ok(PhasePoint::new(x, u))
}

/// ln(sinh(u)/lambda), valid on the manifold where sinh(u)/lambda > 0,
/// overflow-safe for large |u|.
fn ln_sinh_over<T: Real>(u: T, lambda: T) -> T {
    let a = u.abs();
    if a > lit(30.0) {
        a - (lit::<T>(2.0) * lambda.abs()).ln() + (-(a + a)).exp().ln_1p()
    } else {
        (u.sinh() / lambda).ln()
    }
}

/// Classical RK4 on du/dt = lambda, dx/dt = lambda + b(x, u), starting from
/// the on-manifold point (x0, u_lambda(x0)).
pub fn flow_rk4<T: Real>(
    spec: &SystemSpec<T>,
    lambda: T,
    x0: T,
    horizon: T,
    dt: T,
) -> Result<Trajectory<T>> {
    if !(dt > T::zero()) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= dt) {
        return Err(Error::Config(format!("horizon must be >= dt, got {horizon}")));
    }
    let u0 = spec.critical_point(lambda, x0)?;
    let n_steps = (horizon / dt).as_f64().round() as usize;
    let n_steps = n_steps.max(1);

    let stage = |x: T, u: T| -> Result<(T, T)> {
        let p = PhasePoint::new(x, u);
        if !spec.in_domain(p) {
            return Err(Error::Step(format!(
                "RK4 stage left D at (x={x}, u={u}) for {}",
                spec.kind().name()
            )));
        }
        Ok((lambda + spec.drift_b(p)?, lambda))
    };

    let half = lit::<T>(0.5);
    let sixth = T::one() / lit::<T>(6.0);
    let mut x = x0;
    let mut u = u0;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(T::zero());
    states.push(PhasePoint::new(x, u));
    for k in 0..n_steps {
        let (k1x, k1u) = stage(x, u)?;
        let (k2x, k2u) = stage(x + dt * half * k1x, u + dt * half * k1u)?;
        let (k3x, k3u) = stage(x + dt * half * k2x, u + dt * half * k2u)?;
        let (k4x, k4u) = stage(x + dt * k3x, u + dt * k3u)?;
        let two = lit::<T>(2.0);
        x = x + dt * sixth * (k1x + two * k2x + two * k3x + k4x);
        u = u + dt * sixth * (k1u + two * k2u + two * k3u + k4u);
        let p = PhasePoint::new(x, u);
        if !spec.in_domain(p) {
            return Err(Error::Step(format!("RK4 step left D at t index {k}")));
        }
        times.push(dt * lit::<T>((k + 1) as f64));
        states.push(p);
    }
    Ok(Trajectory {
        times,
        states,
        spec: *spec,
        lambda,
    })
}

/// Finite-difference conservation residuals along a trajectory; the first and
/// last two grid points are dropped so the five-point first-derivative
/// stencils stay interior and central.
pub fn conservation_report<T: Real>(traj: &Trajectory<T>) -> Result<ConservationReport> {
    let n = traj.len();
    if n < 5 {
        return Err(Error::Config(format!("trajectory too short ({n} points, need >= 5)")));
    }
    let dt = traj.dt();
    let twelve_dt = lit::<T>(12.0) * dt;
    let dt2 = dt * dt;
    let eight = lit::<T>(8.0);
    let lambda = traj.lambda;
    let (mut r_u, mut r_lax, mut r_eom) = (T::zero(), T::zero(), T::zero());
    // fourth-order first derivatives: the O(dt^2) three-point error would
    // otherwise dominate the Lax residual
    let d1 = |f: &dyn Fn(usize) -> T, i: usize| {
        (f(i - 2) - eight * f(i - 1) + eight * f(i + 1) - f(i + 2)) / twelve_dt
    };
    let fx = |i: usize| traj.states[i].x;
    let fu = |i: usize| traj.states[i].u;
    for i in 2..n - 2 {
        let cur = traj.states[i];
        let udot = d1(&fu, i);
        r_u = r_u.max((udot - lambda).abs());
        let p = d1(&fx, i);
        let off = traj.spec.lax_offdiag(cur.x);
        r_lax = r_lax.max((p * p - off * off - lambda * lambda).abs());
        let xdd = (fx(i + 1) - (cur.x + cur.x) + fx(i - 1)) / dt2;
        r_eom = r_eom.max((xdd - traj.spec.force(cur.x)).abs());
    }
    Ok(ConservationReport {
        r_u: r_u.as_f64(),
        r_lax: r_lax.as_f64(),
        r_eom: r_eom.as_f64(),
    })
}

/// Residual of the gradient-flow identity
/// d/dx[ln K_lambda(x, u_lambda(x))] = (d_x ln K_lambda)(x, u_lambda(x)),
/// with the left side by central differences of step h (re-solving the
/// critical point at x +/- h).
pub fn gradient_identity_residual<T: Real>(
    spec: &SystemSpec<T>,
    lambda: T,
    x: T,
    h: T,
) -> Result<T> {
    if !(h > T::zero()) {
        return Err(Error::Config(format!("step h must be positive, got {h}")));
    }
    let along = |xi: T| -> Result<T> {
        let u = spec.critical_point(lambda, xi)?;
        spec.log_kernel(lambda, PhasePoint::new(xi, u))
    };
    let fd = (along(x + h)? - along(x - h)?) / (h + h);
    let u = spec.critical_point(lambda, x)?;
    let (gx, _) = spec.grad_log_kernel(lambda, PhasePoint::new(x, u))?;
    Ok((fd - gx).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_flow_closed_values() {
        let toda = SystemSpec::toda();
        let p = flow_exact(&toda, 0.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(p.x, std::f64::consts::LN_2, max_relative = 1e-14);
        assert_eq!(p.u, 0.0);

        let rcm = SystemSpec::rational_cm();
        let p = flow_exact(&rcm, 0.0, 1.0, 4.0).unwrap();
        assert_relative_eq!(p.x, 3.0, max_relative = 1e-14);

        let h1 = SystemSpec::hyperbolic_i(1.0, 1.0).unwrap();
        let x0 = 1.5f64.acosh();
        let p = flow_exact(&h1, 0.0, x0, 0.5).unwrap();
        assert_relative_eq!(p.x, 2.0f64.acosh(), max_relative = 1e-14);
    }

    #[test]
    fn exact_flow_preconditions() {
        let h2 = SystemSpec::hyperbolic_ii(1.0, 1.0).unwrap();
        assert!(matches!(flow_exact(&h2, 1.2, 1.0, 1.0), Err(Error::Range(_))));
        let rcm = SystemSpec::rational_cm();
        assert!(matches!(flow_exact(&rcm, 0.0, -1.0, 1.0), Err(Error::Domain(_))));
    }

    fn case_specs() -> Vec<(SystemSpec, Vec<f64>)> {
        vec![
            (SystemSpec::toda(), vec![0.7, -0.4]),
            (SystemSpec::rational_cm(), vec![1.0, -0.6]),
            (SystemSpec::hyperbolic_i(1.0, 1.5).unwrap(), vec![0.8, -0.5]),
            (SystemSpec::hyperbolic_ii(1.0, 1.0).unwrap(), vec![0.5, -0.8]),
        ]
    }

    #[test]
    fn rk4_matches_exact_flow() {
        for (spec, lambdas) in case_specs() {
            let x0 = 1.0;
            for lambda in lambdas {
                let traj = flow_rk4(&spec, lambda, x0, 1.0, 1e-3).unwrap();
                let end = traj.endpoint();
                let exact = flow_exact(&spec, lambda, x0, 1.0).unwrap();
                assert!(
                    (end.x - exact.x).abs() < 1e-9,
                    "{} lambda={lambda}: |{} - {}|",
                    spec.kind().name(),
                    end.x,
                    exact.x
                );
                assert!((end.u - exact.u).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rk4_u_component_is_exactly_linear() {
        let spec = SystemSpec::rational_cm();
        let lambda = 0.83;
        let traj = flow_rk4(&spec, lambda, 1.2, 1.0, 1e-3).unwrap();
        let u0: f64 = traj.states[0].u;
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert!((s.u - u0 - lambda * t).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let spec = SystemSpec::toda();
        let err = |dt: f64| {
            let end = flow_rk4(&spec, 0.7, 0.0, 1.0, dt).unwrap().endpoint();
            let exact = flow_exact(&spec, 0.7, 0.0, 1.0).unwrap();
            (end.x - exact.x).abs()
        };
        let ratio = err(4e-3) / err(2e-3);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rk4_rejects_step_leaving_domain() {
        // a huge step drives the RK4 stages across the |u| < x wall
        let spec = SystemSpec::rational_cm();
        let res = flow_rk4(&spec, -1.0, 1.0, 10.0, 5.0);
        assert!(matches!(res, Err(Error::Step(_))), "{res:?}");
    }

    #[test]
    fn constraint_stable_along_trajectories() {
        for (spec, lambdas) in case_specs() {
            for lambda in lambdas {
                let traj = flow_rk4(&spec, lambda, 1.0, 1.0, 1e-3).unwrap();
                for s in &traj.states {
                    let (_, gu) = spec.grad_log_kernel(lambda, *s).unwrap();
                    assert!(
                        gu.abs() <= 1e-6,
                        "{}: constraint residual {} at {s:?}",
                        spec.kind().name(),
                        gu.abs()
                    );
                }
            }
        }
    }

    #[test]
    fn conservation_residuals() {
        let toda = SystemSpec::toda();
        let traj = flow_rk4(&toda, 0.7, 0.0, 1.0, 1e-3).unwrap();
        let rep = conservation_report(&traj).unwrap();
        assert!(rep.r_u < 1e-8, "r_u = {}", rep.r_u);
        assert!(rep.r_lax < 1e-6, "r_lax = {}", rep.r_lax);

        let rcm = SystemSpec::rational_cm();
        let traj = flow_rk4(&rcm, 0.0, 1.0, 1.0, 1e-3).unwrap();
        let rep = conservation_report(&traj).unwrap();
        assert!(rep.r_eom < 1e-4, "r_eom = {}", rep.r_eom);
        assert!(rep.r_lax < 1e-6);

        let short = Trajectory {
            times: vec![0.0, 1.0],
            states: vec![PhasePoint::new(1.0, 0.0); 2],
            spec: rcm,
            lambda: 0.0,
        };
        assert!(conservation_report(&short).is_err());
    }

    #[test]
    fn exact_flow_semigroup_property() {
        for (spec, lambdas) in case_specs() {
            for lambda in lambdas.into_iter().chain([0.0]) {
                let (s, t) = (0.4, 0.9);
                let direct = flow_exact(&spec, lambda, 1.0, s + t).unwrap();
                let mid = flow_exact(&spec, lambda, 1.0, s).unwrap();
                let chained = flow_exact(&spec, lambda, mid.x, t).unwrap();
                assert!(
                    (direct.x - chained.x).abs() < 1e-10,
                    "{} lambda={lambda}: {} vs {}",
                    spec.kind().name(),
                    direct.x,
                    chained.x
                );
            }
        }
    }

    #[test]
    fn gradient_identity_residuals() {
        let toda = SystemSpec::toda();
        assert!(gradient_identity_residual(&toda, 1.0, 0.0, 1e-4).unwrap() < 1e-7);
        let rcm = SystemSpec::rational_cm();
        assert!(gradient_identity_residual(&rcm, 0.0, 1.0, 1e-4).unwrap() < 1e-8);
        let h2 = SystemSpec::hyperbolic_ii(1.0, 2.0).unwrap();
        assert!(gradient_identity_residual(&h2, 0.5, 1.0, 1e-4).unwrap() < 1e-7);
    }

    #[test]
    fn trajectory_csv_round_trips_grid() {
        let spec = SystemSpec::toda();
        let traj = flow_rk4(&spec, 0.3, 0.0, 0.01, 1e-3).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x,u");
        let row: Vec<f64> = lines
            .nth(3)
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(row[0], traj.times[3]);
        assert_eq!(row[1], traj.states[3].x);
    }
}
