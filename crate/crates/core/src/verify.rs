//! Identity and law verification: finite-difference intertwining residuals,
//! Kolmogorov-Smirnov machinery, and the Monte Carlo tests comparing the
//! stochastic Bäcklund x-marginal with the ground-state-transformed target
//! diffusion.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, integrate_adaptive, integrate_fixed, QuadratureSpec, NODES_PER_PANEL};
use crate::real::{lit, Real};
use crate::rng::RngStream;
use crate::stochastic::{
    pitman_paths_recorded, simulate_backlund_recorded, simulate_scalar_em,
    simulate_target_recorded, InitialU, McConfig,
};
use crate::systems::{PhasePoint, SystemKind, SystemSpec, USection};
use crate::{eigen, systems};

/// Two-sample Kolmogorov-Smirnov verdict.
#[derive(Debug, Clone, Serialize)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub m: usize,
    pub pass: bool,
}

/// Max-residual verdict over a grid (or over bins, for conditional tests).
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub max_abs: f64,
    pub grid: String,
    pub pass: bool,
}

/// Exact sup-distance between the empirical CDFs of two samples.
pub fn ks_statistic<T: Real>(a: &[T], b: &[T]) -> f64 {
    let mut xs: Vec<f64> = a.iter().map(|v| v.as_f64()).collect();
    let mut ys: Vec<f64> = b.iter().map(|v| v.as_f64()).collect();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut diff = 0.0f64;
    let mut sup = 0.0f64;
    while i < xs.len() || j < ys.len() {
        let xv = xs.get(i).copied().unwrap_or(f64::INFINITY);
        let yv = ys.get(j).copied().unwrap_or(f64::INFINITY);
        // advance over ties in lockstep so the sup is taken between jumps
        if xv <= yv {
            while i < xs.len() && xs[i] == xv {
                diff += 1.0 / n;
                i += 1;
            }
        }
        if yv <= xv {
            while j < ys.len() && ys[j] == yv {
                diff -= 1.0 / m;
                j += 1;
            }
        }
        sup = sup.max(diff.abs());
    }
    sup
}

/// Asymptotic Kolmogorov survival function
/// Q(x) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 x^2}, truncated at k = 100.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.1 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS test; `pass` means p > threshold.
pub fn ks_two_sample<T: Real>(a: &[T], b: &[T], threshold: f64) -> Result<KsReport> {
    if a.len() < 25 || b.len() < 25 {
        return Err(Error::Config(format!(
            "KS needs both samples >= 25, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d = ks_statistic(a, b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let p = kolmogorov_sf(d * (n * m / (n + m)).sqrt());
    Ok(KsReport {
        statistic: d,
        p_value: p,
        n: a.len(),
        m: b.len(),
        pass: p > threshold,
    })
}

/// Max relative residual of the kernel-level intertwining identity
/// H_lambda K_lambda = (1/2 d_u^2 - lambda d_u) K_lambda over a grid, all
/// derivatives by central differences of step h.
pub fn intertwining_kernel_residual<T: Real>(
    spec: &SystemSpec<T>,
    lambda: T,
    grid: &[PhasePoint<T>],
    h: T,
    tol: f64,
) -> Result<ResidualReport> {
    if !(h > T::zero()) {
        return Err(Error::Config("step h must be positive".into()));
    }
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let kval = |x: T, u: T| -> Result<T> {
        Ok(spec.log_kernel(lambda, PhasePoint::new(x, u))?.exp())
    };
    let mut max_abs = 0.0f64;
    for &p in grid {
        let k0 = kval(p.x, p.u)?;
        let kxp = kval(p.x + h, p.u)?;
        let kxm = kval(p.x - h, p.u)?;
        let kup = kval(p.x, p.u + h)?;
        let kum = kval(p.x, p.u - h)?;
        let kxx = (kxp - two * k0 + kxm) / (h * h);
        let kuu = (kup - two * k0 + kum) / (h * h);
        let ku = (kup - kum) / (h + h);
        let lhs = half * kxx - (spec.quantum_potential(p.x) + half * lambda * lambda) * k0;
        let rhs = half * kuu - lambda * ku;
        max_abs = max_abs.max(((lhs - rhs) / k0).abs().as_f64());
    }
    Ok(ResidualReport {
        max_abs,
        grid: format!("{} points, h={}", grid.len(), h),
        pass: max_abs <= tol,
    })
}

/// Random interior grid for residual sweeps. Points stay well inside D so
/// that fourth log-derivatives remain O(1) and the O(h^2) truncation of the
/// central stencils stays below the identity-suite tolerances.
pub fn random_domain_grid<T: Real>(spec: &SystemSpec<T>, n: usize, seed: u64) -> Vec<PhasePoint<T>> {
    let mut rng = RngStream::new(seed, 0);
    (0..n)
        .map(|_| {
            let x = match spec.kind() {
                SystemKind::Toda => lit::<T>(2.0 * rng.uniform()),
                _ => lit::<T>(1.0 + 1.5 * rng.uniform()),
            };
            let u = match spec.u_section(x) {
                USection::Bounded(..) => x * lit::<T>(0.55 * (2.0 * rng.uniform() - 1.0)),
                USection::Unbounded => lit::<T>(1.4 * (2.0 * rng.uniform() - 1.0)),
            };
            PhasePoint::new(x, u)
        })
        .collect()
}

/// Compactly supported C^2 test function
/// f(x,u) = q((x-c1)/w1) q((u-c2)/w2), q(s) = (1-s^2)^3 on |s|<1.
#[derive(Debug, Clone, Copy)]
pub struct BumpSpec<T: Real = f64> {
    pub center: (T, T),
    pub width: (T, T),
}

impl<T: Real> BumpSpec<T> {
    fn q(s: T) -> T {
        let r = T::one() - s * s;
        r * r * r
    }

    fn dq(s: T) -> T {
        let r = T::one() - s * s;
        lit::<T>(-6.0) * s * r * r
    }

    fn ddq(s: T) -> T {
        let r = T::one() - s * s;
        r * (lit::<T>(30.0) * s * s - lit(6.0))
    }

    fn coords(&self, x: T, u: T) -> Option<(T, T)> {
        let sx = (x - self.center.0) / self.width.0;
        let su = (u - self.center.1) / self.width.1;
        (sx.abs() < T::one() && su.abs() < T::one()).then_some((sx, su))
    }

    pub fn f(&self, x: T, u: T) -> T {
        self.coords(x, u)
            .map_or(T::zero(), |(sx, su)| Self::q(sx) * Self::q(su))
    }

    fn fx(&self, x: T, u: T) -> T {
        self.coords(x, u)
            .map_or(T::zero(), |(sx, su)| Self::dq(sx) * Self::q(su) / self.width.0)
    }

    fn fu(&self, x: T, u: T) -> T {
        self.coords(x, u)
            .map_or(T::zero(), |(sx, su)| Self::q(sx) * Self::dq(su) / self.width.1)
    }

    fn fxx(&self, x: T, u: T) -> T {
        self.coords(x, u).map_or(T::zero(), |(sx, su)| {
            Self::ddq(sx) * Self::q(su) / (self.width.0 * self.width.0)
        })
    }

    fn fuu(&self, x: T, u: T) -> T {
        self.coords(x, u).map_or(T::zero(), |(sx, su)| {
            Self::q(sx) * Self::ddq(su) / (self.width.1 * self.width.1)
        })
    }

    fn fxu(&self, x: T, u: T) -> T {
        self.coords(x, u).map_or(T::zero(), |(sx, su)| {
            Self::dq(sx) * Self::dq(su) / (self.width.0 * self.width.1)
        })
    }

    /// The support rectangle must sit strictly inside D.
    fn check_support(&self, spec: &SystemSpec<T>) -> Result<()> {
        let x_min = self.center.0 - self.width.0;
        match spec.kind() {
            SystemKind::Toda => Ok(()),
            SystemKind::RationalCm | SystemKind::HyperbolicI => {
                let u_max = self.center.1.abs() + self.width.1;
                if !(x_min > T::zero()) || !(u_max < x_min) {
                    Err(Error::Domain(format!(
                        "bump support [{}±{}]x[{}±{}] leaves the wedge |u| < x",
                        self.center.0, self.width.0, self.center.1, self.width.1
                    )))
                } else {
                    Ok(())
                }
            }
            SystemKind::HyperbolicII => {
                if !(x_min > T::zero()) {
                    Err(Error::Domain("bump support crosses x = 0".into()))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Residual of the operator intertwining H_lambda (K~_lambda f) = K~_lambda (A_lambda f)
/// at the point x: the u-integrals by fixed-panel Gauss-Legendre over the bump
/// support, the outer second x-derivative by central differences of step h,
/// and A_lambda f from the closed-form bump derivatives.
pub fn intertwining_operator_residual<T: Real>(
    spec: &SystemSpec<T>,
    lambda: T,
    bump: &BumpSpec<T>,
    x: T,
    quad: &QuadratureSpec<T>,
    h: T,
) -> Result<T> {
    quad.validate()?;
    if !(h > T::zero()) {
        return Err(Error::Config("step h must be positive".into()));
    }
    bump.check_support(spec)?;
    let (u_lo, u_hi) = (bump.center.1 - bump.width.1, bump.center.1 + bump.width.1);
    let kernel = |xi: T, u: T| (lambda * u + spec.log_kernel_raw(xi, u)).exp();

    // freeze the panel count at the evaluation point so the x-stencil sees a
    // smoothly varying quadrature error
    let probe = |u: T| kernel(x, u) * bump.f(x, u);
    let (_, n_panels) = integrate_adaptive(&probe, u_lo, u_hi, quad)?;
    let rule = gauss_legendre::<T>(NODES_PER_PANEL);
    let ktilde_f = |xi: T| -> T {
        integrate_fixed(&|u| kernel(xi, u) * bump.f(xi, u), u_lo, u_hi, n_panels, &rule)
    };

    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let f0 = ktilde_f(x);
    let fxx = (ktilde_f(x + h) - two * f0 + ktilde_f(x - h)) / (h * h);
    let lhs = half * fxx - (spec.quantum_potential(x) + half * lambda * lambda) * f0;

    let a_f = |u: T| {
        let drift_x = lambda + spec.drift_b_raw(x, u);
        half * bump.fxx(x, u)
            + half * bump.fuu(x, u)
            + bump.fxu(x, u)
            + lambda * bump.fu(x, u)
            + drift_x * bump.fx(x, u)
    };
    let rhs = integrate_fixed(&|u| kernel(x, u) * a_f(u), u_lo, u_hi, n_panels, &rule);
    Ok((lhs - rhs).abs())
}

fn check_law_hypotheses<T: Real>(spec: &SystemSpec<T>, lambda: T) -> Result<()> {
    match spec.kind() {
        SystemKind::HyperbolicI => Err(Error::Hypothesis(
            "no marginal-law theorem is stated for the hyperbolic I kernel".into(),
        )),
        SystemKind::HyperbolicII => {
            if !(spec.mu() > lit(0.5)) {
                return Err(Error::Hypothesis(format!(
                    "law tests require mu > 1/2, got mu = {}",
                    spec.mu()
                )));
            }
            let cap = spec.epsilon() * spec.mu();
            if !(lambda.abs() < cap) {
                return Err(Error::Hypothesis(format!(
                    "law tests require |lambda| < eps*mu = {cap}, got lambda = {lambda}"
                )));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn derived_seed(seed: u64) -> u64 {
    seed ^ 0x517C_C1B7_2722_0A95
}

/// KS comparison of the Bäcklund x-marginal at time t (U_0 ~ nu_{x0}) against
/// the directly simulated target diffusion, equal path counts, independent
/// seeds. `pass` means p > threshold.
pub fn marginal_law_test<T: Real>(
    spec: &SystemSpec<T>,
    lambda: T,
    x0: T,
    t: T,
    mc: &McConfig<T>,
    quad: &QuadratureSpec<T>,
    threshold: f64,
) -> Result<KsReport> {
    marginal_law_pair(spec, lambda, lambda, x0, t, mc, quad, threshold)
}

/// As [`marginal_law_test`] but with separate Bäcklund and target lambdas;
/// mismatched values form the negative control (expected to reject).
#[allow(clippy::too_many_arguments)]
pub fn marginal_law_pair<T: Real>(
    spec: &SystemSpec<T>,
    lambda_backlund: T,
    lambda_target: T,
    x0: T,
    t: T,
    mc: &McConfig<T>,
    quad: &QuadratureSpec<T>,
    threshold: f64,
) -> Result<KsReport> {
    check_law_hypotheses(spec, lambda_backlund)?;
    check_law_hypotheses(spec, lambda_target)?;
    let mut mc_a = *mc;
    mc_a.horizon = t;
    mc_a.lambda = lambda_backlund;
    let end = mc_a.n_steps();
    let a = simulate_backlund_recorded(spec, x0, InitialU::Nu, &mc_a, quad, true, Some(&[end]))?;

    let mut mc_b = mc_a;
    mc_b.seed = derived_seed(mc.seed);
    mc_b.lambda = lambda_target;
    let b = simulate_target_recorded(spec, lambda_target, x0, &mc_b, quad, true, Some(&[end]))?;
    ks_two_sample(&a.xs_at(0), &b.xs_at(0), threshold)
}

/// Conditional-law test: bins paths by X_t quantiles and compares the sample
/// mean of g(U_t) in each bin against the bin average of the predicted
/// conditional mean m(x) = int g d(nu_x), in units of the bin's standard
/// error. Averaging m over the bin (rather than evaluating it at the bin's
/// mean X) keeps the wide edge bins free of curvature bias. `pass` means max
/// discrepancy <= 4.
#[allow(clippy::too_many_arguments)]
pub fn conditional_law_test<T: Real, G: Fn(T) -> T>(
    spec: &SystemSpec<T>,
    lambda: T,
    x0: T,
    t: T,
    g: G,
    n_bins: usize,
    mc: &McConfig<T>,
    quad: &QuadratureSpec<T>,
) -> Result<ResidualReport> {
    check_law_hypotheses(spec, lambda)?;
    if n_bins == 0 {
        return Err(Error::Config("need at least one bin".into()));
    }
    let mut mc_run = *mc;
    mc_run.horizon = t;
    mc_run.lambda = lambda;
    let end = mc_run.n_steps();
    let ens = simulate_backlund_recorded(spec, x0, InitialU::Nu, &mc_run, quad, true, Some(&[end]))?;
    let xs = ens.xs_at(0);
    let us = ens.us_at(0).expect("backlund ensembles carry u");

    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).unwrap());

    // tabulate m(x) once over the realized x-range, then read it per path
    let (x_min, x_max) = (xs[order[0]], xs[*order.last().unwrap()]);
    let m_nodes = 128usize;
    let span = (x_max - x_min).max(lit(1e-9));
    let grid_xs: Vec<T> = (0..=m_nodes)
        .map(|i| x_min + span * lit::<T>(i as f64 / m_nodes as f64))
        .collect();
    let grid_ms: Vec<T> = grid_xs
        .iter()
        .map(|&xv| eigen::nu_expectation(spec, lambda, xv, &g, quad))
        .collect::<Result<_>>()?;
    let m_interp = crate::interp::CubicHermite::monotone(grid_xs, grid_ms)?;

    // quantile bins; runs smaller than 50 paths merge into the next bin
    let mut edges = Vec::new();
    let per = xs.len() / n_bins;
    let mut start = 0;
    while start < xs.len() {
        let mut stop = (start + per).min(xs.len());
        if xs.len() - stop < 50 {
            stop = xs.len();
        }
        if stop - start >= 50 || stop == xs.len() {
            edges.push((start, stop));
            start = stop;
        } else {
            stop = (stop + 50).min(xs.len());
            edges.push((start, stop));
            start = stop;
        }
    }

    let mut max_disc = 0.0f64;
    for &(lo, hi) in &edges {
        let idx = &order[lo..hi];
        let count = idx.len() as f64;
        let gs: Vec<f64> = idx.iter().map(|&i| g(us[i]).as_f64()).collect();
        let mean_g = gs.iter().sum::<f64>() / count;
        let var_g = gs.iter().map(|v| (v - mean_g) * (v - mean_g)).sum::<f64>() / count;
        let se = (var_g / count).sqrt();
        let mut predicted = 0.0f64;
        for &i in idx {
            predicted += m_interp.eval(xs[i]).as_f64();
        }
        predicted /= count;
        let diff = (mean_g - predicted).abs();
        let disc = if se > 0.0 {
            diff / se
        } else if diff < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        max_disc = max_disc.max(disc);
    }
    Ok(ResidualReport {
        max_abs: max_disc,
        grid: format!("{} bins over {} paths at t={}", edges.len(), xs.len(), t),
        pass: max_disc <= 4.0,
    })
}

/// Drift lambda*coth(lambda*x) of the Pitman target, continuously extended
/// to 1/x at lambda = 0.
pub fn pitman_drift<T: Real>(lambda: T, x: T) -> T {
    if lambda.abs() < lit(1e-14) {
        x.recip()
    } else {
        lambda * systems::coth(lambda * x)
    }
}

/// KS comparison of the Pitman 2M-X construction against the diffusion
/// dX = dB + lambda coth(lambda X) dt started at x.
pub fn pitman_law_test<T: Real>(
    lambda: T,
    x: T,
    t: T,
    mc: &McConfig<T>,
    threshold: f64,
) -> Result<KsReport> {
    pitman_law_scaled(lambda, x, t, mc, threshold, T::one())
}

/// As [`pitman_law_test`] with the target drift scaled by `drift_scale`;
/// scale 2 is the built-in negative control.
pub fn pitman_law_scaled<T: Real>(
    lambda: T,
    x: T,
    t: T,
    mc: &McConfig<T>,
    threshold: f64,
    drift_scale: T,
) -> Result<KsReport> {
    let mut mc_a = *mc;
    mc_a.horizon = t;
    mc_a.lambda = lambda;
    let end = mc_a.n_steps();
    let a = pitman_paths_recorded(lambda, x, &mc_a, Some(&[end]))?;

    let mut mc_b = mc_a;
    mc_b.seed = derived_seed(mc.seed);
    let b = simulate_scalar_em(
        |xi: T| Ok(drift_scale * pitman_drift(lambda, xi)),
        Some(T::zero()),
        x,
        &mc_b,
        "pitman-target",
        true,
        Some(&[end]),
    )?;
    ks_two_sample(&a.xs_at(0), &b.xs_at(0), threshold)
}
