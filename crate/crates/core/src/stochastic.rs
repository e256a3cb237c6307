//! SDE engine: Euler-Maruyama for the stochastic Bäcklund systems, the exact
//! pathwise Toda solution, direct simulation of the ground-state-transformed
//! target diffusions, and the Pitman 2M-X construction.
//!
//! Paths are embarrassingly parallel: every path owns a counter-based
//! [`RngStream`] keyed by (seed, path_index), so ensembles are bit-identical
//! regardless of worker count.

use rayon::prelude::*;
use serde::Serialize;
use std::io::{Read, Write};

use crate::eigen::{log_psi_drift, NuTable};
use crate::error::{Error, Result};
use crate::interp::CubicHermite;
use crate::quad::QuadratureSpec;
use crate::real::{lit, Real};
use crate::rng::RngStream;
use crate::systems::{PhasePoint, SystemKind, SystemSpec};

/// Monte Carlo run parameters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McConfig<T: Real = f64> {
    pub n_paths: usize,
    pub dt: T,
    pub horizon: T,
    pub seed: u64,
    /// Factor on the Brownian increment (sqrt(eps) or mu^{-1/2} in the
    /// semiclassical scalings; 1 otherwise). Zero gives the noise-off flow.
    pub noise_scale: T,
    pub lambda: T,
}

impl<T: Real> McConfig<T> {
    pub fn new(n_paths: usize, dt: T, horizon: T, seed: u64, lambda: T) -> Self {
        Self {
            n_paths,
            dt,
            horizon,
            seed,
            noise_scale: T::one(),
            lambda,
        }
    }

    pub fn with_noise_scale(mut self, s: T) -> Self {
        self.noise_scale = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_paths > 1_000_000 {
            return Err(Error::Config(format!(
                "n_paths must be in 1..=10^6, got {}",
                self.n_paths
            )));
        }
        if !(self.dt > T::zero()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) {
            return Err(Error::Config(format!(
                "horizon must be >= dt, got horizon={} dt={}",
                self.horizon, self.dt
            )));
        }
        if (self.horizon / self.dt).as_f64() > 1e7 {
            return Err(Error::Config("horizon/dt must be <= 10^7".into()));
        }
        if !(self.noise_scale >= T::zero()) {
            return Err(Error::Config("noise_scale must be >= 0".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.horizon / self.dt).as_f64().round() as usize).max(1)
    }
}

/// How the auxiliary coordinate is initialized.
#[derive(Debug, Clone, Copy)]
pub enum InitialU<T: Real = f64> {
    /// U_0 ~ nu_{x0}, the theorems' initial law (with rho = delta_{x0}).
    Nu,
    /// Fixed U_0; for coupling experiments only, excluded from law tests.
    Fixed(T),
}

/// A simulated ensemble on a recorded time grid.
#[derive(Debug, Clone)]
pub struct PathEnsemble<T: Real = f64> {
    pub label: String,
    pub config: McConfig<T>,
    /// Recorded times (the full step grid unless a recording subset was used).
    pub times: Vec<T>,
    /// Boundary-policy clamps; must be zero in accepted runs.
    pub violations: u64,
    n_paths: usize,
    xs: Vec<T>,
    us: Option<Vec<T>>,
}

impl<T: Real> PathEnsemble<T> {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn x(&self, path: usize, time_idx: usize) -> T {
        self.xs[path * self.times.len() + time_idx]
    }

    pub fn u(&self, path: usize, time_idx: usize) -> Option<T> {
        self.us.as_ref().map(|us| us[path * self.times.len() + time_idx])
    }

    pub fn has_u(&self) -> bool {
        self.us.is_some()
    }

    /// Index of the recorded time closest to t; errors if none is within dt/2.
    pub fn time_index(&self, t: T) -> Result<usize> {
        let mut best = 0;
        let mut dist = T::infinity();
        for (i, &ti) in self.times.iter().enumerate() {
            if (ti - t).abs() < dist {
                dist = (ti - t).abs();
                best = i;
            }
        }
        if dist <= self.config.dt * lit(0.50001) {
            Ok(best)
        } else {
            Err(Error::Config(format!("time {t} not on the recorded grid")))
        }
    }

    /// The X marginal at a recorded index.
    pub fn xs_at(&self, time_idx: usize) -> Vec<T> {
        (0..self.n_paths).map(|p| self.x(p, time_idx)).collect()
    }

    pub fn us_at(&self, time_idx: usize) -> Option<Vec<T>> {
        self.us
            .as_ref()
            .map(|_| (0..self.n_paths).map(|p| self.u(p, time_idx).unwrap()).collect())
    }

    /// CSV with header `path,t,x,u`; the u column is empty for ensembles
    /// without an auxiliary coordinate.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "path,t,x,u")?;
        for p in 0..self.n_paths {
            for (i, t) in self.times.iter().enumerate() {
                match self.u(p, i) {
                    Some(u) => writeln!(
                        w,
                        "{},{},{},{}",
                        p,
                        t.as_f64(),
                        self.x(p, i).as_f64(),
                        u.as_f64()
                    )?,
                    None => writeln!(w, "{},{},{},", p, t.as_f64(), self.x(p, i).as_f64())?,
                }
            }
        }
        Ok(())
    }

    /// Compact binary block: magic `SBKL1`, an 80-byte JSON shape header,
    /// then little-endian f64 arrays (times, xs, us if present).
    pub fn write_sbk<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"SBKL1")?;
        let header = format!(
            "{{\"paths\":{},\"times\":{},\"has_u\":{}}}",
            self.n_paths,
            self.times.len(),
            self.us.is_some()
        );
        let mut padded = header.into_bytes();
        assert!(padded.len() <= 80, "sbk header overflow");
        padded.resize(80, b' ');
        w.write_all(&padded)?;
        let mut dump = |vals: &[T]| -> std::io::Result<()> {
            for v in vals {
                w.write_all(&v.as_f64().to_le_bytes())?;
            }
            Ok(())
        };
        dump(&self.times)?;
        dump(&self.xs)?;
        if let Some(us) = &self.us {
            dump(us)?;
        }
        Ok(())
    }
}

impl PathEnsemble<f64> {
    /// Read back an `SBKL1` block. Run provenance (config, label) is not part
    /// of the binary format; the returned config is zeroed.
    pub fn read_sbk<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic).map_err(|e| Error::Config(e.to_string()))?;
        if &magic != b"SBKL1" {
            return Err(Error::Config("not an SBKL1 block".into()));
        }
        let mut header = [0u8; 80];
        r.read_exact(&mut header).map_err(|e| Error::Config(e.to_string()))?;
        let text = std::str::from_utf8(&header)
            .map_err(|e| Error::Config(e.to_string()))?
            .trim_end();
        let shape: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad sbk header: {e}")))?;
        let n_paths = shape["paths"].as_u64().ok_or_else(|| Error::Config("bad paths".into()))? as usize;
        let n_times = shape["times"].as_u64().ok_or_else(|| Error::Config("bad times".into()))? as usize;
        let has_u = shape["has_u"].as_bool().unwrap_or(false);
        let mut load = |count: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(count);
            let mut buf = [0u8; 8];
            for _ in 0..count {
                r.read_exact(&mut buf).map_err(|e| Error::Config(e.to_string()))?;
                out.push(f64::from_le_bytes(buf));
            }
            Ok(out)
        };
        let times = load(n_times)?;
        let xs = load(n_paths * n_times)?;
        let us = if has_u { Some(load(n_paths * n_times)?) } else { None };
        let dt = if n_times > 1 { times[1] - times[0] } else { 1.0 };
        Ok(Self {
            label: "sbk".into(),
            config: McConfig::new(n_paths, dt, *times.last().unwrap_or(&dt), 0, 0.0),
            times,
            violations: 0,
            n_paths,
            xs,
            us,
        })
    }
}

/// Exit-retry depth: an exiting proposal is retried at dt/2 up to this many
/// times before the sub-step is clamped and counted as a violation.
const MAX_HALVINGS: u32 = 10;

/// Extra refinement levels spent where the drift is stiff (varies on the
/// scale of the boundary distance); kept separate from the retry budget so
/// near-boundary steps still have the full retry ladder available.
const MAX_STIFF_SPLITS: u32 = 8;

/// Distance to the boundary of D, +inf when D has none.
fn boundary_distance<T: Real>(spec: &SystemSpec<T>, x: T, u: T) -> T {
    match spec.kind() {
        SystemKind::Toda => T::infinity(),
        SystemKind::RationalCm | SystemKind::HyperbolicI => (x + u).min(x - u),
        SystemKind::HyperbolicII => x,
    }
}

/// One Euler-Maruyama step of the coupled system. Steps are halved
/// unconditionally while the drift displacement exceeds a quarter of the
/// distance to the boundary (unconditional halving refines the same Brownian
/// path in law, so it costs no bias), and halved again on a proposed exit
/// from D; when the retry ladder is exhausted the sub-step is clamped and
/// counted.
#[allow(clippy::too_many_arguments)]
fn backlund_advance<T: Real>(
    spec: &SystemSpec<T>,
    x: T,
    u: T,
    dt: T,
    mc: &McConfig<T>,
    rng: &mut RngStream,
    stiff_budget: u32,
    retry_budget: u32,
    violations: &mut u64,
) -> (T, T) {
    let b = spec.drift_b_raw(x, u);
    if stiff_budget > 0 {
        let dist = boundary_distance(spec, x, u);
        if dist.is_finite() && b.abs() * dt > lit::<T>(0.1) * dist {
            let half = dt * lit::<T>(0.5);
            let (mx, mu) =
                backlund_advance(spec, x, u, half, mc, rng, stiff_budget - 1, retry_budget, violations);
            return backlund_advance(
                spec,
                mx,
                mu,
                half,
                mc,
                rng,
                stiff_budget - 1,
                retry_budget,
                violations,
            );
        }
    }
    let z = lit::<T>(rng.standard_normal());
    let du = mc.noise_scale * dt.sqrt() * z + mc.lambda * dt;
    let nx = x + du + b * dt;
    let nu = u + du;
    if spec.in_domain(PhasePoint::new(nx, nu)) {
        return (nx, nu);
    }
    if retry_budget == 0 {
        *violations += 1;
        return (x, u);
    }
    let half = dt * lit::<T>(0.5);
    let (mx, mu) = backlund_advance(spec, x, u, half, mc, rng, 0, retry_budget - 1, violations);
    backlund_advance(spec, mx, mu, half, mc, rng, 0, retry_budget - 1, violations)
}

fn record_indices<T: Real>(mc: &McConfig<T>, record_at: Option<&[usize]>) -> Vec<usize> {
    match record_at {
        Some(idx) => idx.to_vec(),
        None => (0..=mc.n_steps()).collect(),
    }
}

fn check_strict(violations: u64, strict: bool) -> Result<u64> {
    if strict && violations > 0 {
        Err(Error::BoundaryBreach { violations })
    } else {
        Ok(violations)
    }
}

/// Euler-Maruyama ensemble of the stochastic Bäcklund system
/// dU = noise_scale dB + lambda dt, dX = dU + b(X, U) dt, started at
/// X_0 = x0 with U_0 per `init`.
pub fn simulate_backlund<T: Real>(
    spec: &SystemSpec<T>,
    x0: T,
    init: InitialU<T>,
    mc: &McConfig<T>,
    quad: &QuadratureSpec<T>,
    strict: bool,
) -> Result<PathEnsemble<T>> {
    simulate_backlund_recorded(spec, x0, init, mc, quad, strict, None)
}

/// As [`simulate_backlund`] but recording only the given step indices
/// (law tests need just one or two marginals of large ensembles).
pub fn simulate_backlund_recorded<T: Real>(
    spec: &SystemSpec<T>,
    x0: T,
    init: InitialU<T>,
    mc: &McConfig<T>,
    quad: &QuadratureSpec<T>,
    strict: bool,
    record_at: Option<&[usize]>,
) -> Result<PathEnsemble<T>> {
    mc.validate()?;
    if !spec.x_in_domain(x0) {
        return Err(Error::Domain(format!("x0={x0} outside the x-section of D")));
    }
    let nu_table = match init {
        InitialU::Nu => Some(NuTable::build(spec, mc.lambda, x0, quad)?),
        InitialU::Fixed(u0) => {
            if !spec.in_domain(PhasePoint::new(x0, u0)) {
                return Err(Error::Domain(format!("initial point (x0={x0}, u0={u0}) outside D")));
            }
            None
        }
    };
    let n_steps = mc.n_steps();
    let rec = record_indices(mc, record_at);

    let per_path: Vec<(Vec<T>, Vec<T>, u64)> = (0..mc.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = RngStream::new(mc.seed, p as u64);
            let u0 = match (&nu_table, init) {
                (Some(table), _) => table.sample(&mut rng),
                (None, InitialU::Fixed(u0)) => u0,
                _ => unreachable!(),
            };
            let mut violations = 0u64;
            let (mut x, mut u) = (x0, u0);
            let mut xs = Vec::with_capacity(rec.len());
            let mut us = Vec::with_capacity(rec.len());
            let mut r = 0;
            if rec.first() == Some(&0) {
                xs.push(x);
                us.push(u);
                r += 1;
            }
            for k in 1..=n_steps {
                let (nx, nu) = backlund_advance(
                    spec,
                    x,
                    u,
                    mc.dt,
                    mc,
                    &mut rng,
                    MAX_STIFF_SPLITS,
                    MAX_HALVINGS,
                    &mut violations,
                );
                x = nx;
                u = nu;
                if rec.get(r) == Some(&k) {
                    xs.push(x);
                    us.push(u);
                    r += 1;
                }
            }
            (xs, us, violations)
        })
        .collect();

    let times: Vec<T> = rec.iter().map(|&k| mc.dt * lit::<T>(k as f64)).collect();
    let mut xs = Vec::with_capacity(mc.n_paths * times.len());
    let mut us = Vec::with_capacity(mc.n_paths * times.len());
    let mut violations = 0;
    for (px, pu, v) in per_path {
        xs.extend(px);
        us.extend(pu);
        violations += v;
    }
    let violations = check_strict(violations, strict)?;
    Ok(PathEnsemble {
        label: format!("backlund-{}", spec.kind().name()),
        config: *mc,
        times,
        violations,
        n_paths: mc.n_paths,
        xs,
        us: Some(us),
    })
}

/// Pathwise-exact Toda solution on the discrete Brownian grid:
/// U_t = U_0 + B_t + lambda t, X_t = U_t + ln(e^{X_0-U_0} + int_0^t e^{-2U} ds)
/// with the time integral by the trapezoid rule. Sharing the seed with
/// [`simulate_backlund`] yields a coupled pair for strong-error measurement.
pub fn toda_exact_paths<T: Real>(
    spec: &SystemSpec<T>,
    x0: T,
    init: InitialU<T>,
    mc: &McConfig<T>,
    quad: &QuadratureSpec<T>,
) -> Result<PathEnsemble<T>> {
    if spec.kind() != SystemKind::Toda {
        return Err(Error::UnsupportedSystem(
            "the pathwise-exact solution exists for the Toda system only".into(),
        ));
    }
    mc.validate()?;
    let nu_table = match init {
        InitialU::Nu => Some(NuTable::build(spec, mc.lambda, x0, quad)?),
        InitialU::Fixed(_) => None,
    };
    let n_steps = mc.n_steps();
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);

    let per_path: Vec<(Vec<T>, Vec<T>)> = (0..mc.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = RngStream::new(mc.seed, p as u64);
            let u0 = match (&nu_table, init) {
                (Some(table), _) => table.sample(&mut rng),
                (None, InitialU::Fixed(u0)) => u0,
                _ => unreachable!(),
            };
            let c = (x0 - u0).exp();
            let mut u = u0;
            let mut integral = T::zero();
            let mut xs = Vec::with_capacity(n_steps + 1);
            let mut us = Vec::with_capacity(n_steps + 1);
            xs.push(x0);
            us.push(u0);
            for _ in 0..n_steps {
                let prev_term = (-two * u).exp();
                let z = lit::<T>(rng.standard_normal());
                u = u + mc.noise_scale * mc.dt.sqrt() * z + mc.lambda * mc.dt;
                let term = (-two * u).exp();
                integral += (prev_term + term) * half * mc.dt;
                xs.push(u + (c + integral).ln());
                us.push(u);
            }
            (xs, us)
        })
        .collect();

    let times: Vec<T> = (0..=n_steps).map(|k| mc.dt * lit::<T>(k as f64)).collect();
    let mut xs = Vec::with_capacity(mc.n_paths * times.len());
    let mut us = Vec::with_capacity(mc.n_paths * times.len());
    for (px, pu) in per_path {
        xs.extend(px);
        us.extend(pu);
    }
    Ok(PathEnsemble {
        label: "toda-exact".into(),
        config: *mc,
        times,
        violations: 0,
        n_paths: mc.n_paths,
        xs,
        us: Some(us),
    })
}

/// Scalar Euler-Maruyama dX = noise_scale dB + drift(X) dt on an open
/// half-line (lower > 0 boundary) or the whole line, with the same
/// halving-and-clamp boundary policy as the coupled system.
pub fn simulate_scalar_em<T: Real, F>(
    drift: F,
    domain_lo: Option<T>,
    x0: T,
    mc: &McConfig<T>,
    label: &str,
    strict: bool,
    record_at: Option<&[usize]>,
) -> Result<PathEnsemble<T>>
where
    F: Fn(T) -> Result<T> + Sync,
{
    mc.validate()?;
    if let Some(lo) = domain_lo {
        if !(x0 > lo) {
            return Err(Error::Domain(format!("x0={x0} must exceed {lo}")));
        }
    }
    let n_steps = mc.n_steps();
    let rec = record_indices(mc, record_at);
    let inside = |x: T| domain_lo.is_none_or(|lo| x > lo);

    #[allow(clippy::too_many_arguments)]
    fn advance<T: Real, F: Fn(T) -> Result<T>>(
        drift: &F,
        inside: &dyn Fn(T) -> bool,
        lo: Option<T>,
        x: T,
        dt: T,
        mc: &McConfig<T>,
        rng: &mut RngStream,
        stiff_budget: u32,
        retry_budget: u32,
        violations: &mut u64,
    ) -> Result<T> {
        let b = drift(x)?;
        if stiff_budget > 0 {
            if let Some(lo) = lo {
                // refine where the drift varies on the scale of the distance
                // to the boundary
                if b.abs() * dt > lit::<T>(0.1) * (x - lo) {
                    let half = dt * lit::<T>(0.5);
                    let mid = advance(
                        drift, inside, Some(lo), x, half, mc, rng,
                        stiff_budget - 1, retry_budget, violations,
                    )?;
                    return advance(
                        drift, inside, Some(lo), mid, half, mc, rng,
                        stiff_budget - 1, retry_budget, violations,
                    );
                }
            }
        }
        let z = lit::<T>(rng.standard_normal());
        let nx = x + mc.noise_scale * dt.sqrt() * z + b * dt;
        if inside(nx) {
            return Ok(nx);
        }
        if retry_budget == 0 {
            *violations += 1;
            return Ok(x);
        }
        let half = dt * lit::<T>(0.5);
        let mid = advance(drift, inside, lo, x, half, mc, rng, 0, retry_budget - 1, violations)?;
        advance(drift, inside, lo, mid, half, mc, rng, 0, retry_budget - 1, violations)
    }

    let per_path: Vec<Result<(Vec<T>, u64)>> = (0..mc.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = RngStream::new(mc.seed, p as u64);
            let mut violations = 0u64;
            let mut x = x0;
            let mut xs = Vec::with_capacity(rec.len());
            let mut r = 0;
            if rec.first() == Some(&0) {
                xs.push(x);
                r += 1;
            }
            for k in 1..=n_steps {
                x = advance(
                    &drift,
                    &inside,
                    domain_lo,
                    x,
                    mc.dt,
                    mc,
                    &mut rng,
                    MAX_STIFF_SPLITS,
                    MAX_HALVINGS,
                    &mut violations,
                )?;
                if rec.get(r) == Some(&k) {
                    xs.push(x);
                    r += 1;
                }
            }
            Ok((xs, violations))
        })
        .collect();

    let times: Vec<T> = rec.iter().map(|&k| mc.dt * lit::<T>(k as f64)).collect();
    let mut xs = Vec::with_capacity(mc.n_paths * times.len());
    let mut violations = 0;
    for item in per_path {
        let (px, v) = item?;
        xs.extend(px);
        violations += v;
    }
    let violations = check_strict(violations, strict)?;
    Ok(PathEnsemble {
        label: label.to_string(),
        config: *mc,
        times,
        violations,
        n_paths: mc.n_paths,
        xs,
        us: None,
    })
}

/// Drift table for the target diffusion: b_lambda tabulated by quadrature on
/// a grid refined near 0, interpolated by cubic Hermite with the exact
/// derivative slope b' = 2V + lambda^2 - b^2 (from H psi = (lambda^2/2) psi),
/// falling back to direct quadrature outside the table range.
pub struct DriftTable<T: Real = f64> {
    interp: CubicHermite<T>,
    spec: SystemSpec<T>,
    lambda: T,
    quad: QuadratureSpec<T>,
}

const DRIFT_TABLE_POINTS: usize = 2048;

impl<T: Real> DriftTable<T> {
    pub fn build(
        spec: &SystemSpec<T>,
        lambda: T,
        x_lo: T,
        x_hi: T,
        quad: &QuadratureSpec<T>,
    ) -> Result<Self> {
        if !(x_hi > x_lo) || !spec.x_in_domain(x_lo) || !spec.x_in_domain(x_hi) {
            return Err(Error::Config(format!("bad drift table range [{x_lo}, {x_hi}]")));
        }
        let n = DRIFT_TABLE_POINTS;
        let log_spaced = spec.kind() != SystemKind::Toda;
        let xs: Vec<T> = (0..=n)
            .map(|i| {
                let t = lit::<T>(i as f64 / n as f64);
                if log_spaced {
                    (x_lo.ln() + (x_hi.ln() - x_lo.ln()) * t).exp()
                } else {
                    x_lo + (x_hi - x_lo) * t
                }
            })
            .collect();
        let ys: Vec<T> = xs
            .iter()
            .map(|&x| log_psi_drift(spec, lambda, x, quad))
            .collect::<Result<_>>()?;
        let slopes: Vec<T> = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &b)| {
                lit::<T>(2.0) * spec.quantum_potential(x) + lambda * lambda - b * b
            })
            .collect();
        Ok(Self {
            interp: CubicHermite::with_slopes(xs, ys, slopes)?,
            spec: *spec,
            lambda,
            quad: *quad,
        })
    }

    pub fn eval(&self, x: T) -> Result<T> {
        if x >= self.interp.lo() && x <= self.interp.hi() {
            Ok(self.interp.eval(x))
        } else {
            log_psi_drift(&self.spec, self.lambda, x, &self.quad)
        }
    }
}

/// Euler-Maruyama ensemble of the target diffusion with generator
/// (1/2) d^2/dx^2 + b_lambda(x) d/dx, b_lambda = d/dx ln psi_lambda.
pub fn simulate_target<T: Real>(
    spec: &SystemSpec<T>,
    lambda: T,
    x0: T,
    mc: &McConfig<T>,
    quad: &QuadratureSpec<T>,
    strict: bool,
) -> Result<PathEnsemble<T>> {
    simulate_target_recorded(spec, lambda, x0, mc, quad, strict, None)
}

pub fn simulate_target_recorded<T: Real>(
    spec: &SystemSpec<T>,
    lambda: T,
    x0: T,
    mc: &McConfig<T>,
    quad: &QuadratureSpec<T>,
    strict: bool,
    record_at: Option<&[usize]>,
) -> Result<PathEnsemble<T>> {
    mc.validate()?;
    if !spec.x_in_domain(x0) {
        return Err(Error::Domain(format!("x0={x0} outside the x-section of D")));
    }
    let spread = lambda.abs() * mc.horizon
        + lit::<T>(8.0) * mc.noise_scale * mc.horizon.sqrt()
        + lit(2.0);
    let (lo, hi, boundary) = match spec.kind() {
        SystemKind::Toda => (x0 - spread, x0 + spread, None),
        _ => ((x0 * lit(1e-3)).max(lit(1e-4)), x0 + spread, Some(T::zero())),
    };
    let table = DriftTable::build(spec, lambda, lo, hi, quad)?;
    let label = format!("target-{}", spec.kind().name());
    simulate_scalar_em(
        |x| table.eval(x),
        boundary,
        x0,
        mc,
        &label,
        strict,
        record_at,
    )
}

/// Pitman's 2M-X construction: U a Brownian motion with drift lambda started
/// from the e^{lambda u}-weighted uniform law on [-x, x], and
/// X_t = U_t - min(2 inf_{s<=t} U_s, U_0 - x). X_0 = x exactly.
pub fn pitman_paths<T: Real>(lambda: T, x: T, mc: &McConfig<T>) -> Result<PathEnsemble<T>> {
    pitman_paths_recorded(lambda, x, mc, None)
}

/// As [`pitman_paths`] but recording only the given step indices.
pub fn pitman_paths_recorded<T: Real>(
    lambda: T,
    x: T,
    mc: &McConfig<T>,
    record_at: Option<&[usize]>,
) -> Result<PathEnsemble<T>> {
    mc.validate()?;
    if !(x >= T::zero()) {
        return Err(Error::Config(format!("pitman start must satisfy x >= 0, got {x}")));
    }
    let n_steps = mc.n_steps();
    let two = lit::<T>(2.0);
    let rec = record_indices(mc, record_at);

    let per_path: Vec<(Vec<T>, Vec<T>)> = (0..mc.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = RngStream::new(mc.seed, p as u64);
            let u0 = sample_exp_weighted(lambda, x, &mut rng);
            let mut u = u0;
            let mut run_min = u0;
            let step_var = mc.noise_scale * mc.noise_scale * mc.dt;
            let mut xs = Vec::with_capacity(rec.len());
            let mut us = Vec::with_capacity(rec.len());
            let mut r = 0;
            // min(2 U_0, U_0 - x) = U_0 - x for U_0 in [-x, x], so X_0 = x
            debug_assert!((u0 - (two * u0).min(u0 - x) - x).abs() < lit(1e-12));
            if rec.first() == Some(&0) {
                xs.push(x);
                us.push(u0);
                r += 1;
            }
            for k in 1..=n_steps {
                let prev = u;
                let z = lit::<T>(rng.standard_normal());
                u = u + mc.noise_scale * mc.dt.sqrt() * z + lambda * mc.dt;
                // the grid minimum overshoots the path infimum by O(sqrt dt);
                // sample the exact within-step minimum from the bridge law
                let v = lit::<T>(rng.uniform());
                let d = u - prev;
                let bridge_min =
                    (prev + u - (d * d - (step_var + step_var) * v.ln()).sqrt()) * lit::<T>(0.5);
                run_min = run_min.min(bridge_min);
                if rec.get(r) == Some(&k) {
                    xs.push(u - (two * run_min).min(u0 - x));
                    us.push(u);
                    r += 1;
                }
            }
            (xs, us)
        })
        .collect();

    let times: Vec<T> = rec.iter().map(|&k| mc.dt * lit::<T>(k as f64)).collect();
    let mut xs = Vec::with_capacity(mc.n_paths * times.len());
    let mut us = Vec::with_capacity(mc.n_paths * times.len());
    for (px, pu) in per_path {
        xs.extend(px);
        us.extend(pu);
    }
    Ok(PathEnsemble {
        label: "pitman".into(),
        config: *mc,
        times,
        violations: 0,
        n_paths: mc.n_paths,
        xs,
        us: Some(us),
    })
}

/// Draw from the density proportional to e^{lambda u} on [-x, x].
fn sample_exp_weighted<T: Real>(lambda: T, x: T, rng: &mut RngStream) -> T {
    let v = lit::<T>(rng.uniform());
    if lambda.abs() < lit(1e-14) || x == T::zero() {
        -x + (x + x) * v
    } else {
        let a = (-lambda * x).exp();
        let b = (lambda * x).exp();
        (a + v * (b - a)).ln() / lambda
    }
}

/// The Pitman path functional applied to a discrete U path (exposed for
/// direct formula tests).
pub fn pitman_transform<T: Real>(u_path: &[T], x: T) -> Vec<T> {
    let two = lit::<T>(2.0);
    let u0 = u_path[0];
    let mut run_min = u0;
    u_path
        .iter()
        .map(|&u| {
            run_min = run_min.min(u);
            u - (two * run_min).min(u0 - x)
        })
        .collect()
}
