//! Green's kernels of the four linear families as radial Fourier multipliers.
//!
//! Every multiplier here is a real, even function of `r = |ξ|`, so sampled
//! spectra are Hermitian and the real-space kernels are real. Series
//! branches take over near removable singularities.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{forward_transform, inverse_transform, Field, Grid, SpectralField};
use crate::quadrature::{integrate, QuadOptions};
use crate::stats::fit_line;

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Removable-singularity threshold for `sin(z)/z`-type factors.
const SERIES_EPS: f64 = 1e-6;
/// Tail amplitude a dissipative kernel must reach at the Nyquist frequency.
const RESOLUTION_TAIL: f64 = 1e-3;

/// Linear kernel family.
///
/// `ViscousWave` is `u_tt + √(-Δ) u_t - Δu` (viscosity fixed at 1/2).
/// `DampedWave(c)` uses the multiplier `e^{-ct} sinh(t√(c²-|ξ|²))/√(c²-|ξ|²)`,
/// which is the fundamental solution of `u_tt + 2c u_t - Δu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelFamily {
    ViscousWave,
    Heat,
    Wave,
    DampedWave(f64),
}

impl KernelFamily {
    pub fn damped(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(Self::DampedWave(c))
        } else {
            Err(invalid(
                "c",
                format!("damping rate must be positive, got {c}"),
            ))
        }
    }

    /// True for families whose multiplier decays exponentially in |ξ|.
    pub fn is_dissipative(&self) -> bool {
        matches!(self, Self::ViscousWave | Self::Heat)
    }

    /// First order in time (no velocity state).
    pub fn is_first_order(&self) -> bool {
        matches!(self, Self::Heat)
    }

    /// Coefficient of `û_t` in the per-mode equation `û'' + β û' + |ξ|² û = 0`.
    pub fn damping(&self, r: f64) -> f64 {
        match *self {
            Self::ViscousWave => r,
            Self::Wave => 0.0,
            Self::DampedWave(c) => 2.0 * c,
            Self::Heat => 0.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::ViscousWave => "viscous".into(),
            Self::Heat => "heat".into(),
            Self::Wave => "wave".into(),
            Self::DampedWave(c) => format!("damped({c})"),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "viscous" | "viscous-wave" | "viscouswave" => Ok(Self::ViscousWave),
            "heat" => Ok(Self::Heat),
            "wave" => Ok(Self::Wave),
            "damped" => Self::damped(1.0),
            _ => {
                let inner = s
                    .strip_prefix("damped(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| invalid("family", format!("unknown family `{s}`")))?;
                let c: f64 = inner
                    .parse()
                    .map_err(|_| invalid("family", format!("bad damping rate `{inner}`")))?;
                Self::damped(c)
            }
        }
    }
}

impl TryFrom<String> for KernelFamily {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelFamily> for String {
    fn from(f: KernelFamily) -> String {
        f.label()
    }
}

/// Which propagator: `K` acts on the initial velocity and the forcing,
/// `J` on the initial displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Velocity,
    Displacement,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Velocity => "K",
            Self::Displacement => "J",
        })
    }
}

/// `t · sin(z)/z` with `z = a t`.
fn t_sinc(a: f64, t: f64) -> f64 {
    let z = a * t;
    if z.abs() < SERIES_EPS {
        t * (1.0 - z * z / 6.0)
    } else {
        z.sin() / a
    }
}

/// `e^{-ct} sinh(t s)/s` with `s² = c² - r²`, including the oscillatory
/// branch `r > c` and the removable point `r = c`.
fn damped_velocity(c: f64, t: f64, r: f64) -> f64 {
    let d = c * c - r * r;
    if (r - c).abs() * t < SERIES_EPS {
        return t * (-c * t).exp() * (1.0 + d * t * t / 6.0);
    }
    if d > 0.0 {
        let s = d.sqrt();
        let z = s * t;
        if z < 1e-4 {
            t * (-c * t).exp() * (1.0 + z * z / 6.0 + z.powi(4) / 120.0)
        } else {
            (((s - c) * t).exp() - (-(s + c) * t).exp()) / (2.0 * s)
        }
    } else {
        let s = (-d).sqrt();
        (-c * t).exp() * t_sinc(s, t)
    }
}

/// `∂_t` of [`damped_velocity`].
fn damped_velocity_rate(c: f64, t: f64, r: f64) -> f64 {
    let d = c * c - r * r;
    if (r - c).abs() * t < SERIES_EPS {
        return (-c * t).exp() * (1.0 - c * t);
    }
    if d > 0.0 {
        let s = d.sqrt();
        let cosh_part = 0.5 * (((s - c) * t).exp() + (-(s + c) * t).exp());
        cosh_part - c * damped_velocity(c, t, r)
    } else {
        let s = (-d).sqrt();
        (-c * t).exp() * (s * t).cos() - c * damped_velocity(c, t, r)
    }
}

/// Velocity multiplier `K̂_t(r)`; `t ≥ 0`.
pub(crate) fn velocity_multiplier(family: KernelFamily, t: f64, r: f64) -> f64 {
    match family {
        KernelFamily::ViscousWave => (-0.5 * r * t).exp() * t_sinc(0.5 * SQRT3 * r, t),
        KernelFamily::Heat => (-r * r * t).exp(),
        KernelFamily::Wave => t_sinc(r, t),
        KernelFamily::DampedWave(c) => damped_velocity(c, t, r),
    }
}

/// `∂_t K̂_t(r)` for the second-order families.
pub(crate) fn velocity_multiplier_rate(family: KernelFamily, t: f64, r: f64) -> f64 {
    match family {
        KernelFamily::ViscousWave => {
            let w = 0.5 * SQRT3 * r * t;
            (-0.5 * r * t).exp() * (w.cos() - w.sin() / SQRT3)
        }
        KernelFamily::Heat => -r * r * (-r * r * t).exp(),
        KernelFamily::Wave => (r * t).cos(),
        KernelFamily::DampedWave(c) => damped_velocity_rate(c, t, r),
    }
}

/// Viscous displacement multiplier `Ĵ_t(r)`.
pub(crate) fn displacement_multiplier(t: f64, r: f64) -> f64 {
    let w = 0.5 * SQRT3 * r * t;
    (-0.5 * r * t).exp() * (w.cos() + w.sin() / SQRT3)
}

/// Fourier multiplier of the requested kernel at time `t` and `|ξ| = xi_mag`.
pub fn multiplier(family: KernelFamily, kind: KernelKind, t: f64, xi_mag: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("time must be non-negative, got {t}")));
    }
    if !(xi_mag.is_finite() && xi_mag >= 0.0) {
        return Err(invalid(
            "xi_mag",
            format!("|ξ| must be non-negative, got {xi_mag}"),
        ));
    }
    match (kind, family) {
        (KernelKind::Velocity, _) => Ok(velocity_multiplier(family, t, xi_mag)),
        (KernelKind::Displacement, KernelFamily::ViscousWave) => {
            Ok(displacement_multiplier(t, xi_mag))
        }
        (KernelKind::Displacement, _) => Err(Error::UnsupportedKind),
    }
}

pub(crate) fn check_resolution(family: KernelFamily, t: f64, grid: &Grid) -> Result<()> {
    let nyq = grid.nyquist();
    let tail = match family {
        KernelFamily::ViscousWave => (-0.5 * nyq * t).exp(),
        KernelFamily::Heat => (-nyq * nyq * t).exp(),
        _ => 0.0,
    };
    if tail > RESOLUTION_TAIL {
        return Err(Error::InsufficientResolution(format!(
            "{family} kernel at t = {t} still has amplitude {tail:.3e} at the Nyquist \
             frequency {nyq:.3}; need dx <= {:.3e}",
            match family {
                KernelFamily::Heat => PI * (t / RESOLUTION_TAIL.recip().ln()).sqrt(),
                _ => PI * t / (2.0 * RESOLUTION_TAIL.recip().ln()),
            }
        )));
    }
    if t > 0.25 * grid.extent() && !matches!(family, KernelFamily::Heat) {
        log::warn!(
            "{family} kernel at t = {t} is not small against the half box {}; expect wrap-around",
            0.5 * grid.extent()
        );
    }
    Ok(())
}

fn sampled_multiplier(
    family: KernelFamily,
    kind: KernelKind,
    t: f64,
    grid: &Grid,
) -> Result<SpectralField> {
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid("t", format!("time must be positive, got {t}")));
    }
    if kind == KernelKind::Displacement && family != KernelFamily::ViscousWave {
        return Err(Error::UnsupportedKind);
    }
    if family == KernelFamily::Wave && grid.dim() >= 3 {
        return Err(Error::NotFunctionValued(format!(
            "wave (n = {})",
            grid.dim()
        )));
    }
    check_resolution(family, t, grid)?;
    Ok(match kind {
        KernelKind::Velocity => {
            SpectralField::from_multiplier(grid, |r| velocity_multiplier(family, t, r))
        }
        KernelKind::Displacement => {
            SpectralField::from_multiplier(grid, |r| displacement_multiplier(t, r))
        }
    })
}

/// `|S^{n−1}| / (2π)^n`: the radial measure of `(2π)^{−n} dξ`.
pub(crate) fn radial_weight(n: usize) -> f64 {
    let area = match n {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    };
    area / (2.0 * PI).powi(n as i32)
}

/// `‖kernel‖²_{L²(ℝⁿ)} = (2π)^{−n} ∫ m(|ξ|)² dξ` by radial quadrature of the
/// multiplier. Infinite when the integral diverges (wave, `n ≥ 2`).
pub fn l2_norm_squared(family: KernelFamily, kind: KernelKind, t: f64, n: usize) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(invalid("n", "dimension must be 1, 2 or 3"));
    }
    multiplier(family, kind, t, 0.0)?;
    let decay = match family {
        KernelFamily::Wave => Some(1.0),
        KernelFamily::DampedWave(c) => Some((-2.0 * c * t).exp()),
        _ => None,
    };
    if decay.is_some() && n >= 2 {
        return Ok(f64::INFINITY);
    }
    let w = radial_weight(n);
    let f = |r: f64| {
        let m = match kind {
            KernelKind::Velocity => velocity_multiplier(family, t, r),
            KernelKind::Displacement => displacement_multiplier(t, r),
        };
        w * r.powi(n as i32 - 1) * m * m
    };
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_panels: 50_000,
    };
    let mut total = 0.0;
    let mut a = 0.0;
    let mut b = 1.0 / t;
    loop {
        let pieces = ((b - a) * t).ceil().clamp(1.0, 4096.0) as usize;
        let h = (b - a) / pieces as f64;
        let mut part = 0.0;
        for i in 0..pieces {
            let lo = a + i as f64 * h;
            part += integrate(f, lo, lo + h, opts)?;
        }
        total += part;
        a = b;
        b *= 2.0;
        if let Some(decay) = decay {
            if a * t > 1e3 {
                // Mean of sin²(rt)/r² beyond `a`.
                total += decay * w / (2.0 * a);
                break;
            }
        } else if part <= 1e-15 * total || a * t > 1e7 {
            break;
        }
    }
    if !total.is_finite() {
        return Err(Error::QuadratureFailure(
            "non-finite radial integral".into(),
        ));
    }
    Ok(total)
}

/// Real-space kernel on `grid`: the inverse transform of the sampled multiplier.
///
/// Wave kernels keep their Gibbs ringing at `|x| = t`.
pub fn real_space_kernel(
    family: KernelFamily,
    kind: KernelKind,
    t: f64,
    grid: &Grid,
) -> Result<Field> {
    Ok(inverse_transform(&sampled_multiplier(
        family, kind, t, grid,
    )?))
}

/// Riemann-sum `L^q` norm of the real-space kernel; `q = f64::INFINITY`
/// gives the max norm.
pub fn lq_norm(family: KernelFamily, kind: KernelKind, t: f64, q: f64, grid: &Grid) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(invalid("q", format!("need 1 <= q <= inf, got {q}")));
    }
    let k = real_space_kernel(family, kind, t, grid)?;
    Ok(field_lq(&k, q))
}

pub(crate) fn field_lq(f: &Field, q: f64) -> f64 {
    if q.is_infinite() {
        return f.max_abs();
    }
    let vol = f.grid().cell_volume();
    let sum: f64 = f.values().iter().map(|v| v.abs().powf(q)).sum::<f64>() * vol;
    sum.powf(1.0 / q)
}

/// `L^q` norm on `grid` and on the grid with twice the points per axis.
/// The ratio `refined / coarse` measures convergence.
pub fn lq_norm_refinement(
    family: KernelFamily,
    kind: KernelKind,
    t: f64,
    q: f64,
    grid: &Grid,
) -> Result<(f64, f64)> {
    let fine = Grid::new(grid.dim(), grid.extent(), grid.points() * 2)?;
    Ok((
        lq_norm(family, kind, t, q, grid)?,
        lq_norm(family, kind, t, q, &fine)?,
    ))
}

/// Fitted far-field decay of the unit displacement kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub dim: usize,
    pub order: u32,
    pub fitted_exponent: f64,
    /// `-1 - n(N-1)/N`.
    pub bound: f64,
    pub slack: f64,
    pub points: usize,
    pub passes: bool,
}

/// Log-log fit of `|J(x)|` against `|x|` for `|x|` in
/// `[inner·L, outer·L]` (fractions of the box length).
pub fn j_decay_check_window(
    grid: &Grid,
    order: u32,
    inner: f64,
    outer: f64,
) -> Result<DecayReport> {
    let n = grid.dim();
    if !(1..=2).contains(&n) {
        return Err(invalid("dim", "decay check is defined for n = 1, 2"));
    }
    if (order as usize) < n + 1 {
        return Err(invalid("order", format!("need N >= n + 1 = {}", n + 1)));
    }
    let j = real_space_kernel(
        KernelFamily::ViscousWave,
        KernelKind::Displacement,
        1.0,
        grid,
    )?;
    let lo = inner * grid.extent();
    let hi = (outer * grid.extent()).min(0.5 * grid.extent());
    let peak = j.max_abs();
    let (xs, ys): (Vec<f64>, Vec<f64>) = grid
        .radii()
        .into_iter()
        .zip(j.values())
        .filter(|(r, v)| *r >= lo && *r < hi && v.abs() > 1e-13 * peak)
        .map(|(r, v)| (r.ln(), v.abs().ln()))
        .unzip();
    if xs.len() < 2 || hi <= lo {
        return Err(Error::FitWindowEmpty);
    }
    let fit = fit_line(&xs, &ys).ok_or(Error::FitWindowEmpty)?;
    let nf = n as f64;
    let of = order as f64;
    let bound = -1.0 - nf * (of - 1.0) / of;
    let slack = 0.2;
    Ok(DecayReport {
        dim: n,
        order,
        fitted_exponent: fit.slope,
        bound,
        slack,
        points: xs.len(),
        passes: fit.slope <= bound + slack,
    })
}

/// [`j_decay_check_window`] over the outer half of the box, `|x| ∈ [L/4, L/2)`.
pub fn j_decay_check(grid: &Grid, order: u32) -> Result<DecayReport> {
    j_decay_check_window(grid, order, 0.25, 0.5)
}

/// Viscous kernel against its Poisson-smoothed wave representation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub dim: usize,
    pub t: f64,
    /// Least-squares constant `c_n` in `K_t ≈ c_n P_t * K^W_{√3t/2}`.
    pub constant: f64,
    /// `‖K_t − c_n P_t * K^W‖₂ / ‖K_t‖₂` on the grid.
    pub residual: f64,
    /// Max relative defect of `K̂_t = e^{-|ξ|t/2} (2/√3) K̂^W_{√3t/2}` on the mode lattice.
    pub multiplier_defect: f64,
}

/// Unnormalised Poisson-type kernel `t / (t² + 4|x|²)^{(n+1)/2}`,
/// periodised over the box by explicit image sums.
fn periodic_poisson(t: f64, grid: &Grid) -> Field {
    let n = grid.dim();
    let l = grid.extent();
    let images: i64 = match n {
        1 => 256,
        2 => 12,
        _ => 4,
    };
    let p = 0.5 * (n as f64 + 1.0);
    let one = |r2: f64| t / (t * t + 4.0 * r2).powf(p);
    Field::from_fn(grid, |x| {
        let mut sum = 0.0;
        match n {
            1 => {
                for m in -images..=images {
                    let y = x[0] + m as f64 * l;
                    sum += one(y * y);
                }
            }
            2 => {
                for a in -images..=images {
                    for b in -images..=images {
                        let y0 = x[0] + a as f64 * l;
                        let y1 = x[1] + b as f64 * l;
                        sum += one(y0 * y0 + y1 * y1);
                    }
                }
            }
            _ => {
                for a in -images..=images {
                    for b in -images..=images {
                        for c in -images..=images {
                            let y0 = x[0] + a as f64 * l;
                            let y1 = x[1] + b as f64 * l;
                            let y2 = x[2] + c as f64 * l;
                            sum += one(y0 * y0 + y1 * y1 + y2 * y2);
                        }
                    }
                }
            }
        }
        sum
    })
}

/// Compares the viscous kernel with the convolution of the Poisson kernel
/// and the wave kernel at time `√3 t/2`.
pub fn poisson_wave_factorization(t: f64, grid: &Grid) -> Result<FactorizationReport> {
    let n = grid.dim();
    if !(1..=2).contains(&n) {
        return Err(invalid(
            "dim",
            "factorization check is defined for n = 1, 2",
        ));
    }
    let direct = real_space_kernel(KernelFamily::ViscousWave, KernelKind::Velocity, t, grid)?;
    let wave_time = 0.5 * SQRT3 * t;
    let poisson_hat = forward_transform(&periodic_poisson(t, grid));
    let wave_hat = SpectralField::from_multiplier(grid, |r| {
        velocity_multiplier(KernelFamily::Wave, wave_time, r)
    });
    let conv = inverse_transform(&poisson_hat.multiply(&wave_hat)?);

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let constant = dot(direct.values(), conv.values()) / dot(conv.values(), conv.values());
    let diff: f64 = direct
        .values()
        .iter()
        .zip(conv.values())
        .map(|(d, c)| (d - constant * c).powi(2))
        .sum();
    let residual = (diff / dot(direct.values(), direct.values())).sqrt();

    let multiplier_defect = grid
        .mode_magnitudes()
        .into_iter()
        .map(|r| {
            let lhs = velocity_multiplier(KernelFamily::ViscousWave, t, r);
            let rhs = (-0.5 * r * t).exp()
                * (2.0 / SQRT3)
                * velocity_multiplier(KernelFamily::Wave, wave_time, r);
            (lhs - rhs).abs() / t
        })
        .fold(0.0, f64::max);

    Ok(FactorizationReport {
        dim: n,
        t,
        constant,
        residual,
        multiplier_defect,
    })
}
