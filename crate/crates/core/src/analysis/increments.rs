//! Exact second moments of increments of the additive-noise solution
//! (`f ≡ 1`, zero data) of the viscous equation.
//!
//! For `t ≤ t'`, `δ = t' − t` and shift `h`, each Fourier mode contributes
//! `G(t') + G(t) − 2 cos(ξ·h) X`, where `G(t) = ∫₀ᵗ K̂_s² ds` and
//! `X = ∫₀ᵗ K̂_{τ+δ} K̂_τ dτ`.

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::kernels::KernelFamily;
use crate::quadrature::{integrate, QuadOptions};

use super::spectral::{radial_weight, square_time_integral, viscous_cross_integral};

fn ordered(t: f64, t_prime: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0 && t_prime >= 0.0 && t.is_finite() && t_prime.is_finite()) {
        return Err(invalid("t", "times must be finite and non-negative"));
    }
    Ok(if t <= t_prime {
        (t, t_prime)
    } else {
        (t_prime, t)
    })
}

fn mode_term(r: f64, t: f64, t_prime: f64, cos_term: f64) -> f64 {
    let g = |s| square_time_integral(KernelFamily::ViscousWave, r, s);
    let x = if cos_term == 0.0 {
        0.0
    } else {
        viscous_cross_integral(r, t_prime - t, 0.0, t)
    };
    g(t_prime) + g(t) - 2.0 * cos_term * x
}

/// `E|u(t', x+h) − u(t, x)|²` on the periodic lattice of `grid`, with
/// continuous time. `shift` has one entry per dimension.
pub fn exact_increment_variance(grid: &Grid, t: f64, t_prime: f64, shift: &[f64]) -> Result<f64> {
    let (t, t_prime) = ordered(t, t_prime)?;
    if shift.len() != grid.dim() {
        return Err(Error::ShapeMismatch {
            expected: grid.dim(),
            actual: shift.len(),
        });
    }
    let n = grid.points();
    let k: Vec<f64> = (0..n).map(|i| grid.wavenumber(i)).collect();
    let mut total = 0.0;
    for flat in 0..grid.len() {
        let idx = grid.unflatten(flat);
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for (a, &h) in shift.iter().enumerate() {
            let xi = k[idx[a]];
            r2 += xi * xi;
            phase += xi * h;
        }
        total += mode_term(r2.sqrt(), t, t_prime, phase.cos());
    }
    let v = total / grid.volume();
    if !v.is_finite() {
        return Err(Error::QuadratureFailure("non-finite lattice sum".into()));
    }
    Ok(v.max(0.0))
}

/// Bessel `J₀` by the rational/asymptotic fits of Abramowitz–Stegun 9.4.1
/// and 9.4.3 (absolute error below `5·10⁻⁸`).
fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 3.0 {
        let y = (x / 3.0).powi(2);
        1.0 + y
            * (-2.249_999_7
                + y * (1.265_620_8
                    + y * (-0.316_386_6
                        + y * (0.044_447_9 + y * (-0.003_944_4 + y * 0.000_210_0)))))
    } else {
        let y = 3.0 / x;
        let f0 = 0.797_884_56
            + y * (-0.000_000_77
                + y * (-0.005_527_40
                    + y * (-0.000_095_12
                        + y * (0.001_372_37 + y * (-0.000_728_05 + y * 0.000_144_76)))));
        let theta = x - std::f64::consts::FRAC_PI_4
            + y * (-0.041_663_97
                + y * (-0.000_039_54
                    + y * (0.002_625_73
                        + y * (-0.000_541_25 + y * (-0.000_293_33 + y * 0.000_135_58)))));
        f0 * theta.cos() / x.sqrt()
    }
}

/// Angular mean of `cos(ξ·h)` over `|ξ| = r` in `n` dimensions.
fn angular_cos(n: usize, z: f64) -> f64 {
    match n {
        1 => z.cos(),
        2 => bessel_j0(z),
        _ => {
            if z.abs() < 1e-4 {
                1.0 - z * z / 6.0
            } else {
                z.sin() / z
            }
        }
    }
}

/// Whole-space counterpart of [`exact_increment_variance`] by radial
/// quadrature, for `n ∈ {1, 2}` and a shift of length `shift`.
pub fn continuum_increment_variance(n: usize, t: f64, t_prime: f64, shift: f64) -> Result<f64> {
    if !(1..=2).contains(&n) {
        return Err(invalid(
            "n",
            "the additive solution is function valued only for n = 1, 2",
        ));
    }
    let (t, t_prime) = ordered(t, t_prime)?;
    let h = shift.abs();
    let delta = t_prime - t;
    if delta == 0.0 && h == 0.0 {
        return Ok(0.0);
    }
    let w = radial_weight(n);
    let integrand = |r: f64| {
        let c = if t > 0.0 { angular_cos(n, r * h) } else { 0.0 };
        w * r.powi(n as i32 - 1) * mode_term(r, t, t_prime, c)
    };
    // Past `r_max`, e^{−r t} and e^{−r δ} vanish and `G → 1/(2r³)`.
    let mut scales = vec![1.0];
    if t > 0.0 {
        scales.push(t);
    }
    if delta > 0.0 {
        scales.push(delta);
    }
    if h > 0.0 {
        scales.push(h);
    }
    let small = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = 60.0
        / small
            .min(if t > 0.0 { t } else { t_prime })
            .min(if delta > 0.0 { delta } else { 1.0 });
    let r_max = if h > 0.0 { r_max.max(2e3 / h) } else { r_max };
    let opts = QuadOptions {
        abs_tol: 1e-16,
        rel_tol: 1e-10,
        max_panels: 100_000,
    };
    let mut total = 0.0;
    let mut a = 0.0;
    let mut b = 1.0 / small;
    while a < r_max {
        let end = b.min(r_max);
        let cycles = (end - a) * (h + delta + t_prime) / std::f64::consts::PI;
        let pieces = cycles.ceil().clamp(1.0, 20_000.0) as usize;
        let step = (end - a) / pieces as f64;
        for i in 0..pieces {
            let lo = a + i as f64 * step;
            total += integrate(integrand, lo, lo + step, opts)?;
        }
        a = end;
        b = end * 2.0;
    }
    // Tail: mode term → (1 + [t > 0]) / (2r³) minus the oscillating part.
    let count = if t > 0.0 { 2.0 } else { 1.0 };
    let p = 3 - n as i32;
    total += w * count * 0.5 * r_max.powi(-p) / p as f64;
    Ok(total.max(0.0))
}
