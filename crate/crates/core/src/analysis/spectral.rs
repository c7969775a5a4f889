//! Closed-form time integrals of squared multipliers.

use rustfft::num_complex::Complex64;

pub(crate) use crate::kernels::radial_weight;
use crate::kernels::{velocity_multiplier, KernelFamily};
use crate::quadrature::{gk15, integrate, QuadOptions};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// `∫₀ᵀ e^{−a s} ds`.
fn exp_integral(a: f64, t: f64) -> f64 {
    if a * t < 1e-8 {
        t * (1.0 - 0.5 * a * t)
    } else {
        -(-a * t).exp_m1() / a
    }
}

/// `∫₀ᵀ e^{−a s} (1 − cos νs) ds / (ν²/2)`, i.e. `∫ e^{−as} sin²(νs/2)/(ν/2)² ds`.
fn damped_sine_square(a: f64, nu: f64, t: f64) -> f64 {
    let e = exp_integral(a, t);
    let z = Complex64::new(a, -nu);
    let c = ((Complex64::new(1.0, 0.0) - (-z * t).exp()) / z).re;
    (e - c) / (0.5 * nu * nu)
}

fn numeric(family: KernelFamily, r: f64, t: f64) -> f64 {
    let f = |s: f64| {
        let k = velocity_multiplier(family, s, r);
        k * k
    };
    let (v, err) = gk15(&f, 0.0, t);
    if err <= 1e-13 * v.abs().max(1e-300) {
        return v;
    }
    integrate(f, 0.0, t, QuadOptions::default()).unwrap_or(v)
}

/// `∫₀ᵗ K̂_s(r)² ds`.
pub(crate) fn square_time_integral(family: KernelFamily, r: f64, t: f64) -> f64 {
    match family {
        KernelFamily::Heat => {
            let a = 2.0 * r * r;
            exp_integral(a, t)
        }
        KernelFamily::ViscousWave => {
            let nu = SQRT3 * r;
            if nu * t < 0.1 {
                numeric(family, r, t)
            } else {
                damped_sine_square(r, nu, t)
            }
        }
        KernelFamily::Wave => {
            let nu = 2.0 * r;
            if nu * t < 0.1 {
                numeric(family, r, t)
            } else {
                damped_sine_square(0.0, nu, t)
            }
        }
        KernelFamily::DampedWave(c) => {
            if r > c {
                let nu = 2.0 * (r * r - c * c).sqrt();
                if nu * t >= 0.1 {
                    return damped_sine_square(2.0 * c, nu, t);
                }
            }
            numeric(family, r, t)
        }
    }
}

/// `∫₀ᵀ K̂_{τ+a}(r) K̂_{τ+b}(r) dτ` for the viscous kernel.
pub(crate) fn viscous_cross_integral(r: f64, a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let omega = 0.5 * SQRT3 * r;
    if omega * (t + a + b) < 0.2 || omega == 0.0 {
        let f = |tau: f64| {
            velocity_multiplier(KernelFamily::ViscousWave, tau + a, r)
                * velocity_multiplier(KernelFamily::ViscousWave, tau + b, r)
        };
        return integrate(f, 0.0, t, QuadOptions::default()).unwrap_or_else(|_| gk15(&f, 0.0, t).0);
    }
    let lambda = Complex64::new(-0.5 * r, omega);
    let first = (lambda.conj() * a + lambda * b).exp() * exp_integral(r, t);
    let two_l = lambda * 2.0;
    let second = (lambda * (a + b)).exp() * (two_l * t).exp_m1_c() / two_l;
    0.5 * (first - second).re / (omega * omega)
}

trait ExpM1 {
    fn exp_m1_c(self) -> Self;
}

impl ExpM1 for Complex64 {
    /// `e^z − 1` without cancellation for small `|z|`.
    fn exp_m1_c(self) -> Self {
        if self.norm() < 1e-3 {
            let z = self;
            z * (Complex64::new(1.0, 0.0) + z * (0.5 + z / 6.0 * (1.0 + z / 4.0)))
        } else {
            self.exp() - 1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(family: KernelFamily, r: f64, t: f64) -> f64 {
        let n = 200_000;
        let h = t / n as f64;
        (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) * h;
                velocity_multiplier(family, s, r).powi(2) * h
            })
            .sum()
    }

    #[test]
    fn closed_forms_match_midpoint_sums() {
        for family in [
            KernelFamily::ViscousWave,
            KernelFamily::Wave,
            KernelFamily::Heat,
            KernelFamily::DampedWave(1.0),
        ] {
            for r in [0.01, 0.3, 0.99, 1.0, 1.01, 2.0, 9.0] {
                let a = square_time_integral(family, r, 1.3);
                let b = brute(family, r, 1.3);
                assert!(
                    (a - b).abs() < 1e-7 * b.max(1e-3),
                    "{family} r={r}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn cross_integral_matches_square_on_diagonal() {
        for r in [0.05, 0.7, 4.0] {
            let sq = square_time_integral(KernelFamily::ViscousWave, r, 0.8);
            let cross = viscous_cross_integral(r, 0.0, 0.0, 0.8);
            assert!((sq - cross).abs() < 1e-12 * sq.max(1e-6));
        }
    }
}
