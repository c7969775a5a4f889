//! Fourier-space check of the Stokes half-space derivation behind the
//! `√(−Δ) u_t` damping term.
//!
//! For a membrane mode with velocity coefficient `û_t` and `k = |ξ|`, the
//! vertical fluid velocity below the membrane (`x₃ ≤ 0`) is
//! `v̂(x₃) = û_t (1 − k x₃) e^{k x₃}`.

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::kernels::KernelFamily;

/// Vertical velocity profile of one Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesProfile {
    xi_mag: f64,
    ut_hat: Complex64,
    mu: f64,
}

impl StokesProfile {
    pub fn new(xi_mag: f64, ut_hat: Complex64, mu: f64) -> Result<Self> {
        if !xi_mag.is_finite() || xi_mag < 0.0 {
            return Err(invalid("xi_mag", "must be finite and non-negative"));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid("mu", "viscosity must be positive"));
        }
        Ok(Self { xi_mag, ut_hat, mu })
    }

    /// Profile with `μ = 1/2`.
    pub fn with_default_viscosity(xi_mag: f64, ut_hat: Complex64) -> Result<Self> {
        Self::new(xi_mag, ut_hat, 0.5)
    }

    pub fn xi_mag(&self) -> f64 {
        self.xi_mag
    }

    pub fn ut_hat(&self) -> Complex64 {
        self.ut_hat
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `d^order v̂ / dx₃^order` at depth `x3`, for `order ≤ 4`.
    pub fn derivative(&self, order: u32, x3: f64) -> Complex64 {
        let k = self.xi_mag;
        let kz = k * x3;
        let e = kz.exp();
        let factor = match order {
            0 => (1.0 - kz) * e,
            1 => -k * kz * e,
            2 => -k * k * (1.0 + kz) * e,
            3 => -k.powi(3) * (2.0 + kz) * e,
            4 => -k.powi(4) * (3.0 + kz) * e,
            _ => panic!("derivative order {order} not available"),
        };
        self.ut_hat * factor
    }

    pub fn profile(&self, x3: f64) -> Complex64 {
        self.derivative(0, x3)
    }

    fn nonzero(&self) -> Result<()> {
        if self.xi_mag == 0.0 {
            return Err(Error::DegenerateMode);
        }
        Ok(())
    }
}

/// `max |k⁴v̂ − 2k²v̂'' + v̂''''|` over the sample depths.
pub fn biharmonic_residual(p: &StokesProfile, x3_samples: &[f64]) -> f64 {
    let k2 = p.xi_mag * p.xi_mag;
    x3_samples
        .iter()
        .map(|&z| {
            (p.derivative(0, z) * (k2 * k2) - p.derivative(2, z) * (2.0 * k2) + p.derivative(4, z))
                .norm()
        })
        .fold(0.0, f64::max)
}

/// `∂π̂/∂x₃(ξ, 0) = μ(−k² û_t + v̂''(0))`.
pub fn pressure_neumann(p: &StokesProfile) -> Complex64 {
    (p.ut_hat * -(p.xi_mag * p.xi_mag) + p.derivative(2, 0.0)) * p.mu
}

/// Membrane pressure `π̂(ξ, 0)`: the Neumann data divided by `k`.
pub fn dtn_closure(p: &StokesProfile) -> Result<Complex64> {
    p.nonzero()?;
    Ok(pressure_neumann(p) / p.xi_mag)
}

/// One row of the derivation table.
#[derive(Debug, Clone, Serialize)]
pub struct DerivationRow {
    pub xi_mag: f64,
    pub biharmonic_residual: f64,
    pub boundary_value_defect: f64,
    pub boundary_slope: f64,
    pub neumann_defect: f64,
    pub closure_defect: f64,
    pub damping_defect: f64,
    pub passes: bool,
}

/// Checks every identity at each `|ξ|` for a unit velocity coefficient
/// and `μ = 1/2`.
pub fn derivation_check(xi_values: &[f64]) -> Result<Vec<DerivationRow>> {
    let depths: Vec<f64> = (0..=40).map(|i| -0.25 * i as f64).collect();
    xi_values
        .iter()
        .map(|&k| {
            let ut = Complex64::new(1.0, 0.0);
            let p = StokesProfile::with_default_viscosity(k, ut)?;
            let scale = k.powi(4).max(f64::MIN_POSITIVE);
            let residual = biharmonic_residual(&p, &depths) / scale;
            let value = (p.profile(0.0) - ut).norm();
            let slope = p.derivative(1, 0.0).norm();
            let expected_neumann = ut * (-2.0 * p.mu * k * k);
            let neumann =
                (pressure_neumann(&p) - expected_neumann).norm() / expected_neumann.norm();
            let closure = dtn_closure(&p)?;
            let expected_closure = ut * (-2.0 * p.mu * k);
            let closure_defect = (closure - expected_closure).norm() / expected_closure.norm();
            let damping = KernelFamily::ViscousWave.damping(k);
            let damping_defect =
                ((-closure / ut).re - damping).abs() / damping + (closure / ut).im.abs();
            let passes = residual <= 1e-10
                && value <= 1e-12
                && slope <= 1e-12
                && neumann <= 1e-12
                && closure_defect <= 1e-12
                && damping_defect <= 1e-12;
            Ok(DerivationRow {
                xi_mag: k,
                biharmonic_residual: residual,
                boundary_value_defect: value,
                boundary_slope: slope,
                neumann_defect: neumann,
                closure_defect,
                damping_defect,
                passes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn neumann_values() {
        let p = StokesProfile::with_default_viscosity(1.0, c(1.0, 0.0)).unwrap();
        assert!((pressure_neumann(&p) - c(-1.0, 0.0)).norm() < 1e-15);
        let p = StokesProfile::with_default_viscosity(2.0, c(0.0, 1.0)).unwrap();
        assert!((pressure_neumann(&p) - c(0.0, -4.0)).norm() < 1e-14);
        let p = StokesProfile::with_default_viscosity(3.0, c(0.0, 0.0)).unwrap();
        assert_eq!(pressure_neumann(&p), c(0.0, 0.0));
    }

    #[test]
    fn closure_values() {
        let p = StokesProfile::with_default_viscosity(4.0, c(1.0, 0.0)).unwrap();
        assert!((dtn_closure(&p).unwrap() - c(-4.0, 0.0)).norm() < 1e-14);
        let p = StokesProfile::with_default_viscosity(0.0, c(1.0, 0.0)).unwrap();
        assert_eq!(dtn_closure(&p), Err(Error::DegenerateMode));
    }

    #[test]
    fn zero_velocity_has_zero_residual() {
        let p = StokesProfile::with_default_viscosity(2.5, c(0.0, 0.0)).unwrap();
        assert_eq!(biharmonic_residual(&p, &[0.0, -1.0, -3.0]), 0.0);
    }

    #[test]
    fn sweep_passes() {
        let rows = derivation_check(&[0.1, 0.5, 1.0, 2.0, 8.0, 32.0]).unwrap();
        assert!(rows.iter().all(|r| r.passes), "{rows:?}");
    }
}
