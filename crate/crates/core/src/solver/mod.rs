//! Spectral solvers: the deterministic propagator, the adapted stochastic
//! stepper, replicate ensembles and Picard iteration on frozen noise.

mod config;
mod ensemble;
mod flow;
mod picard;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::{forward_transform, Field, Grid};
use crate::kernels::{displacement_multiplier, velocity_multiplier, KernelFamily};

pub use config::{default_dt, InitialPreset, NonlinearityPreset, SimulationConfig};
pub use ensemble::{
    reduce_ensemble, run_ensemble, EnsembleReducer, ReplicateTrajectory, Simulation,
    TrajectoryEnsemble,
};
pub use flow::{SolverState, Stepper};
pub use picard::{picard_iterate, PicardGap, PicardResult};

/// Displacement `g` and velocity `h` at time zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    g: Field,
    h: Field,
}

impl InitialData {
    pub fn new(g: Field, h: Field) -> Result<Self> {
        if g.grid() != h.grid() {
            return Err(Error::InvalidGrid("g and h live on different grids".into()));
        }
        Ok(Self { g, h })
    }

    pub fn zero(grid: &Grid) -> Self {
        Self {
            g: Field::zeros(grid),
            h: Field::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.g.grid()
    }

    pub fn g(&self) -> &Field {
        &self.g
    }

    pub fn h(&self) -> &Field {
        &self.h
    }

    /// Initial spectral state.
    pub fn state(&self) -> SolverState {
        SolverState::new(
            forward_transform(&self.g).coefficients().to_vec(),
            forward_transform(&self.h).coefficients().to_vec(),
        )
    }
}

#[derive(Clone)]
enum Law {
    Zero,
    One,
    Sin,
    Affine(f64, f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// Scalar coefficient `f` with a declared Lipschitz bound.
#[derive(Clone)]
pub struct Nonlinearity {
    law: Law,
    lipschitz: f64,
    label: String,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("f", &self.label)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl Nonlinearity {
    pub fn zero() -> Self {
        Self {
            law: Law::Zero,
            lipschitz: 1.0,
            label: "zero".into(),
        }
    }

    pub fn one() -> Self {
        Self {
            law: Law::One,
            lipschitz: 1.0,
            label: "one".into(),
        }
    }

    pub fn sin() -> Self {
        Self {
            law: Law::Sin,
            lipschitz: 1.0,
            label: "sin".into(),
        }
    }

    /// `f(u) = a u + b`.
    pub fn affine(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(invalid("f", "affine coefficients must be finite"));
        }
        Ok(Self {
            law: Law::Affine(a, b),
            lipschitz: a.abs().max(b.abs()).max(f64::MIN_POSITIVE),
            label: format!("affine({a},{b})"),
        })
    }

    /// Arbitrary `f` with a caller-declared bound, spot checked on random
    /// points.
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(invalid("lipschitz", "must be positive and finite"));
        }
        let n = Self {
            law: Law::Custom(Arc::new(f)),
            lipschitz,
            label: "custom".into(),
        };
        n.spot_check(256, 0x5eed)?;
        Ok(n)
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match &self.law {
            Law::Zero => 0.0,
            Law::One => 1.0,
            Law::Sin => u.sin(),
            Law::Affine(a, b) => a * u + b,
            Law::Custom(f) => f(u),
        }
    }

    /// `Some(c)` when `f ≡ c`.
    pub fn as_constant(&self) -> Option<f64> {
        match self.law {
            Law::Zero => Some(0.0),
            Law::One => Some(1.0),
            Law::Affine(0.0, b) => Some(b),
            _ => None,
        }
    }

    /// Checks the Lipschitz and linear-growth bounds on random pairs.
    pub fn spot_check(&self, pairs: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = self.lipschitz * (1.0 + 1e-12);
        for _ in 0..pairs {
            let scale = 10f64.powf(rng.random_range(-3.0..3.0));
            let a = rng.random_range(-1.0..1.0) * scale;
            let b = rng.random_range(-1.0..1.0) * scale;
            let (fa, fb) = (self.eval(a), self.eval(b));
            if !fa.is_finite() || (fa - fb).abs() > l * (a - b).abs() + 1e-12 {
                return Err(invalid(
                    "f",
                    format!("Lipschitz bound {} fails at ({a}, {b})", self.lipschitz),
                ));
            }
            if fa.abs() > l * (1.0 + a.abs()) + 1e-12 {
                return Err(invalid(
                    "f",
                    format!("growth bound {} fails at {a}", self.lipschitz),
                ));
            }
        }
        Ok(())
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<NonlinearityPreset>().map(|p| p.build())?
    }
}

/// Deterministic forcing sampled on steps of length `dt`: `fields[j]` acts
/// on `[j dt, (j+1) dt)`.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub dt: f64,
    pub fields: Vec<Field>,
}

/// `J_t∗g + K_t∗h + ∫₀ᵗ K_{t−s}∗F(s) ds`, the integral by the midpoint rule
/// on the forcing steps. At `t = 0` the result is `g` itself.
pub fn propagate_deterministic(
    family: KernelFamily,
    data: &InitialData,
    t: f64,
    forcing: Option<&Forcing>,
) -> Result<Field> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be finite and non-negative"));
    }
    if t == 0.0 {
        return Ok(data.g.clone());
    }
    let grid = data.grid();
    crate::kernels::check_resolution(family, t, grid)?;
    if family.is_first_order() && data.h.max_abs() > 0.0 {
        return Err(invalid(
            "h",
            "first-order families take no initial velocity",
        ));
    }
    let radii = grid.mode_magnitudes();
    let g_hat = forward_transform(&data.g);
    let h_hat = forward_transform(&data.h);
    let mut out: Vec<Complex64> = radii
        .iter()
        .zip(g_hat.coefficients().iter().zip(h_hat.coefficients()))
        .map(|(&r, (&g, &h))| {
            if family.is_first_order() {
                g * velocity_multiplier(family, t, r)
            } else {
                let j = match family {
                    KernelFamily::ViscousWave => displacement_multiplier(t, r),
                    _ => {
                        let k = velocity_multiplier(family, t, r);
                        crate::kernels::velocity_multiplier_rate(family, t, r)
                            + family.damping(r) * k
                    }
                };
                g * j + h * velocity_multiplier(family, t, r)
            }
        })
        .collect();
    if let Some(forcing) = forcing {
        let dt = forcing.dt;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "forcing step must be positive"));
        }
        let steps = (t / dt).round();
        if (steps * dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(invalid("t", "must be a multiple of the forcing step"));
        }
        let steps = steps as usize;
        if forcing.fields.len() < steps {
            return Err(Error::ShapeMismatch {
                expected: steps,
                actual: forcing.fields.len(),
            });
        }
        for (j, f) in forcing.fields.iter().take(steps).enumerate() {
            if f.grid() != grid {
                return Err(Error::InvalidGrid(
                    "forcing grid differs from data grid".into(),
                ));
            }
            let lag = t - (j as f64 + 0.5) * dt;
            let f_hat = forward_transform(f);
            for ((o, &r), &c) in out.iter_mut().zip(&radii).zip(f_hat.coefficients()) {
                *o += c * (dt * velocity_multiplier(family, lag, r));
            }
        }
    }
    let spectral = crate::grid::SpectralField::new(grid.clone(), out)?;
    Ok(crate::grid::inverse_transform(&spectral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseStream, RngPolicy};

    fn mode_field(grid: &Grid, k: f64) -> Field {
        let l = grid.extent();
        Field::from_fn(grid, |x| (2.0 * std::f64::consts::PI * k * x[0] / l).cos())
    }

    #[test]
    fn zero_time_returns_g() {
        let grid = Grid::new(1, 8.0, 64).unwrap();
        let g = Field::from_fn(&grid, |x| (-x[0] * x[0]).exp());
        let data = InitialData::new(g.clone(), Field::zeros(&grid)).unwrap();
        let u = propagate_deterministic(KernelFamily::ViscousWave, &data, 0.0, None).unwrap();
        assert_eq!(u, g);
    }

    #[test]
    fn stepper_matches_direct_multipliers() {
        let grid = Grid::new(1, 8.0, 64).unwrap();
        let g = Field::from_fn(&grid, |x| (-x[0] * x[0]).exp());
        let h = mode_field(&grid, 3.0);
        let data = InitialData::new(g, h).unwrap();
        for family in [
            KernelFamily::ViscousWave,
            KernelFamily::Wave,
            KernelFamily::DampedWave(0.7),
        ] {
            let mut stepper = Stepper::new(family, &grid, 1.0 / 16.0);
            let mut state = data.state();
            for _ in 0..16 {
                stepper.step_split_free(&mut state);
            }
            let stepped = stepper.displacement(&state);
            let direct = propagate_deterministic(family, &data, 1.0, None).unwrap();
            for (a, b) in stepped.values().iter().zip(direct.values()) {
                assert!((a - b).abs() < 1e-12, "{family}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_nonlinearity_is_noise_free() {
        let grid = Grid::new(1, 8.0, 64).unwrap();
        let g = Field::from_fn(&grid, |x| (-x[0] * x[0]).exp());
        let data = InitialData::new(g, Field::zeros(&grid)).unwrap();
        let dt = 1.0 / 32.0;
        let mut stepper = Stepper::new(KernelFamily::ViscousWave, &grid, dt);
        let mut stream = NoiseStream::new(&grid, dt, RngPolicy::new(3), 0).unwrap();
        let mut state = data.state();
        for _ in 0..32 {
            stepper
                .step_stochastic(&mut state, &Nonlinearity::zero(), &mut stream)
                .unwrap();
        }
        let u = stepper.displacement(&state);
        let direct = propagate_deterministic(KernelFamily::ViscousWave, &data, 1.0, None).unwrap();
        for (a, b) in u.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forced_stepper_matches_midpoint_duhamel() {
        let grid = Grid::new(1, 8.0, 64).unwrap();
        let data = InitialData::zero(&grid);
        let dt = 1.0 / 8.0;
        let fields: Vec<Field> = (0..8)
            .map(|j| {
                Field::from_fn(&grid, |x| {
                    (j as f64 * 0.3 + x[0]).sin() * (-x[0] * x[0] / 4.0).exp()
                })
            })
            .collect();
        let forcing = Forcing { dt, fields };
        let direct =
            propagate_deterministic(KernelFamily::ViscousWave, &data, 1.0, Some(&forcing)).unwrap();
        let mut stepper = Stepper::new(KernelFamily::ViscousWave, &grid, dt);
        let mut state = data.state();
        for f in &forcing.fields {
            stepper.step_forced(&mut state, f.values());
        }
        let stepped = stepper.displacement(&state);
        for (a, b) in stepped.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn adaptedness_violation_is_an_error() {
        let grid = Grid::new(1, 4.0, 8).unwrap();
        let mut stream = NoiseStream::new(&grid, 0.1, RngPolicy::new(1), 0).unwrap();
        assert!(matches!(stream.draw(), Err(Error::AdaptednessViolation(_))));
        stream.commit_constant(1.0).unwrap();
        assert!(matches!(
            stream.commit_constant(1.0),
            Err(Error::AdaptednessViolation(_))
        ));
    }

    #[test]
    fn lipschitz_spot_check_rejects_lies() {
        assert!(Nonlinearity::custom(|u| 3.0 * u, 1.0).is_err());
        assert!(Nonlinearity::custom(|u| u * u, 5.0).is_err());
        assert!(Nonlinearity::custom(|u| (2.0 * u).sin(), 2.0).is_ok());
        assert!(Nonlinearity::sin().spot_check(1000, 1).is_ok());
    }

    #[test]
    fn nonlinearity_parsing() {
        assert_eq!("sin".parse::<Nonlinearity>().unwrap().label(), "sin");
        let a: Nonlinearity = "affine(0.5, -1)".parse().unwrap();
        assert_eq!(a.eval(2.0), 0.0);
        assert!("cube".parse::<Nonlinearity>().is_err());
    }
}
