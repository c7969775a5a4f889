//! Exact per-mode flow of the linear part and the noise kick.
//!
//! Each Fourier mode obeys `û'' + β(|ξ|) û' + |ξ|² û = F̂`. Over a time `τ`
//! the homogeneous flow is
//!
//! ```text
//! û(τ) = J_τ û + K_τ v̂        J_τ  = K'_τ + β K_τ
//! v̂(τ) = J'_τ û + K'_τ v̂      J'_τ = -|ξ|² K_τ
//! ```
//!
//! A stochastic step of length `dt` is half a flow, a velocity kick by the
//! transform of `f(u(t_j)) ΔW_j / dxⁿ`, and another half flow, so the
//! noise of step `j` enters through `K_{t - s_j - dt/2}`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernels::{velocity_multiplier, velocity_multiplier_rate, KernelFamily};
use crate::noise::NoiseStream;

use super::Nonlinearity;

/// Spectral displacement/velocity pair at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub(crate) u_hat: Vec<Complex64>,
    pub(crate) v_hat: Vec<Complex64>,
    pub(crate) time: f64,
    pub(crate) step: u64,
}

impl SolverState {
    pub fn new(u_hat: Vec<Complex64>, v_hat: Vec<Complex64>) -> Self {
        Self {
            u_hat,
            v_hat,
            time: 0.0,
            step: 0,
        }
    }

    pub fn displacement_spectrum(&self) -> &[Complex64] {
        &self.u_hat
    }

    pub fn velocity_spectrum(&self) -> &[Complex64] {
        &self.v_hat
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn is_finite(&self) -> bool {
        self.u_hat
            .iter()
            .chain(&self.v_hat)
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Precomputed flow over `τ` for every mode.
#[derive(Debug, Clone)]
struct FlowTable {
    uu: Vec<f64>,
    uv: Vec<f64>,
    vu: Vec<f64>,
    vv: Vec<f64>,
}

impl FlowTable {
    fn new(family: KernelFamily, radii: &[f64], tau: f64) -> Self {
        let len = radii.len();
        let mut table = Self {
            uu: Vec::with_capacity(len),
            uv: Vec::with_capacity(len),
            vu: Vec::with_capacity(len),
            vv: Vec::with_capacity(len),
        };
        for &r in radii {
            if family.is_first_order() {
                table.uu.push(velocity_multiplier(family, tau, r));
                table.uv.push(0.0);
                table.vu.push(0.0);
                table.vv.push(0.0);
            } else {
                let k = velocity_multiplier(family, tau, r);
                let kd = velocity_multiplier_rate(family, tau, r);
                table.uu.push(kd + family.damping(r) * k);
                table.uv.push(k);
                table.vu.push(-r * r * k);
                table.vv.push(kd);
            }
        }
        table
    }

    fn apply(&self, u: &mut [Complex64], v: &mut [Complex64]) {
        for i in 0..u.len() {
            let (a, b) = (u[i], v[i]);
            u[i] = a * self.uu[i] + b * self.uv[i];
            v[i] = a * self.vu[i] + b * self.vv[i];
        }
    }
}

/// Time stepper for one family on one grid with a fixed `dt`.
#[derive(Debug, Clone)]
pub struct Stepper {
    family: KernelFamily,
    grid: Grid,
    dt: f64,
    half: FlowTable,
    full: FlowTable,
    spectrum: Vec<Complex64>,
    real: Vec<f64>,
}

impl Stepper {
    pub fn new(family: KernelFamily, grid: &Grid, dt: f64) -> Self {
        let radii = grid.mode_magnitudes();
        Self {
            family,
            grid: grid.clone(),
            dt,
            half: FlowTable::new(family, &radii, 0.5 * dt),
            full: FlowTable::new(family, &radii, dt),
            spectrum: vec![Complex64::default(); grid.len()],
            real: vec![0.0; grid.len()],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Homogeneous flow over one full step.
    pub fn step_free(&self, state: &mut SolverState) {
        self.full.apply(&mut state.u_hat, &mut state.v_hat);
        state.time += self.dt;
        state.step += 1;
    }

    /// Real-space displacement of `state`.
    pub fn displacement(&mut self, state: &SolverState) -> Field {
        self.displacement_into(state);
        Field::from_vec_unchecked(self.grid.clone(), self.real.clone())
    }

    /// Real-space displacement into the internal buffer.
    pub(crate) fn displacement_into(&mut self, state: &SolverState) -> &[f64] {
        self.spectrum.copy_from_slice(&state.u_hat);
        self.grid
            .inverse_real_into(&mut self.spectrum, &mut self.real);
        &self.real
    }

    /// Half flow, kick by `Σ f ΔW / dxⁿ`, half flow.
    fn kick_step(
        &mut self,
        state: &mut SolverState,
        integrand: Option<&[f64]>,
        constant: f64,
        dw: Option<&[f64]>,
    ) {
        self.half.apply(&mut state.u_hat, &mut state.v_hat);
        if let Some(dw) = dw {
            // forward_real_into multiplies by dxⁿ, cancelling the density division.
            let inv_cell = 1.0 / self.grid.cell_volume();
            match integrand {
                Some(f) => {
                    for ((r, &a), &b) in self.real.iter_mut().zip(f).zip(dw) {
                        *r = a * b * inv_cell;
                    }
                }
                None => {
                    for (r, &b) in self.real.iter_mut().zip(dw) {
                        *r = constant * b * inv_cell;
                    }
                }
            }
            self.grid.forward_real_into(&self.real, &mut self.spectrum);
            let target = if self.family.is_first_order() {
                &mut state.u_hat
            } else {
                &mut state.v_hat
            };
            for (t, s) in target.iter_mut().zip(&self.spectrum) {
                *t += s;
            }
        }
        self.half.apply(&mut state.u_hat, &mut state.v_hat);
        state.time += self.dt;
        state.step += 1;
    }

    /// One stochastic step. `f(u(t_j))` is committed to `stream` before the
    /// increment is drawn.
    pub fn step_stochastic(
        &mut self,
        state: &mut SolverState,
        nonlinearity: &Nonlinearity,
        stream: &mut NoiseStream,
    ) -> Result<()> {
        if let Some(c) = nonlinearity.as_constant() {
            stream.commit_constant(c)?;
        } else {
            self.displacement_into(state);
            let values: Vec<f64> = self.real.iter().map(|&u| nonlinearity.eval(u)).collect();
            stream.commit_values(&values)?;
        }
        self.kick_from_stream(state, stream)
    }

    /// Step whose integrand is supplied by the caller (Picard iterates).
    pub(crate) fn step_with_integrand(
        &mut self,
        state: &mut SolverState,
        integrand: &[f64],
        stream: &mut NoiseStream,
    ) -> Result<()> {
        stream.commit_values(integrand)?;
        self.kick_from_stream(state, stream)
    }

    fn kick_from_stream(
        &mut self,
        state: &mut SolverState,
        stream: &mut NoiseStream,
    ) -> Result<()> {
        let constant = stream.pending_constant();
        if constant == Some(0.0) {
            stream.advance_zero()?;
            self.kick_step(state, None, 0.0, None);
        } else {
            let (integrand, dw) = stream.draw()?;
            self.kick_step(state, integrand, constant.unwrap_or(0.0), Some(dw));
        }
        if !state.is_finite() {
            return Err(Error::NonFiniteState {
                time: state.time,
                replicate: stream.replicate() as usize,
            });
        }
        Ok(())
    }

    /// Step with no noise but the same half/half splitting as a stochastic
    /// step, so noiseless and zero-integrand runs agree bit for bit.
    pub fn step_split_free(&mut self, state: &mut SolverState) {
        self.kick_step(state, None, 0.0, None);
    }

    /// Deterministic forcing over one step, `dt · F̂` kicked at the midpoint.
    pub fn step_forced(&mut self, state: &mut SolverState, forcing: &[f64]) {
        let dt = self.dt;
        let cell = self.grid.cell_volume();
        let scaled: Vec<f64> = forcing.iter().map(|v| v * dt * cell).collect();
        // kick_step divides by dxⁿ.
        self.kick_step(state, None, 1.0, Some(&scaled));
    }
}
