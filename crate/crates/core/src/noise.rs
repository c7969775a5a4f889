//! Lattice spacetime white noise and the stochastic integral of step
//! processes.
//!
//! A spacetime cell `[s_j, s_j + dt) × (cell of volume dxⁿ)` receives an
//! independent `N(0, dt·dxⁿ)` increment, so sums over cells reproduce
//! `E[Ẇ(A)Ẇ(B)] = λ(A ∩ B)` exactly for lattice-aligned sets. Integrands are
//! constant on cells and must be committed before the step's increment is
//! drawn.
//!
//! Streams are counter-based: the ChaCha8 key is the tuple
//! `(master seed, replicate, step, domain tag)`, so every increment can be
//! regenerated on its own and no RNG state is shared between replicates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};
use crate::stats::{gaussian_even_moment, RunningStats};

const NOISE_TAG: u64 = u64::from_le_bytes(*b"vw-noise");

/// Master seed plus the stream derivation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngPolicy {
    pub master_seed: u64,
}

impl RngPolicy {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// Independent generator for `(replicate, step)` within `domain`.
    pub fn stream(&self, domain: u64, replicate: u64, step: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&replicate.to_le_bytes());
        key[16..24].copy_from_slice(&step.to_le_bytes());
        key[24..].copy_from_slice(&domain.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    pub fn seed_path(&self, step: u64, replicate: u64) -> SeedPath {
        SeedPath {
            master_seed: self.master_seed,
            step,
            replicate,
        }
    }
}

/// Coordinates of one noise increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPath {
    pub master_seed: u64,
    pub step: u64,
    pub replicate: u64,
}

/// One time step of lattice white noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    grid: Grid,
    dt: f64,
    values: Vec<f64>,
    seed_path: SeedPath,
}

impl NoiseIncrement {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed_path(&self) -> SeedPath {
        self.seed_path
    }

    /// Per-cell variance `dt·dxⁿ`.
    pub fn cell_variance(&self) -> f64 {
        self.dt * self.grid.cell_volume()
    }

    /// `Ẇ(A)` for a set of lattice cells.
    pub fn measure(&self, cells: impl IntoIterator<Item = usize>) -> f64 {
        cells.into_iter().map(|c| self.values[c]).sum()
    }
}

fn fill_normals(path: SeedPath, sd: f64, out: &mut [f64]) {
    let mut rng = RngPolicy::new(path.master_seed).stream(NOISE_TAG, path.replicate, path.step);
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = sd * z;
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            "dt",
            format!("time step must be positive, got {dt}"),
        ))
    }
}

/// Draws the increment addressed by `seed_path`.
pub fn sample_increment(grid: &Grid, dt: f64, seed_path: SeedPath) -> Result<NoiseIncrement> {
    check_dt(dt)?;
    let mut values = vec![0.0; grid.len()];
    fill_normals(seed_path, (dt * grid.cell_volume()).sqrt(), &mut values);
    Ok(NoiseIncrement {
        grid: grid.clone(),
        dt,
        values,
        seed_path,
    })
}

/// `Σ_j Σ_cells f_j · ΔW_j` for a deterministic step integrand.
pub fn stochastic_integral(integrand: &[Field], increments: &[NoiseIncrement]) -> Result<f64> {
    if integrand.len() != increments.len() {
        return Err(Error::ShapeMismatch {
            expected: increments.len(),
            actual: integrand.len(),
        });
    }
    let mut total = 0.0;
    for (f, dw) in integrand.iter().zip(increments) {
        if f.grid() != dw.grid() {
            return Err(Error::InvalidGrid(
                "integrand and noise grids differ".into(),
            ));
        }
        total += f
            .values()
            .iter()
            .zip(&dw.values)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pending {
    Empty,
    Field,
    Constant(f64),
}

/// Sequential noise source for one replicate that enforces adaptedness:
/// the integrand for step `j` must be committed before increment `j` is
/// released. It also accumulates the running stochastic integral
/// `Σ f ΔW` and its compensator `Σ f² dt dxⁿ`.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    grid: Grid,
    dt: f64,
    policy: RngPolicy,
    replicate: u64,
    step: u64,
    sd: f64,
    pending: Pending,
    integrand: Vec<f64>,
    increment: Vec<f64>,
    integral: f64,
    quadratic: f64,
}

impl NoiseStream {
    pub fn new(grid: &Grid, dt: f64, policy: RngPolicy, replicate: u64) -> Result<Self> {
        check_dt(dt)?;
        Ok(Self {
            grid: grid.clone(),
            dt,
            policy,
            replicate,
            step: 0,
            sd: (dt * grid.cell_volume()).sqrt(),
            pending: Pending::Empty,
            integrand: vec![0.0; grid.len()],
            increment: vec![0.0; grid.len()],
            integral: 0.0,
            quadratic: 0.0,
        })
    }

    /// Index of the next increment to be drawn.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    /// The committed constant, if the pending integrand is one.
    pub fn pending_constant(&self) -> Option<f64> {
        match self.pending {
            Pending::Constant(c) => Some(c),
            _ => None,
        }
    }

    /// Advances past a step whose committed integrand is identically zero
    /// without generating the increment.
    pub fn advance_zero(&mut self) -> Result<()> {
        if self.pending != Pending::Constant(0.0) {
            return Err(Error::AdaptednessViolation(format!(
                "step {} has no zero integrand committed",
                self.step
            )));
        }
        self.pending = Pending::Empty;
        self.step += 1;
        Ok(())
    }

    fn ensure_free(&self) -> Result<()> {
        if self.pending != Pending::Empty {
            return Err(Error::AdaptednessViolation(format!(
                "integrand for step {} already committed",
                self.step
            )));
        }
        Ok(())
    }

    pub fn commit(&mut self, integrand: &Field) -> Result<()> {
        if integrand.grid() != &self.grid {
            return Err(Error::InvalidGrid(
                "integrand grid differs from noise grid".into(),
            ));
        }
        self.commit_values(integrand.values())
    }

    pub(crate) fn commit_values(&mut self, values: &[f64]) -> Result<()> {
        self.ensure_free()?;
        if values.len() != self.integrand.len() {
            return Err(Error::ShapeMismatch {
                expected: self.integrand.len(),
                actual: values.len(),
            });
        }
        self.integrand.copy_from_slice(values);
        self.pending = Pending::Field;
        Ok(())
    }

    /// Commits a spatially constant integrand.
    pub fn commit_constant(&mut self, value: f64) -> Result<()> {
        self.ensure_free()?;
        self.pending = Pending::Constant(value);
        Ok(())
    }

    /// Releases the increment for the committed step and advances.
    /// Returns the committed integrand (`None` for a constant) and `ΔW`.
    pub fn draw(&mut self) -> Result<(Option<&[f64]>, &[f64])> {
        let pending = self.pending;
        if pending == Pending::Empty {
            return Err(Error::AdaptednessViolation(format!(
                "increment {} requested before its integrand was committed",
                self.step
            )));
        }
        let path = self.policy.seed_path(self.step, self.replicate);
        fill_normals(path, self.sd, &mut self.increment);
        let cell_measure = self.dt * self.grid.cell_volume();
        match pending {
            Pending::Constant(c) => {
                self.integral += c * self.increment.iter().sum::<f64>();
                self.quadratic += c * c * cell_measure * self.grid.len() as f64;
            }
            _ => {
                let mut s = 0.0;
                let mut q = 0.0;
                for (f, dw) in self.integrand.iter().zip(&self.increment) {
                    s += f * dw;
                    q += f * f;
                }
                self.integral += s;
                self.quadratic += q * cell_measure;
            }
        }
        self.pending = Pending::Empty;
        self.step += 1;
        let integrand = match pending {
            Pending::Field => Some(&self.integrand[..]),
            _ => None,
        };
        Ok((integrand, &self.increment))
    }

    /// `Σ f ΔW` so far.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// `Σ f² dt dxⁿ` so far (the discrete `∫∫ f²`).
    pub fn quadratic_variation(&self) -> f64 {
        self.quadratic
    }
}

/// Deterministic step integrand: one field per time step of length `dt`.
#[derive(Debug, Clone)]
pub struct StepIntegrand {
    pub dt: f64,
    pub steps: Vec<Field>,
}

impl StepIntegrand {
    pub fn new(dt: f64, steps: Vec<Field>) -> Result<Self> {
        check_dt(dt)?;
        let first = steps
            .first()
            .ok_or_else(|| invalid("steps", "integrand needs at least one step"))?
            .grid()
            .clone();
        if steps.iter().any(|f| f.grid() != &first) {
            return Err(Error::InvalidGrid(
                "integrand steps on different grids".into(),
            ));
        }
        Ok(Self { dt, steps })
    }

    /// Constant `value` on every cell for `count` steps.
    pub fn constant(grid: &Grid, dt: f64, count: usize, value: f64) -> Result<Self> {
        Self::new(dt, vec![Field::constant(grid, value); count])
    }

    /// `∫∫ f²` on the lattice.
    pub fn integrated_square(&self) -> f64 {
        let grid = self.steps[0].grid();
        self.steps
            .iter()
            .map(|f| f.values().iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            * self.dt
            * grid.cell_volume()
    }

    fn grid(&self) -> &Grid {
        self.steps[0].grid()
    }
}

/// One sample of `∫∫ f dW` per replicate.
pub fn integral_samples(
    f: &StepIntegrand,
    replicates: usize,
    policy: RngPolicy,
) -> Result<Vec<f64>> {
    let grid = f.grid().clone();
    (0..replicates)
        .map(|r| {
            let mut stream = NoiseStream::new(&grid, f.dt, policy, r as u64)?;
            for step in &f.steps {
                stream.commit(step)?;
                stream.draw()?;
            }
            Ok(stream.integral())
        })
        .collect()
}

/// Empirical `E|I|^p` against the Gaussian value `(p-1)!! (∫∫f²)^{p/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub p: u32,
    pub replicates: usize,
    pub integrated_square: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub expected: f64,
    pub ratio: f64,
    pub tolerance: f64,
    pub passes: bool,
}

fn moment_check(samples: &[f64], integrated_square: f64, p: u32, tolerance: f64) -> MomentCheck {
    let mut stats = RunningStats::default();
    for x in samples {
        stats.push(x.abs().powi(p as i32));
    }
    let expected = gaussian_even_moment(p) * integrated_square.powf(0.5 * p as f64);
    let ratio = stats.mean() / expected;
    MomentCheck {
        p,
        replicates: samples.len(),
        integrated_square,
        empirical: stats.mean(),
        stderr: stats.stderr(),
        expected,
        ratio,
        tolerance,
        passes: (ratio - 1.0).abs() <= tolerance,
    }
}

/// Moment bound check with the Gaussian constant `c_p = (p-1)!!`; passes
/// within 5%.
pub fn bdg_moment_check(
    f: &StepIntegrand,
    p: u32,
    replicates: usize,
    policy: RngPolicy,
) -> Result<MomentCheck> {
    if p < 2 || !p.is_multiple_of(2) {
        return Err(invalid(
            "p",
            format!("moment order must be even and >= 2, got {p}"),
        ));
    }
    let samples = integral_samples(f, replicates, policy)?;
    Ok(moment_check(&samples, f.integrated_square(), p, 0.05))
}

/// Second and fourth moments of the same sample set: isometry within 1%,
/// fourth moment within 5%.
pub fn isometry_check(
    f: &StepIntegrand,
    replicates: usize,
    policy: RngPolicy,
) -> Result<(MomentCheck, MomentCheck)> {
    let samples = integral_samples(f, replicates, policy)?;
    let q = f.integrated_square();
    Ok((
        moment_check(&samples, q, 2, 0.01),
        moment_check(&samples, q, 4, 0.05),
    ))
}
