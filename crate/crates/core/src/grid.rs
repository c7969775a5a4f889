//! Periodic lattices and the discrete Fourier convention.
//!
//! A [`Grid`] discretises the box `[-L/2, L/2)^n` with `N` points per axis.
//! Both physical and frequency indices use FFT ordering: flat axis index
//! `i` stands for the signed integer `k = i` when `i < N/2` and `k = i - N`
//! otherwise, so index 0 is the origin in `x` and the zero mode in `ξ`.
//! Along each axis `x_i = k dx` and `ξ_i = 2πk / L`.
//!
//! The transform approximates the continuous Fourier transform
//! `f̂(ξ) = ∫ e^{-iξ·x} f(x) dx`:
//!
//! ```text
//! forward:  f̂_k = dxⁿ Σ_j f_j e^{-iξ_k·x_j}
//! inverse:  f_j = L⁻ⁿ Σ_k f̂_k e^{ iξ_k·x_j}
//! ```
//!
//! so that Parseval reads `Σ_j |f_j|² dxⁿ = L⁻ⁿ Σ_k |f̂_k|²`, and the
//! inverse of a sampled multiplier `m(ξ)` approximates
//! `(2π)⁻ⁿ ∫ e^{iξ·x} m(ξ) dξ`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serializable description of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub extent: f64,
    pub points: usize,
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

/// Periodic spatial lattice together with its dual frequency lattice.
#[derive(Clone)]
pub struct Grid {
    spec: GridSpec,
    dx: f64,
    plans: Arc<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.spec.dim)
            .field("extent", &self.spec.extent)
            .field("points", &self.spec.points)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Grid {
    pub fn new(dim: usize, extent: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "extent must be positive, got {extent}"
            )));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 2, got {points}"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            spec: GridSpec {
                dim,
                extent,
                points,
            },
            // Exact: points is a power of two.
            dx: extent / points as f64,
            plans: Arc::new(Plans {
                forward,
                inverse,
                scratch_len,
            }),
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        Self::new(spec.dim, spec.extent, spec.points)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn extent(&self) -> f64 {
        self.spec.extent
    }

    pub fn points(&self) -> usize {
        self.spec.points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// dxⁿ.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.spec.dim as i32)
    }

    /// Lⁿ.
    pub fn volume(&self) -> f64 {
        self.spec.extent.powi(self.spec.dim as i32)
    }

    /// Total number of lattice sites, Nⁿ.
    pub fn len(&self) -> usize {
        self.spec.points.pow(self.spec.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Signed lattice integer for an axis index in FFT ordering.
    pub fn signed_index(&self, i: usize) -> i64 {
        let n = self.spec.points;
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        self.signed_index(i) as f64 * self.dx
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * PI * self.signed_index(i) as f64 / self.spec.extent
    }

    /// Per-axis Nyquist frequency π/dx.
    pub fn nyquist(&self) -> f64 {
        PI / self.dx
    }

    /// Largest |ξ| on the lattice (the corner mode).
    pub fn max_wavenumber(&self) -> f64 {
        self.nyquist() * (self.spec.dim as f64).sqrt()
    }

    /// Axis indices of a flat index (axis 0 slowest).
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let n = self.spec.points;
        let mut idx = [0; 3];
        for d in (0..self.spec.dim).rev() {
            idx[d] = flat % n;
            flat /= n;
        }
        idx
    }

    /// Flat index of the mode at `-k` (Hermitian partner).
    /// Flat index displaced by `shift` lattice steps along `axis`
    /// (periodic).
    pub fn shifted_index(&self, flat: usize, axis: usize, shift: usize) -> usize {
        let n = self.spec.points;
        let stride = n.pow((self.spec.dim - 1 - axis) as u32);
        let along = (flat / stride) % n;
        flat - along * stride + ((along + shift) % n) * stride
    }

    pub fn negate_flat(&self, flat: usize) -> usize {
        let n = self.spec.points;
        let idx = self.unflatten(flat);
        (0..self.spec.dim).fold(0, |acc, d| acc * n + (n - idx[d]) % n)
    }

    /// Physical position of every lattice site.
    pub fn positions(&self) -> Vec<[f64; 3]> {
        (0..self.len())
            .map(|f| {
                let idx = self.unflatten(f);
                let mut x = [0.0; 3];
                for d in 0..self.spec.dim {
                    x[d] = self.coordinate(idx[d]);
                }
                x
            })
            .collect()
    }

    /// |x| for every lattice site.
    pub fn radii(&self) -> Vec<f64> {
        self.positions()
            .iter()
            .map(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt())
            .collect()
    }

    /// |ξ| for every mode, in flat FFT order.
    pub fn mode_magnitudes(&self) -> Vec<f64> {
        (0..self.len())
            .map(|f| {
                let idx = self.unflatten(f);
                (0..self.spec.dim)
                    .map(|d| self.wavenumber(idx[d]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Unnormalised in-place DFT over every axis.
    pub(crate) fn fft_in_place(&self, data: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(data.len(), self.len());
        let n = self.spec.points;
        let plan = if inverse {
            &self.plans.inverse
        } else {
            &self.plans.forward
        };
        let mut scratch = vec![Complex64::default(); self.plans.scratch_len];
        // Last axis is contiguous.
        plan.process_with_scratch(data, &mut scratch);
        if self.spec.dim == 1 {
            return;
        }
        let mut lines = vec![Complex64::default(); data.len()];
        for axis in 0..self.spec.dim - 1 {
            let stride = n.pow((self.spec.dim - 1 - axis) as u32);
            let outer = data.len() / (n * stride);
            for o in 0..outer {
                for j in 0..n {
                    let src = o * n * stride + j * stride;
                    for inner in 0..stride {
                        lines[(o * stride + inner) * n + j] = data[src + inner];
                    }
                }
            }
            plan.process_with_scratch(&mut lines, &mut scratch);
            for o in 0..outer {
                for j in 0..n {
                    let dst = o * n * stride + j * stride;
                    for inner in 0..stride {
                        data[dst + inner] = lines[(o * stride + inner) * n + j];
                    }
                }
            }
        }
    }

    /// Forward transform of raw real samples into `out`, using the
    /// normalisation documented at module level.
    pub(crate) fn forward_real_into(&self, values: &[f64], out: &mut [Complex64]) {
        let scale = self.cell_volume();
        for (o, &v) in out.iter_mut().zip(values) {
            *o = Complex64::new(v * scale, 0.0);
        }
        self.fft_in_place(out, false);
    }

    /// Inverse transform of `coeffs` (destroyed) into real samples.
    pub(crate) fn inverse_real_into(&self, coeffs: &mut [Complex64], out: &mut [f64]) {
        self.fft_in_place(coeffs, true);
        let scale = 1.0 / self.volume();
        for (o, c) in out.iter_mut().zip(coeffs.iter()) {
            *o = c.re * scale;
        }
    }
}

/// Real samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!("entry {i} is not finite"),
            });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f` at every lattice position.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = grid.positions().iter().map(|x| f(&x[..dim])).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Flat index displaced by `shift` lattice steps along `axis`.
    pub fn shifted_index(&self, flat: usize, axis: usize, shift: usize) -> usize {
        self.grid.shifted_index(flat, axis, shift)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Fourier coefficients on a grid, in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                actual: coefficients.len(),
            });
        }
        Ok(Self { grid, coefficients })
    }

    /// Coefficients of a real, radially symmetric multiplier `m(|ξ|)`.
    pub fn from_multiplier(grid: &Grid, m: impl Fn(f64) -> f64) -> Self {
        let coefficients = grid
            .mode_magnitudes()
            .into_iter()
            .map(|r| Complex64::new(m(r), 0.0))
            .collect();
        Self {
            grid: grid.clone(),
            coefficients,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    /// Largest |c_k - conj(c_{-k})|.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coefficients.len())
            .map(|f| {
                let g = self.grid.negate_flat(f);
                (self.coefficients[f] - self.coefficients[g].conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Replaces each pair by its Hermitian average.
    pub fn enforce_hermitian(&mut self) {
        for f in 0..self.coefficients.len() {
            let g = self.grid.negate_flat(f);
            if g < f {
                continue;
            }
            let avg = 0.5 * (self.coefficients[f] + self.coefficients[g].conj());
            self.coefficients[f] = avg;
            self.coefficients[g] = avg.conj();
        }
    }

    /// Pointwise product with another spectrum on the same grid.
    pub fn multiply(&self, other: &SpectralField) -> Result<SpectralField> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("spectra live on different grids".into()));
        }
        Ok(SpectralField {
            grid: self.grid.clone(),
            coefficients: self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }
}

pub fn forward_transform(f: &Field) -> SpectralField {
    let grid = f.grid.clone();
    let mut coefficients = vec![Complex64::default(); grid.len()];
    grid.forward_real_into(&f.values, &mut coefficients);
    let mut s = SpectralField { grid, coefficients };
    s.enforce_hermitian();
    s
}

/// Inverse transform; the imaginary residue of a Hermitian spectrum is dropped.
pub fn inverse_transform(s: &SpectralField) -> Field {
    let grid = s.grid.clone();
    let mut work = s.coefficients.clone();
    let mut values = vec![0.0; grid.len()];
    grid.inverse_real_into(&mut work, &mut values);
    Field { grid, values }
}

/// `Σ f(x)² dxⁿ`, cross-checked against `L⁻ⁿ Σ |f̂|²` in debug builds.
pub fn parseval_norm(f: &Field) -> f64 {
    let direct: f64 = f.values.iter().map(|v| v * v).sum::<f64>() * f.grid.cell_volume();
    #[cfg(debug_assertions)]
    {
        let spectral = spectral_norm(&forward_transform(f));
        debug_assert!(
            (direct - spectral).abs() <= 1e-10 * direct.max(f64::MIN_POSITIVE),
            "Parseval mismatch: {direct} vs {spectral}"
        );
    }
    direct
}

/// `L⁻ⁿ Σ |f̂_k|²`.
pub fn spectral_norm(s: &SpectralField) -> f64 {
    s.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>() / s.grid.volume()
}
