//! Hölder exponents from second-order structure functions
//! `S₂(ℓ) = E|u(· + ℓ) − u(·)|²`, averaged over the box before the
//! ensemble, with `α̂` half the log–log slope.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::solver::{
    reduce_ensemble, EnsembleReducer, Simulation, SimulationConfig, TrajectoryEnsemble,
};
use crate::stats::{fit_line, quantile, RunningStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Time,
    Space,
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "time" | "t" => Ok(Self::Time),
            "space" | "x" => Ok(Self::Space),
            other => Err(invalid(
                "axis",
                format!("`{other}` is neither time nor space"),
            )),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Time => "time",
            Self::Space => "space",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HolderOptions {
    pub min_lags: usize,
    /// Minimum `log₁₀(max lag / min lag)` inside the fit window.
    pub min_decades: f64,
    pub bootstrap: usize,
    pub confidence: f64,
    pub seed: u64,
    /// Explicit fit window; `None` applies [`default_window`].
    pub window: Option<(f64, f64)>,
}

impl Default for HolderOptions {
    fn default() -> Self {
        Self {
            min_lags: 5,
            min_decades: 1.5,
            bootstrap: 400,
            confidence: 0.95,
            seed: 0x401de5,
            window: None,
        }
    }
}

/// `[4 dx, L/8]` in space and `[4 dt, t₀/8]` in time, where `t₀` is the
/// base observation time.
pub fn default_window(axis: Axis, grid: &Grid, dt: f64, base_time: f64) -> (f64, f64) {
    match axis {
        Axis::Space => (4.0 * grid.dx(), grid.extent() / 8.0),
        Axis::Time => (4.0 * dt, base_time / 8.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub axis: Axis,
    pub lags: Vec<f64>,
    pub s2: Vec<f64>,
    pub s2_stderr: Vec<f64>,
    /// Lags that entered the fit.
    pub window: (f64, f64),
    pub slope: f64,
    pub alpha: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub r_squared: f64,
    pub replicates: usize,
}

fn mean_rows(rows: &[Vec<f64>], pick: impl Iterator<Item = usize>, lags: usize) -> Vec<f64> {
    let mut sum = vec![0.0; lags];
    let mut count = 0usize;
    for i in pick {
        for (s, v) in sum.iter_mut().zip(&rows[i]) {
            *s += v;
        }
        count += 1;
    }
    sum.iter().map(|s| s / count as f64).collect()
}

/// Fits `log S₂` against `log ℓ` over the window. `rows[r][j]` is the
/// box-averaged squared increment of replicate `r` at `lags[j]`.
pub fn fit_structure_function(
    axis: Axis,
    lags: &[f64],
    rows: &[Vec<f64>],
    window: (f64, f64),
    opts: &HolderOptions,
) -> Result<HolderReport> {
    if rows.is_empty() {
        return Err(invalid("replicates", "no structure-function samples"));
    }
    if rows.iter().any(|r| r.len() != lags.len()) {
        return Err(Error::ShapeMismatch {
            expected: lags.len(),
            actual: rows
                .iter()
                .map(Vec::len)
                .find(|&l| l != lags.len())
                .unwrap_or(0),
        });
    }
    let slack = 1e-9;
    let used: Vec<usize> = (0..lags.len())
        .filter(|&j| {
            lags[j] > 0.0
                && lags[j] >= window.0 * (1.0 - slack)
                && lags[j] <= window.1 * (1.0 + slack)
        })
        .collect();
    if used.len() < opts.min_lags {
        return Err(Error::InsufficientLagSpan(format!(
            "{} lags inside [{:.3e}, {:.3e}], need {}",
            used.len(),
            window.0,
            window.1,
            opts.min_lags
        )));
    }
    let lo = used.iter().map(|&j| lags[j]).fold(f64::INFINITY, f64::min);
    let hi = used.iter().map(|&j| lags[j]).fold(0.0, f64::max);
    let decades = (hi / lo).log10();
    if decades < opts.min_decades - 1e-9 {
        return Err(Error::InsufficientLagSpan(format!(
            "fit lags span {decades:.2} decades, need {}",
            opts.min_decades
        )));
    }
    let mut stats = vec![RunningStats::default(); lags.len()];
    for row in rows {
        for (s, &v) in stats.iter_mut().zip(row) {
            s.push(v);
        }
    }
    let s2: Vec<f64> = stats.iter().map(|s| s.mean()).collect();
    let s2_stderr: Vec<f64> = stats.iter().map(|s| s.stderr()).collect();
    if used.iter().any(|&j| !(s2[j] > 0.0)) {
        return Err(Error::InsufficientLagSpan(
            "structure function vanishes inside the window".into(),
        ));
    }
    let x: Vec<f64> = used.iter().map(|&j| lags[j].ln()).collect();
    let fit_of = |means: &[f64]| {
        let y: Vec<f64> = used
            .iter()
            .map(|&j| means[j].max(f64::MIN_POSITIVE).ln())
            .collect();
        fit_line(&x, &y)
    };
    let fit = fit_of(&s2).ok_or_else(|| Error::InsufficientLagSpan("degenerate lags".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut boot: Vec<f64> = (0..opts.bootstrap)
        .filter_map(|_| {
            let pick: Vec<usize> = (0..rows.len())
                .map(|_| rng.random_range(0..rows.len()))
                .collect();
            fit_of(&mean_rows(rows, pick.into_iter(), lags.len())).map(|f| 0.5 * f.slope)
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - opts.confidence);
    let alpha = 0.5 * fit.slope;
    let (ci_low, ci_high) = if boot.is_empty() {
        (alpha, alpha)
    } else {
        (quantile(&boot, tail), quantile(&boot, 1.0 - tail))
    };
    Ok(HolderReport {
        axis,
        lags: lags.to_vec(),
        s2,
        s2_stderr,
        window: (lo, hi),
        slope: fit.slope,
        alpha,
        ci_low,
        ci_high,
        r_squared: fit.r_squared,
        replicates: rows.len(),
    })
}

/// Box average of `|u(x + ℓ e_a) − u(x)|²` over cells and axes.
pub fn spatial_increment_mean(grid: &Grid, values: &[f64], cells: usize) -> f64 {
    let mut total = 0.0;
    for axis in 0..grid.dim() {
        for i in 0..values.len() {
            let d = values[grid.shifted_index(i, axis, cells)] - values[i];
            total += d * d;
        }
    }
    total / (values.len() * grid.dim()) as f64
}

fn mean_square_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Streaming per-replicate structure functions.
#[derive(Debug, Clone)]
pub struct StructureAccumulator {
    grid: Grid,
    plan: Plan,
    rows: Vec<Vec<f64>>,
    base: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Plan {
    /// Spatial lags in cells at one observation.
    Space {
        observation: usize,
        cells: Vec<usize>,
    },
    /// Observation 0 is the base; observation `j ≥ 1` is lag `j − 1`.
    Time { lags: usize },
}

impl StructureAccumulator {
    pub fn space(grid: &Grid, observation: usize, cells: Vec<usize>) -> Self {
        Self {
            grid: grid.clone(),
            plan: Plan::Space { observation, cells },
            rows: Vec::new(),
            base: Vec::new(),
        }
    }

    pub fn time(grid: &Grid, lags: usize) -> Self {
        Self {
            grid: grid.clone(),
            plan: Plan::Time { lags },
            rows: Vec::new(),
            base: Vec::new(),
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }
}

impl EnsembleReducer for StructureAccumulator {
    fn observe(&mut self, _replicate: usize, observation: usize, values: &[f64]) {
        match &self.plan {
            Plan::Space {
                observation: o,
                cells,
            } => {
                if observation == *o {
                    let row = cells
                        .iter()
                        .map(|&c| spatial_increment_mean(&self.grid, values, c))
                        .collect();
                    self.rows.push(row);
                }
            }
            Plan::Time { lags } => {
                if observation == 0 {
                    self.base.clear();
                    self.base.extend_from_slice(values);
                    self.rows.push(Vec::with_capacity(*lags));
                } else if observation <= *lags {
                    let d = mean_square_difference(values, &self.base);
                    if let Some(row) = self.rows.last_mut() {
                        row.push(d);
                    }
                }
            }
        }
    }

    fn merge(&mut self, later: Self) {
        self.rows.extend(later.rows);
    }
}

fn space_cells(grid: &Grid, lags: &[f64]) -> Result<Vec<usize>> {
    lags.iter()
        .map(|&l| {
            let c = (l / grid.dx()).round();
            if c < 1.0
                || (c * grid.dx() - l).abs() > 1e-9 * l.max(1.0)
                || c as usize >= grid.points()
            {
                Err(invalid(
                    "lags",
                    format!("spatial lag {l} is not a positive multiple of dx"),
                ))
            } else {
                Ok(c as usize)
            }
        })
        .collect()
}

/// Structure-function fit on a stored ensemble. Space lags are measured at
/// the first observation time; time lags are offsets from it.
pub fn holder_estimate(
    ensemble: &TrajectoryEnsemble,
    axis: Axis,
    lags: &[f64],
    opts: &HolderOptions,
) -> Result<HolderReport> {
    let grid = ensemble.grid()?;
    let base_time = *ensemble
        .times
        .first()
        .ok_or_else(|| invalid("observe_times", "ensemble has no snapshots"))?;
    let dt = ensemble.config.step()?;
    let rows: Vec<Vec<f64>> = match axis {
        Axis::Space => {
            let cells = space_cells(&grid, lags)?;
            ensemble
                .replicates
                .iter()
                .map(|r| {
                    let v = r.snapshots[0].values();
                    cells
                        .iter()
                        .map(|&c| spatial_increment_mean(&grid, v, c))
                        .collect()
                })
                .collect()
        }
        Axis::Time => {
            let index: Vec<usize> = lags
                .iter()
                .map(|&l| {
                    ensemble
                        .times
                        .iter()
                        .position(|&t| (t - base_time - l).abs() <= 1e-9 * (1.0 + t))
                        .filter(|&i| i > 0)
                        .ok_or_else(|| {
                            invalid(
                                "lags",
                                format!("no snapshot at lag {l} after t = {base_time}"),
                            )
                        })
                })
                .collect::<Result<_>>()?;
            ensemble
                .replicates
                .iter()
                .map(|r| {
                    let base = r.snapshots[0].values();
                    index
                        .iter()
                        .map(|&i| mean_square_difference(r.snapshots[i].values(), base))
                        .collect()
                })
                .collect()
        }
    };
    let window = opts
        .window
        .unwrap_or_else(|| default_window(axis, &grid, dt, base_time));
    fit_structure_function(axis, lags, &rows, window, opts)
}

/// Runs `config` without storing snapshots and fits the structure function
/// at base time `t0`. Lags are physical (multiples of `dx` or `dt`).
pub fn holder_streaming(
    config: &SimulationConfig,
    axis: Axis,
    t0: f64,
    lags: &[f64],
    opts: &HolderOptions,
) -> Result<HolderReport> {
    let mut config = config.clone();
    let grid = config.grid()?;
    let make: Box<dyn Fn() -> StructureAccumulator + Sync>;
    match axis {
        Axis::Space => {
            config.observe_times = vec![t0];
            let cells = space_cells(&grid, lags)?;
            let g = grid.clone();
            make = Box::new(move || StructureAccumulator::space(&g, 0, cells.clone()));
        }
        Axis::Time => {
            if lags.windows(2).any(|w| w[1] <= w[0]) || lags.first().is_some_and(|&l| l <= 0.0) {
                return Err(invalid("lags", "time lags must be positive and increasing"));
            }
            config.observe_times = std::iter::once(t0)
                .chain(lags.iter().map(|l| t0 + l))
                .collect();
            config.horizon = config
                .horizon
                .max(*config.observe_times.last().unwrap_or(&t0));
            let g = grid.clone();
            let count = lags.len();
            make = Box::new(move || StructureAccumulator::time(&g, count));
        }
    }
    let sim = Simulation::new(&config)?;
    let acc = reduce_ensemble(&sim, make)?;
    let window = opts
        .window
        .unwrap_or_else(|| default_window(axis, &grid, sim.dt(), t0));
    fit_structure_function(axis, lags, acc.rows(), window, opts)
}

/// Fractional Brownian motion on `[0, 1]` at `points` equispaced times
/// (excluding 0) by circulant embedding of fractional Gaussian noise.
pub fn fractional_brownian_motion(
    hurst: f64,
    points: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(invalid("hurst", "must lie in (0, 1)"));
    }
    if points < 2 {
        return Err(invalid("points", "need at least two points"));
    }
    let m = 2 * points;
    let gamma = |k: f64| {
        0.5 * ((k + 1.0).powf(2.0 * hurst) - 2.0 * k.powf(2.0 * hurst)
            + (k - 1.0).abs().powf(2.0 * hurst))
    };
    let mut c: Vec<Complex64> = (0..m)
        .map(|i| {
            let k = if i <= points { i } else { m - i };
            Complex64::new(gamma(k as f64), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut c);
    let mut w: Vec<Complex64> = c
        .iter()
        .map(|l| {
            if l.re < -1e-8 {
                return Err(Error::QuadratureFailure(
                    "circulant embedding is not positive".into(),
                ));
            }
            let s = (l.re.max(0.0) / m as f64).sqrt();
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Ok(Complex64::new(a * s, b * s))
        })
        .collect::<Result<_>>()?;
    fft.process(&mut w);
    let scale = (points as f64).powf(-hurst);
    let mut acc = 0.0;
    Ok(w[..points]
        .iter()
        .map(|z| {
            acc += z.re * scale;
            acc
        })
        .collect())
}

/// Estimator self-test on `paths` fractional Brownian paths with Hurst
/// index `hurst`, fitting dyadic lags from 1 to `points/8` cells.
pub fn fbm_self_test(hurst: f64, paths: usize, points: usize, seed: u64) -> Result<HolderReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lags_cells = Vec::new();
    let mut l = 1;
    while l <= points / 8 {
        lags_cells.push(l);
        l *= 2;
    }
    let h = 1.0 / points as f64;
    let lags: Vec<f64> = lags_cells.iter().map(|&c| c as f64 * h).collect();
    let rows = (0..paths)
        .map(|_| {
            let path = fractional_brownian_motion(hurst, points, &mut rng)?;
            Ok(lags_cells
                .iter()
                .map(|&c| mean_square_difference(&path[c..], &path[..points - c]))
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let opts = HolderOptions {
        seed,
        ..HolderOptions::default()
    };
    fit_structure_function(Axis::Space, &lags, &rows, (h, 0.125), &opts)
}
