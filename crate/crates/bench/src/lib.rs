//! Fixtures shared by the benchmarks.

use viscwave_core::solver::default_dt;
use viscwave_core::{Grid, KernelFamily, NonlinearityPreset, SimulationConfig};

/// Square grid with `points` cells per side on a box of side 8.
pub fn grid(dim: usize, points: usize) -> Grid {
    Grid::new(dim, 8.0, points).expect("benchmark grid")
}

/// Additive-noise ensemble over a quarter time unit.
pub fn ensemble_config(dim: usize, points: usize, replicates: usize) -> SimulationConfig {
    let g = grid(dim, points);
    let dt = default_dt(&g);
    let horizon = (0.25 / dt).ceil() * dt;
    let mut c = SimulationConfig::new(KernelFamily::ViscousWave, dim, 8.0, points, horizon);
    c.f = NonlinearityPreset::Sin;
    c.replicates = replicates;
    c.dt = Some(dt);
    c
}
