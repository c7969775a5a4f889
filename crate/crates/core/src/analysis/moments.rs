//! Pointwise ensemble moments `E|u(t, x)|^p` and their suprema.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::solver::{
    reduce_ensemble, EnsembleReducer, Simulation, SimulationConfig, TrajectoryEnsemble,
};
use crate::stats::fit_line;

/// Raw power sums `Σ u^k`, `k ∈ {1, 2, 4, 6, 8, 12}`, per observation and
/// cell.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    times: Vec<f64>,
    cells: usize,
    count: Vec<usize>,
    sums: Vec<[Vec<f64>; 6]>,
}

const POWERS: [u32; 6] = [1, 2, 4, 6, 8, 12];

fn power_slot(p: u32) -> Option<usize> {
    POWERS.iter().position(|&q| q == p)
}

impl MomentAccumulator {
    pub fn new(times: &[f64], cells: usize) -> Self {
        Self {
            times: times.to_vec(),
            cells,
            count: vec![0; times.len()],
            sums: times
                .iter()
                .map(|_| std::array::from_fn(|_| vec![0.0; cells]))
                .collect(),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn replicates(&self) -> usize {
        self.count.first().copied().unwrap_or(0)
    }

    fn mean(&self, obs: usize, slot: usize, cell: usize) -> f64 {
        self.sums[obs][slot][cell] / self.count[obs].max(1) as f64
    }

    /// Per `(t, cell)`: mean, variance, `E u⁴` and the standard error of
    /// the mean.
    pub fn pointwise(&self) -> Vec<PointStats> {
        let mut out = Vec::with_capacity(self.times.len() * self.cells);
        for (obs, &t) in self.times.iter().enumerate() {
            let r = self.count[obs] as f64;
            for cell in 0..self.cells {
                let m1 = self.mean(obs, 0, cell);
                let m2 = self.mean(obs, 1, cell);
                let var = if r > 1.0 {
                    ((m2 - m1 * m1) * r / (r - 1.0)).max(0.0)
                } else {
                    0.0
                };
                out.push(PointStats {
                    t,
                    cell,
                    mean: m1,
                    var,
                    p4: self.mean(obs, 2, cell),
                    stderr: (var / r.max(1.0)).sqrt(),
                });
            }
        }
        out
    }

    /// Supremum over cells of `E|u|^p` at each time, `p ∈ {2, 4, 6}`.
    pub fn table(&self, ps: &[u32]) -> Result<MomentTable> {
        let mut rows = Vec::new();
        let mut trends = Vec::new();
        for &p in ps {
            let (slot, slot2) = match (power_slot(p), power_slot(2 * p)) {
                (Some(a), Some(b)) if p % 2 == 0 => (a, b),
                _ => return Err(invalid("p", format!("moment order {p} not in {{2, 4, 6}}"))),
            };
            let mut sup = Vec::new();
            for (obs, &t) in self.times.iter().enumerate() {
                let r = self.count[obs] as f64;
                let (cell, value) = (0..self.cells)
                    .map(|c| (c, self.mean(obs, slot, c)))
                    .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
                let second = self.mean(obs, slot2, cell);
                let stderr = if r > 1.0 {
                    ((second - value * value).max(0.0) / (r - 1.0)).sqrt()
                } else {
                    0.0
                };
                rows.push(MomentRow {
                    p,
                    t,
                    cell,
                    sup_moment: value,
                    stderr,
                });
                sup.push((t, value, stderr));
            }
            let growth = if sup.len() >= 2 {
                let x: Vec<f64> = sup.iter().map(|s| s.0).collect();
                let y: Vec<f64> = sup.iter().map(|s| s.1).collect();
                let slope = fit_line(&x, &y).map(|f| f.slope).unwrap_or(0.0);
                let span = x[x.len() - 1] - x[0];
                let noise = sup.iter().map(|s| s.2).fold(0.0, f64::max);
                MomentTrend {
                    p,
                    slope,
                    growing: slope * span > 3.0 * noise && slope > 0.0,
                }
            } else {
                MomentTrend {
                    p,
                    slope: 0.0,
                    growing: false,
                }
            };
            trends.push(growth);
        }
        Ok(MomentTable {
            replicates: self.replicates(),
            rows,
            trends,
        })
    }
}

impl EnsembleReducer for MomentAccumulator {
    fn observe(&mut self, _replicate: usize, obs: usize, values: &[f64]) {
        self.count[obs] += 1;
        let s = &mut self.sums[obs];
        for (c, &u) in values.iter().enumerate() {
            let u2 = u * u;
            let u4 = u2 * u2;
            let u6 = u4 * u2;
            s[0][c] += u;
            s[1][c] += u2;
            s[2][c] += u4;
            s[3][c] += u6;
            s[4][c] += u4 * u4;
            s[5][c] += u6 * u6;
        }
    }

    fn merge(&mut self, later: Self) {
        for (a, b) in self.count.iter_mut().zip(later.count) {
            *a += b;
        }
        for (a, b) in self.sums.iter_mut().zip(later.sums) {
            for (x, y) in a.iter_mut().zip(b) {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub t: f64,
    pub cell: usize,
    pub mean: f64,
    pub var: f64,
    pub p4: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub p: u32,
    pub t: f64,
    /// Cell attaining the supremum.
    pub cell: usize,
    pub sup_moment: f64,
    pub stderr: f64,
}

/// Least-squares slope of the supremum against `t`; `growing` when the
/// rise over the observed span exceeds three standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTrend {
    pub p: u32,
    pub slope: f64,
    pub growing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub replicates: usize,
    pub rows: Vec<MomentRow>,
    pub trends: Vec<MomentTrend>,
}

impl MomentTable {
    /// Largest supremum over all times for order `p`.
    pub fn sup(&self, p: u32) -> Option<&MomentRow> {
        self.rows
            .iter()
            .filter(|r| r.p == p)
            .max_by(|a, b| a.sup_moment.total_cmp(&b.sup_moment))
    }
}

/// Moment table of a stored ensemble.
pub fn moment_table(ensemble: &TrajectoryEnsemble, ps: &[u32]) -> Result<MomentTable> {
    moment_accumulator(ensemble)?.table(ps)
}

/// Accumulated power sums of a stored ensemble.
pub fn moment_accumulator(ensemble: &TrajectoryEnsemble) -> Result<MomentAccumulator> {
    let cells = ensemble.grid()?.len();
    let mut acc = MomentAccumulator::new(&ensemble.times, cells);
    for r in &ensemble.replicates {
        for (i, s) in r.snapshots.iter().enumerate() {
            acc.observe(r.replicate, i, s.values());
        }
    }
    Ok(acc)
}

/// Runs `config` and accumulates moments without storing snapshots.
pub fn moments_streaming(config: &SimulationConfig) -> Result<MomentAccumulator> {
    let sim = Simulation::new(config)?;
    let cells = sim.grid().len();
    let times = sim.times().to_vec();
    reduce_ensemble(&sim, || MomentAccumulator::new(&times, cells))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples() {
        let mut acc = MomentAccumulator::new(&[1.0], 2);
        for r in 0..5 {
            acc.observe(r, 0, &[2.0, -1.0]);
        }
        let t = acc.table(&[2, 4, 6]).unwrap();
        assert_eq!(t.sup(2).unwrap().sup_moment, 4.0);
        assert_eq!(t.sup(6).unwrap().sup_moment, 64.0);
        assert_eq!(t.sup(4).unwrap().stderr, 0.0);
        let p = acc.pointwise();
        assert_eq!(p[1].mean, -1.0);
        assert_eq!(p[1].var, 0.0);
    }

    #[test]
    fn odd_orders_are_rejected() {
        let acc = MomentAccumulator::new(&[1.0], 1);
        assert!(acc.table(&[3]).is_err());
        assert!(acc.table(&[8]).is_err());
    }

    #[test]
    fn merge_equals_single_pass() {
        let data = [[0.5, 1.5], [-0.2, 0.3], [1.1, -0.7]];
        let mut whole = MomentAccumulator::new(&[0.0], 2);
        let mut a = MomentAccumulator::new(&[0.0], 2);
        let mut b = MomentAccumulator::new(&[0.0], 2);
        for (i, d) in data.iter().enumerate() {
            whole.observe(i, 0, d);
            if i < 2 {
                a.observe(i, 0, d)
            } else {
                b.observe(i, 0, d)
            }
        }
        a.merge(b);
        assert_eq!(a.pointwise(), whole.pointwise());
    }
}
