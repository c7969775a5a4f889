use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::Field;
use crate::noise::NoiseStream;

use super::{Simulation, SimulationConfig};

const CHUNK: usize = 8;

/// Empirical `sup_{s ≤ T, x} E|u_k(s,x) − u_{k−1}(s,x)|²` and the standard
/// error of the mean at the maximiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardGap {
    pub k: usize,
    pub gap_sq: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    pub gaps: Vec<PicardGap>,
    /// `u_0(T), …, u_K(T)` for replicate 0.
    pub iterates: Vec<Field>,
    /// `u_K(T)` for every replicate.
    pub terminal: Vec<Field>,
}

struct GapSums {
    sum: Vec<Vec<f64>>,
    sum4: Vec<Vec<f64>>,
    iterates: Vec<Vec<f64>>,
    terminal: Vec<Vec<f64>>,
}

impl GapSums {
    fn new(k_max: usize, len: usize) -> Self {
        Self {
            sum: vec![vec![0.0; len]; k_max],
            sum4: vec![vec![0.0; len]; k_max],
            iterates: Vec::new(),
            terminal: Vec::new(),
        }
    }

    fn merge(&mut self, later: Self) {
        for (a, b) in self.sum.iter_mut().zip(later.sum) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.sum4.iter_mut().zip(later.sum4) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        if self.iterates.is_empty() {
            self.iterates = later.iterates;
        }
        self.terminal.extend(later.terminal);
    }
}

/// Space-time history `u(s_j, ·)` for `j = 0..=S`, flattened.
fn history(
    sim: &Simulation,
    replicate: usize,
    previous: Option<&[f64]>,
    scratch: &mut Vec<f64>,
) -> Result<Vec<f64>> {
    let cells = sim.grid().len();
    let steps = sim.total_steps();
    let mut stepper = sim.stepper();
    let mut state = sim.initial_state();
    let f = sim.nonlinearity();
    let mut stream = NoiseStream::new(sim.grid(), sim.dt(), sim.policy(), replicate as u64)?;
    let mut out = Vec::with_capacity(cells * (steps + 1));
    for j in 0..=steps {
        out.extend_from_slice(stepper.displacement_into(&state));
        if j == steps {
            break;
        }
        match previous {
            None => stepper.step_split_free(&mut state),
            Some(prev) => {
                scratch.clear();
                scratch.extend(prev[j * cells..(j + 1) * cells].iter().map(|&u| f.eval(u)));
                stepper.step_with_integrand(&mut state, scratch, &mut stream)?;
            }
        }
    }
    Ok(out)
}

/// Picard iterates on frozen noise: `u_0` is the noiseless evolution and
/// `u_k` solves the linear problem driven by `f(u_{k−1}) Ẇ` with the same
/// increments for every `k`.
pub fn picard_iterate(config: &SimulationConfig, k_max: usize) -> Result<PicardResult> {
    if k_max == 0 {
        return Err(invalid("k_max", "need at least one iteration"));
    }
    let sim = Simulation::new(config)?;
    let cells = sim.grid().len();
    let len = cells * (sim.total_steps() + 1);
    let replicates = sim.config().replicates;
    let parts: Vec<GapSums> = (0..replicates.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = GapSums::new(k_max, len);
            let mut scratch = Vec::with_capacity(cells);
            for r in c * CHUNK..((c + 1) * CHUNK).min(replicates) {
                let mut prev = history(&sim, r, None, &mut scratch)?;
                let mut finals = vec![prev[len - cells..].to_vec()];
                for k in 0..k_max {
                    let next = history(&sim, r, Some(&prev), &mut scratch)?;
                    for ((s, s4), (a, b)) in acc.sum[k]
                        .iter_mut()
                        .zip(acc.sum4[k].iter_mut())
                        .zip(next.iter().zip(&prev))
                    {
                        let d2 = (a - b) * (a - b);
                        *s += d2;
                        *s4 += d2 * d2;
                    }
                    finals.push(next[len - cells..].to_vec());
                    prev = next;
                }
                acc.terminal
                    .push(finals.last().cloned().unwrap_or_default());
                if r == 0 {
                    acc.iterates = finals;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut parts = parts.into_iter();
    let mut total = parts.next().unwrap_or_else(|| GapSums::new(k_max, len));
    for p in parts {
        total.merge(p);
    }
    let rf = replicates as f64;
    let gaps = (0..k_max)
        .map(|k| {
            let (idx, &best) =
                total.sum[k]
                    .iter()
                    .enumerate()
                    .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| {
                        if *v > *acc.1 {
                            (i, v)
                        } else {
                            acc
                        }
                    });
            let mean = best / rf;
            let var = if replicates > 1 {
                ((total.sum4[k][idx] / rf - mean * mean) * rf / (rf - 1.0)).max(0.0)
            } else {
                0.0
            };
            PicardGap {
                k: k + 1,
                gap_sq: mean,
                stderr: (var / rf).sqrt(),
            }
        })
        .collect();
    let grid = sim.grid().clone();
    let to_fields = |v: Vec<Vec<f64>>| {
        v.into_iter()
            .map(|x| Field::from_vec_unchecked(grid.clone(), x))
            .collect::<Vec<_>>()
    };
    Ok(PicardResult {
        gaps,
        iterates: to_fields(total.iterates),
        terminal: to_fields(total.terminal),
    })
}
