use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::noise::{NoiseStream, RngPolicy};

use super::{Nonlinearity, SimulationConfig, SolverState, Stepper};

/// Replicates handled by one task. Fixed so that the reduction tree, and
/// therefore every floating-point sum, does not depend on the thread count.
const CHUNK: usize = 8;

/// A validated configuration with its grid, stepper and initial state.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimulationConfig,
    grid: Grid,
    nonlinearity: Nonlinearity,
    initial: SolverState,
    stepper: Stepper,
    observe_steps: Vec<usize>,
    total_steps: usize,
}

impl Simulation {
    pub fn new(config: &SimulationConfig) -> Result<Self> {
        let config = config.resolved()?;
        let grid = config.grid()?;
        let dt = config.step()?;
        let observe_steps = config
            .observe_times
            .iter()
            .map(|&t| config.steps_to("observe_times", t))
            .collect::<Result<Vec<_>>>()?;
        let total_steps = config.steps_to("T", config.horizon)?;
        Ok(Self {
            nonlinearity: config.nonlinearity()?,
            initial: config.initial_data(&grid)?.state(),
            stepper: Stepper::new(config.family, &grid, dt),
            grid,
            observe_steps,
            total_steps,
            config,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.stepper.dt()
    }

    pub fn times(&self) -> &[f64] {
        &self.config.observe_times
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub(crate) fn stepper(&self) -> Stepper {
        self.stepper.clone()
    }

    pub(crate) fn initial_state(&self) -> SolverState {
        self.initial.clone()
    }

    pub(crate) fn policy(&self) -> RngPolicy {
        RngPolicy::new(self.config.seed)
    }

    /// Runs one replicate, handing each observed real-space field to
    /// `observe(index, values)`.
    pub fn run_replicate(
        &self,
        replicate: usize,
        stepper: &mut Stepper,
        mut observe: impl FnMut(usize, &[f64]),
    ) -> Result<()> {
        let mut state = self.initial.clone();
        let mut stream =
            NoiseStream::new(&self.grid, stepper.dt(), self.policy(), replicate as u64)?;
        let last = self.observe_steps.last().copied().unwrap_or(0);
        let mut next = 0;
        for step in 0..=last {
            while next < self.observe_steps.len() && self.observe_steps[next] == step {
                observe(next, stepper.displacement_into(&state));
                next += 1;
            }
            if step < last {
                stepper.step_stochastic(&mut state, &self.nonlinearity, &mut stream)?;
            }
        }
        Ok(())
    }

    /// Observed snapshots of one replicate.
    pub fn replicate(&self, replicate: usize) -> Result<ReplicateTrajectory> {
        let mut stepper = self.stepper.clone();
        let mut snapshots = Vec::with_capacity(self.observe_steps.len());
        self.run_replicate(replicate, &mut stepper, |_, v| {
            snapshots.push(Field::from_vec_unchecked(self.grid.clone(), v.to_vec()))
        })?;
        Ok(ReplicateTrajectory {
            replicate,
            seed: self.config.seed,
            snapshots,
        })
    }
}

/// Streaming statistic over replicates.
pub trait EnsembleReducer: Send + Sized {
    /// Called for every replicate in increasing order within a task, once
    /// per observation time.
    fn observe(&mut self, replicate: usize, observation: usize, values: &[f64]);

    /// Absorbs a reducer that saw later replicates.
    fn merge(&mut self, later: Self);
}

/// Runs all replicates of `sim` in parallel and folds them with reducers
/// from `make`. Results are identical for any thread count.
pub fn reduce_ensemble<R, F>(sim: &Simulation, make: F) -> Result<R>
where
    R: EnsembleReducer,
    F: Fn() -> R + Sync,
{
    let replicates = sim.config.replicates;
    let chunks = replicates.div_ceil(CHUNK);
    let parts: Vec<R> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut reducer = make();
            let mut stepper = sim.stepper();
            for r in c * CHUNK..((c + 1) * CHUNK).min(replicates) {
                sim.run_replicate(r, &mut stepper, |obs, v| reducer.observe(r, obs, v))
                    .map_err(|e| match e {
                        Error::NonFiniteState { time, .. } => {
                            Error::NonFiniteState { time, replicate: r }
                        }
                        other => other,
                    })?;
            }
            Ok(reducer)
        })
        .collect::<Result<Vec<R>>>()?;
    let mut parts = parts.into_iter();
    let mut acc = parts.next().unwrap_or_else(&make);
    for p in parts {
        acc.merge(p);
    }
    Ok(acc)
}

/// Observed snapshots of one replicate, regenerable from `(seed, replicate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateTrajectory {
    pub replicate: usize,
    pub seed: u64,
    pub snapshots: Vec<Field>,
}

/// Stored replicate snapshots at the configured observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub config: SimulationConfig,
    pub times: Vec<f64>,
    pub replicates: Vec<ReplicateTrajectory>,
}

impl TrajectoryEnsemble {
    pub fn grid(&self) -> Result<Grid> {
        self.config.grid()
    }

    pub fn replicate_count(&self) -> usize {
        self.replicates.len()
    }
}

#[derive(Default)]
struct Collector {
    grid: Option<Grid>,
    seed: u64,
    out: Vec<ReplicateTrajectory>,
}

impl EnsembleReducer for Collector {
    fn observe(&mut self, replicate: usize, _: usize, values: &[f64]) {
        if self.out.last().map(|r| r.replicate) != Some(replicate) {
            self.out.push(ReplicateTrajectory {
                replicate,
                seed: self.seed,
                snapshots: Vec::new(),
            });
        }
        let grid = self.grid.clone().expect("collector grid");
        self.out
            .last_mut()
            .expect("replicate entry")
            .snapshots
            .push(Field::from_vec_unchecked(grid, values.to_vec()));
    }

    fn merge(&mut self, later: Self) {
        self.out.extend(later.out);
    }
}

/// Runs every replicate of `config` and stores the snapshots at `times`
/// (the configured observation times when `None`).
pub fn run_ensemble(
    config: &SimulationConfig,
    times: Option<&[f64]>,
) -> Result<TrajectoryEnsemble> {
    let mut config = config.clone();
    if let Some(t) = times {
        config.observe_times = t.to_vec();
    }
    let sim = Simulation::new(&config)?;
    let collected = reduce_ensemble(&sim, || Collector {
        grid: Some(sim.grid().clone()),
        seed: sim.config().seed,
        out: Vec::new(),
    })?;
    Ok(TrajectoryEnsemble {
        times: sim.times().to_vec(),
        config: sim.config().clone(),
        replicates: collected.out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use crate::solver::{InitialPreset, NonlinearityPreset};

    fn config() -> SimulationConfig {
        let mut c = SimulationConfig::new(KernelFamily::ViscousWave, 1, 8.0, 32, 0.5);
        c.observe_times = vec![0.25, 0.5];
        c.f = NonlinearityPreset::Sin;
        c.g = InitialPreset::Gaussian(1.0);
        c.replicates = 20;
        c.seed = 42;
        c
    }

    #[test]
    fn same_seed_same_bits() {
        let a = run_ensemble(&config(), None).unwrap();
        let b = run_ensemble(&config(), None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.replicates.len(), 20);
        assert!(a
            .replicates
            .windows(2)
            .all(|w| w[0].replicate + 1 == w[1].replicate));
    }

    #[test]
    fn replicate_is_regenerable_alone() {
        let c = config();
        let all = run_ensemble(&c, None).unwrap();
        let sim = Simulation::new(&c).unwrap();
        assert_eq!(sim.replicate(13).unwrap(), all.replicates[13]);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let c = config();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_ensemble(&c, None).unwrap());
        let three = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| run_ensemble(&c, None).unwrap());
        assert_eq!(one, three);
    }

    #[test]
    fn zero_coefficient_has_no_spread() {
        let mut c = config();
        c.f = NonlinearityPreset::Zero;
        let e = run_ensemble(&c, None).unwrap();
        let first = &e.replicates[0].snapshots;
        assert!(e.replicates.iter().all(|r| &r.snapshots == first));
    }
}
