use std::fs;
use std::path::Path;

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use viscwave_core::analysis::{
    self, default_window, holder_streaming, moments_streaming, AdmissibilityOptions, Axis,
    HolderOptions,
};
use viscwave_core::fsi::derivation_check;
use viscwave_core::kernels::{l2_norm_squared, lq_norm, KernelFamily, KernelKind};
use viscwave_core::solver::{
    picard_iterate, InitialPreset, NonlinearityPreset, Simulation, SimulationConfig,
};
use viscwave_core::Grid;

use crate::output::{num, prepare_dir, write_json, Provenance, Table};
use crate::{CliError, GlobalArgs};

fn load<T: DeserializeOwned>(
    path: Option<&Path>,
    default: impl FnOnce() -> T,
) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid configuration in {}: {e}", path.display())))
}

fn config_error(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid configuration: `{field}` {reason}"))
}

fn default_simulation() -> SimulationConfig {
    SimulationConfig::new(KernelFamily::ViscousWave, 1, 8.0, 256, 1.0)
}

fn parse_family(s: &str) -> Result<KernelFamily, String> {
    s.parse::<KernelFamily>().map_err(|e| e.to_string())
}

/// Flags overriding fields of a simulation config.
#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    #[arg(long, value_parser = parse_family)]
    family: Option<KernelFamily>,
    /// Spatial dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Box side L.
    #[arg(long)]
    extent: Option<f64>,
    /// Grid points per side N.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon T.
    #[arg(long)]
    horizon: Option<f64>,
    /// zero | one | sin | affine(a,b)
    #[arg(long)]
    f: Option<String>,
    /// zero | gaussian(σ) | mode(k)
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    h: Option<String>,
    /// Replicates R.
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated observation times.
    #[arg(long, value_delimiter = ',')]
    observe: Option<Vec<f64>>,
}

impl SimArgs {
    fn apply(&self, c: &mut SimulationConfig, seed: Option<u64>) -> Result<(), CliError> {
        if let Some(v) = self.family {
            c.family = v;
        }
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.extent {
            c.extent = v;
        }
        if let Some(v) = self.points {
            c.points = v;
        }
        if let Some(v) = self.dt {
            c.dt = Some(v);
        }
        if let Some(v) = self.horizon {
            c.horizon = v;
        }
        if let Some(v) = &self.f {
            c.f = v.parse::<NonlinearityPreset>()?;
        }
        if let Some(v) = &self.g {
            c.g = v.parse::<InitialPreset>()?;
        }
        if let Some(v) = &self.h {
            c.h = v.parse::<InitialPreset>()?;
        }
        if let Some(v) = self.replicates {
            c.replicates = v;
        }
        if let Some(v) = &self.observe {
            c.observe_times = v.clone();
        }
        if let Some(s) = seed {
            c.seed = s;
        }
        if c.observe_times.is_empty() {
            c.observe_times = vec![c.horizon];
        }
        Ok(())
    }
}

fn coordinate_columns(n: usize) -> Vec<&'static str> {
    ["x", "y", "z"][..n].to_vec()
}

fn resolve_simulation(g: &GlobalArgs, args: &SimArgs) -> Result<SimulationConfig, CliError> {
    let mut c = load(g.config.as_deref(), default_simulation)?;
    args.apply(&mut c, g.seed)?;
    Ok(c.resolved()?)
}

pub fn simulate(g: &GlobalArgs, args: SimArgs) -> Result<(), CliError> {
    let cfg = resolve_simulation(g, &args)?;
    let sim = Simulation::new(&cfg)?;
    let prov = Provenance::new("simulate", &cfg, Some(cfg.seed))?;
    let dir = prepare_dir(&g.out)?;
    let positions = sim.grid().positions();
    let dims = cfg.n;

    let mut columns = vec!["t"];
    columns.extend(coordinate_columns(dims));
    columns.push("u");
    let mut snapshots = Table::new(&prov, &columns);
    let first = sim.replicate(0)?;
    for (t, field) in cfg.observe_times.iter().zip(&first.snapshots) {
        for (p, u) in positions.iter().zip(field.values()) {
            let mut row = vec![num(*t)];
            row.extend(p[..dims].iter().map(|&x| num(x)));
            row.push(num(*u));
            snapshots.row(&row);
        }
    }
    snapshots.write(&dir.join("simulate_snapshots.csv"))?;

    let mut columns = vec!["t"];
    columns.extend(coordinate_columns(dims));
    columns.extend(["mean", "var", "p4", "stderr"]);
    let mut stats = Table::new(&prov, &columns);
    for s in moments_streaming(&cfg)?.pointwise() {
        let mut row = vec![num(s.t)];
        row.extend(positions[s.cell][..dims].iter().map(|&x| num(x)));
        row.extend([num(s.mean), num(s.var), num(s.p4), num(s.stderr)]);
        stats.row(&row);
    }
    stats.write(&dir.join("simulate_stats.csv"))?;
    write_json(&dir.join("simulate.config.json"), &cfg)?;
    println!("wrote {}", dir.join("simulate_snapshots.csv").display());
    println!("wrote {}", dir.join("simulate_stats.csv").display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelTableParams {
    pub families: Vec<KernelFamily>,
    pub dims: Vec<usize>,
    pub times: Vec<f64>,
    /// Exponents as text so that `inf` survives JSON.
    pub qs: Vec<String>,
    pub extent_1d: f64,
    pub points_1d: usize,
    pub extent_2d: f64,
    pub points_2d: usize,
}

impl Default for KernelTableParams {
    fn default() -> Self {
        Self {
            families: vec![
                KernelFamily::ViscousWave,
                KernelFamily::Heat,
                KernelFamily::Wave,
                KernelFamily::DampedWave(1.0),
            ],
            dims: vec![1, 2],
            times: vec![0.5, 1.0, 2.0],
            qs: vec!["1".into(), "2".into(), "inf".into()],
            extent_1d: 32.0,
            points_1d: 1024,
            extent_2d: 16.0,
            points_2d: 256,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct KernelTableArgs {
    #[arg(long = "family", value_delimiter = ',', value_parser = parse_family)]
    families: Option<Vec<KernelFamily>>,
    #[arg(long = "n", value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long = "t", value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long = "q", value_delimiter = ',')]
    qs: Option<Vec<String>>,
}

fn parse_q(s: &str) -> Result<f64, CliError> {
    let q = match s.trim() {
        "inf" | "infinity" | "∞" => f64::INFINITY,
        other => other
            .parse()
            .map_err(|_| config_error("qs", format!("has non-numeric entry `{other}`")))?,
    };
    if q.is_nan() || q < 1.0 {
        return Err(config_error("qs", "entries must be at least 1"));
    }
    Ok(q)
}

pub fn kernel_table(g: &GlobalArgs, args: KernelTableArgs) -> Result<(), CliError> {
    let mut p: KernelTableParams = load(g.config.as_deref(), KernelTableParams::default)?;
    if let Some(v) = args.families {
        p.families = v;
    }
    if let Some(v) = args.dims {
        p.dims = v;
    }
    if let Some(v) = args.times {
        p.times = v;
    }
    if let Some(v) = args.qs {
        p.qs = v;
    }
    let qs =
        p.qs.iter()
            .map(|s| parse_q(s))
            .collect::<Result<Vec<_>, _>>()?;
    if p.dims.iter().any(|n| !(1..=2).contains(n)) {
        return Err(config_error("dims", "entries must be 1 or 2"));
    }
    let prov = Provenance::new("kernel-table", &p, None)?;
    let mut table = Table::new(
        &prov,
        &["family", "kind", "n", "t", "q", "norm", "oracle", "rel_err"],
    );
    for &family in &p.families {
        let kinds: &[KernelKind] = if family == KernelFamily::ViscousWave {
            &[KernelKind::Velocity, KernelKind::Displacement]
        } else {
            &[KernelKind::Velocity]
        };
        for &kind in kinds {
            for &n in &p.dims {
                let (extent, points) = if n == 1 {
                    (p.extent_1d, p.points_1d)
                } else {
                    (p.extent_2d, p.points_2d)
                };
                let grid = Grid::new(n, extent, points)?;
                let fine = Grid::new(n, extent, points * 2)?;
                for &t in &p.times {
                    for &q in &qs {
                        let norm = lq_norm(family, kind, t, q, &grid)?;
                        let oracle = if q == 2.0 {
                            l2_norm_squared(family, kind, t, n)?.sqrt()
                        } else {
                            lq_norm(family, kind, t, q, &fine)?
                        };
                        let rel = if oracle.is_finite() {
                            (norm - oracle).abs() / oracle
                        } else {
                            f64::INFINITY
                        };
                        table.row(&[
                            family.label(),
                            kind.to_string(),
                            n.to_string(),
                            num(t),
                            num(q),
                            num(norm),
                            num(oracle),
                            num(rel),
                        ]);
                    }
                }
            }
        }
    }
    let dir = prepare_dir(&g.out)?;
    table.write(&dir.join("kernel_table.csv"))?;
    println!("wrote {}", dir.join("kernel_table.csv").display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissibilityParams {
    pub family: KernelFamily,
    pub n: usize,
    pub t: f64,
    pub levels: usize,
    pub ratio: f64,
    pub cauchy_tol: f64,
}

impl Default for AdmissibilityParams {
    fn default() -> Self {
        let o = AdmissibilityOptions::default();
        Self {
            family: KernelFamily::ViscousWave,
            n: 1,
            t: 1.0,
            levels: o.levels,
            ratio: o.ratio,
            cauchy_tol: o.cauchy_tol,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct AdmissibilityArgs {
    #[arg(long, value_parser = parse_family)]
    family: Option<KernelFamily>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
}

pub fn admissibility(g: &GlobalArgs, args: AdmissibilityArgs) -> Result<(), CliError> {
    let mut p: AdmissibilityParams = load(g.config.as_deref(), AdmissibilityParams::default)?;
    if let Some(v) = args.family {
        p.family = v;
    }
    if let Some(v) = args.n {
        p.n = v;
    }
    if let Some(v) = args.t {
        p.t = v;
    }
    if let Some(v) = args.levels {
        p.levels = v;
    }
    let opts = AdmissibilityOptions {
        levels: p.levels,
        ratio: p.ratio,
        cauchy_tol: p.cauchy_tol,
        ..AdmissibilityOptions::default()
    };
    let report = analysis::admissibility(p.family, p.n, p.t, &opts)?;
    let prov = Provenance::new("admissibility", &p, None)?;
    let dir = prepare_dir(&g.out)?;
    let mut table = Table::new(&prov, &["cutoff", "integral"]);
    for c in &report.cutoffs {
        table.row(&[num(c.cutoff), num(c.integral)]);
    }
    table.write(&dir.join("admissibility.csv"))?;
    write_json(&dir.join("admissibility.json"), &report)?;
    println!(
        "{}",
        serde_json::to_string(&report).map_err(|e| CliError::Runtime(e.to_string()))?
    );
    Ok(())
}

fn default_axis() -> Axis {
    Axis::Space
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderParams {
    #[serde(default = "default_simulation")]
    pub simulation: SimulationConfig,
    #[serde(default = "default_axis")]
    pub axis: Axis,
    #[serde(default = "one")]
    pub t0: f64,
    /// Physical lags; empty selects dyadic lags.
    #[serde(default)]
    pub lags: Vec<f64>,
    #[serde(default = "default_min_decades")]
    pub min_decades: f64,
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

fn one() -> f64 {
    1.0
}

fn default_min_decades() -> f64 {
    HolderOptions::default().min_decades
}

fn default_bootstrap() -> usize {
    HolderOptions::default().bootstrap
}

#[derive(Debug, Clone, Default, Args)]
pub struct HolderArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// time | space
    #[arg(long)]
    axis: Option<String>,
    /// Base observation time.
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    lags: Option<Vec<f64>>,
    #[arg(long)]
    min_decades: Option<f64>,
}

fn dyadic_lags(axis: Axis, grid: &Grid, dt: f64, t0: f64) -> Vec<f64> {
    let (unit, limit) = match axis {
        Axis::Space => (grid.dx(), grid.extent() / 2.0),
        Axis::Time => (dt, t0 / 4.0),
    };
    let mut out: Vec<f64> = Vec::new();
    let mut k = 1.0f64;
    while k.round() * unit <= limit * (1.0 + 1e-12) {
        let lag = k.round() * unit;
        if out.last() != Some(&lag) {
            out.push(lag);
        }
        k *= std::f64::consts::SQRT_2;
    }
    out
}

pub fn holder(g: &GlobalArgs, args: HolderArgs) -> Result<(), CliError> {
    let mut p: HolderParams = load(g.config.as_deref(), || HolderParams {
        simulation: default_simulation(),
        axis: default_axis(),
        t0: 1.0,
        lags: Vec::new(),
        min_decades: default_min_decades(),
        window: None,
        bootstrap: default_bootstrap(),
    })?;
    args.sim.apply(&mut p.simulation, g.seed)?;
    if let Some(a) = &args.axis {
        p.axis = a.parse()?;
    }
    if let Some(v) = args.t0 {
        p.t0 = v;
    }
    if let Some(v) = args.lags {
        p.lags = v;
    }
    if let Some(v) = args.min_decades {
        p.min_decades = v;
    }
    p.simulation = p.simulation.resolved()?;
    let grid = p.simulation.grid()?;
    let dt = p.simulation.step()?;
    if p.lags.is_empty() {
        p.lags = dyadic_lags(p.axis, &grid, dt, p.t0);
    }
    let window = p
        .window
        .unwrap_or_else(|| default_window(p.axis, &grid, dt, p.t0));
    p.window = Some(window);
    let opts = HolderOptions {
        min_decades: p.min_decades,
        bootstrap: p.bootstrap,
        seed: p.simulation.seed,
        window: Some(window),
        ..HolderOptions::default()
    };
    let report = holder_streaming(&p.simulation, p.axis, p.t0, &p.lags, &opts)?;
    let prov = Provenance::new("holder-estimate", &p, Some(p.simulation.seed))?;
    let dir = prepare_dir(&g.out)?;
    let mut table = Table::new(&prov, &["lag", "s2", "stderr", "in_fit"]);
    for i in 0..report.lags.len() {
        let l = report.lags[i];
        let inside = l >= report.window.0 && l <= report.window.1;
        table.row(&[
            num(l),
            num(report.s2[i]),
            num(report.s2_stderr[i]),
            inside.to_string(),
        ]);
    }
    table.write(&dir.join("holder.csv"))?;
    write_json(&dir.join("holder.json"), &report)?;
    println!(
        "alpha = {:.4} (95% CI [{:.4}, {:.4}]), slope {:.4}, R^2 {:.4}",
        report.alpha, report.ci_low, report.ci_high, report.slope, report.r_squared
    );
    Ok(())
}

fn default_ps() -> Vec<u32> {
    vec![2, 4, 6]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsParams {
    #[serde(default = "default_simulation")]
    pub simulation: SimulationConfig,
    #[serde(default = "default_ps")]
    pub ps: Vec<u32>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long = "p", value_delimiter = ',')]
    ps: Option<Vec<u32>>,
}

pub fn moments(g: &GlobalArgs, args: MomentsArgs) -> Result<(), CliError> {
    let mut p: MomentsParams = load(g.config.as_deref(), || MomentsParams {
        simulation: default_simulation(),
        ps: default_ps(),
    })?;
    args.sim.apply(&mut p.simulation, g.seed)?;
    if let Some(v) = args.ps {
        p.ps = v;
    }
    p.simulation = p.simulation.resolved()?;
    let table = moments_streaming(&p.simulation)?.table(&p.ps)?;
    let prov = Provenance::new("moments", &p, Some(p.simulation.seed))?;
    let dir = prepare_dir(&g.out)?;
    let mut csv = Table::new(&prov, &["p", "t", "cell", "sup_moment", "stderr"]);
    for r in &table.rows {
        csv.row(&[
            r.p.to_string(),
            num(r.t),
            r.cell.to_string(),
            num(r.sup_moment),
            num(r.stderr),
        ]);
    }
    csv.write(&dir.join("moments.csv"))?;
    write_json(&dir.join("moments.json"), &table)?;
    for t in &table.trends {
        println!(
            "p = {}: slope {:.4e}, growing = {}",
            t.p, t.slope, t.growing
        );
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DerivationParams {
    pub xi_min: f64,
    pub xi_max: f64,
    pub modes: usize,
}

impl Default for DerivationParams {
    fn default() -> Self {
        Self {
            xi_min: 0.01,
            xi_max: 100.0,
            modes: 100,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct DerivationArgs {
    #[arg(long)]
    xi_min: Option<f64>,
    #[arg(long)]
    xi_max: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
}

pub fn derivation(g: &GlobalArgs, args: DerivationArgs) -> Result<(), CliError> {
    let mut p: DerivationParams = load(g.config.as_deref(), DerivationParams::default)?;
    if let Some(v) = args.xi_min {
        p.xi_min = v;
    }
    if let Some(v) = args.xi_max {
        p.xi_max = v;
    }
    if let Some(v) = args.modes {
        p.modes = v;
    }
    if !(p.xi_min > 0.0 && p.xi_max >= p.xi_min) {
        return Err(config_error(
            "xi_min",
            "must be positive and at most xi_max",
        ));
    }
    if p.modes < 2 {
        return Err(config_error("modes", "must be at least 2"));
    }
    let ratio = (p.xi_max / p.xi_min).powf(1.0 / (p.modes - 1) as f64);
    let xi: Vec<f64> = (0..p.modes)
        .map(|i| p.xi_min * ratio.powi(i as i32))
        .collect();
    let rows = derivation_check(&xi)?;
    let prov = Provenance::new("derivation-check", &p, None)?;
    let mut table = Table::new(
        &prov,
        &[
            "xi",
            "biharmonic_residual",
            "boundary_value_defect",
            "boundary_slope",
            "neumann_defect",
            "closure_defect",
            "damping_defect",
            "pass",
        ],
    );
    for r in &rows {
        table.row(&[
            num(r.xi_mag),
            num(r.biharmonic_residual),
            num(r.boundary_value_defect),
            num(r.boundary_slope),
            num(r.neumann_defect),
            num(r.closure_defect),
            num(r.damping_defect),
            r.passes.to_string(),
        ]);
    }
    let dir = prepare_dir(&g.out)?;
    table.write(&dir.join("derivation.csv"))?;
    let failed = rows.iter().filter(|r| !r.passes).count();
    println!("{} of {} modes pass", rows.len() - failed, rows.len());
    if failed > 0 {
        return Err(CliError::Runtime(format!(
            "{failed} modes violate the derivation identities"
        )));
    }
    Ok(())
}

fn default_k_max() -> usize {
    7
}

fn picard_simulation() -> SimulationConfig {
    let mut c = SimulationConfig::new(KernelFamily::ViscousWave, 1, 16.0, 256, 1.0);
    c.f = NonlinearityPreset::Sin;
    c.g = InitialPreset::Gaussian(1.0);
    c.replicates = 500;
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardParams {
    #[serde(default = "picard_simulation")]
    pub simulation: SimulationConfig,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PicardArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    k_max: Option<usize>,
}

/// `Ĥ₁² (L² c_n T^{3−n})^{k−1} / ((3−n)(k−1))!`, the bound obtained by
/// iterating the gap inequality from the first gap.
pub fn factorial_envelope(
    first_gap: f64,
    lipschitz: f64,
    c_n: f64,
    n: usize,
    horizon: f64,
    k: usize,
) -> f64 {
    let m = (3 - n) as f64;
    let base = lipschitz * lipschitz * c_n * horizon.powf(m);
    let steps = (k - 1) as i32;
    let order = (3 - n) * (k - 1);
    let factorial: f64 = (1..=order).map(|j| j as f64).product();
    first_gap * base.powi(steps) / factorial
}

pub fn picard(g: &GlobalArgs, args: PicardArgs) -> Result<(), CliError> {
    let mut p: PicardParams = load(g.config.as_deref(), || PicardParams {
        simulation: picard_simulation(),
        k_max: default_k_max(),
    })?;
    args.sim.apply(&mut p.simulation, g.seed)?;
    if let Some(v) = args.k_max {
        p.k_max = v;
    }
    p.simulation = p.simulation.resolved()?;
    let cfg = &p.simulation;
    let result = picard_iterate(cfg, p.k_max)?;
    let lip = cfg.nonlinearity()?.lipschitz_bound();
    let c_n = l2_norm_squared(KernelFamily::ViscousWave, KernelKind::Velocity, 1.0, cfg.n)?;
    let prov = Provenance::new("picard-demo", &p, Some(cfg.seed))?;
    let mut table = Table::new(&prov, &["k", "gap_sq", "stderr", "envelope"]);
    let first = result.gaps.first().map(|g| g.gap_sq).unwrap_or(0.0);
    for gap in &result.gaps {
        let env = factorial_envelope(first, lip, c_n, cfg.n, cfg.horizon, gap.k);
        table.row(&[
            gap.k.to_string(),
            num(gap.gap_sq),
            num(gap.stderr),
            num(env),
        ]);
    }
    let dir = prepare_dir(&g.out)?;
    table.write(&dir.join("picard.csv"))?;
    write_json(&dir.join("picard.json"), &result.gaps)?;
    for gap in &result.gaps {
        println!(
            "k = {}: gap^2 = {:.4e} ± {:.1e}",
            gap.k, gap.gap_sq, gap.stderr
        );
    }
    Ok(())
}
