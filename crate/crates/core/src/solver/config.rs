use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};
use crate::kernels::KernelFamily;

use super::{InitialData, Nonlinearity};

/// Named coefficient presets: `zero`, `one`, `sin`, `affine(a,b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NonlinearityPreset {
    Zero,
    One,
    Sin,
    Affine(f64, f64),
}

impl NonlinearityPreset {
    pub fn build(self) -> Result<Nonlinearity> {
        Ok(match self {
            Self::Zero => Nonlinearity::zero(),
            Self::One => Nonlinearity::one(),
            Self::Sin => Nonlinearity::sin(),
            Self::Affine(a, b) => Nonlinearity::affine(a, b)?,
        })
    }
}

fn call_args<'a>(s: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let rest = s.strip_prefix(name)?.trim();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

fn parse_num(field: &'static str, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| invalid(field, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(invalid(field, "must be finite"));
    }
    Ok(v)
}

impl FromStr for NonlinearityPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "zero" | "0" => return Ok(Self::Zero),
            "one" | "1" => return Ok(Self::One),
            "sin" => return Ok(Self::Sin),
            _ => {}
        }
        match call_args(&s, "affine") {
            Some(args) if args.len() == 2 => Ok(Self::Affine(
                parse_num("f", args[0])?,
                parse_num("f", args[1])?,
            )),
            _ => Err(invalid(
                "f",
                format!("unknown preset `{s}` (zero|one|sin|affine(a,b))"),
            )),
        }
    }
}

impl fmt::Display for NonlinearityPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::One => write!(f, "one"),
            Self::Sin => write!(f, "sin"),
            Self::Affine(a, b) => write!(f, "affine({a},{b})"),
        }
    }
}

impl TryFrom<String> for NonlinearityPreset {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NonlinearityPreset> for String {
    fn from(p: NonlinearityPreset) -> String {
        p.to_string()
    }
}

/// Initial-field presets: `zero`, `gaussian(σ)` centred at the origin and
/// `mode(k)` / `mode(k1,k2)`, a cosine with integer wave numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitialPreset {
    Zero,
    Gaussian(f64),
    Mode(Vec<i64>),
}

impl InitialPreset {
    pub fn field(&self, grid: &Grid) -> Result<Field> {
        Ok(match self {
            Self::Zero => Field::zeros(grid),
            Self::Gaussian(sigma) => {
                let s2 = 2.0 * sigma * sigma;
                Field::from_fn(grid, |x| (-x.iter().map(|v| v * v).sum::<f64>() / s2).exp())
            }
            Self::Mode(k) => {
                if k.len() > grid.dim() {
                    return Err(invalid("mode", "more wave numbers than dimensions"));
                }
                let scale = 2.0 * std::f64::consts::PI / grid.extent();
                let k = k.clone();
                Field::from_fn(grid, move |x| {
                    let phase: f64 = k.iter().zip(x).map(|(&k, &x)| k as f64 * x).sum();
                    (scale * phase).cos()
                })
            }
        })
    }
}

impl FromStr for InitialPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "zero" || s == "0" {
            return Ok(Self::Zero);
        }
        if let Some(args) = call_args(&s, "gaussian") {
            if args.len() == 1 {
                let sigma = parse_num("gaussian", args[0])?;
                if sigma <= 0.0 {
                    return Err(invalid("gaussian", "width must be positive"));
                }
                return Ok(Self::Gaussian(sigma));
            }
        }
        if let Some(args) = call_args(&s, "mode") {
            let k: std::result::Result<Vec<i64>, _> =
                args.iter().map(|a| a.parse::<i64>()).collect();
            if let Ok(k) = k {
                if !k.is_empty() && k.len() <= 3 {
                    return Ok(Self::Mode(k));
                }
            }
        }
        Err(invalid(
            "initial",
            format!("unknown preset `{s}` (zero|gaussian(σ)|mode(k))"),
        ))
    }
}

impl fmt::Display for InitialPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Gaussian(s) => write!(f, "gaussian({s})"),
            Self::Mode(k) => {
                let parts: Vec<String> = k.iter().map(|k| k.to_string()).collect();
                write!(f, "mode({})", parts.join(","))
            }
        }
    }
}

impl TryFrom<String> for InitialPreset {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InitialPreset> for String {
    fn from(p: InitialPreset) -> String {
        p.to_string()
    }
}

fn default_initial() -> InitialPreset {
    InitialPreset::Zero
}

fn default_f() -> NonlinearityPreset {
    NonlinearityPreset::One
}

fn default_replicates() -> usize {
    1
}

/// Largest `2^{-k}` with `|ξ|_max dt ≤ 1/2`.
pub fn default_dt(grid: &Grid) -> f64 {
    let bound = 0.5 / grid.max_wavenumber();
    let mut dt = 1.0;
    while dt > bound {
        dt *= 0.5;
    }
    dt
}

/// Everything needed to regenerate an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub family: KernelFamily,
    pub n: usize,
    #[serde(rename = "L")]
    pub extent: f64,
    #[serde(rename = "N")]
    pub points: usize,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_f")]
    pub f: NonlinearityPreset,
    #[serde(default = "default_initial")]
    pub g: InitialPreset,
    #[serde(default = "default_initial")]
    pub h: InitialPreset,
    #[serde(rename = "R", default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub observe_times: Vec<f64>,
}

impl SimulationConfig {
    pub fn new(family: KernelFamily, n: usize, extent: f64, points: usize, horizon: f64) -> Self {
        Self {
            family,
            n,
            extent,
            points,
            dt: None,
            horizon,
            f: NonlinearityPreset::One,
            g: InitialPreset::Zero,
            h: InitialPreset::Zero,
            replicates: 1,
            seed: 0,
            observe_times: vec![horizon],
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.extent, self.points)
    }

    pub fn step(&self) -> Result<f64> {
        match self.dt {
            Some(dt) if dt > 0.0 && dt.is_finite() => Ok(dt),
            Some(_) => Err(invalid("dt", "must be positive and finite")),
            None => Ok(default_dt(&self.grid()?)),
        }
    }

    /// Number of whole steps in `t`, or an error naming `field`.
    pub fn steps_to(&self, field: &'static str, t: f64) -> Result<usize> {
        let dt = self.step()?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(
                field,
                format!("time {t} must be finite and non-negative"),
            ));
        }
        let k = (t / dt).round();
        if (k * dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(invalid(
                field,
                format!("time {t} is not a multiple of dt = {dt}"),
            ));
        }
        Ok(k as usize)
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        self.f.build()
    }

    pub fn initial_data(&self, grid: &Grid) -> Result<InitialData> {
        InitialData::new(self.g.field(grid)?, self.h.field(grid)?)
    }

    /// Checks every field and returns the copy with `dt` filled in.
    pub fn resolved(&self) -> Result<Self> {
        if !(1..=2).contains(&self.n) {
            return Err(invalid("n", "stochastic runs support n = 1 or 2"));
        }
        let grid = self.grid()?;
        if self.replicates == 0 {
            return Err(invalid("R", "need at least one replicate"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("T", "must be positive and finite"));
        }
        if self.family.is_first_order() && self.h != InitialPreset::Zero {
            return Err(invalid(
                "h",
                "first-order families take no initial velocity",
            ));
        }
        self.steps_to("T", self.horizon)?;
        let mut last = -1.0;
        for &t in &self.observe_times {
            if t <= last {
                return Err(invalid("observe_times", "must be strictly increasing"));
            }
            if t > self.horizon * (1.0 + 1e-12) {
                return Err(invalid("observe_times", format!("{t} exceeds T")));
            }
            self.steps_to("observe_times", t)?;
            last = t;
        }
        self.f.build()?;
        let mut out = self.clone();
        out.dt = Some(self.step()?);
        let _ = grid;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for s in ["zero", "one", "sin", "affine(0.5,-2)"] {
            let p: NonlinearityPreset = s.parse().unwrap();
            assert_eq!(p.to_string().parse::<NonlinearityPreset>().unwrap(), p);
        }
        for s in ["zero", "gaussian(0.5)", "mode(3)", "mode(1,2)"] {
            let p: InitialPreset = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("gaussian(-1)".parse::<InitialPreset>().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let json = r#"{"family":"viscous","n":1,"L":8,"N":64,"T":1,"f":"sin",
            "g":"gaussian(1)","R":4,"seed":9,"observe_times":[0.5,1]}"#;
        let c: SimulationConfig = serde_json::from_str(json).unwrap();
        let r = c.resolved().unwrap();
        let back: SimulationConfig =
            serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.dt.unwrap() * r.grid().unwrap().max_wavenumber() <= 0.5);
    }

    #[test]
    fn bad_observation_time_is_rejected() {
        let mut c = SimulationConfig::new(KernelFamily::ViscousWave, 1, 8.0, 64, 1.0);
        c.dt = Some(0.125);
        c.observe_times = vec![0.3];
        assert!(matches!(
            c.resolved(),
            Err(Error::InvalidParameter {
                name: "observe_times",
                ..
            })
        ));
    }
}
