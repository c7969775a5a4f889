//! Square integrability of `K̂_{t−s}(ξ)` over `[0,t] × ℝⁿ` by cutoff ladders.
//!
//! Second-order families are cut off in `|ξ| ≤ R`. The heat kernel is cut
//! off on the time side instead, `s ≤ t − ε`, and the recorded cutoff is
//! `1/ε`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::KernelFamily;
use crate::quadrature::{integrate, QuadOptions};
use crate::stats::fit_line;

use super::spectral::{radial_weight, square_time_integral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Finite,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthRate {
    Logarithmic,
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffPoint {
    pub cutoff: f64,
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub family: KernelFamily,
    pub n: usize,
    pub t: f64,
    pub verdict: Verdict,
    pub rate: Option<GrowthRate>,
    /// Extrapolated limit for finite verdicts.
    pub limit: Option<f64>,
    /// `R²` of the fit behind a divergent verdict.
    pub fit_r_squared: Option<f64>,
    pub cutoffs: Vec<CutoffPoint>,
}

#[derive(Debug, Clone, Copy)]
pub struct AdmissibilityOptions {
    /// First cutoff, in units of `1/t` (frequency) or `t` (heat time side).
    pub first_cutoff: f64,
    /// Multiplicative step in frequency; the heat ladder uses its square.
    pub ratio: f64,
    pub levels: usize,
    /// Cauchy tolerance `|I(R_{i+1}) − I(R_i)| < tol · I(R_i)`.
    pub cauchy_tol: f64,
    /// Minimum `R²` for a growth fit.
    pub min_r_squared: f64,
}

impl Default for AdmissibilityOptions {
    fn default() -> Self {
        Self {
            first_cutoff: 1.0,
            ratio: 2.0,
            levels: 18,
            cauchy_tol: 1e-3,
            min_r_squared: 0.99,
        }
    }
}

fn quad() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-10,
        max_panels: 200_000,
    }
}

/// Partial integrals over the frequency ladder `R_i`.
fn frequency_ladder(
    family: KernelFamily,
    n: usize,
    t: f64,
    opts: &AdmissibilityOptions,
) -> Result<Vec<CutoffPoint>> {
    let w = radial_weight(n);
    let integrand = |r: f64| w * r.powi(n as i32 - 1) * square_time_integral(family, r, t);
    let mut cutoff = opts.first_cutoff / t;
    let mut total = integrate(integrand, 0.0, cutoff, quad())?;
    let mut out = vec![CutoffPoint {
        cutoff,
        integral: total,
    }];
    for _ in 1..opts.levels {
        let next = cutoff * opts.ratio;
        let pieces = ((next - cutoff) * t).ceil().clamp(1.0, 4096.0) as usize;
        let h = (next - cutoff) / pieces as f64;
        for i in 0..pieces {
            let a = cutoff + i as f64 * h;
            total += integrate(integrand, a, a + h, quad())?;
        }
        cutoff = next;
        out.push(CutoffPoint {
            cutoff,
            integral: total,
        });
    }
    Ok(out)
}

/// `(2π)^{−n} ∫ e^{−2|ξ|² s} dξ = (8πs)^{−n/2}` by radial quadrature.
fn heat_spatial_norm(n: usize, s: f64) -> Result<f64> {
    let w = radial_weight(n);
    let scale = 1.0 / s.sqrt();
    integrate(
        |r: f64| w * r.powi(n as i32 - 1) * (-2.0 * r * r * s).exp(),
        0.0,
        12.0 * scale,
        quad(),
    )
}

fn heat_ladder(n: usize, t: f64, opts: &AdmissibilityOptions) -> Result<Vec<CutoffPoint>> {
    let shrink = opts.ratio * opts.ratio;
    let mut eps = t / opts.first_cutoff.max(1.0 + 1e-12) / shrink;
    let f = |s: f64| heat_spatial_norm(n, s).unwrap_or(f64::NAN);
    let mut total = integrate(f, eps, t, quad())?;
    let mut out = vec![CutoffPoint {
        cutoff: 1.0 / eps,
        integral: total,
    }];
    for _ in 1..opts.levels {
        let next = eps / shrink;
        total += integrate(f, next, eps, quad())?;
        eps = next;
        out.push(CutoffPoint {
            cutoff: 1.0 / eps,
            integral: total,
        });
    }
    if out.iter().any(|p| !p.integral.is_finite()) {
        return Err(Error::QuadratureFailure("heat spatial norm failed".into()));
    }
    Ok(out)
}

/// Verdict, growth rate, limit and log-fit R².
pub type Classification = (Verdict, Option<GrowthRate>, Option<f64>, Option<f64>);

/// Classifies a nondecreasing sequence of partial integrals.
pub fn classify(points: &[CutoffPoint], opts: &AdmissibilityOptions) -> Result<Classification> {
    if points.len() < 6 {
        return Err(invalid("levels", "need at least six cutoffs"));
    }
    for w in points.windows(2) {
        if w[1].integral < w[0].integral * (1.0 - 1e-12) {
            return Err(Error::Inconclusive(format!(
                "partial integrals decrease between cutoffs {} and {}",
                w[0].cutoff, w[1].cutoff
            )));
        }
    }
    let d: Vec<f64> = points
        .windows(2)
        .map(|w| w[1].integral - w[0].integral)
        .collect();
    let tail = &d[d.len() - 4..];
    let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
    let last = points[points.len() - 1].integral;
    let dl = d[d.len() - 1];

    let converging = ratios.iter().all(|&r| r.is_finite() && r < 0.9) || dl <= 1e-15 * last;
    if converging && dl < opts.cauchy_tol * last {
        let rho = ratios.last().copied().unwrap_or(0.0);
        let limit = if rho.is_finite() && rho > 0.0 && rho < 1.0 {
            last + dl * rho / (1.0 - rho)
        } else {
            last
        };
        return Ok((Verdict::Finite, None, Some(limit), None));
    }

    let k = points.len() / 2;
    let tail_points = &points[points.len() - k..];
    let x: Vec<f64> = tail_points.iter().map(|p| p.cutoff.ln()).collect();
    let y: Vec<f64> = tail_points.iter().map(|p| p.integral).collect();
    let steady = ratios.iter().all(|&r| (0.85..1.15).contains(&r));
    if let Some(fit) = fit_line(&x, &y) {
        if steady && fit.slope > 0.0 && fit.r_squared > opts.min_r_squared {
            return Ok((
                Verdict::Divergent,
                Some(GrowthRate::Logarithmic),
                None,
                Some(fit.r_squared),
            ));
        }
    }
    let growing = ratios.iter().all(|&r| r > 1.15);
    let dx: Vec<f64> = points[points.len() - k..]
        .iter()
        .map(|p| p.cutoff.ln())
        .collect();
    let dy: Vec<f64> = d[d.len() - k..]
        .iter()
        .map(|v| v.max(f64::MIN_POSITIVE).ln())
        .collect();
    if let Some(fit) = fit_line(&dx, &dy) {
        if growing && fit.slope > 0.0 && fit.r_squared > opts.min_r_squared {
            return Ok((
                Verdict::Divergent,
                Some(GrowthRate::Polynomial),
                None,
                Some(fit.r_squared),
            ));
        }
    }
    Err(Error::Inconclusive(format!(
        "increment ratios {ratios:?} show neither convergence nor steady growth"
    )))
}

/// Cutoff-ladder test of `∫₀ᵗ ∫ |K̂_{t−s}(ξ)|² dξ ds < ∞`.
pub fn admissibility(
    family: KernelFamily,
    n: usize,
    t: f64,
    opts: &AdmissibilityOptions,
) -> Result<AdmissibilityReport> {
    if !(1..=3).contains(&n) {
        return Err(invalid("n", "dimension must be 1, 2 or 3"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be positive and finite"));
    }
    if !(opts.ratio > 1.0) {
        return Err(invalid("ratio", "cutoff ratio must exceed 1"));
    }
    let cutoffs = match family {
        KernelFamily::Heat => heat_ladder(n, t, opts)?,
        _ => frequency_ladder(family, n, t, opts)?,
    };
    let (verdict, rate, limit, fit_r_squared) = classify(&cutoffs, opts)?;
    Ok(AdmissibilityReport {
        family,
        n,
        t,
        verdict,
        rate,
        limit,
        fit_r_squared,
        cutoffs,
    })
}
