//! Closed-form consensus predictions for directed configuration models.
//!
//! For a bidegree sequence with `m` stubs on `n` vertices:
//!
//! ```text
//! δ = m/n          β = Σ (d⁻)² / m
//! ρ = Σ d⁻/d⁺ / m  γ = Σ (d⁻)²/d⁺ / m
//!
//! ϑ = δ / [ (γ-ρ)/(1-ρ) · (1 - f(ρ)) + β - 1 ],  f(ρ) = (1 - √(1-ρ))/ρ
//! χ = 1 - f(ρ)/δ
//! ```
//!
//! and the expected consensus time from a Bernoulli(u) start is predicted to
//! be `H(u)·ϑ·n`, with mean meeting time `n·ϑ/2`.

use serde::Serialize;

use crate::degrees::{truncated_power_integral, DegreeSequence};
use crate::error::{invalid, Error, Result};
use crate::stats::compensated_sum;

/// Below this ρ, `f(ρ)` is evaluated from its Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryParams {
    pub delta: f64,
    pub beta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub theta: f64,
    pub chi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsensusPrediction {
    pub u: f64,
    pub entropy: f64,
    pub predicted_mean: f64,
    pub predicted_meeting: f64,
}

/// Natural-log binary entropy, 0 at the endpoints.
pub fn entropy_h(u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(invalid(format!("u must lie in [0, 1], got {u}")));
    }
    let term = |p: f64| if p == 0.0 { 0.0 } else { -p * p.ln() };
    Ok(term(u) + term(1.0 - u))
}

/// `(1 - √(1-ρ))/ρ` via the cancellation-free form `1/(1 + √(1-ρ))`.
pub fn sqrt_ratio_direct(rho: f64) -> f64 {
    1.0 / (1.0 + (1.0 - rho).sqrt())
}

/// Series `1/2 + ρ/8 + ρ²/16 + 5ρ³/128 + 7ρ⁴/256` of the same ratio.
pub fn sqrt_ratio_series(rho: f64) -> f64 {
    0.5 + rho * (1.0 / 8.0 + rho * (1.0 / 16.0 + rho * (5.0 / 128.0 + rho * 7.0 / 256.0)))
}

fn sqrt_ratio(rho: f64) -> f64 {
    if rho < SERIES_THRESHOLD {
        sqrt_ratio_series(rho)
    } else {
        sqrt_ratio_direct(rho)
    }
}

impl TheoryParams {
    /// Assemble ϑ and χ from the four degree functionals.
    pub fn from_functionals(delta: f64, beta: f64, rho: f64, gamma: f64) -> Result<Self> {
        Self::with_ratio(delta, beta, rho, gamma, sqrt_ratio(rho))
    }

    /// Same as [`from_functionals`](Self::from_functionals) with an explicit
    /// evaluation of `f(ρ)`; lets callers compare the series and direct paths.
    pub fn with_ratio(delta: f64, beta: f64, rho: f64, gamma: f64, f: f64) -> Result<Self> {
        if !(rho > 0.0) || rho >= 1.0 {
            return Err(invalid(format!("rho must lie in (0, 1), got {rho}")));
        }
        let denom = (gamma - rho) / (1.0 - rho) * (1.0 - f) + beta - 1.0;
        let theta = delta / denom;
        let chi = 1.0 - f / delta;
        Ok(TheoryParams { delta, beta, rho, gamma, theta, chi })
    }

    pub fn predict(&self, n: f64, u: f64) -> Result<ConsensusPrediction> {
        predict_consensus(self, n, u)
    }
}

/// δ, β, ρ, γ, ϑ and χ for a directed sequence with every out-degree ≥ 1.
pub fn theory_params(degrees: &DegreeSequence) -> Result<TheoryParams> {
    if !degrees.is_directed() {
        return Err(invalid("theory_params needs a directed degree sequence"));
    }
    if let Some(v) = degrees.out_deg().iter().position(|&d| d == 0) {
        return Err(Error::ZeroOutDegree { vertex: v });
    }
    let n = degrees.n() as f64;
    let m = degrees.total_stubs() as f64;
    let pairs = || degrees.in_deg().iter().zip(degrees.out_deg()).map(|(&i, &o)| (i as f64, o as f64));
    let beta = compensated_sum(pairs().map(|(i, _)| i * i)) / m;
    let rho = compensated_sum(pairs().map(|(i, o)| i / o)) / m;
    let gamma = compensated_sum(pairs().map(|(i, o)| i * i / o)) / m;
    if rho >= 1.0 {
        return Err(invalid(format!("rho = {rho} >= 1; the ϑ formula is undefined")));
    }
    TheoryParams::from_functionals(m / n, beta, rho, gamma)
}

pub fn predict_consensus(params: &TheoryParams, n: f64, u: f64) -> Result<ConsensusPrediction> {
    let entropy = entropy_h(u)?;
    Ok(ConsensusPrediction {
        u,
        entropy,
        predicted_mean: entropy * params.theta * n,
        predicted_meeting: n * params.theta / 2.0,
    })
}

/// Leading order of ϑ: `δ/β = (m̂₁⁻)²/m̂₂⁻` from the in-degrees
/// (for undirected sequences, `m̂₁²/m̂₂`).
pub fn theta_leading_order(degrees: &DegreeSequence) -> Result<f64> {
    if degrees.is_directed() {
        if let Some(v) = degrees.out_deg().iter().position(|&d| d == 0) {
            return Err(Error::ZeroOutDegree { vertex: v });
        }
    }
    let n = degrees.n() as f64;
    let m1 = compensated_sum(degrees.in_deg().iter().map(|&d| d as f64)) / n;
    let m2 = compensated_sum(degrees.in_deg().iter().map(|&d| (d as f64) * (d as f64))) / n;
    if m2 == 0.0 {
        return Err(invalid("all in-degrees are zero"));
    }
    Ok(m1 * m1 / m2)
}

/// Analytic lower bounds `(c₁, c₂)` for ρ and γ given the Pareto law of the
/// out-degrees and the sequence's δ and maximum out-degree.
pub fn rho_gamma_lower_bounds(alpha: f64, x_min: f64, delta: f64, d_out_max: f64) -> (f64, f64) {
    let inv_moment = truncated_power_integral(alpha, x_min, d_out_max.max(x_min), -1.0);
    let c1 = x_min / delta * inv_moment;
    (c1, x_min * c1)
}
