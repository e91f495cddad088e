//! Pareto degree sequences and their moments.
//!
//! Degrees are integer floors of continuous Pareto draws
//! `x_min · U^(-1/alpha)`, so every sampled degree is at least `x_min` and the
//! tail exponent is preserved.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Rng, LAYER_DEGREES};
use crate::stats::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoSpec {
    pub alpha: f64,
    pub x_min: u64,
    pub n: usize,
    pub seed: u64,
}

impl ParetoSpec {
    pub fn new(alpha: f64, x_min: u64, n: usize, seed: u64) -> Result<Self> {
        let spec = ParetoSpec { alpha, x_min, n, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.x_min < 1 {
            return Err(invalid("x_min must be at least 1"));
        }
        if self.n < 1 {
            return Err(invalid("n must be at least 1"));
        }
        Ok(())
    }

    /// Warning text when `x_min` is below the usual whp-connectivity threshold
    /// (3 for undirected, 2 for directed ensembles).
    pub fn connectivity_warning(&self, directed: bool) -> Option<String> {
        let needed = if directed { 2 } else { 3 };
        (self.x_min < needed).then(|| {
            format!(
                "x_min = {} < {needed}: the {} configuration model is not connected whp; \
                 simulations will be restricted to the largest component",
                self.x_min,
                if directed { "directed" } else { "undirected" }
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreeKind {
    Undirected,
    Directed,
}

/// Integer degree sequence. For undirected sequences `in_deg == out_deg`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSequence {
    kind: DegreeKind,
    in_deg: Vec<u64>,
    out_deg: Vec<u64>,
}

impl DegreeSequence {
    /// Undirected sequence; the stub sum must be even.
    pub fn undirected(deg: Vec<u64>) -> Result<Self> {
        if deg.is_empty() {
            return Err(invalid("empty degree sequence"));
        }
        let total: u128 = deg.iter().map(|&d| d as u128).sum();
        if !total.is_multiple_of(2) {
            return Err(Error::NotGraphical(format!("odd stub sum {total}")));
        }
        Ok(DegreeSequence { kind: DegreeKind::Undirected, in_deg: deg.clone(), out_deg: deg })
    }

    /// Directed sequence; in- and out-stub sums must agree.
    pub fn directed(in_deg: Vec<u64>, out_deg: Vec<u64>) -> Result<Self> {
        if in_deg.is_empty() {
            return Err(invalid("empty degree sequence"));
        }
        if in_deg.len() != out_deg.len() {
            return Err(invalid(format!("in/out sequences differ in length ({} vs {})", in_deg.len(), out_deg.len())));
        }
        let si: u128 = in_deg.iter().map(|&d| d as u128).sum();
        let so: u128 = out_deg.iter().map(|&d| d as u128).sum();
        if si != so {
            return Err(Error::NotGraphical(format!("in-stub sum {si} != out-stub sum {so}")));
        }
        Ok(DegreeSequence { kind: DegreeKind::Directed, in_deg, out_deg })
    }

    pub fn kind(&self) -> DegreeKind {
        self.kind
    }

    pub fn is_directed(&self) -> bool {
        self.kind == DegreeKind::Directed
    }

    pub fn n(&self) -> usize {
        self.in_deg.len()
    }

    /// Undirected degrees (equal to `in_deg` for undirected sequences).
    pub fn deg(&self) -> &[u64] {
        &self.in_deg
    }

    pub fn in_deg(&self) -> &[u64] {
        &self.in_deg
    }

    pub fn out_deg(&self) -> &[u64] {
        &self.out_deg
    }

    /// `m`: number of stubs, `2ℓ` for undirected, `Σ d⁻ = Σ d⁺` for directed.
    pub fn total_stubs(&self) -> u64 {
        self.in_deg.iter().sum()
    }

    pub fn min_out_degree(&self) -> u64 {
        self.out_deg.iter().copied().min().unwrap_or(0)
    }

    pub fn is_eulerian(&self) -> bool {
        self.in_deg == self.out_deg
    }

    /// Stable 64-bit FNV-1a fingerprint of the sequence.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.is_directed() as u64);
        for (&i, &o) in self.in_deg.iter().zip(&self.out_deg) {
            feed(i);
            feed(o);
        }
        h
    }

    pub fn moments(&self, law: Option<(f64, u64)>) -> MomentSummary {
        let in_m = DirectionMoments::compute(&self.in_deg, law);
        let out_m = if self.is_directed() { DirectionMoments::compute(&self.out_deg, law) } else { in_m.clone() };
        MomentSummary { n: self.n(), total_stubs: self.total_stubs(), in_deg: in_m, out_deg: out_m }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionMoments {
    pub m1_hat: f64,
    pub m2_hat: f64,
    pub d_max: u64,
    /// Truncated Pareto moments on `[x_min, d_max]`, when the law is known.
    pub m1_truncated: Option<f64>,
    pub m2_truncated: Option<f64>,
    /// `d_max / n^(1/alpha)`, asymptotically Fréchet distributed.
    pub frechet_rescaled: Option<f64>,
}

impl DirectionMoments {
    fn compute(deg: &[u64], law: Option<(f64, u64)>) -> Self {
        let n = deg.len() as f64;
        let m1_hat = compensated_sum(deg.iter().map(|&d| d as f64)) / n;
        let m2_hat = compensated_sum(deg.iter().map(|&d| (d as f64) * (d as f64))) / n;
        let d_max = deg.iter().copied().max().unwrap_or(0);
        let (mut m1_t, mut m2_t, mut fr) = (None, None, None);
        if let Some((alpha, x_min)) = law {
            let cut = (d_max as f64).max(x_min as f64);
            m1_t = truncated_moment(alpha, x_min as f64, cut, 1).ok();
            m2_t = truncated_moment(alpha, x_min as f64, cut, 2).ok();
            fr = Some(d_max as f64 / n.powf(1.0 / alpha));
        }
        DirectionMoments { m1_hat, m2_hat, d_max, m1_truncated: m1_t, m2_truncated: m2_t, frechet_rescaled: fr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    pub total_stubs: u64,
    pub in_deg: DirectionMoments,
    pub out_deg: DirectionMoments,
}

/// Inverse-CDF Pareto degree for a uniform `u ∈ (0, 1]`.
pub fn pareto_degree(u: f64, alpha: f64, x_min: u64) -> u64 {
    // `as` saturates, so astronomically small u cannot wrap around.
    (x_min as f64 * u.powf(-1.0 / alpha)).floor() as u64
}

fn open_unit(rng: &mut Rng) -> f64 {
    // (0, 1]
    1.0 - rng.random::<f64>()
}

fn draw_pareto(spec: &ParetoSpec, rng: &mut Rng) -> Vec<u64> {
    (0..spec.n).map(|_| pareto_degree(open_unit(rng), spec.alpha, spec.x_min)).collect()
}

/// Undirected Pareto sequence drawn from the stream keyed by `spec.seed`.
pub fn sample_pareto_degrees(spec: &ParetoSpec) -> Result<DegreeSequence> {
    sample_pareto_degrees_with(spec, &mut rng::stream(spec.seed, &[LAYER_DEGREES]))
}

pub fn sample_pareto_degrees_with(spec: &ParetoSpec, rng: &mut Rng) -> Result<DegreeSequence> {
    spec.validate()?;
    let mut deg = draw_pareto(spec, rng);
    if deg.iter().map(|&d| d as u128).sum::<u128>() % 2 == 1 {
        let v = rng.random_range(0..deg.len());
        deg[v] += 1;
    }
    DegreeSequence::undirected(deg)
}

/// Directed Pareto sequence: in-degrees i.i.d., out-degrees a uniform
/// permutation of the in-degrees.
pub fn sample_pareto_bidegrees(spec: &ParetoSpec) -> Result<DegreeSequence> {
    sample_pareto_bidegrees_with(spec, &mut rng::stream(spec.seed, &[LAYER_DEGREES]))
}

pub fn sample_pareto_bidegrees_with(spec: &ParetoSpec, rng: &mut Rng) -> Result<DegreeSequence> {
    spec.validate()?;
    let in_deg = draw_pareto(spec, rng);
    let mut out_deg = in_deg.clone();
    out_deg.shuffle(rng);
    DegreeSequence::directed(in_deg, out_deg)
}

/// `α·x_min^α ∫_{x_min}^{cut} x^(p-α-1) dx` for real `p`; infinite `cut` allowed.
pub(crate) fn truncated_power_integral(alpha: f64, x_min: f64, cut: f64, p: f64) -> f64 {
    let s = p - alpha;
    let scale = alpha * x_min.powf(alpha);
    if cut.is_infinite() {
        return if s < 0.0 { alpha * x_min.powf(p) / (alpha - p) } else { f64::INFINITY };
    }
    let log_ratio = (cut / x_min).ln();
    if s == 0.0 {
        return scale * log_ratio;
    }
    // x^s · (e^{s ln(cut/x)} − 1)/s, stable as s → 0
    scale * x_min.powf(s) * (s * log_ratio).exp_m1() / s
}

/// Truncated Pareto moment `m_i = ∫_{x_min}^{cut} x^i f(x) dx`, `i ∈ {1, 2}`.
pub fn truncated_moment(alpha: f64, x_min: f64, cut: f64, i: u32) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if i != 1 && i != 2 {
        return Err(invalid(format!("moment order must be 1 or 2, got {i}")));
    }
    if !(x_min > 0.0) || !(cut >= x_min) {
        return Err(invalid(format!("need 0 < x_min <= cut, got x_min={x_min}, cut={cut}")));
    }
    Ok(truncated_power_integral(alpha, x_min, cut, i as f64))
}

/// `(a, b)` in `E[τ] ~ c · log^a(n) · n^b` for the undirected α-CM.
pub fn scaling_exponents(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(if alpha > 2.0 {
        (0.0, 1.0)
    } else if alpha == 2.0 {
        (-1.0, 1.0)
    } else if alpha > 1.0 {
        (0.0, 2.0 * (alpha - 1.0) / alpha)
    } else if alpha == 1.0 {
        (2.0, 0.0)
    } else {
        (0.0, 0.0)
    })
}

/// Limiting CDF of `d_max / n^(1/α)`: `exp(-(y/x_min)^(-α))`.
pub fn frechet_cdf(y: f64, alpha: f64, x_min: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        (-(y / x_min).powf(-alpha)).exp()
    }
}
