//! Random walks on a fixed graph.
//!
//! The walk jumps at rate 1 to a uniformly chosen out-stub endpoint, so
//! `q(x, y) = A(x, y) / d⁺_x`. Everything here is the dual side of the voter
//! model: stationary law, two-walker meeting times, full coalescence of one
//! walker per vertex, and the Kingman-coalescent reference sums.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::{Exp1, Gamma, Geometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graph::{require_strongly_connected, MultiDigraph};
use crate::rng::{self, Rng, LAYER_KINGMAN, LAYER_WALK};
use crate::stats::{self, CompensatedSum};
use crate::theory::entropy_h;

pub const POWER_TOLERANCE: f64 = 1e-13;
pub const POWER_MAX_ITERATIONS: usize = 1_000_000;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_EVENT_CAP: u64 = 1_000_000_000;
pub const DEFAULT_DENSE_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationaryMethod {
    /// `π ∝ d` (undirected or Eulerian).
    ClosedForm,
    PowerIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    pub pi_max: f64,
    /// `Σ π(x)²`
    pub pi_delta: f64,
    /// `‖πP − π‖₁`
    pub residual: f64,
    pub method: StationaryMethod,
    pub iterations: usize,
}

impl StationaryDistribution {
    fn finish(g: &MultiDigraph, pi: Vec<f64>, method: StationaryMethod, iterations: usize) -> Result<Self> {
        let residual = stationary_residual(g, &pi);
        if residual > RESIDUAL_TOLERANCE {
            return Err(Error::Residual { residual, tolerance: RESIDUAL_TOLERANCE });
        }
        let pi_max = pi.iter().copied().fold(0.0, f64::max);
        let pi_delta = stats::compensated_sum(pi.iter().map(|p| p * p));
        Ok(StationaryDistribution { pi, pi_max, pi_delta, residual, method, iterations })
    }
}

/// `‖πP − π‖₁` with `P(x, y) = A(x, y)/d⁺_x`.
pub fn stationary_residual(g: &MultiDigraph, pi: &[f64]) -> f64 {
    let flow = push_forward(g, pi);
    stats::compensated_sum(flow.iter().zip(pi).map(|(a, b)| (a - b).abs()))
}

fn push_forward(g: &MultiDigraph, pi: &[f64]) -> Vec<f64> {
    let share: Vec<f64> = (0..g.n()).map(|x| pi[x] / g.out_degree(x) as f64).collect();
    (0..g.n())
        .map(|y| g.in_neighbors(y).iter().map(|&x| share[x as usize]).collect::<CompensatedSum>().value())
        .collect()
}

fn check_walkable(g: &MultiDigraph) -> Result<()> {
    if let Some(x) = (0..g.n()).find(|&x| g.out_degree(x) == 0) {
        return Err(Error::ZeroOutDegree { vertex: x });
    }
    require_strongly_connected(g)
}

/// Stationary distribution of the walk on a strongly connected graph.
pub fn stationary(g: &MultiDigraph) -> Result<StationaryDistribution> {
    check_walkable(g)?;
    if g.is_eulerian() {
        let total: f64 = (0..g.n()).map(|x| g.in_degree(x) as f64).sum();
        let pi = (0..g.n()).map(|x| g.in_degree(x) as f64 / total).collect();
        return StationaryDistribution::finish(g, pi, StationaryMethod::ClosedForm, 0);
    }
    stationary_power(g)
}

/// Power iteration on the lazy chain `(I + P)/2`, which shares π with `P`
/// and is aperiodic.
pub fn stationary_power(g: &MultiDigraph) -> Result<StationaryDistribution> {
    check_walkable(g)?;
    let n = g.n();
    let mut pi = vec![1.0 / n as f64; n];
    let mut change = f64::INFINITY;
    for it in 1..=POWER_MAX_ITERATIONS {
        let flow = push_forward(g, &pi);
        let mut next: Vec<f64> = pi.iter().zip(&flow).map(|(p, f)| 0.5 * (p + f)).collect();
        let total = stats::compensated_sum(next.iter().copied());
        next.iter_mut().for_each(|p| *p /= total);
        change = stats::compensated_sum(next.iter().zip(&pi).map(|(a, b)| (a - b).abs()));
        pi = next;
        if change < POWER_TOLERANCE {
            return StationaryDistribution::finish(g, pi, StationaryMethod::PowerIteration, it);
        }
    }
    Err(Error::NoConvergence { iterations: POWER_MAX_ITERATIONS, change })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeetingEstimate {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub n_pairs: usize,
}

impl MeetingEstimate {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        MeetingEstimate {
            mean: stats::mean(&samples),
            stderr: stats::std_error(&samples),
            n_pairs: samples.len(),
            samples,
        }
    }
}

#[inline]
fn step(g: &MultiDigraph, x: usize, rng: &mut Rng) -> usize {
    let row = g.out_neighbors(x);
    row[rng.random_range(0..row.len())] as usize
}

/// Time for `n_events` rate-`rate` exponential holding times, drawn as one Gamma variate.
pub(crate) fn gamma_time(n_events: u64, rate: f64, rng: &mut Rng) -> f64 {
    match n_events {
        0 => 0.0,
        1 => rng.sample::<f64, _>(Exp1) / rate,
        k => Gamma::new(k as f64, 1.0 / rate).expect("positive shape").sample(rng),
    }
}

/// First meeting time of two independent walkers started at `x` and `y`.
pub fn meeting_time_from(g: &MultiDigraph, x: usize, y: usize, rng: &mut Rng, cap: u64) -> Result<f64> {
    let (mut a, mut b) = (x, y);
    let mut events = 0u64;
    while a != b {
        if events == cap {
            return Err(Error::EventCap { cap, context: format!("meeting from ({x}, {y})") });
        }
        events += 1;
        if rng.random::<bool>() {
            a = step(g, a, rng);
        } else {
            b = step(g, b, rng);
        }
    }
    // the pair process moves at total rate 2
    Ok(gamma_time(events, 2.0, rng))
}

/// Monte Carlo estimate of `m_π` from `n_pairs` stationary-started pairs.
pub fn meeting_time_mc(
    g: &MultiDigraph,
    pi: &StationaryDistribution,
    n_pairs: usize,
    seed: u64,
) -> Result<MeetingEstimate> {
    meeting_time_mc_capped(g, pi, n_pairs, seed, DEFAULT_EVENT_CAP)
}

pub fn meeting_time_mc_capped(
    g: &MultiDigraph,
    pi: &StationaryDistribution,
    n_pairs: usize,
    seed: u64,
    cap: u64,
) -> Result<MeetingEstimate> {
    if pi.pi.len() != g.n() {
        return Err(invalid("stationary distribution does not match the graph"));
    }
    if n_pairs == 0 {
        return Err(invalid("n_pairs must be positive"));
    }
    let law = WeightedIndex::new(&pi.pi).map_err(|e| invalid(format!("bad stationary weights: {e}")))?;
    let samples = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, &[LAYER_WALK, 0, i as u64]);
            let x = law.sample(&mut rng);
            let y = law.sample(&mut rng);
            meeting_time_from(g, x, y, &mut rng, cap)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MeetingEstimate::from_samples(samples))
}

fn coalescence_run(g: &MultiDigraph, rng: &mut Rng, cap: u64) -> Result<f64> {
    let n = g.n();
    let mut occupied = vec![true; n];
    let mut walkers: Vec<usize> = (0..n).collect();
    let mut time = 0.0;
    let mut events = 0u64;
    while walkers.len() > 1 {
        if events == cap {
            return Err(Error::EventCap { cap, context: format!("coalescence with {} walkers left", walkers.len()) });
        }
        events += 1;
        let k = walkers.len();
        time += rng.sample::<f64, _>(Exp1) / k as f64;
        let i = rng.random_range(0..k);
        let from = walkers[i];
        let to = step(g, from, rng);
        if to == from {
            continue;
        }
        occupied[from] = false;
        if occupied[to] {
            walkers.swap_remove(i);
        } else {
            occupied[to] = true;
            walkers[i] = to;
        }
    }
    Ok(time)
}

/// Full-coalescence times of one coalescing walker per vertex.
pub fn full_coalescence_mc(g: &MultiDigraph, n_runs: usize, seed: u64) -> Result<Vec<f64>> {
    check_walkable(g)?;
    (0..n_runs)
        .into_par_iter()
        .map(|r| coalescence_run(g, &mut rng::stream(seed, &[LAYER_WALK, 1, r as u64]), DEFAULT_EVENT_CAP))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KingmanStart {
    /// Sum from k = 2: the full-coalescence law.
    FullCoalescence,
    /// Sum from `K_u + 1` for a Bernoulli(u) voter start.
    Density(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KingmanSpec {
    pub start: KingmanStart,
    pub k_max: usize,
}

impl KingmanSpec {
    pub fn new(start: KingmanStart, k_max: usize) -> Result<Self> {
        if k_max < 2 {
            return Err(invalid(format!("k_max must be at least 2, got {k_max}")));
        }
        if let KingmanStart::Density(u) = start {
            if !(u > 0.0 && u <= 1.0) {
                return Err(invalid(format!("u must lie in (0, 1], got {u}")));
            }
        }
        Ok(KingmanSpec { start, k_max })
    }

    /// Smallest truncation whose dropped mean `2/k_max` is at most `tolerance`.
    pub fn with_tolerance(start: KingmanStart, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        Self::new(start, ((2.0 / tolerance).ceil() as usize).max(2))
    }

    /// Mean mass dropped by truncating the sum at `k_max`.
    pub fn truncation_bias(&self) -> f64 {
        2.0 / self.k_max as f64
    }

    /// Untruncated mean: 2 for full coalescence, `2H(u)` otherwise.
    pub fn limit_mean(&self) -> f64 {
        match self.start {
            KingmanStart::FullCoalescence => 2.0,
            KingmanStart::Density(u) => 2.0 * entropy_h(u).unwrap_or(0.0),
        }
    }
}

/// Draw `K_u = U·A + (1-U)·B` with `A ~ Geom(1-u)`, `B ~ Geom(u)` on `{1, 2, ...}`.
/// Returns `None` when `K_u` is infinite (u = 1).
pub fn draw_k(u: f64, rng: &mut Rng) -> Option<u64> {
    if u >= 1.0 {
        return None;
    }
    // Geometric counts failures before the first success, so shift by one.
    let p = if rng.random::<f64>() < u { 1.0 - u } else { u };
    Some(1 + Geometric::new(p).expect("p in (0, 1)").sample(rng))
}

fn kingman_draw(spec: &KingmanSpec, rng: &mut Rng) -> f64 {
    let k_lo = match spec.start {
        KingmanStart::FullCoalescence => 1,
        KingmanStart::Density(u) => match draw_k(u, rng) {
            Some(k) => k,
            None => return 0.0,
        },
    };
    let mut acc = 0.0;
    let mut k = k_lo.saturating_add(1);
    while k <= spec.k_max as u64 {
        let kf = k as f64;
        acc += rng.sample::<f64, _>(Exp1) / (kf * (kf - 1.0) / 2.0);
        k += 1;
    }
    acc
}

/// `n_draws` samples of `Σ_{k=K+1}^{k_max} Z_k`, `Z_k ~ Exp(k(k-1)/2)`.
pub fn kingman_sample(spec: &KingmanSpec, n_draws: usize, seed: u64) -> Vec<f64> {
    (0..n_draws)
        .into_par_iter()
        .map(|i| kingman_draw(spec, &mut rng::stream(seed, &[LAYER_KINGMAN, i as u64])))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldDiagnostics {
    /// `max_x Σ_{y≠x} q(x, y)`
    pub q_max: f64,
    pub pi_max: f64,
    pub pi_delta: f64,
    /// Mixing time in continuous-time units (lazy skeleton steps / 2); `None` if
    /// it did not mix within the step budget.
    pub t_mix: Option<f64>,
    pub lazy_steps: Option<u64>,
    /// Period of the non-lazy jump chain; `> 1` means the pure skeleton never mixes.
    pub skeleton_period: u64,
    pub ratio_mix_meet: Option<f64>,
    /// `(1 + q_max·t_mix)·π_max`
    pub directed_condition: Option<f64>,
}

/// Max-over-starts total-variation distance of the rows of `m` to `pi`.
fn tv_to(m: &DMatrix<f64>, pi: &[f64]) -> f64 {
    (0..m.nrows()).map(|i| 0.5 * (0..m.ncols()).map(|j| (m[(i, j)] - pi[j]).abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn period(g: &MultiDigraph) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let mut level = vec![u64::MAX; g.n()];
    let mut queue = std::collections::VecDeque::from([0usize]);
    level[0] = 0;
    while let Some(x) = queue.pop_front() {
        for &y in g.out_neighbors(x) {
            if level[y as usize] == u64::MAX {
                level[y as usize] = level[x] + 1;
                queue.push_back(y as usize);
            }
        }
    }
    let mut p = 0;
    for x in 0..g.n() {
        for &y in g.out_neighbors(x) {
            p = gcd(p, (level[x] + 1).abs_diff(level[y as usize]));
        }
    }
    p.max(1)
}

/// Mean-field condition statistics. Dense and therefore limited to small graphs.
pub fn mixing_diagnostics(
    g: &MultiDigraph,
    pi: &StationaryDistribution,
    m_pi: Option<f64>,
) -> Result<MeanFieldDiagnostics> {
    mixing_diagnostics_capped(g, pi, m_pi, DEFAULT_DENSE_CAP)
}

pub fn mixing_diagnostics_capped(
    g: &MultiDigraph,
    pi: &StationaryDistribution,
    m_pi: Option<f64>,
    dense_cap: usize,
) -> Result<MeanFieldDiagnostics> {
    let n = g.n();
    if n > dense_cap {
        return Err(Error::TooLarge { what: "dense mixing diagnostics", n, limit: dense_cap });
    }
    check_walkable(g)?;
    let q_max = (0..n).map(|x| 1.0 - g.loop_stubs(x) as f64 / g.out_degree(x) as f64).fold(0.0, f64::max);

    let mut lazy = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        lazy[(x, x)] += 0.5;
        let w = 0.5 / g.out_degree(x) as f64;
        for &y in g.out_neighbors(x) {
            lazy[(x, y as usize)] += w;
        }
    }
    const MAX_DOUBLINGS: usize = 40;
    let mut powers = vec![lazy];
    let mut mixed = tv_to(&powers[0], &pi.pi) <= 0.25;
    while !mixed && powers.len() < MAX_DOUBLINGS {
        let last = powers.last().unwrap();
        let sq = last * last;
        mixed = tv_to(&sq, &pi.pi) <= 0.25;
        powers.push(sq);
    }
    let lazy_steps = mixed.then(|| {
        // binary lifting: largest t with TV(t) > 1/4, then t + 1
        let mut acc = DMatrix::<f64>::identity(n, n);
        let mut t: u64 = 0;
        for j in (0..powers.len() - 1).rev() {
            let cand = &acc * &powers[j];
            if tv_to(&cand, &pi.pi) > 0.25 {
                acc = cand;
                t += 1 << j;
            }
        }
        t + 1
    });
    let t_mix = lazy_steps.map(|s| s as f64 / 2.0);
    Ok(MeanFieldDiagnostics {
        q_max,
        pi_max: pi.pi_max,
        pi_delta: pi.pi_delta,
        t_mix,
        lazy_steps,
        skeleton_period: period(g),
        ratio_mix_meet: t_mix.zip(m_pi).map(|(t, m)| t / m),
        directed_condition: t_mix.map(|t| (1.0 + q_max * t) * pi.pi_max),
    })
}
