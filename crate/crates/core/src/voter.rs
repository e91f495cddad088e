//! Continuous-time voter dynamics.
//!
//! Every vertex carries a rate-1 clock; when `x` rings it copies the opinion
//! at the endpoint of a uniformly chosen out-stub (a self-loop pick changes
//! nothing). Since all clocks share the same rate, the ringing vertex is a
//! uniform draw and holding times are `Exp(n)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graph::{require_strongly_connected, MultiDigraph};
use crate::rng::{self, Rng, LAYER_VOTER};
use crate::walk::{gamma_time, StationaryDistribution, DEFAULT_EVENT_CAP};

pub const EXACT_MAX_VERTICES: usize = 12;
pub const FIT_WINDOW: (f64, f64) = (0.05, 0.95);
pub const FIT_MIN_POINTS: usize = 10;
/// Discordance per out-stub of independent opinions at density `M` is
/// `2M(1 - M)`; the effective χ is measured relative to it.
pub const INDEPENDENT_DISCORDANCE_FACTOR: f64 = 2.0;

/// Binary opinions with incremental discordance counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpinionState {
    opinions: Vec<bool>,
    ones: usize,
    /// `D_x`: out-stubs of `x` whose endpoint disagrees with `x`; `None` when
    /// not tracked.
    discordant: Option<Vec<u32>>,
    total_discordant: u64,
}

impl OpinionState {
    pub fn new(g: &MultiDigraph, opinions: Vec<bool>, track_discordance: bool) -> Result<Self> {
        if opinions.len() != g.n() {
            return Err(invalid(format!("{} opinions for a graph on {} vertices", opinions.len(), g.n())));
        }
        let ones = opinions.iter().filter(|&&o| o).count();
        let mut s = OpinionState { opinions, ones, discordant: None, total_discordant: 0 };
        if track_discordance {
            let d = s.count_discordance(g);
            s.total_discordant = d.iter().map(|&x| x as u64).sum();
            s.discordant = Some(d);
        }
        Ok(s)
    }

    /// Product Bernoulli(u) opinions.
    pub fn bernoulli(g: &MultiDigraph, u: f64, rng: &mut Rng, track_discordance: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&u) {
            return Err(invalid(format!("u must lie in [0, 1], got {u}")));
        }
        let ops = (0..g.n()).map(|_| rng.random::<f64>() < u).collect();
        Self::new(g, ops, track_discordance)
    }

    pub fn opinions(&self) -> &[bool] {
        &self.opinions
    }

    pub fn ones_count(&self) -> usize {
        self.ones
    }

    pub fn discordant_out(&self) -> Option<&[u32]> {
        self.discordant.as_deref()
    }

    pub fn total_discordant(&self) -> Option<u64> {
        self.discordant.as_ref().map(|_| self.total_discordant)
    }

    pub fn is_consensus(&self) -> bool {
        self.ones == 0 || self.ones == self.opinions.len()
    }

    /// `D_x` recomputed from scratch.
    pub fn count_discordance(&self, g: &MultiDigraph) -> Vec<u32> {
        (0..g.n())
            .map(|x| {
                let ox = self.opinions[x];
                g.out_neighbors(x).iter().filter(|&&y| self.opinions[y as usize] != ox).count() as u32
            })
            .collect()
    }

    fn flip(&mut self, g: &MultiDigraph, z: usize) {
        let now = !self.opinions[z];
        self.opinions[z] = now;
        if now {
            self.ones += 1;
        } else {
            self.ones -= 1;
        }
        let Some(d) = self.discordant.as_mut() else { return };
        // every non-loop out-stub of z changes status
        let loops = g.loop_stubs(z) as u32;
        let before = d[z];
        d[z] = g.out_degree(z) as u32 - loops - before;
        self.total_discordant = self.total_discordant - before as u64 + d[z] as u64;
        for &w in g.in_neighbors(z) {
            let w = w as usize;
            if w == z {
                continue;
            }
            if self.opinions[w] != now {
                d[w] += 1;
                self.total_discordant += 1;
            } else {
                d[w] -= 1;
                self.total_discordant -= 1;
            }
        }
    }

    /// One clock ring. Returns whether an opinion changed.
    #[inline]
    pub fn ring(&mut self, g: &MultiDigraph, rng: &mut Rng) -> bool {
        let x = rng.random_range(0..self.opinions.len());
        let row = g.out_neighbors(x);
        let y = row[rng.random_range(0..row.len())] as usize;
        if self.opinions[y] != self.opinions[x] {
            self.flip(g, x);
            true
        } else {
            false
        }
    }

    /// `M = Σ π(x) η(x)`
    pub fn weighted_density(&self, pi: &[f64]) -> f64 {
        pi.iter().zip(&self.opinions).filter(|(_, &o)| o).map(|(p, _)| p).sum()
    }

    /// `S = Σ (π(x)²/π_Δ)(D_x/d⁺_x)`; requires tracked discordance.
    pub fn weighted_discordance(&self, g: &MultiDigraph, pi: &[f64], pi_delta: f64) -> Option<f64> {
        let d = self.discordant.as_ref()?;
        Some(
            (0..g.n())
                .filter(|&x| d[x] > 0)
                .map(|x| pi[x] * pi[x] / pi_delta * d[x] as f64 / g.out_degree(x) as f64)
                .sum(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub t: f64,
    /// `O_n = ones / n`
    pub density: f64,
    /// `M_n`
    pub weighted_density: f64,
    /// `S`
    pub weighted_discordance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub consensus_time: f64,
    pub final_opinion: u8,
    pub events: u64,
    pub observations: Option<Vec<Observation>>,
}

fn check_voter_graph(g: &MultiDigraph) -> Result<()> {
    match (0..g.n()).find(|&x| g.out_degree(x) == 0) {
        Some(x) => Err(Error::ZeroOutDegree { vertex: x }),
        None => Ok(()),
    }
}

/// Observation grid of `points` equally spaced times on `[0, horizon]`.
pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        p => (0..p).map(|i| horizon * i as f64 / (p - 1) as f64).collect(),
    }
}

/// Voter run from a Bernoulli(u) start using the seed's voter stream.
pub fn run_voter(
    g: &MultiDigraph,
    u: f64,
    pi: Option<&StationaryDistribution>,
    seed: u64,
    observe: Option<&[f64]>,
) -> Result<SimTrace> {
    run_voter_with(g, u, pi, &mut rng::stream(seed, &[LAYER_VOTER]), observe)
}

pub fn run_voter_with(
    g: &MultiDigraph,
    u: f64,
    pi: Option<&StationaryDistribution>,
    rng: &mut Rng,
    observe: Option<&[f64]>,
) -> Result<SimTrace> {
    check_voter_graph(g)?;
    if observe.is_some() && pi.is_none() {
        return Err(invalid("an observation grid needs a stationary distribution"));
    }
    let state = OpinionState::bernoulli(g, u, rng, observe.is_some())?;
    run_from_state(g, state, pi, rng, observe, DEFAULT_EVENT_CAP).map(|(t, _)| t)
}

/// Run until consensus from an explicit state; returns the trace and the final state.
pub fn run_from_state(
    g: &MultiDigraph,
    mut state: OpinionState,
    pi: Option<&StationaryDistribution>,
    rng: &mut Rng,
    observe: Option<&[f64]>,
    cap: u64,
) -> Result<(SimTrace, OpinionState)> {
    check_voter_graph(g)?;
    let n = g.n();
    let mut events = 0u64;
    let cap_err = |events| Error::EventCap { cap, context: format!("voter run after {events} events") };

    let (time, observations) = match (observe, pi) {
        (None, _) => {
            while !state.is_consensus() {
                if events == cap {
                    return Err(cap_err(events));
                }
                events += 1;
                state.ring(g, rng);
            }
            // the jump chain is independent of the Exp(n) holding times
            (gamma_time(events, n as f64, rng), None)
        }
        (Some(grid), Some(pi)) => {
            if state.discordant.is_none() {
                let d = state.count_discordance(g);
                state.total_discordant = d.iter().map(|&x| x as u64).sum();
                state.discordant = Some(d);
            }
            let mut obs = Vec::with_capacity(grid.len());
            let record = |t: f64, s: &OpinionState, obs: &mut Vec<Observation>| {
                obs.push(Observation {
                    t,
                    density: s.ones as f64 / n as f64,
                    weighted_density: s.weighted_density(&pi.pi),
                    weighted_discordance: s.weighted_discordance(g, &pi.pi, pi.pi_delta).unwrap_or(0.0),
                });
            };
            let mut next_obs = 0usize;
            let mut t = 0.0;
            while !state.is_consensus() {
                if events == cap {
                    return Err(cap_err(events));
                }
                let t_next = t + rng.sample::<f64, _>(Exp1) / n as f64;
                while next_obs < grid.len() && grid[next_obs] < t_next {
                    record(grid[next_obs], &state, &mut obs);
                    next_obs += 1;
                }
                t = t_next;
                events += 1;
                state.ring(g, rng);
            }
            for &tg in &grid[next_obs..] {
                record(tg, &state, &mut obs);
            }
            (t, Some(obs))
        }
        (Some(_), None) => return Err(invalid("an observation grid needs a stationary distribution")),
    };
    let trace = SimTrace { consensus_time: time, final_opinion: u8::from(state.ones > 0), events, observations };
    Ok((trace, state))
}

/// Exact expected consensus time from a Bernoulli(u) start, by solving the
/// absorbing chain on `{0,1}^V`. Limited to `n <= 12`.
pub fn exact_consensus_mean(g: &MultiDigraph, u: f64) -> Result<f64> {
    let n = g.n();
    if n > EXACT_MAX_VERTICES {
        return Err(Error::TooLarge { what: "exact consensus solve", n, limit: EXACT_MAX_VERTICES });
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(invalid(format!("u must lie in [0, 1], got {u}")));
    }
    check_voter_graph(g)?;
    require_strongly_connected(g)?;
    if n == 1 || u == 0.0 || u == 1.0 {
        return Ok(0.0);
    }
    let full = (1usize << n) - 1;
    // unknowns: states 1..full-1
    let dim = full - 1;
    let idx = |s: usize| s - 1;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let b = DVector::<f64>::from_element(dim, 1.0);
    for s in 1..full {
        let bit = |v: usize| (s >> v) & 1;
        let mut total = 0.0;
        for x in 0..n {
            let d = g.out_neighbors(x).iter().filter(|&&y| bit(y as usize) != bit(x)).count();
            if d == 0 {
                continue;
            }
            let rate = d as f64 / g.out_degree(x) as f64;
            total += rate;
            let t = s ^ (1 << x);
            if t != 0 && t != full {
                a[(idx(s), idx(t))] -= rate;
            }
        }
        a[(idx(s), idx(s))] += total;
    }
    let times = a.lu().solve(&b).ok_or_else(|| invalid("absorbing-chain system is singular"))?;
    let mean = (1..full)
        .map(|s| {
            let k = s.count_ones() as i32;
            u.powi(k) * (1.0 - u).powi(n as i32 - k) * times[idx(s)]
        })
        .sum();
    Ok(mean)
}

/// Least-squares `χ̂` in `S ≈ χ̂·M(1 - M)` over points with `M ∈ (0.05, 0.95)`.
pub fn fit_chi(points: &[(f64, f64)]) -> Result<f64> {
    let (lo, hi) = FIT_WINDOW;
    let used: Vec<(f64, f64)> = points.iter().copied().filter(|&(m, _)| m > lo && m < hi).collect();
    if used.len() < FIT_MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} points with M in ({lo}, {hi}); need at least {FIT_MIN_POINTS}",
            used.len()
        )));
    }
    let num: f64 = used.iter().map(|&(m, s)| s * m * (1.0 - m)).sum();
    let den: f64 = used.iter().map(|&(m, _)| (m * (1.0 - m)).powi(2)).sum();
    Ok(num / den)
}

/// Effective diffusion parameter: [`fit_chi`] with the discordance expressed
/// relative to the independent-opinion level `2M(1 - M)`.
pub fn fit_effective_chi(points: &[(f64, f64)]) -> Result<f64> {
    fit_chi(points).map(|c| c / INDEPENDENT_DISCORDANCE_FACTOR)
}

/// `(M, S)` pairs from observed traces.
pub fn wf_points<'a>(traces: impl IntoIterator<Item = &'a SimTrace>) -> Vec<(f64, f64)> {
    traces
        .into_iter()
        .filter_map(|t| t.observations.as_ref())
        .flatten()
        .map(|o| (o.weighted_density, o.weighted_discordance))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::stationary;

    fn mutual_pair() -> MultiDigraph {
        MultiDigraph::from_edges(2, true, &[(0, 1), (1, 0)]).unwrap()
    }

    #[test]
    fn all_zero_start_is_absorbed() {
        let g = mutual_pair();
        let t = run_voter(&g, 0.0, None, 1, None).unwrap();
        assert_eq!((t.consensus_time, t.final_opinion, t.events), (0.0, 0, 0));
    }

    #[test]
    fn weighted_observables_on_discordant_pair() {
        let g = mutual_pair();
        let pi = stationary(&g).unwrap();
        let s = OpinionState::new(&g, vec![true, false], true).unwrap();
        assert_eq!(s.weighted_density(&pi.pi), 0.5);
        assert_eq!(s.weighted_discordance(&g, &pi.pi, pi.pi_delta), Some(1.0));
        assert_eq!(s.total_discordant(), Some(2));
    }

    #[test]
    fn discordant_pair_mean_time() {
        let g = mutual_pair();
        let mut rng = rng::stream(11, &[0]);
        let runs = 40_000;
        let xs: Vec<f64> = (0..runs)
            .map(|_| {
                let s = OpinionState::new(&g, vec![true, false], false).unwrap();
                run_from_state(&g, s, None, &mut rng, None, 1000).unwrap().0.consensus_time
            })
            .collect();
        let (m, se) = (crate::stats::mean(&xs), crate::stats::std_error(&xs));
        assert!((m - 0.5).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn exact_oracle_small_cases() {
        let g = mutual_pair();
        assert!((exact_consensus_mean(&g, 0.5).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(exact_consensus_mean(&g, 0.0).unwrap(), 0.0);
        assert_eq!(exact_consensus_mean(&g, 1.0).unwrap(), 0.0);
        let big =
            MultiDigraph::from_edges(13, true, &(0..13u32).map(|x| (x, (x + 1) % 13)).collect::<Vec<_>>()).unwrap();
        assert!(matches!(exact_consensus_mean(&big, 0.5), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn observation_grid_needs_pi() {
        let g = mutual_pair();
        let grid = uniform_grid(1.0, 5);
        assert!(run_voter(&g, 0.5, None, 1, Some(&grid)).is_err());
        let g0 = MultiDigraph::from_edges(2, true, &[(0, 1)]).unwrap();
        assert!(matches!(run_voter(&g0, 0.5, None, 1, None), Err(Error::ZeroOutDegree { vertex: 1 })));
    }

    #[test]
    fn observed_trace_invariants() {
        let g = MultiDigraph::from_edges(4, true, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 0), (1, 1), (3, 1)])
            .unwrap();
        let pi = stationary(&g).unwrap();
        let grid = uniform_grid(20.0, 41);
        for seed in 0..50 {
            let tr = run_voter(&g, 0.5, Some(&pi), seed, Some(&grid)).unwrap();
            let obs = tr.observations.unwrap();
            assert_eq!(obs.len(), grid.len());
            for o in obs {
                assert!((-1e-15..=1.0 + 1e-15).contains(&o.weighted_density));
                assert!(o.weighted_discordance >= 0.0);
                if o.density == 0.0 || o.density == 1.0 {
                    assert_eq!(o.weighted_discordance, 0.0);
                }
            }
        }
    }

    #[test]
    fn fit_chi_cases() {
        let pts: Vec<(f64, f64)> = (1..100).map(|i| i as f64 / 100.0).map(|m| (m, 0.8 * m * (1.0 - m))).collect();
        assert!((fit_chi(&pts).unwrap() - 0.8).abs() < 1e-12);
        assert!((fit_effective_chi(&pts).unwrap() - 0.4).abs() < 1e-12);
        let zeros: Vec<(f64, f64)> = pts.iter().map(|&(m, _)| (m, 0.0)).collect();
        assert_eq!(fit_chi(&zeros).unwrap(), 0.0);
        assert!(matches!(fit_chi(&pts[..5]), Err(Error::InsufficientData(_))));
        // points outside the window do not count
        let edge: Vec<(f64, f64)> = (0..50).map(|_| (0.01, 1.0)).collect();
        assert!(fit_chi(&edge).is_err());
    }

    #[test]
    fn fit_chi_noisy_recovery() {
        let mut rng = rng::stream(5, &[0]);
        let pts: Vec<(f64, f64)> = (0..1000)
            .map(|_| {
                let m = rng.random_range(0.06..0.94);
                (m, 0.816 * m * (1.0 - m) + rng.random_range(-0.01..0.01))
            })
            .collect();
        assert!((fit_chi(&pts).unwrap() - 0.816).abs() < 0.005);
    }
}
