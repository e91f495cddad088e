//! Nested replication protocol: degree sequence × graph × voter run.

use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Ensemble, Experiment, ExperimentConfig, ExplicitDegrees, MeetingSource};
use super::summary::{summarize, Summary};
use crate::degrees::{sample_pareto_bidegrees_with, sample_pareto_degrees_with, DegreeSequence, ParetoSpec};
use crate::error::{invalid, Result};
use crate::graph::{build_cm_with, build_dcm_with, strongly_connected_components};
use crate::rng::{self, LAYER_DEGREES, LAYER_GRAPH, LAYER_KINGMAN, LAYER_VOTER, LAYER_WALK};
use crate::theory::{entropy_h, theory_params, theta_leading_order};
use crate::voter::{fit_chi, fit_effective_chi, run_voter_with, uniform_grid, wf_points, SimTrace};
use crate::walk::{kingman_sample, meeting_time_mc, stationary, KingmanSpec, KingmanStart, StationaryDistribution};

/// One graph realization `(n, degree_seq_id, graph_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskKey {
    pub n: usize,
    pub degree_seq_id: usize,
    pub graph_id: usize,
}

/// Per-graph record (`graphs.csv`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub n: usize,
    pub degree_seq_id: usize,
    pub graph_id: usize,
    pub seed_path: String,
    pub n_component: usize,
    pub directed: bool,
    pub degree_fingerprint: String,
    pub d_max_in: u64,
    pub d_max_out: u64,
    pub edges: usize,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub chi: Option<f64>,
    pub theta_leading: Option<f64>,
    pub entropy: f64,
    pub predicted_mean: Option<f64>,
    pub predicted_meeting: Option<f64>,
    pub pi_max: Option<f64>,
    pub pi_delta: Option<f64>,
    pub pi_residual: Option<f64>,
    pub m_pi: Option<f64>,
    pub m_pi_stderr: Option<f64>,
    pub chi_hat: Option<f64>,
    pub chi_hat_effective: Option<f64>,
    pub mean_consensus: Option<f64>,
}

/// Per-run record (`rows.csv`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub degree_seq_id: usize,
    pub graph_id: usize,
    pub run_id: usize,
    pub seed_path: String,
    pub n_component: usize,
    pub consensus_time: f64,
    pub final_opinion: u8,
    pub events: u64,
    pub predicted_mean: Option<f64>,
    pub rescaled_time: Option<f64>,
}

/// One `(M, S)` observation (`observations.csv`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub n: usize,
    pub degree_seq_id: usize,
    pub graph_id: usize,
    pub run_id: usize,
    pub t: f64,
    pub density: f64,
    pub weighted_density: f64,
    pub weighted_discordance: f64,
}

/// Everything produced by one graph task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub key: TaskKey,
    pub graph: GraphRecord,
    pub runs: Vec<RunRecord>,
    pub observations: Vec<ObservationRecord>,
    /// Degree sequence of the simulated (largest) component.
    pub component_degrees: DegreeSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub outcomes: Vec<TaskOutcome>,
    pub kingman: Vec<f64>,
    pub summary: Summary,
    pub warnings: Vec<String>,
}

impl ExperimentResult {
    pub fn graphs(&self) -> impl Iterator<Item = &GraphRecord> {
        self.outcomes.iter().map(|o| &o.graph)
    }

    pub fn rows(&self) -> impl Iterator<Item = &RunRecord> {
        self.outcomes.iter().flat_map(|o| &o.runs)
    }

    pub fn observations(&self) -> impl Iterator<Item = &ObservationRecord> {
        self.outcomes.iter().flat_map(|o| &o.observations)
    }
}

/// Resolved inputs shared by all tasks.
pub(crate) struct Plan {
    pub config: ExperimentConfig,
    pub directed: bool,
    pub explicit_file: Option<DegreeSequence>,
    pub tasks: Vec<TaskKey>,
    pub warnings: Vec<String>,
}

impl Plan {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut config = config.clone();
        let mut directed = config.is_directed();
        let mut explicit_file = None;
        if let Some(ExplicitDegrees::File(path)) = &config.explicit {
            let file = std::fs::File::open(path)?;
            let (seq, _) = crate::io::read_degrees(std::io::BufReader::new(file))?;
            directed = seq.is_directed();
            config.n_list = vec![seq.n()];
            explicit_file = Some(seq);
        }
        let mut n_list = config.n_list.clone();
        n_list.sort_unstable();
        if n_list.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("n_list has duplicate entries"));
        }

        let mut warnings = Vec::new();
        if let (Some(alpha), Ensemble::AlphaCm | Ensemble::AlphaDcm) = (config.alpha, config.ensemble) {
            let spec = ParetoSpec::new(alpha, config.x_min, 1, config.seed)?;
            warnings.extend(spec.connectivity_warning(directed));
        }

        let r = config.effective_replication();
        let mut tasks = Vec::new();
        for &n in &n_list {
            for degree_seq_id in 0..r.n_degree_seqs {
                for graph_id in 0..r.n_graphs_per_seq {
                    tasks.push(TaskKey { n, degree_seq_id, graph_id });
                }
            }
        }
        Ok(Plan { config, directed, explicit_file, tasks, warnings })
    }

    fn degrees(&self, n: usize, degree_seq_id: usize) -> Result<DegreeSequence> {
        let c = &self.config;
        match (c.ensemble, &c.explicit) {
            (Ensemble::AlphaCm | Ensemble::AlphaDcm, _) => {
                let spec = ParetoSpec::new(c.alpha.expect("validated"), c.x_min, n, c.seed)?;
                let mut rng = rng::stream(c.seed, &[LAYER_DEGREES, n as u64, degree_seq_id as u64]);
                if self.directed {
                    sample_pareto_bidegrees_with(&spec, &mut rng)
                } else {
                    sample_pareto_degrees_with(&spec, &mut rng)
                }
            }
            (Ensemble::ExplicitDegrees, Some(ExplicitDegrees::Regular { degree, directed })) => {
                if *directed {
                    DegreeSequence::directed(vec![*degree; n], vec![*degree; n])
                } else {
                    DegreeSequence::undirected(vec![*degree; n])
                }
            }
            (Ensemble::ExplicitDegrees, _) => Ok(self.explicit_file.clone().expect("file loaded")),
        }
    }

    pub fn run_task(&self, key: TaskKey) -> Result<TaskOutcome> {
        let c = &self.config;
        let TaskKey { n, degree_seq_id: i, graph_id: j } = key;
        let seed_path = format!("{}/n{n}/d{i}/g{j}", c.seed);
        let seq = self.degrees(n, i)?;
        let mut grng = rng::stream(c.seed, &[LAYER_GRAPH, n as u64, i as u64, j as u64]);
        let full = if self.directed { build_dcm_with(&seq, &mut grng)? } else { build_cm_with(&seq, &mut grng)? };
        let labels = strongly_connected_components(&full);
        let g = if labels.is_connected() { full } else { labels.extract_largest(&full)? };
        let nc = g.n();
        let comp = g.degree_sequence();

        let entropy = entropy_h(c.u)?;
        let mut rec = GraphRecord {
            n,
            degree_seq_id: i,
            graph_id: j,
            seed_path: seed_path.clone(),
            n_component: nc,
            directed: self.directed,
            degree_fingerprint: format!("{:016x}", seq.fingerprint()),
            d_max_in: seq.in_deg().iter().copied().max().unwrap_or(0),
            d_max_out: seq.out_deg().iter().copied().max().unwrap_or(0),
            edges: g.edge_count(),
            delta: None,
            beta: None,
            rho: None,
            gamma: None,
            theta: None,
            chi: None,
            theta_leading: None,
            entropy,
            predicted_mean: None,
            predicted_meeting: None,
            pi_max: None,
            pi_delta: None,
            pi_residual: None,
            m_pi: None,
            m_pi_stderr: None,
            chi_hat: None,
            chi_hat_effective: None,
            mean_consensus: None,
        };
        if nc >= 2 {
            rec.theta_leading = theta_leading_order(&comp).ok();
        }
        // ϑ is undefined when every out-degree is 1 (ρ = 1); those graphs carry no prediction
        if let Some(p) = (self.directed && nc >= 2).then(|| theory_params(&comp).ok()).flatten() {
            let pred = p.predict(nc as f64, c.u)?;
            rec.delta = Some(p.delta);
            rec.beta = Some(p.beta);
            rec.rho = Some(p.rho);
            rec.gamma = Some(p.gamma);
            rec.theta = Some(p.theta);
            rec.chi = Some(p.chi);
            rec.predicted_mean = Some(pred.predicted_mean);
            rec.predicted_meeting = Some(pred.predicted_meeting);
        }

        let needs_pi =
            matches!(c.experiment, Experiment::DensityVsKingman | Experiment::WfParabola | Experiment::TheoryTable);
        let pi: Option<StationaryDistribution> = if needs_pi && nc >= 2 { Some(stationary(&g)?) } else { None };
        if let Some(p) = &pi {
            rec.pi_max = Some(p.pi_max);
            rec.pi_delta = Some(p.pi_delta);
            rec.pi_residual = Some(p.residual);
        }

        if matches!(c.experiment, Experiment::DensityVsKingman | Experiment::WfParabola) && nc >= 2 {
            let (m, se) = match c.m_pi_source {
                MeetingSource::Exact(v) => (v, None),
                MeetingSource::Theory => match rec.theta {
                    Some(t) => (nc as f64 * t / 2.0, None),
                    None => return Err(invalid("m_pi_source = theory needs a directed ensemble")),
                },
                MeetingSource::MonteCarlo => {
                    let seed = rng::stream_id(&[c.seed, LAYER_WALK, n as u64, i as u64, j as u64]);
                    let est = meeting_time_mc(&g, pi.as_ref().expect("computed"), c.meeting_pairs, seed)?;
                    (est.mean, Some(est.stderr))
                }
            };
            rec.m_pi = Some(m);
            rec.m_pi_stderr = se;
        }

        let grid = if c.experiment == Experiment::WfParabola && nc >= 2 {
            let scale =
                rec.predicted_mean.or(rec.theta_leading.map(|t| t * entropy * nc as f64)).unwrap_or(nc as f64).max(1.0);
            Some(uniform_grid(c.observe_horizon * scale, c.observe_points))
        } else {
            None
        };

        let r = c.effective_replication().n_voter_runs_per_graph;
        let mut traces = Vec::with_capacity(r);
        let mut runs = Vec::with_capacity(r);
        let mut observations = Vec::new();
        if c.experiment != Experiment::TheoryTable {
            for run_id in 0..r {
                let path = [LAYER_VOTER, n as u64, i as u64, j as u64, run_id as u64];
                let mut vrng = rng::stream(c.seed, &path);
                let trace = if nc == 1 {
                    let one = vrng.random::<f64>() < c.u;
                    SimTrace { consensus_time: 0.0, final_opinion: one as u8, events: 0, observations: None }
                } else {
                    run_voter_with(&g, c.u, pi.as_ref(), &mut vrng, grid.as_deref())?
                };
                runs.push(RunRecord {
                    n,
                    degree_seq_id: i,
                    graph_id: j,
                    run_id,
                    seed_path: format!("{seed_path}/r{run_id}"),
                    n_component: nc,
                    consensus_time: trace.consensus_time,
                    final_opinion: trace.final_opinion,
                    events: trace.events,
                    predicted_mean: rec.predicted_mean,
                    rescaled_time: rec.m_pi.map(|m| trace.consensus_time / m),
                });
                if let Some(obs) = &trace.observations {
                    observations.extend(obs.iter().map(|o| ObservationRecord {
                        n,
                        degree_seq_id: i,
                        graph_id: j,
                        run_id,
                        t: o.t,
                        density: o.density,
                        weighted_density: o.weighted_density,
                        weighted_discordance: o.weighted_discordance,
                    }));
                }
                traces.push(trace);
            }
            let times: Vec<f64> = runs.iter().map(|r| r.consensus_time).collect();
            rec.mean_consensus = Some(crate::stats::mean(&times));
        }
        if grid.is_some() {
            let pts = wf_points(&traces);
            rec.chi_hat = fit_chi(&pts).ok();
            rec.chi_hat_effective = fit_effective_chi(&pts).ok();
        }
        Ok(TaskOutcome { key, graph: rec, runs, observations, component_degrees: comp })
    }

    pub fn kingman(&self) -> Result<Vec<f64>> {
        let c = &self.config;
        if c.experiment != Experiment::DensityVsKingman {
            return Ok(Vec::new());
        }
        let spec = KingmanSpec::new(KingmanStart::Density(c.u), c.kingman_kmax)?;
        Ok(kingman_sample(&spec, c.kingman_draws, rng::stream_id(&[c.seed, LAYER_KINGMAN])))
    }

    pub fn finish(&self, outcomes: BTreeMap<TaskKey, TaskOutcome>) -> Result<ExperimentResult> {
        let kingman = self.kingman()?;
        let outcomes: Vec<TaskOutcome> = outcomes.into_values().collect();
        let summary = summarize(&self.config, &outcomes, &kingman);
        Ok(ExperimentResult {
            config: self.config.clone(),
            outcomes,
            kingman,
            summary,
            warnings: self.warnings.clone(),
        })
    }
}

/// Run every task of the replication tree in memory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let plan = Plan::new(config)?;
    let outcomes = plan.tasks.par_iter().map(|&k| plan.run_task(k)).collect::<Result<Vec<_>>>()?;
    plan.finish(outcomes.into_iter().map(|o| (o.key, o)).collect())
}
