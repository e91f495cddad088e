//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `experiment` | `consensus-scaling`, `dmax-correlation`, `density-vs-kingman`, `wf-parabola`, `theory-table` | required |
//! | `ensemble` | `alpha-cm`, `alpha-dcm`, `explicit-degrees` | required |
//! | `alpha`, `x_min` | Pareto law (alpha ensembles) | `x_min` 3 (CM) / 2 (DCM) |
//! | `n_list` | comma-separated vertex counts | required unless `degrees_file` |
//! | `degrees_file` | explicit sequence file | |
//! | `regular_degree` | explicit `d⁺ = d⁻ = d` sequence for each `n` | |
//! | `directed` | explicit regular ensembles only | `true` |
//! | `u` | Bernoulli start density | `0.5` |
//! | `n_degree_seqs`, `n_graphs_per_seq`, `n_voter_runs_per_graph` | replication | `10`, `5`, `10` |
//! | `quench_mode` | `annealed`, `quench-degrees`, `quench-all` | `annealed` |
//! | `seed` | base seed | `0` |
//! | `meeting_pairs` | pairs per graph for the MC `m_π` | `2000` |
//! | `m_pi_source` | `mc`, `theory` (`nϑ/2`) or `exact:<value>` | `mc` |
//! | `kingman_draws`, `kingman_kmax` | Kingman reference sample | `10000`, `2000` |
//! | `observe_points`, `observe_horizon` | WF grid size, horizon as a multiple of the predicted mean | `200`, `2.0` |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ConsensusScaling,
    DmaxCorrelation,
    DensityVsKingman,
    WfParabola,
    TheoryTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    AlphaCm,
    AlphaDcm,
    ExplicitDegrees,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuenchMode {
    Annealed,
    QuenchDegrees,
    QuenchAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeetingSource {
    MonteCarlo,
    Theory,
    Exact(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplicitDegrees {
    File(PathBuf),
    Regular { degree: u64, directed: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replication {
    pub n_degree_seqs: usize,
    pub n_graphs_per_seq: usize,
    pub n_voter_runs_per_graph: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub ensemble: Ensemble,
    pub alpha: Option<f64>,
    pub x_min: u64,
    pub n_list: Vec<usize>,
    pub explicit: Option<ExplicitDegrees>,
    pub u: f64,
    pub replication: Replication,
    pub quench_mode: QuenchMode,
    pub seed: u64,
    pub meeting_pairs: usize,
    pub m_pi_source: MeetingSource,
    pub kingman_draws: usize,
    pub kingman_kmax: usize,
    pub observe_points: usize,
    pub observe_horizon: f64,
}

impl ExperimentConfig {
    /// Defaults for everything but the experiment kind and ensemble.
    pub fn new(experiment: Experiment, ensemble: Ensemble) -> Self {
        ExperimentConfig {
            experiment,
            ensemble,
            alpha: None,
            x_min: if ensemble == Ensemble::AlphaCm { 3 } else { 2 },
            n_list: Vec::new(),
            explicit: None,
            u: 0.5,
            replication: Replication { n_degree_seqs: 10, n_graphs_per_seq: 5, n_voter_runs_per_graph: 10 },
            quench_mode: QuenchMode::Annealed,
            seed: 0,
            meeting_pairs: 2000,
            m_pi_source: MeetingSource::MonteCarlo,
            kingman_draws: 10_000,
            kingman_kmax: 2000,
            observe_points: 200,
            observe_horizon: 2.0,
        }
    }

    pub fn is_directed(&self) -> bool {
        match (&self.ensemble, &self.explicit) {
            (Ensemble::AlphaCm, _) => false,
            (Ensemble::AlphaDcm, _) => true,
            (Ensemble::ExplicitDegrees, Some(ExplicitDegrees::Regular { directed, .. })) => *directed,
            // file ensembles are resolved when the file is read
            (Ensemble::ExplicitDegrees, _) => true,
        }
    }

    /// Replication counts after applying the quench mode.
    pub fn effective_replication(&self) -> Replication {
        let mut r = self.replication;
        match self.quench_mode {
            QuenchMode::Annealed => {}
            QuenchMode::QuenchDegrees => r.n_degree_seqs = 1,
            QuenchMode::QuenchAll => {
                r.n_degree_seqs = 1;
                r.n_graphs_per_seq = 1;
            }
        }
        if self.ensemble == Ensemble::ExplicitDegrees {
            r.n_degree_seqs = 1;
        }
        r
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.replication;
        if r.n_degree_seqs == 0 || r.n_graphs_per_seq == 0 || r.n_voter_runs_per_graph == 0 {
            return Err(invalid("replication counts must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.u) {
            return Err(invalid(format!("u must lie in [0, 1], got {}", self.u)));
        }
        match self.ensemble {
            Ensemble::AlphaCm | Ensemble::AlphaDcm => {
                match self.alpha {
                    Some(a) if a > 0.0 => {}
                    _ => return Err(invalid("alpha ensembles need a positive alpha")),
                }
                if self.x_min < 1 {
                    return Err(invalid("x_min must be at least 1"));
                }
                if self.n_list.is_empty() {
                    return Err(invalid("n_list is empty"));
                }
            }
            Ensemble::ExplicitDegrees => match &self.explicit {
                None => return Err(invalid("explicit-degrees needs degrees_file or regular_degree")),
                Some(ExplicitDegrees::Regular { degree, .. }) => {
                    if *degree == 0 {
                        return Err(invalid("regular_degree must be positive"));
                    }
                    if self.n_list.is_empty() {
                        return Err(invalid("n_list is empty"));
                    }
                }
                Some(ExplicitDegrees::File(_)) => {}
            },
        }
        if self.n_list.contains(&0) {
            return Err(invalid("n_list entries must be positive"));
        }
        if self.meeting_pairs == 0 {
            return Err(invalid("meeting_pairs must be positive"));
        }
        if let MeetingSource::Exact(v) = self.m_pi_source {
            if !(v > 0.0) {
                return Err(invalid("exact m_pi must be positive"));
            }
        }
        if self.kingman_kmax < 2 {
            return Err(invalid("kingman_kmax must be at least 2"));
        }
        if self.experiment == Experiment::WfParabola && self.observe_points < 2 {
            return Err(invalid("observe_points must be at least 2"));
        }
        if !(self.observe_horizon > 0.0) {
            return Err(invalid("observe_horizon must be positive"));
        }
        Ok(())
    }

    /// Stable fingerprint of the configuration, used to key checkpoints.
    pub fn fingerprint(&self) -> u64 {
        let text = serde_json::to_string(self).expect("config serializes");
        text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        // relative degree files resolve against the config's directory
        if let Some(ExplicitDegrees::File(p)) = &mut cfg.explicit {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key = value, got {line:?}") })?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().trim_matches('"').to_string()));
        }
        let get = |key: &str| pairs.iter().rev().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()));
        let (_, exp) = get("experiment").ok_or_else(|| invalid("missing key: experiment"))?;
        let (_, ens) = get("ensemble").ok_or_else(|| invalid("missing key: ensemble"))?;
        let experiment = parse_enum::<Experiment>(exp, "experiment")?;
        let ensemble = parse_enum::<Ensemble>(ens, "ensemble")?;
        let mut cfg = ExperimentConfig::new(experiment, ensemble);

        for (line, key, value) in &pairs {
            let line = *line;
            let perr = |msg: String| Error::Parse { line, msg };
            macro_rules! num {
                () => {
                    value.parse().map_err(|e| perr(format!("{key}: {e}")))?
                };
            }
            match key.as_str() {
                "experiment" | "ensemble" => {}
                "alpha" => cfg.alpha = Some(num!()),
                "x_min" => cfg.x_min = num!(),
                "n_list" => {
                    cfg.n_list = value
                        .split(',')
                        .map(|s| s.trim().parse().map_err(|e| perr(format!("n_list: {e}"))))
                        .collect::<Result<_>>()?
                }
                "degrees_file" => cfg.explicit = Some(ExplicitDegrees::File(PathBuf::from(value))),
                "regular_degree" => {
                    let directed = match get("directed") {
                        Some((l, v)) => parse_bool(v).map_err(|msg| Error::Parse { line: l, msg })?,
                        None => true,
                    };
                    cfg.explicit = Some(ExplicitDegrees::Regular { degree: num!(), directed });
                }
                "directed" => {}
                "u" => cfg.u = num!(),
                "n_degree_seqs" => cfg.replication.n_degree_seqs = num!(),
                "n_graphs_per_seq" => cfg.replication.n_graphs_per_seq = num!(),
                "n_voter_runs_per_graph" => cfg.replication.n_voter_runs_per_graph = num!(),
                "quench_mode" => cfg.quench_mode = parse_enum(value, "quench_mode")?,
                "seed" => cfg.seed = num!(),
                "meeting_pairs" => cfg.meeting_pairs = num!(),
                "m_pi_source" => {
                    cfg.m_pi_source = match value.as_str() {
                        "mc" => MeetingSource::MonteCarlo,
                        "theory" => MeetingSource::Theory,
                        v => match v.strip_prefix("exact:") {
                            Some(x) => MeetingSource::Exact(x.parse().map_err(|e| perr(format!("m_pi_source: {e}")))?),
                            None => {
                                return Err(perr(format!("m_pi_source must be mc, theory or exact:<value>, got {v}")))
                            }
                        },
                    }
                }
                "kingman_draws" => cfg.kingman_draws = num!(),
                "kingman_kmax" => cfg.kingman_kmax = num!(),
                "observe_points" => cfg.observe_points = num!(),
                "observe_horizon" => cfg.observe_horizon = num!(),
                other => return Err(perr(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

fn parse_enum<T: for<'de> Deserialize<'de>>(value: &str, key: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| invalid(format!("unknown {key} {value:?}")))
}
