//! Replicated experiments and their on-disk outputs.
//!
//! An experiment directory holds:
//!
//! - `rows.csv`: one row per voter run, keyed by `(n, degree_seq_id, graph_id, run_id)`.
//! - `graphs.csv`: one row per graph with the attached theory values.
//! - `observations.csv`: `(M, S)` observations (`wf-parabola` only).
//! - `kingman.csv`: Kingman reference draws (`density-vs-kingman` only).
//! - `summary.json`: per-n aggregates ([`Summary`]).
//! - `meta.json`: configuration, seeds, version and column schemas.
//!
//! Rows are written in key order, so a rerun with the same configuration
//! reproduces every file byte for byte. Optional values are empty CSV fields.

pub mod config;
pub mod experiment;
pub mod summary;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{Ensemble, Experiment, ExperimentConfig, ExplicitDegrees, MeetingSource, QuenchMode, Replication};
pub use experiment::{
    run_experiment, ExperimentResult, GraphRecord, ObservationRecord, RunRecord, TaskKey, TaskOutcome,
};
pub use summary::{NSummary, Summary, RATIO_BAND};

use crate::error::{invalid, Error, Result};
use crate::stats::{ks_two_sample, mean};
use experiment::Plan;

pub const ROWS_COLUMNS: &[&str] = &[
    "n",
    "degree_seq_id",
    "graph_id",
    "run_id",
    "seed_path",
    "n_component",
    "consensus_time",
    "final_opinion",
    "events",
    "predicted_mean",
    "rescaled_time",
];

pub const GRAPHS_COLUMNS: &[&str] = &[
    "n",
    "degree_seq_id",
    "graph_id",
    "seed_path",
    "n_component",
    "directed",
    "degree_fingerprint",
    "d_max_in",
    "d_max_out",
    "edges",
    "delta",
    "beta",
    "rho",
    "gamma",
    "theta",
    "chi",
    "theta_leading",
    "entropy",
    "predicted_mean",
    "predicted_meeting",
    "pi_max",
    "pi_delta",
    "pi_residual",
    "m_pi",
    "m_pi_stderr",
    "chi_hat",
    "chi_hat_effective",
    "mean_consensus",
];

pub const OBSERVATIONS_COLUMNS: &[&str] =
    &["n", "degree_seq_id", "graph_id", "run_id", "t", "density", "weighted_density", "weighted_discordance"];

pub const KINGMAN_COLUMNS: &[&str] = &["draw_id", "value"];

const CHECKPOINT: &str = "checkpoint.jsonl";

/// Two-sample KS statistic and `mean(a) - mean(b)`.
pub fn compare_distributions(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("both samples must be nonempty".into()));
    }
    Ok((ks_two_sample(a, b), mean(a) - mean(b)))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn rows_line(r: &RunRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.n,
        r.degree_seq_id,
        r.graph_id,
        r.run_id,
        r.seed_path,
        r.n_component,
        r.consensus_time,
        r.final_opinion,
        r.events,
        opt(r.predicted_mean),
        opt(r.rescaled_time)
    )
}

fn graphs_line(g: &GraphRecord) -> String {
    let head = format!(
        "{},{},{},{},{},{},{},{},{},{}",
        g.n,
        g.degree_seq_id,
        g.graph_id,
        g.seed_path,
        g.n_component,
        g.directed,
        g.degree_fingerprint,
        g.d_max_in,
        g.d_max_out,
        g.edges
    );
    let tail = [
        g.delta,
        g.beta,
        g.rho,
        g.gamma,
        g.theta,
        g.chi,
        g.theta_leading,
        Some(g.entropy),
        g.predicted_mean,
        g.predicted_meeting,
        g.pi_max,
        g.pi_delta,
        g.pi_residual,
        g.m_pi,
        g.m_pi_stderr,
        g.chi_hat,
        g.chi_hat_effective,
        g.mean_consensus,
    ]
    .map(opt)
    .join(",");
    format!("{head},{tail}")
}

fn observations_line(o: &ObservationRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        o.n, o.degree_seq_id, o.graph_id, o.run_id, o.t, o.density, o.weighted_density, o.weighted_discordance
    )
}

fn write_csv<'a, T: 'a>(
    path: &Path,
    columns: &[&str],
    rows: impl Iterator<Item = &'a T>,
    line: fn(&T) -> String,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", columns.join(","))?;
    for r in rows {
        writeln!(w, "{}", line(r))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a ExperimentConfig,
    pub config_fingerprint: String,
    pub seed: u64,
    pub tasks: usize,
    pub complete: bool,
    pub warnings: &'a [String],
    pub files: BTreeMap<&'static str, &'static [&'static str]>,
}

/// Write all output files for `result` into `dir`; returns the paths written.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    write_outputs_inner(result, dir, true)
}

fn write_outputs_inner(result: &ExperimentResult, dir: &Path, complete: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files: BTreeMap<&'static str, &'static [&'static str]> = BTreeMap::new();
    let mut written = Vec::new();

    let p = dir.join("rows.csv");
    write_csv(&p, ROWS_COLUMNS, result.rows(), rows_line)?;
    files.insert("rows.csv", ROWS_COLUMNS);
    written.push(p);

    let p = dir.join("graphs.csv");
    write_csv(&p, GRAPHS_COLUMNS, result.graphs(), graphs_line)?;
    files.insert("graphs.csv", GRAPHS_COLUMNS);
    written.push(p);

    if result.config.experiment == Experiment::WfParabola {
        let p = dir.join("observations.csv");
        write_csv(&p, OBSERVATIONS_COLUMNS, result.observations(), observations_line)?;
        files.insert("observations.csv", OBSERVATIONS_COLUMNS);
        written.push(p);
    }
    if !result.kingman.is_empty() {
        let p = dir.join("kingman.csv");
        let mut w = BufWriter::new(File::create(&p)?);
        writeln!(w, "{}", KINGMAN_COLUMNS.join(","))?;
        for (i, v) in result.kingman.iter().enumerate() {
            writeln!(w, "{i},{v}")?;
        }
        w.flush()?;
        files.insert("kingman.csv", KINGMAN_COLUMNS);
        written.push(p);
    }

    let p = dir.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(&result.summary)? + "\n")?;
    written.push(p);

    let meta = Meta {
        tool: "voterlab",
        version: env!("CARGO_PKG_VERSION"),
        config: &result.config,
        config_fingerprint: format!("{:016x}", result.config.fingerprint()),
        seed: result.config.seed,
        tasks: result.outcomes.len(),
        complete,
        warnings: &result.warnings,
        files,
    };
    let p = dir.join("meta.json");
    fs::write(&p, serde_json::to_string_pretty(&meta)? + "\n")?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    config_fingerprint: String,
}

fn resume_token(fingerprint: u64, completed: usize) -> String {
    format!("{fingerprint:016x}-{completed}")
}

fn load_checkpoint(path: &Path, fingerprint: u64) -> Result<BTreeMap<TaskKey, TaskOutcome>> {
    let mut done = BTreeMap::new();
    let Ok(file) = File::open(path) else {
        return Ok(done);
    };
    let mut lines = BufReader::new(file).lines();
    let Some(first) = lines.next() else {
        return Ok(done);
    };
    let header: CheckpointHeader = serde_json::from_str(&first?)?;
    if header.config_fingerprint != format!("{fingerprint:016x}") {
        return Err(invalid(format!(
            "checkpoint in {} belongs to a different configuration ({})",
            path.display(),
            header.config_fingerprint
        )));
    }
    for line in lines {
        let line = line?;
        // a torn final line from an interrupted write is dropped
        if let Ok(o) = serde_json::from_str::<TaskOutcome>(&line) {
            done.insert(o.key, o);
        }
    }
    Ok(done)
}

/// Run an experiment writing outputs into `dir`.
///
/// Each finished graph task is appended to `dir/checkpoint.jsonl`. On failure
/// the completed tasks are flushed as partial outputs (`meta.json` has
/// `"complete": false`) and [`Error::Interrupted`] carries a resume token;
/// calling again with `resume = true` reuses the checkpointed tasks. The
/// checkpoint is removed after a successful run.
pub fn run_experiment_to_dir(config: &ExperimentConfig, dir: &Path, resume: bool) -> Result<ExperimentResult> {
    let plan = Plan::new(config)?;
    fs::create_dir_all(dir)?;
    let fp = plan.config.fingerprint();
    let cp_path = dir.join(CHECKPOINT);
    let mut done = if resume { load_checkpoint(&cp_path, fp)? } else { BTreeMap::new() };

    let mut cp = BufWriter::new(File::create(&cp_path)?);
    writeln!(cp, "{}", serde_json::to_string(&CheckpointHeader { config_fingerprint: format!("{fp:016x}") })?)?;
    for o in done.values() {
        writeln!(cp, "{}", serde_json::to_string(o)?)?;
    }
    cp.flush()?;
    let cp = Mutex::new(cp);

    let pending: Vec<TaskKey> = plan.tasks.iter().copied().filter(|k| !done.contains_key(k)).collect();
    let results: Vec<Result<TaskOutcome>> = pending
        .par_iter()
        .map(|&k| {
            let o = plan.run_task(k)?;
            let line = serde_json::to_string(&o)?;
            let mut w = cp.lock().expect("checkpoint lock");
            writeln!(w, "{line}")?;
            w.flush()?;
            Ok(o)
        })
        .collect();
    drop(cp);

    let mut first_err = None;
    for r in results {
        match r {
            Ok(o) => {
                done.insert(o.key, o);
            }
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(_) => {}
        }
    }
    if let Some(source) = first_err {
        let completed = done.len();
        let partial = plan.finish(done)?;
        write_outputs_inner(&partial, dir, false)?;
        return Err(Error::Interrupted { completed, token: resume_token(fp, completed), source: Box::new(source) });
    }
    let result = plan.finish(done)?;
    write_outputs(&result, dir)?;
    fs::remove_file(&cp_path)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compare_distributions_cases() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(compare_distributions(&a, &a).unwrap(), (0.0, 0.0));
        let (ks, gap) = compare_distributions(&[0.0; 5], &[1.0; 3]).unwrap();
        assert_eq!(ks, 1.0);
        assert_eq!(gap, -1.0);
        assert!(compare_distributions(&[], &a).is_err());
        assert!(compare_distributions(&a, &[]).is_err());
    }

    #[test]
    fn csv_lines_match_schemas() {
        let r = RunRecord {
            n: 3,
            degree_seq_id: 0,
            graph_id: 1,
            run_id: 2,
            seed_path: "7/n3/d0/g1/r2".into(),
            n_component: 3,
            consensus_time: 1.5,
            final_opinion: 1,
            events: 4,
            predicted_mean: None,
            rescaled_time: Some(0.25),
        };
        let line = rows_line(&r);
        assert_eq!(line, "3,0,1,2,7/n3/d0/g1/r2,3,1.5,1,4,,0.25");
        assert_eq!(line.split(',').count(), ROWS_COLUMNS.len());
    }
}
