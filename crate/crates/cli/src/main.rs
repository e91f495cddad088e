use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use voterlab_core::degrees::{sample_pareto_bidegrees, sample_pareto_degrees};
use voterlab_core::graph::{build_cm, build_dcm, strongly_connected_components};
use voterlab_core::harness::{run_experiment_to_dir, ExperimentConfig};
use voterlab_core::rng::{self, LAYER_VOTER};
use voterlab_core::theory::{entropy_h, theory_params, theta_leading_order};
use voterlab_core::voter::{run_voter_with, uniform_grid};
use voterlab_core::walk::{
    full_coalescence_mc, kingman_sample, meeting_time_mc, mixing_diagnostics, stationary, KingmanSpec, KingmanStart,
};
use voterlab_core::{io as vio, DegreeSequence, MultiDigraph, ParetoSpec};

#[derive(Parser)]
#[command(name = "voterlab", version, about = "Voter-model consensus on configuration-model graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Pareto degree sequence.
    Degrees(DegreesArgs),
    /// Build a configuration-model graph from a degree file.
    Graph(GraphArgs),
    /// Closed-form consensus predictions for a directed degree file.
    Theory(TheoryArgs),
    /// Meeting, coalescence and Kingman samples; mixing diagnostics.
    Walk(WalkArgs),
    /// Voter-model consensus runs.
    Vote(VoteArgs),
    /// Run a replicated experiment from a key = value config.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct DegreesArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long = "xmin")]
    x_min: u64,
    #[arg(long)]
    n: usize,
    /// Sample a bidegree sequence (out-degrees are a permutation of the in-degrees).
    #[arg(long)]
    directed: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    degrees: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    degrees: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    u: f64,
    /// Vertex count for the prediction; defaults to the sequence length.
    #[arg(long)]
    n: Option<f64>,
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Number of stationary-started meeting pairs.
    #[arg(long)]
    meeting: Option<usize>,
    /// Number of full-coalescence runs.
    #[arg(long)]
    coalesce: Option<usize>,
    /// Kingman reference draws as `u,kmax,N`.
    #[arg(long)]
    kingman: Option<String>,
    /// Dense mixing-time and mean-field condition statistics.
    #[arg(long)]
    mixing: bool,
    /// Restrict to the largest strongly connected component first.
    #[arg(long)]
    largest_component: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample CSV; the JSON summary goes to stdout and next to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VoteArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    u: f64,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Observation times: `horizon:points` or a comma list.
    #[arg(long)]
    observe: Option<String>,
    #[arg(long)]
    largest_component: bool,
    /// Per-run CSV; observations go to `<stem>.observations.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Reuse tasks from an interrupted run in the same directory.
    #[arg(long)]
    resume: bool,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Degrees(a) => degrees(a),
        Command::Graph(a) => graph(a),
        Command::Theory(a) => theory(a),
        Command::Walk(a) => walk(a),
        Command::Vote(a) => vote(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn read_degree_file(path: &Path) -> Result<DegreeSequence> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(vio::read_degrees(BufReader::new(f))?.0)
}

fn read_graph_file(path: &Path, largest: bool) -> Result<MultiDigraph> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (g, _) = vio::read_graph(BufReader::new(f))?;
    let labels = strongly_connected_components(&g);
    if largest && !labels.is_connected() {
        eprintln!("restricting to the largest component: {} of {} vertices", labels.largest_size(), g.n());
        return Ok(labels.extract_largest(&g)?);
    }
    Ok(g)
}

fn degrees(a: DegreesArgs) -> Result<()> {
    let spec = ParetoSpec::new(a.alpha, a.x_min, a.n, a.seed)?;
    if let Some(w) = spec.connectivity_warning(a.directed) {
        eprintln!("warning: {w}");
    }
    let seq = if a.directed { sample_pareto_bidegrees(&spec)? } else { sample_pareto_degrees(&spec)? };
    let mut w = output(a.out.as_deref())?;
    vio::write_degrees(&mut w, &seq, Some(&spec))?;
    w.flush()?;
    Ok(())
}

fn graph(a: GraphArgs) -> Result<()> {
    let seq = read_degree_file(&a.degrees)?;
    let g = if seq.is_directed() { build_dcm(&seq, a.seed)? } else { build_cm(&seq, a.seed)? };
    let mut w = output(a.out.as_deref())?;
    vio::write_graph(&mut w, &g, Some(a.seed))?;
    w.flush()?;
    Ok(())
}

fn theory(a: TheoryArgs) -> Result<()> {
    let seq = read_degree_file(&a.degrees)?;
    let n = a.n.unwrap_or(seq.n() as f64);
    let h = entropy_h(a.u)?;
    let out = if seq.is_directed() {
        let p = theory_params(&seq)?;
        let pred = p.predict(n, a.u)?;
        json!({
            "delta": p.delta, "beta": p.beta, "rho": p.rho, "gamma": p.gamma,
            "theta": p.theta, "chi": p.chi, "H": h,
            "predicted_mean": pred.predicted_mean, "predicted_meeting": pred.predicted_meeting,
        })
    } else {
        // only the leading-order ratio is available without a directed structure
        let t = theta_leading_order(&seq)?;
        json!({
            "delta": Value::Null, "beta": Value::Null, "rho": Value::Null, "gamma": Value::Null,
            "theta": Value::Null, "chi": Value::Null, "H": h,
            "theta_leading": t,
            "predicted_mean": Value::Null, "predicted_meeting": Value::Null,
        })
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn parse_kingman(s: &str) -> Result<(f64, usize, usize)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [u, k, n] = parts.as_slice() else {
        bail!("--kingman expects u,kmax,N, got {s:?}");
    };
    Ok((u.parse()?, k.parse()?, n.parse()?))
}

fn sample_stats(xs: &[f64]) -> Value {
    json!({
        "count": xs.len(),
        "mean": voterlab_core::stats::mean(xs),
        "stderr": voterlab_core::stats::std_error(xs),
    })
}

fn walk(a: WalkArgs) -> Result<()> {
    let g = read_graph_file(&a.graph, a.largest_component)?;
    let pi = stationary(&g)?;
    let mut rows: Vec<(&str, Vec<f64>)> = Vec::new();
    let mut summary = json!({
        "n": g.n(),
        "pi_max": pi.pi_max,
        "pi_delta": pi.pi_delta,
        "pi_residual": pi.residual,
        "stationary_method": pi.method,
    });
    let mut m_pi = None;
    if let Some(pairs) = a.meeting {
        let est = meeting_time_mc(&g, &pi, pairs, a.seed)?;
        summary["meeting"] = json!({ "count": est.n_pairs, "mean": est.mean, "stderr": est.stderr });
        m_pi = Some(est.mean);
        rows.push(("meeting", est.samples));
    }
    if let Some(runs) = a.coalesce {
        let xs = full_coalescence_mc(&g, runs, a.seed)?;
        summary["coalescence"] = sample_stats(&xs);
        rows.push(("coalescence", xs));
    }
    if let Some(k) = &a.kingman {
        let (u, k_max, draws) = parse_kingman(k)?;
        let start = if u >= 1.0 { KingmanStart::FullCoalescence } else { KingmanStart::Density(u) };
        let spec = KingmanSpec::new(start, k_max)?;
        let xs = kingman_sample(&spec, draws, a.seed);
        let mut s = sample_stats(&xs);
        s["limit_mean"] = json!(spec.limit_mean());
        s["truncation_bias"] = json!(spec.truncation_bias());
        summary["kingman"] = s;
        rows.push(("kingman", xs));
    }
    if a.mixing {
        summary["mixing"] = serde_json::to_value(mixing_diagnostics(&g, &pi, m_pi)?)?;
    }

    if let Some(path) = &a.out {
        let mut w = output(Some(path))?;
        writeln!(w, "kind,sample_id,value")?;
        for (kind, xs) in &rows {
            for (i, x) in xs.iter().enumerate() {
                writeln!(w, "{kind},{i},{x}")?;
            }
        }
        w.flush()?;
        std::fs::write(sibling(path, ".summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    if let Some((h, p)) = s.split_once(':') {
        return Ok(uniform_grid(h.trim().parse()?, p.trim().parse()?));
    }
    let mut grid = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>()?;
    grid.sort_by(f64::total_cmp);
    Ok(grid)
}

fn vote(a: VoteArgs) -> Result<()> {
    let g = read_graph_file(&a.graph, a.largest_component)?;
    let grid = a.observe.as_deref().map(parse_grid).transpose()?;
    let pi = if grid.is_some() { Some(stationary(&g)?) } else { None };
    let mut w = output(a.out.as_deref())?;
    let mut obs_w = match (&grid, &a.out) {
        (Some(_), Some(p)) => Some(output(Some(&sibling(p, ".observations.csv")))?),
        (Some(_), None) => bail!("--observe needs --out"),
        _ => None,
    };
    writeln!(w, "run_id,consensus_time,final_opinion")?;
    if let Some(o) = obs_w.as_mut() {
        writeln!(o, "run_id,t,density,weighted_density,weighted_discordance")?;
    }
    let mut times = Vec::with_capacity(a.runs);
    for r in 0..a.runs {
        let mut rng = rng::stream(a.seed, &[LAYER_VOTER, r as u64]);
        let t = run_voter_with(&g, a.u, pi.as_ref(), &mut rng, grid.as_deref())?;
        writeln!(w, "{r},{},{}", t.consensus_time, t.final_opinion)?;
        if let (Some(o), Some(obs)) = (obs_w.as_mut(), &t.observations) {
            for x in obs {
                writeln!(o, "{r},{},{},{},{}", x.t, x.density, x.weighted_density, x.weighted_discordance)?;
            }
        }
        times.push(t.consensus_time);
    }
    w.flush()?;
    if let Some(mut o) = obs_w {
        o.flush()?;
    }
    if a.out.is_some() {
        eprintln!("{}", serde_json::to_string(&sample_stats(&times))?);
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let config = ExperimentConfig::from_file(&a.config)?;
    let result = run_experiment_to_dir(&config, &a.out, a.resume)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("{} graphs, {} runs written to {}", result.outcomes.len(), result.rows().count(), a.out.display());
    Ok(())
}
