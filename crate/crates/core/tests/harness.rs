use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use voterlab_core::harness::{
    compare_distributions, run_experiment, run_experiment_to_dir, ExperimentConfig, TaskOutcome,
};
use voterlab_core::stats::{mean, std_error};
use voterlab_core::theory::{entropy_h, theory_params};
use voterlab_core::walk::{kingman_sample, KingmanSpec, KingmanStart};
use voterlab_core::Error;

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

const SMALL_DCM: &str = "
    experiment = consensus-scaling
    ensemble = alpha-dcm
    alpha = 2.5
    x_min = 2
    n_list = 60, 30
    n_degree_seqs = 2
    n_graphs_per_seq = 2
    n_voter_runs_per_graph = 3
    seed = 99
";

#[test]
fn replay_reproduces_every_byte() {
    let c = cfg(SMALL_DCM);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment_to_dir(&c, a.path(), false).unwrap();
    run_experiment_to_dir(&c, b.path(), false).unwrap();
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["graphs.csv", "meta.json", "rows.csv", "summary.json"]);
    assert_eq!(fa, fb);

    // rows are in canonical key order with a full seed path each
    let rows = String::from_utf8(fa[2].1.clone()).unwrap();
    let keys: Vec<(usize, usize, usize, usize)> = rows
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[4], format!("99/n{}/d{}/g{}/r{}", f[0], f[1], f[2], f[3]));
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(keys.len(), 2 * 2 * 2 * 3);
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn in_memory_and_directory_runs_agree() {
    let c = cfg(SMALL_DCM);
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&c).unwrap();
    let b = run_experiment_to_dir(&c, dir.path(), false).unwrap();
    assert_eq!(a, b);
    assert!(!dir.path().join("checkpoint.jsonl").exists());
}

#[test]
fn quench_degrees_shares_one_sequence() {
    let c = cfg("
        experiment = consensus-scaling
        ensemble = alpha-dcm
        alpha = 2
        n_list = 80
        n_degree_seqs = 4
        n_graphs_per_seq = 6
        n_voter_runs_per_graph = 1
        quench_mode = quench-degrees
        seed = 3
    ");
    let res = run_experiment(&c).unwrap();
    assert_eq!(res.outcomes.len(), 6);
    let prints: BTreeSet<&str> = res.graphs().map(|g| g.degree_fingerprint.as_str()).collect();
    assert_eq!(prints.len(), 1);
    let edges: BTreeSet<String> = res.graphs().map(|g| g.seed_path.clone()).collect();
    assert_eq!(edges.len(), 6);

    let annealed = run_experiment(&cfg(&SMALL_DCM.replace("n_list = 60, 30", "n_list = 60"))).unwrap();
    let prints: BTreeSet<&str> = annealed.graphs().map(|g| g.degree_fingerprint.as_str()).collect();
    assert_eq!(prints.len(), 2);
}

#[test]
fn quench_all_forces_single_graph() {
    let c = cfg(&format!("{SMALL_DCM}\nquench_mode = quench-all"));
    let res = run_experiment(&c).unwrap();
    assert_eq!(res.outcomes.len(), 2);
    assert!(res.outcomes.iter().all(|o| o.runs.len() == 3));
}

#[test]
fn predictions_match_stored_component_degrees() {
    let res = run_experiment(&cfg(SMALL_DCM)).unwrap();
    let h = entropy_h(0.5).unwrap();
    for o in &res.outcomes {
        let p = theory_params(&o.component_degrees).unwrap();
        let want = h * p.theta * o.component_degrees.n() as f64;
        assert_eq!(o.graph.n_component, o.component_degrees.n());
        for row in &o.runs {
            let got = row.predicted_mean.unwrap();
            assert!((got - want).abs() <= 1e-12 * want);
        }
    }
}

#[test]
fn theory_table_for_regular_sequences() {
    let res = run_experiment(&cfg("
        experiment = theory-table
        ensemble = explicit-degrees
        regular_degree = 3
        n_list = 50, 400
        n_graphs_per_seq = 3
    "))
    .unwrap();
    assert_eq!(res.outcomes.len(), 6);
    for g in res.graphs() {
        assert!((g.theta.unwrap() - 1.224745).abs() < 1e-6);
        assert!((g.chi.unwrap() - 0.816497).abs() < 1e-6);
        assert!(g.pi_residual.unwrap() <= 1e-10);
    }
    assert_eq!(res.rows().count(), 0);
}

#[test]
fn monochromatic_start_gives_zero_times() {
    let res = run_experiment(&cfg("
        experiment = consensus-scaling
        ensemble = alpha-dcm
        alpha = 3
        n_list = 100
        n_degree_seqs = 1
        n_graphs_per_seq = 1
        n_voter_runs_per_graph = 1
        u = 0
    "))
    .unwrap();
    assert!(res.rows().all(|r| r.consensus_time == 0.0 && r.final_opinion == 0));
    assert_eq!(res.rows().count(), 1);
}

#[test]
fn two_cycle_rescaled_against_exact_meeting_time() {
    let dir = tempfile::tempdir().unwrap();
    let deg = dir.path().join("cycle.csv");
    fs::write(&deg, "vertex,in_deg,out_deg\n0,1,1\n1,1,1\n").unwrap();
    let c = cfg(&format!(
        "experiment = density-vs-kingman
         ensemble = explicit-degrees
         degrees_file = {}
         n_graphs_per_seq = 1
         n_voter_runs_per_graph = 20000
         m_pi_source = exact:0.25
         kingman_draws = 2000
         seed = 5",
        deg.display()
    ));
    let res = run_experiment(&c).unwrap();
    let xs: Vec<f64> = res.rows().map(|r| r.rescaled_time.unwrap()).collect();
    // E[τ] = P(discordant start)·1/2 = 1/4 = m_π at u = 1/2
    let (m, se) = (mean(&xs), std_error(&xs));
    assert!((m - 1.0).abs() <= 3.0 * se, "{m} ± {se}");
    assert_eq!(res.kingman.len(), 2000);
    assert!(res.summary.per_n[0].ks_vs_kingman.is_some());
}

#[test]
fn wf_parabola_emits_cloud_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("
        experiment = wf-parabola
        ensemble = explicit-degrees
        regular_degree = 3
        n_list = 200
        n_graphs_per_seq = 1
        n_voter_runs_per_graph = 10
        observe_points = 50
        meeting_pairs = 200
    ");
    let res = run_experiment_to_dir(&c, dir.path(), false).unwrap();
    assert_eq!(res.observations().count(), 10 * 50);
    let g = res.graphs().next().unwrap();
    assert!(g.chi_hat.is_some() && g.m_pi.is_some());
    assert_eq!(g.chi_hat_effective.unwrap() * 2.0, g.chi_hat.unwrap());
    let obs = fs::read_to_string(dir.path().join("observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 1 + 500);
}

#[test]
fn interrupted_run_flushes_partial_results_and_resumes() {
    // odd n with odd regular degree is not graphical, so the n = 5 tasks fail
    let bad = cfg("
        experiment = consensus-scaling
        ensemble = explicit-degrees
        regular_degree = 3
        directed = false
        n_list = 4, 5
        n_graphs_per_seq = 2
        n_voter_runs_per_graph = 2
    ");
    let dir = tempfile::tempdir().unwrap();
    match run_experiment_to_dir(&bad, dir.path(), false) {
        Err(Error::Interrupted { completed, token, source }) => {
            assert_eq!(completed, 2);
            assert!(token.ends_with("-2"));
            assert!(matches!(*source, Error::NotGraphical(_)));
        }
        other => panic!("expected an interruption, got {other:?}"),
    }
    let rows = fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2);
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["complete"], false);
    assert!(dir.path().join("checkpoint.jsonl").exists());

    // resuming from a half-filled checkpoint reproduces a fresh run exactly
    let good = cfg(SMALL_DCM);
    let fresh = tempfile::tempdir().unwrap();
    let full = run_experiment_to_dir(&good, fresh.path(), false).unwrap();
    let resumed = tempfile::tempdir().unwrap();
    let mut cp = fs::File::create(resumed.path().join("checkpoint.jsonl")).unwrap();
    writeln!(cp, "{{\"config_fingerprint\":\"{:016x}\"}}", good.fingerprint()).unwrap();
    for o in full.outcomes.iter().step_by(2) {
        writeln!(cp, "{}", serde_json::to_string(o).unwrap()).unwrap();
    }
    drop(cp);
    let again = run_experiment_to_dir(&good, resumed.path(), true).unwrap();
    assert_eq!(again, full);
    assert_eq!(read_all(resumed.path()), read_all(fresh.path()));

    // a checkpoint from another configuration is refused
    let other = tempfile::tempdir().unwrap();
    fs::write(other.path().join("checkpoint.jsonl"), "{\"config_fingerprint\":\"0000000000000000\"}\n").unwrap();
    assert!(run_experiment_to_dir(&good, other.path(), true).is_err());
}

#[test]
fn checkpoint_lines_round_trip() {
    let res = run_experiment(&cfg(SMALL_DCM)).unwrap();
    for o in &res.outcomes {
        let back: TaskOutcome = serde_json::from_str(&serde_json::to_string(o).unwrap()).unwrap();
        assert_eq!(&back, o);
    }
}

#[test]
fn independent_kingman_samples_are_close() {
    let spec = KingmanSpec::new(KingmanStart::Density(0.5), 2000).unwrap();
    let a = kingman_sample(&spec, 10_000, 1);
    let b = kingman_sample(&spec, 10_000, 2);
    let (ks, gap) = compare_distributions(&a, &b).unwrap();
    assert!(ks < 1.63 * (2.0f64 / 1e4).sqrt(), "KS {ks}");
    assert!(gap.abs() < 0.05);
    assert_eq!(compare_distributions(&a, &a).unwrap(), (0.0, 0.0));
    assert_eq!(compare_distributions(&[0.0], &[1.0]).unwrap().0, 1.0);
    assert!(compare_distributions(&[], &b).is_err());
}
