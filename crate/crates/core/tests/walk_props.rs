use rand::seq::SliceRandom;
use rand::Rng;
use voterlab_core::degrees::sample_pareto_bidegrees;
use voterlab_core::graph::{build_dcm, strongly_connected_components};
use voterlab_core::rng;
use voterlab_core::stats::{ks_two_sample, mean, std_error};
use voterlab_core::theory::entropy_h;
use voterlab_core::walk::{
    kingman_sample, meeting_time_mc, stationary, stationary_power, stationary_residual, KingmanSpec, KingmanStart,
    StationaryMethod, RESIDUAL_TOLERANCE,
};
use voterlab_core::{DegreeSequence, MultiDigraph, ParetoSpec};

fn largest(g: MultiDigraph) -> MultiDigraph {
    let labels = strongly_connected_components(&g);
    if labels.is_connected() {
        g
    } else {
        labels.extract_largest(&g).unwrap()
    }
}

fn complete(n: usize) -> MultiDigraph {
    let edges: Vec<(u32, u32)> =
        (0..n as u32).flat_map(|x| (0..n as u32).filter(move |&y| y != x).map(move |y| (x, y))).collect();
    MultiDigraph::from_edges(n, true, &edges).unwrap()
}

#[test]
fn stationary_residual_on_random_dcms() {
    let mut r = rng::stream(31, &[0]);
    for i in 0..60u64 {
        let alpha = [0.7, 1.5, 3.0][i as usize % 3];
        let spec = ParetoSpec::new(alpha, 2, r.random_range(5..=400), r.random()).unwrap();
        let g = largest(build_dcm(&sample_pareto_bidegrees(&spec).unwrap(), i).unwrap());
        if g.n() < 2 {
            continue;
        }
        let s = stationary(&g).unwrap();
        assert!(s.residual <= RESIDUAL_TOLERANCE);
        assert!((s.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(stationary_residual(&g, &s.pi), s.residual);
    }
}

#[test]
fn eulerian_closed_form_agrees_with_power_iteration() {
    let mut r = rng::stream(32, &[0]);
    for i in 0..40u64 {
        let n = r.random_range(3..=200);
        let d: Vec<u64> = (0..n).map(|_| r.random_range(1..=6)).collect();
        let seq = DegreeSequence::directed(d.clone(), d).unwrap();
        let g = largest(build_dcm(&seq, i).unwrap());
        assert!(g.is_eulerian());
        if g.n() < 2 {
            continue;
        }
        let closed = stationary(&g).unwrap();
        assert_eq!(closed.method, StationaryMethod::ClosedForm);
        let power = stationary_power(&g).unwrap();
        for (a, b) in closed.pi.iter().zip(&power.pi) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn meeting_closed_forms() {
    let mut cases: Vec<(MultiDigraph, f64)> = [3usize, 5, 10]
        .iter()
        .map(|&n| {
            let nf = n as f64;
            (complete(n), (nf - 1.0) / 2.0 * (1.0 - 1.0 / nf))
        })
        .collect();
    cases.push((MultiDigraph::from_edges(2, true, &[(0, 1), (1, 0)]).unwrap(), 0.25));
    for (k, (g, want)) in cases.into_iter().enumerate() {
        let pi = stationary(&g).unwrap();
        let est = meeting_time_mc(&g, &pi, 10_000, 40 + k as u64).unwrap();
        assert!((est.mean - want).abs() <= 3.0 * est.stderr, "n {}: {} vs {want} ± {}", g.n(), est.mean, est.stderr);
    }
}

#[test]
fn kingman_truncation_shift_is_small() {
    let short = kingman_sample(&KingmanSpec::new(KingmanStart::FullCoalescence, 200).unwrap(), 100_000, 1);
    let long = kingman_sample(&KingmanSpec::new(KingmanStart::FullCoalescence, 2000).unwrap(), 100_000, 2);
    let noise = 3.0 * (std_error(&short).powi(2) + std_error(&long).powi(2)).sqrt();
    let shift = mean(&long) - mean(&short);
    assert!(shift.abs() <= 2.0 / 200.0 + noise, "shift {shift}, noise {noise}");
}

#[test]
fn kingman_mean_identity() {
    for (k, u) in [0.1, 0.25, 0.5].into_iter().enumerate() {
        let xs = kingman_sample(&KingmanSpec::new(KingmanStart::Density(u), 2000).unwrap(), 100_000, 50 + k as u64);
        let want = 2.0 * entropy_h(u).unwrap();
        let (m, se) = (mean(&xs), std_error(&xs));
        assert!((m - want).abs() <= 3.0 * se, "u {u}: {m} vs {want} ± {se}");
    }
}

#[test]
fn meeting_law_is_invariant_under_relabeling() {
    let spec = ParetoSpec::new(3.0, 2, 50, 9).unwrap();
    let g = largest(build_dcm(&sample_pareto_bidegrees(&spec).unwrap(), 9).unwrap());
    let n = g.n();
    let mut perm: Vec<u32> = (0..n as u32).collect();
    perm.shuffle(&mut rng::stream(33, &[0]));
    let edges: Vec<(u32, u32)> = g
        .edge_multiplicities()
        .into_iter()
        .flat_map(|(x, y, k)| std::iter::repeat_n((perm[x as usize], perm[y as usize]), k))
        .collect();
    let h = MultiDigraph::from_edges(n, true, &edges).unwrap();
    let a = meeting_time_mc(&g, &stationary(&g).unwrap(), 40_000, 1).unwrap();
    let b = meeting_time_mc(&h, &stationary(&h).unwrap(), 40_000, 2).unwrap();
    let ks = ks_two_sample(&a.samples, &b.samples);
    assert!(ks <= 0.02, "KS {ks}");
}
