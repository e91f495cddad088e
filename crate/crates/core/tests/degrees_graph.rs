use rand::Rng;
use voterlab_core::degrees::{
    frechet_cdf, pareto_degree, sample_pareto_bidegrees, sample_pareto_bidegrees_with, sample_pareto_degrees,
};
use voterlab_core::graph::{build_cm, build_dcm, strongly_connected_components};
use voterlab_core::rng;
use voterlab_core::stats::ks_one_sample;
use voterlab_core::{DegreeSequence, MultiDigraph, ParetoSpec};

const ALPHAS: [f64; 5] = [0.7, 1.0, 1.5, 2.0, 3.0];

fn random_spec(r: &mut rng::Rng, max_n: usize) -> ParetoSpec {
    let alpha = ALPHAS[r.random_range(0..ALPHAS.len())];
    ParetoSpec::new(alpha, r.random_range(1..=4), r.random_range(1..=max_n), r.random()).unwrap()
}

#[test]
fn sampled_sequences_are_graphical() {
    let mut r = rng::stream(11, &[0]);
    for _ in 0..1000 {
        let spec = random_spec(&mut r, 300);
        let und = sample_pareto_degrees(&spec).unwrap();
        assert_eq!(und.total_stubs() % 2, 0);
        assert!(und.deg().iter().all(|&d| d >= spec.x_min));
        let dir = sample_pareto_bidegrees(&spec).unwrap();
        let ins: u64 = dir.in_deg().iter().sum();
        let outs: u64 = dir.out_deg().iter().sum();
        assert_eq!(ins, outs);
        let mut a = dir.in_deg().to_vec();
        let mut b = dir.out_deg().to_vec();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b, "out-degrees permute the in-degrees");
    }
}

#[test]
fn moment_identity_is_exact() {
    let mut r = rng::stream(12, &[0]);
    for _ in 0..200 {
        let spec = random_spec(&mut r, 500);
        let seq = sample_pareto_bidegrees(&spec).unwrap();
        let m = seq.moments(Some((spec.alpha, spec.x_min)));
        let stubs: u64 = seq.in_deg().iter().sum();
        assert_eq!(m.total_stubs, stubs);
        assert_eq!((m.in_deg.m1_hat * spec.n as f64).round() as u64, stubs);
    }
}

#[test]
fn sampler_matches_pareto_law() {
    let (alpha, x_min) = (2.0, 2u64);
    let n = 100_000;
    let spec = ParetoSpec::new(alpha, x_min, n, 5).unwrap();
    // bidegree in-degrees are raw floors with no parity repair
    let seq = sample_pareto_bidegrees(&spec).unwrap();
    // floor(X) >= k  <=>  X >= k, so P(D <= k) = 1 - (x_min/(k+1))^alpha on integers
    let mut counts = std::collections::BTreeMap::new();
    for &d in seq.in_deg() {
        *counts.entry(d).or_insert(0usize) += 1;
    }
    let mut cum = 0usize;
    let mut ks: f64 = 0.0;
    for (&k, &c) in &counts {
        let before = cum as f64 / n as f64;
        let lower_law = if k == x_min { 0.0 } else { 1.0 - (x_min as f64 / k as f64).powf(alpha) };
        cum += c;
        let law = 1.0 - (x_min as f64 / (k + 1) as f64).powf(alpha);
        ks = ks.max((cum as f64 / n as f64 - law).abs()).max((before - lower_law).abs());
    }
    assert!(ks < 0.01, "discrete KS {ks}");

    // continuous pre-floor values against the Pareto CDF
    let mut r = rng::stream(6, &[0]);
    let mut cont = Vec::with_capacity(n);
    for _ in 0..n {
        let u = 1.0 - r.random::<f64>();
        let x = x_min as f64 * u.powf(-1.0 / alpha);
        let d = pareto_degree(u, alpha, x_min);
        assert!(d >= x_min && d as f64 <= x);
        cont.push(x);
    }
    let ks = ks_one_sample(&cont, |x| 1.0 - (x_min as f64 / x).powf(alpha));
    assert!(ks < 0.01, "continuous KS {ks}");
}

#[test]
fn max_degree_rescales_to_frechet() {
    let (alpha, x_min, n) = (1.5, 2u64, 10_000usize);
    let spec = ParetoSpec::new(alpha, x_min, n, 0).unwrap();
    let ys: Vec<f64> = (0..500u64)
        .map(|i| {
            let seq = sample_pareto_bidegrees_with(&spec, &mut rng::stream(77, &[i])).unwrap();
            seq.moments(Some((alpha, x_min))).in_deg.frechet_rescaled.unwrap()
        })
        .collect();
    let ks = ks_one_sample(&ys, |y| frechet_cdf(y, alpha, x_min as f64));
    assert!(ks < 0.08, "Fréchet KS {ks}");
}

#[test]
fn builds_conserve_degrees() {
    let mut r = rng::stream(13, &[0]);
    for i in 0..1000u64 {
        let spec = random_spec(&mut r, 120);
        if i % 2 == 0 {
            let seq = sample_pareto_degrees(&spec).unwrap();
            let g = build_cm(&seq, i).unwrap();
            assert_eq!(g.degree_sequence(), seq);
            assert_eq!(2 * g.edge_count() as u64, seq.total_stubs());
        } else {
            let seq = sample_pareto_bidegrees(&spec).unwrap();
            let g = build_dcm(&seq, i).unwrap();
            assert_eq!(g.degree_sequence(), seq);
            for x in 0..g.n() {
                assert_eq!(g.out_degree(x) as u64, seq.out_deg()[x]);
                assert_eq!(g.in_degree(x) as u64, seq.in_deg()[x]);
            }
        }
    }
}

#[test]
fn dcm_matching_is_uniform() {
    let seq = DegreeSequence::directed(vec![1, 1], vec![1, 1]).unwrap();
    let builds = 30_000u64;
    let loops = (0..builds).filter(|&s| build_dcm(&seq, s).unwrap().loop_stubs(0) == 1).count();
    let freq = loops as f64 / builds as f64;
    assert!((freq - 0.5).abs() <= 0.01, "two-self-loop frequency {freq}");
}

fn reachability(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<bool>> {
    let mut reach = vec![vec![false; n]; n];
    for (x, row) in reach.iter_mut().enumerate() {
        row[x] = true;
    }
    for &(x, y) in edges {
        reach[x as usize][y as usize] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach
}

#[test]
fn scc_matches_transitive_closure() {
    let mut r = rng::stream(14, &[0]);
    for _ in 0..1000 {
        let n = r.random_range(1..=6usize);
        let m = r.random_range(0..=10usize);
        let edges: Vec<(u32, u32)> =
            (0..m).map(|_| (r.random_range(0..n as u32), r.random_range(0..n as u32))).collect();
        let g = MultiDigraph::from_edges(n, true, &edges).unwrap();
        let labels = strongly_connected_components(&g);
        let reach = reachability(n, &edges);
        for x in 0..n {
            for y in 0..n {
                assert_eq!(labels.labels[x] == labels.labels[y], reach[x][y] && reach[y][x], "{edges:?}");
            }
        }
        let largest = labels.largest_size();
        assert_eq!(largest, *labels.sizes.iter().max().unwrap());
        assert_eq!(labels.sizes.iter().sum::<usize>(), n);
    }
}
