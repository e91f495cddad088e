//! Fixture graphs shared by the benchmarks.

use voterlab_core::degrees::sample_pareto_bidegrees;
use voterlab_core::graph::{build_dcm, strongly_connected_components};
use voterlab_core::{DegreeSequence, MultiDigraph, ParetoSpec};

pub fn regular_degrees(n: usize, d: u64) -> DegreeSequence {
    DegreeSequence::directed(vec![d; n], vec![d; n]).expect("regular sequence")
}

pub fn pareto_degrees(alpha: f64, n: usize, seed: u64) -> DegreeSequence {
    sample_pareto_bidegrees(&ParetoSpec::new(alpha, 2, n, seed).expect("valid spec")).expect("sampled")
}

/// Largest strongly connected component of a DCM built from `degrees`.
pub fn dcm_component(degrees: &DegreeSequence, seed: u64) -> MultiDigraph {
    let g = build_dcm(degrees, seed).expect("built");
    let labels = strongly_connected_components(&g);
    if labels.is_connected() {
        g
    } else {
        labels.extract_largest(&g).expect("component")
    }
}
