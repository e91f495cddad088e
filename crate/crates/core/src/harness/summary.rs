//! Per-n aggregation of experiment outcomes (`summary.json`).

use serde::Serialize;

use super::compare_distributions;
use super::config::{Ensemble, Experiment, ExperimentConfig};
use super::experiment::TaskOutcome;
use crate::degrees::scaling_exponents;
use crate::stats::{correlation, linear_fit, mean, std_error, BoxSummary};
use crate::voter::{fit_chi, fit_effective_chi};

/// Relative band used for the per-graph prediction ratio.
pub const RATIO_BAND: (f64, f64) = (0.8, 1.2);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NSummary {
    pub n: usize,
    pub graphs: usize,
    pub runs: usize,
    pub mean_component_size: f64,
    pub consensus: Option<BoxSummary>,
    pub consensus_stderr: Option<f64>,
    pub mean_theta: Option<f64>,
    pub mean_theta_leading: Option<f64>,
    pub mean_chi: Option<f64>,
    pub mean_predicted: Option<f64>,
    /// Per-graph `mean(τ) / predicted_mean`.
    pub prediction_ratio: Option<BoxSummary>,
    pub fraction_in_ratio_band: Option<f64>,
    /// Pearson correlation of per-graph `d_max` (in-degree) and mean τ.
    pub dmax_correlation: Option<f64>,
    pub dmax_slope: Option<f64>,
    pub dmax_intercept: Option<f64>,
    pub mean_m_pi: Option<f64>,
    pub rescaled: Option<BoxSummary>,
    pub ks_vs_kingman: Option<f64>,
    pub mean_gap_vs_kingman: Option<f64>,
    /// χ̂ fitted on the pooled `(M, S)` cloud of all graphs at this n.
    pub chi_hat_pooled: Option<f64>,
    pub chi_hat_effective_pooled: Option<f64>,
    pub mean_chi_hat: Option<f64>,
    pub mean_chi_hat_effective: Option<f64>,
    /// Mean of `m_π · π_Δ` over graphs.
    pub mean_m_pi_pi_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub u: f64,
    pub per_n: Vec<NSummary>,
    /// Least-squares fit of `log mean τ` against `log n`.
    pub loglog_slope: Option<f64>,
    pub loglog_intercept: Option<f64>,
    /// `(a, b)` in `log^a(n) · n^b`, for α-CM ensembles.
    pub predicted_exponents: Option<(f64, f64)>,
    pub kingman_draws: usize,
    pub kingman_mean: Option<f64>,
    pub kingman_stderr: Option<f64>,
}

fn opt_mean(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub(crate) fn summarize(config: &ExperimentConfig, outcomes: &[TaskOutcome], kingman: &[f64]) -> Summary {
    let mut ns: Vec<usize> = outcomes.iter().map(|o| o.key.n).collect();
    ns.dedup();
    let mut per_n = Vec::with_capacity(ns.len());
    for &n in &ns {
        let group: Vec<&TaskOutcome> = outcomes.iter().filter(|o| o.key.n == n).collect();
        let times: Vec<f64> = group.iter().flat_map(|o| o.runs.iter().map(|r| r.consensus_time)).collect();
        let graph_means: Vec<(f64, Option<f64>, u64)> = group
            .iter()
            .filter_map(|o| o.graph.mean_consensus.map(|m| (m, o.graph.predicted_mean, o.graph.d_max_in)))
            .collect();

        let ratios: Vec<f64> =
            graph_means.iter().filter_map(|&(m, p, _)| p.filter(|&p| p > 0.0).map(|p| m / p)).collect();
        let fraction = (!ratios.is_empty()).then(|| {
            ratios.iter().filter(|&&r| r >= RATIO_BAND.0 && r <= RATIO_BAND.1).count() as f64 / ratios.len() as f64
        });

        let (mut dcorr, mut dslope, mut dint) = (None, None, None);
        if graph_means.len() >= 3 {
            let xs: Vec<f64> = graph_means.iter().map(|g| g.2 as f64).collect();
            let ys: Vec<f64> = graph_means.iter().map(|g| g.0).collect();
            dcorr = finite(correlation(&xs, &ys));
            let (a, b) = linear_fit(&xs, &ys);
            dint = finite(a);
            dslope = finite(b);
        }

        let rescaled: Vec<f64> = group.iter().flat_map(|o| o.runs.iter().filter_map(|r| r.rescaled_time)).collect();
        let (ks, gap) = match compare_distributions(&rescaled, kingman) {
            Ok((k, g)) => (Some(k), Some(g)),
            Err(_) => (None, None),
        };

        let cloud: Vec<(f64, f64)> = group
            .iter()
            .flat_map(|o| o.observations.iter().map(|x| (x.weighted_density, x.weighted_discordance)))
            .collect();

        per_n.push(NSummary {
            n,
            graphs: group.len(),
            runs: times.len(),
            mean_component_size: mean(&group.iter().map(|o| o.graph.n_component as f64).collect::<Vec<_>>()),
            consensus: BoxSummary::from_samples(&times),
            consensus_stderr: (times.len() >= 2).then(|| std_error(&times)),
            mean_theta: opt_mean(group.iter().map(|o| o.graph.theta)),
            mean_theta_leading: opt_mean(group.iter().map(|o| o.graph.theta_leading)),
            mean_chi: opt_mean(group.iter().map(|o| o.graph.chi)),
            mean_predicted: opt_mean(group.iter().map(|o| o.graph.predicted_mean)),
            prediction_ratio: BoxSummary::from_samples(&ratios),
            fraction_in_ratio_band: fraction,
            dmax_correlation: dcorr,
            dmax_slope: dslope,
            dmax_intercept: dint,
            mean_m_pi: opt_mean(group.iter().map(|o| o.graph.m_pi)),
            rescaled: BoxSummary::from_samples(&rescaled),
            ks_vs_kingman: ks,
            mean_gap_vs_kingman: gap,
            chi_hat_pooled: fit_chi(&cloud).ok(),
            chi_hat_effective_pooled: fit_effective_chi(&cloud).ok(),
            mean_chi_hat: opt_mean(group.iter().map(|o| o.graph.chi_hat)),
            mean_chi_hat_effective: opt_mean(group.iter().map(|o| o.graph.chi_hat_effective)),
            mean_m_pi_pi_delta: opt_mean(group.iter().map(|o| Some(o.graph.m_pi? * o.graph.pi_delta?))),
        });
    }

    let pts: Vec<(f64, f64)> = per_n
        .iter()
        .filter_map(|s| s.consensus.as_ref().filter(|b| b.mean > 0.0).map(|b| ((s.n as f64).ln(), b.mean.ln())))
        .collect();
    let (mut slope, mut intercept) = (None, None);
    if pts.len() >= 2 && config.experiment != Experiment::TheoryTable {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let (a, b) = linear_fit(&xs, &ys);
        intercept = finite(a);
        slope = finite(b);
    }
    let predicted_exponents = match (config.ensemble, config.alpha) {
        (Ensemble::AlphaCm, Some(a)) => scaling_exponents(a).ok(),
        _ => None,
    };
    Summary {
        experiment: config.experiment,
        u: config.u,
        per_n,
        loglog_slope: slope,
        loglog_intercept: intercept,
        predicted_exponents,
        kingman_draws: kingman.len(),
        kingman_mean: (!kingman.is_empty()).then(|| mean(kingman)),
        kingman_stderr: (kingman.len() >= 2).then(|| std_error(kingman)),
    }
}
