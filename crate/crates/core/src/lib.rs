//! Voter-model consensus on heterogeneous random graphs.
//!
//! The crate is organised bottom-up:
//!
//! - [`degrees`]: Pareto degree sequences, truncated moments, extreme-degree diagnostics.
//! - [`graph`]: configuration-model (undirected and directed) multigraphs and components.
//! - [`theory`]: closed-form consensus predictions derived from a bidegree sequence.
//! - [`walk`]: stationary distributions, meeting and coalescence Monte Carlo, Kingman reference draws.
//! - [`voter`]: event-driven voter dynamics, Wright–Fisher observables and an exact small-graph oracle.
//! - [`harness`]: replicated experiments with reproducible seed paths and CSV/JSON output.
//!
//! All randomness flows through [`rng::stream`], which derives an independent
//! generator from a base seed and a stream path.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod degrees;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod rng;
pub mod stats;
pub mod theory;
pub mod voter;
pub mod walk;

pub use degrees::{DegreeKind, DegreeSequence, MomentSummary, ParetoSpec};
pub use error::{Error, Result};
pub use graph::{ComponentLabeling, MultiDigraph};
pub use theory::{ConsensusPrediction, TheoryParams};
pub use voter::{Observation, OpinionState, SimTrace};
pub use walk::{KingmanSpec, MeanFieldDiagnostics, MeetingEstimate, StationaryDistribution};
