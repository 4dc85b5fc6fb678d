//! Oracle reference for a sweep: a symbolic Markov model of the survivor
//! set, its pressure and equilibrium state pushed onto the common partition.

use qemlab::dynamics::{CellPartition, Hole, MapId, StateSpace};
use qemlab::io::digest_f64;
use qemlab::oracle::{self, EquilibriumState, MarkovModel, OracleError};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, HoleSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    /// Which symbolic model was built.
    pub model: String,
    pub depth: usize,
    pub states: usize,
    pub pressure: f64,
    pub lambda: f64,
    pub entropy: f64,
    pub integral: f64,
    pub variational_gap: f64,
    /// Digest of the equilibrium state weights.
    pub digest: String,
}

#[derive(Clone, Debug)]
pub struct Reference {
    pub summary: ReferenceSummary,
    pub model: MarkovModel,
    pub state: EquilibriumState,
}

impl Reference {
    /// The equilibrium state as `(cell, mass)` on `partition`.
    pub fn on_partition(&self, partition: &CellPartition) -> Vec<(usize, f64)> {
        self.state.to_cells(&self.model, partition)
    }
}

/// Builds the reference for families with a symbolic oracle: the doubling
/// map with an interval hole (dyadic shift) and the logistic map with a ball
/// around its attractor. Other configurations have none.
pub fn build_reference(config: &ExperimentConfig) -> Result<Option<Reference>, OracleError> {
    let map = match config.build_map() {
        Ok(m) => m,
        Err(_) => return Ok(None),
    };
    let weight = config.weight();
    let depth = config.reference.depth;
    let (name, mut model) = match (map.id(), &config.hole) {
        (MapId::Doubling, HoleSpec::Intervals { .. } | HoleSpec::Empty | HoleSpec::Default) => {
            let hole = map.hole().clone();
            if matches!(hole, Hole::Balls { .. }) {
                return Ok(None);
            }
            let forbidden = oracle::dyadic_forbidden_words(&hole, depth);
            ("doubling_dyadic", oracle::doubling_model(&forbidden, depth, 0.0))
        }
        (MapId::Logistic, HoleSpec::Attractor { radius }) => {
            let a = map.params()["a"];
            ("logistic_symbolic", oracle::logistic_repeller_model(a, depth, *radius, 0.0)?)
        }
        _ => return Ok(None),
    };
    // ψ = φ − log|T'| at each state's midpoint
    if let Some(intervals) = &model.intervals {
        let psi: Vec<f64> = intervals
            .iter()
            .map(|&(lo, hi)| {
                let x = [0.5 * (lo + hi), 0.0];
                weight.eval(&map, x) - map.jacobian_det(x).ln()
            })
            .collect();
        model.psi = psi;
    }
    debug_assert!(matches!(map.space(), StateSpace::Circle | StateSpace::Interval));
    let state = oracle::pressure(&model)?;
    let summary = ReferenceSummary {
        model: name.into(),
        depth,
        states: model.len(),
        pressure: state.pressure,
        lambda: state.lambda,
        entropy: state.entropy,
        integral: state.integral,
        variational_gap: state.variational_gap(),
        digest: digest_f64(&state.measure),
    };
    Ok(Some(Reference { summary, model, state }))
}
