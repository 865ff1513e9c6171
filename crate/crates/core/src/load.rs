//! Per-node load bookkeeping.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadMode {
    Integral,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("node {node} has negative load {value}")]
    Negative { node: NodeId, value: Dyadic },
    #[error("node {node} has non-integral load {value} in integral mode")]
    NonIntegral { node: NodeId, value: Dyadic },
    #[error("split halves of node {node} sum to {sum}, expected {load}")]
    SplitMismatch { node: NodeId, sum: Dyadic, load: Dyadic },
    #[error("split halves given for {got} nodes, expected {expected}")]
    SplitLength { got: usize, expected: usize },
}

/// Sender and answerer halves of one node in the deterministic algorithm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Halves {
    pub sender: Dyadic,
    pub answerer: Dyadic,
}

impl Halves {
    pub fn even(load: &Dyadic) -> Halves {
        let h = load.half();
        Halves { sender: h.clone(), answerer: h }
    }

    pub fn total(&self) -> Dyadic {
        &self.sender + &self.answerer
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadState {
    mode: LoadMode,
    loads: Vec<Dyadic>,
    split: Option<Vec<Halves>>,
}

impl LoadState {
    pub fn new(mode: LoadMode, loads: Vec<Dyadic>) -> Result<LoadState, LoadError> {
        let state = LoadState { mode, loads, split: None };
        state.validate()?;
        Ok(state)
    }

    pub fn integral(loads: impl IntoIterator<Item = i64>) -> LoadState {
        let loads = loads.into_iter().map(Dyadic::from).collect();
        LoadState::new(LoadMode::Integral, loads).expect("non-negative integers")
    }

    pub fn continuous(loads: Vec<Dyadic>) -> Result<LoadState, LoadError> {
        LoadState::new(LoadMode::Continuous, loads)
    }

    /// State without validation; used by the metric tests to fabricate bad traces.
    pub fn new_unchecked(mode: LoadMode, loads: Vec<Dyadic>) -> LoadState {
        LoadState { mode, loads, split: None }
    }

    pub fn with_split(mut self, halves: Vec<Halves>) -> Result<LoadState, LoadError> {
        if halves.len() != self.loads.len() {
            return Err(LoadError::SplitLength { got: halves.len(), expected: self.loads.len() });
        }
        for (node, (h, w)) in halves.iter().zip(&self.loads).enumerate() {
            let sum = h.total();
            if &sum != w {
                return Err(LoadError::SplitMismatch { node, sum, load: w.clone() });
            }
        }
        self.split = Some(halves);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), LoadError> {
        for (node, w) in self.loads.iter().enumerate() {
            if w.is_negative() {
                return Err(LoadError::Negative { node, value: w.clone() });
            }
            if self.mode == LoadMode::Integral && !w.is_integer() {
                return Err(LoadError::NonIntegral { node, value: w.clone() });
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> LoadMode {
        self.mode
    }

    pub fn loads(&self) -> &[Dyadic] {
        &self.loads
    }

    pub fn load(&self, v: NodeId) -> &Dyadic {
        &self.loads[v]
    }

    pub fn split(&self) -> Option<&[Halves]> {
        self.split.as_deref()
    }

    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }

    pub fn into_loads(self) -> Vec<Dyadic> {
        self.loads
    }

    /// Integer view of the loads. Panics outside integral mode.
    pub fn integers(&self) -> Vec<BigInt> {
        self.loads
            .iter()
            .map(|w| w.to_integer().expect("integral mode load"))
            .collect()
    }
}

/// `T = Σ w(v)`, exactly.
pub fn total_load(s: &LoadState) -> Dyadic {
    Dyadic::sum(s.loads())
}
