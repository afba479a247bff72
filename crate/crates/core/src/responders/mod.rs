//! Stochastic choosers: simulators with known choice probabilities and a
//! client for remote text-generation endpoints.

pub mod remote;
pub mod simulators;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::choice::BinaryProbVector;
use crate::error::{Error, Result};
use crate::experiment::{GambleSet, Outcome, TrialRecord};

pub use remote::{RemoteApi, RemoteClient, RemoteLlmConfig};
pub use simulators::{Simulator, WeightedOrder};
use simulators::BoundSimulator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResponderKind {
    RemoteLlm(RemoteLlmConfig),
    #[serde(untagged)]
    Simulated(Simulator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponderSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: ResponderKind,
}

impl ResponderSpec {
    pub fn simulated(id: impl Into<String>, sim: Simulator) -> Self {
        Self { id: id.into(), kind: ResponderKind::Simulated(sim) }
    }

    pub fn remote(id: impl Into<String>, cfg: RemoteLlmConfig) -> Self {
        Self { id: id.into(), kind: ResponderKind::RemoteLlm(cfg) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains('/') || self.id.contains(',') {
            return Err(Error::InvalidResponder {
                id: self.id.clone(),
                reason: "id must be nonempty and contain no '/' or ','".into(),
            });
        }
        match &self.kind {
            ResponderKind::Simulated(s) => s.validate(&self.id),
            ResponderKind::RemoteLlm(c) => c.validate(&self.id),
        }
    }

    pub fn is_remote(&self) -> bool {
        matches!(self.kind, ResponderKind::RemoteLlm(_))
    }

    /// Largest number of concurrent requests this responder tolerates.
    pub fn max_in_flight(&self) -> Option<usize> {
        match &self.kind {
            ResponderKind::RemoteLlm(c) => Some(c.max_in_flight),
            ResponderKind::Simulated(_) => None,
        }
    }
}

/// Closed-form choice probabilities of a simulated responder on a set.
pub fn induced_probabilities(spec: &ResponderSpec, set: &GambleSet) -> Result<BinaryProbVector> {
    match &spec.kind {
        ResponderKind::Simulated(s) => s.induced_probabilities(&spec.id, set),
        ResponderKind::RemoteLlm(_) => Err(Error::UnsupportedResponder {
            id: spec.id.clone(),
            reason: "remote responders have no closed-form choice probabilities".into(),
        }),
    }
}

/// Something that answers trials.
pub trait Responder: Send + Sync {
    fn id(&self) -> &str;

    /// Answer one trial. `stream_seed` drives simulated randomness; remote
    /// responders send the trial's own seed instead.
    fn respond(&self, trial: &TrialRecord, set: &GambleSet, stream_seed: u64) -> Outcome;
}

struct SimulatedResponder {
    id: String,
    bound: HashMap<String, BoundSimulator>,
}

impl Responder for SimulatedResponder {
    fn id(&self) -> &str {
        &self.id
    }

    fn respond(&self, trial: &TrialRecord, set: &GambleSet, stream_seed: u64) -> Outcome {
        let Some(sim) = self.bound.get(set.name()) else {
            return Outcome::TransportFailure(format!("responder not bound to set {:?}", set.name()));
        };
        sim.respond(set, trial, stream_seed)
            .unwrap_or_else(|e| Outcome::TransportFailure(e.to_string()))
    }
}

struct RemoteResponder {
    id: String,
    client: RemoteClient,
}

impl Responder for RemoteResponder {
    fn id(&self) -> &str {
        &self.id
    }

    fn respond(&self, trial: &TrialRecord, set: &GambleSet, _stream_seed: u64) -> Outcome {
        self.client.respond(trial, set)
    }
}

/// Build a responder able to answer trials drawn from `sets`.
pub fn build_responder(spec: &ResponderSpec, sets: &[GambleSet]) -> Result<Box<dyn Responder>> {
    spec.validate()?;
    Ok(match &spec.kind {
        ResponderKind::Simulated(sim) => {
            let bound = sets
                .iter()
                .map(|s| Ok((s.name().to_string(), BoundSimulator::new(sim, &spec.id, s)?)))
                .collect::<Result<_>>()?;
            Box::new(SimulatedResponder { id: spec.id.clone(), bound })
        }
        ResponderKind::RemoteLlm(cfg) => {
            Box::new(RemoteResponder { id: spec.id.clone(), client: RemoteClient::new(&spec.id, cfg.clone())? })
        }
    })
}

/// Answer a single trial with a freshly built responder.
pub fn respond(spec: &ResponderSpec, trial: &TrialRecord, set: &GambleSet, stream_seed: u64) -> Result<Outcome> {
    let r = build_responder(spec, std::slice::from_ref(set))?;
    Ok(r.respond(trial, set, stream_seed))
}
