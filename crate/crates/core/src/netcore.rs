//! Network substrate: neurons, synapses, regions, and the derived graph
//! views every other module runs on.
//!
//! A network is immutable during a simulation window. Weight mutation
//! happens only between windows (consolidation) under exclusive access.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netspec::NetworkSpec;
use crate::neuromod::ModulatorKind;

/// Dense neuron index, unique within a network. Ids run 0..N-1 so they can
/// index arrays directly.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct NeuronId(pub u32);

impl NeuronId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Excitatory neurons carry feature activity; inhibitory interneurons carry
/// the apical feedback that demotes explained neurons out of bursting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeuronKind {
    Excitatory,
    Inhibitory,
}

/// Anatomical tag for a neuron population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// Sensory cortex, split into small-integer input channels.
    SensoryCortex(u8),
    MotorCortex,
    ThalamusRelay,
    Hippocampus,
    Amygdala,
    /// One nucleus per modulator kind; source of DA/5-HT/NA/ACh signals.
    MidbrainNucleus(ModulatorKind),
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::SensoryCortex(ch) => write!(f, "sensory:{ch}"),
            Region::MotorCortex => write!(f, "motor"),
            Region::ThalamusRelay => write!(f, "thalamus"),
            Region::Hippocampus => write!(f, "hippocampus"),
            Region::Amygdala => write!(f, "amygdala"),
            Region::MidbrainNucleus(k) => write!(f, "midbrain:{k}"),
        }
    }
}

/// A single neuron. `apical_sources` lists the inhibitory interneurons
/// feeding its apical gate; it is derived from `ApicalInhibitory` synapses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Neuron {
    pub id: NeuronId,
    pub kind: NeuronKind,
    pub region: Region,
    pub apical_sources: BTreeSet<NeuronId>,
}

/// Synapse role. `Driving` edges carry feed-forward activation and are the
/// only plastic kind. `ApicalInhibitory` edges gate bursting. `Relay` edges
/// model thalamic relay circuitry and participate only in ensemble binding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SynapseKind {
    Driving,
    ApicalInhibitory,
    Relay,
}

impl fmt::Display for SynapseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynapseKind::Driving => write!(f, "driving"),
            SynapseKind::ApicalInhibitory => write!(f, "apical"),
            SynapseKind::Relay => write!(f, "relay"),
        }
    }
}

/// Directed weighted synapse. Weights live in [0,1]; inhibition strength is
/// carried by `ApicalInhibitory` edge weight, never by negative weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Synapse {
    pub pre: NeuronId,
    pub post: NeuronId,
    pub weight: f64,
    pub kind: SynapseKind,
}

/// In/out synapse-index lists per neuron, derived from the synapse list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    /// Outgoing synapse indices per neuron.
    pub out: Vec<Vec<usize>>,
    /// Incoming synapse indices per neuron.
    pub inc: Vec<Vec<usize>>,
}

impl Adjacency {
    fn build(n: usize, synapses: &[Synapse]) -> Adjacency {
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        for (i, s) in synapses.iter().enumerate() {
            out[s.pre.index()].push(i);
            inc[s.post.index()].push(i);
        }
        Adjacency { out, inc }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("duplicate synapse ({pre} -> {post}, {kind})")]
    DuplicateSynapse {
        pre: NeuronId,
        post: NeuronId,
        kind: SynapseKind,
    },
    #[error("synapse endpoint {0} does not name a neuron")]
    DanglingEndpoint(NeuronId),
    #[error("synapse weight {0} outside [0,1]")]
    InvalidWeight(f64),
    #[error("region {0} is not declared by the network")]
    MissingRegion(String),
    #[error("region {0} declared more than once")]
    DuplicateRegion(String),
    #[error("self-loop on neuron {0}")]
    SelfLoop(NeuronId),
    #[error("apical synapse {pre} -> {post} must originate from an inhibitory neuron")]
    ApicalFromExcitatory { pre: NeuronId, post: NeuronId },
    #[error("apical synapse {pre} -> {post} targets an inhibitory neuron (no nested gating)")]
    ApicalOntoInhibitory { pre: NeuronId, post: NeuronId },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Directed weighted graph of excitatory neurons grouped by region, plus the
/// derived adjacency index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub neurons: Vec<Neuron>,
    pub synapses: Vec<Synapse>,
    pub regions: Vec<Region>,
    pub adjacency: Adjacency,
}

impl Network {
    pub fn n_neurons(&self) -> usize {
        self.neurons.len()
    }

    pub fn neuron(&self, id: NeuronId) -> &Neuron {
        &self.neurons[id.index()]
    }

    pub fn is_excitatory(&self, id: NeuronId) -> bool {
        self.neurons[id.index()].kind == NeuronKind::Excitatory
    }

    pub fn is_sensory(&self, id: NeuronId) -> bool {
        matches!(self.neurons[id.index()].region, Region::SensoryCortex(_))
    }

    pub fn is_motor(&self, id: NeuronId) -> bool {
        self.neurons[id.index()].region == Region::MotorCortex
    }

    pub fn excitatory_count(&self) -> usize {
        self.neurons
            .iter()
            .filter(|n| n.kind == NeuronKind::Excitatory)
            .count()
    }

    /// Incoming driving synapses of `post`.
    pub fn driving_in(&self, post: NeuronId) -> impl Iterator<Item = &Synapse> {
        self.adjacency.inc[post.index()]
            .iter()
            .map(|&i| &self.synapses[i])
            .filter(|s| s.kind == SynapseKind::Driving)
    }

    /// Outgoing driving synapses of `pre`.
    pub fn driving_out(&self, pre: NeuronId) -> impl Iterator<Item = &Synapse> {
        self.adjacency.out[pre.index()]
            .iter()
            .map(|&i| &self.synapses[i])
            .filter(|s| s.kind == SynapseKind::Driving)
    }

    pub fn relay_synapses(&self) -> impl Iterator<Item = &Synapse> {
        self.synapses.iter().filter(|s| s.kind == SynapseKind::Relay)
    }

    pub fn driving_count(&self) -> usize {
        self.synapses
            .iter()
            .filter(|s| s.kind == SynapseKind::Driving)
            .count()
    }

    /// Map (pre, post) -> synapse index over driving synapses only.
    pub fn driving_index(&self) -> BTreeMap<(NeuronId, NeuronId), usize> {
        self.synapses
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == SynapseKind::Driving)
            .map(|(i, s)| ((s.pre, s.post), i))
            .collect()
    }

    /// Rebuild the adjacency index from the synapse list. Used by the
    /// consistency check; the result must equal the stored index.
    pub fn rebuild_adjacency(&self) -> Adjacency {
        Adjacency::build(self.neurons.len(), &self.synapses)
    }
}

/// Strong driving subgraph over excitatory neurons: out-neighbor lists for
/// edges with weight at or above the explain threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrongGraph {
    out: Vec<Vec<NeuronId>>,
}

impl StrongGraph {
    pub fn out_neighbors(&self, n: NeuronId) -> &[NeuronId] {
        &self.out[n.index()]
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(|v| v.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_count() == 0
    }

    pub fn edges(&self) -> impl Iterator<Item = (NeuronId, NeuronId)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(pre, posts)| posts.iter().map(move |&p| (NeuronId(pre as u32), p)))
    }

    pub fn contains_edge(&self, pre: NeuronId, post: NeuronId) -> bool {
        self.out[pre.index()].contains(&post)
    }
}

/// Validate a parsed spec and assemble the network. Construction is
/// deterministic: neuron ids are assigned densely in declaration order.
pub fn build_network(spec: &NetworkSpec) -> Result<Network, NetworkError> {
    // Region declarations: no duplicates, and the fixed anatomical complement
    // (hippocampus, amygdala, one midbrain nucleus per modulator) must exist.
    let mut seen = BTreeSet::new();
    for r in &spec.regions {
        if !seen.insert(*r) {
            return Err(NetworkError::DuplicateRegion(r.to_string()));
        }
    }
    for required in [
        Region::Hippocampus,
        Region::Amygdala,
        Region::MidbrainNucleus(ModulatorKind::Da),
        Region::MidbrainNucleus(ModulatorKind::Ht5),
        Region::MidbrainNucleus(ModulatorKind::Na),
        Region::MidbrainNucleus(ModulatorKind::Ach),
    ] {
        if !seen.contains(&required) {
            return Err(NetworkError::MissingRegion(required.to_string()));
        }
    }

    let mut neurons = Vec::new();
    for decl in &spec.neurons {
        if !seen.contains(&decl.region) {
            return Err(NetworkError::MissingRegion(decl.region.to_string()));
        }
        for _ in 0..decl.count {
            neurons.push(Neuron {
                id: NeuronId(neurons.len() as u32),
                kind: decl.kind,
                region: decl.region,
                apical_sources: BTreeSet::new(),
            });
        }
    }
    let n = neurons.len();

    let mut synapses = Vec::with_capacity(spec.synapses.len());
    let mut keys = BTreeSet::new();
    for &(pre, post, weight, kind) in &spec.synapses {
        let (pre, post) = (NeuronId(pre), NeuronId(post));
        if pre.index() >= n {
            return Err(NetworkError::DanglingEndpoint(pre));
        }
        if post.index() >= n {
            return Err(NetworkError::DanglingEndpoint(post));
        }
        if pre == post {
            return Err(NetworkError::SelfLoop(pre));
        }
        if !weight.is_finite() || !(0.0..=1.0).contains(&weight) {
            return Err(NetworkError::InvalidWeight(weight));
        }
        if !keys.insert((pre, post, kind)) {
            return Err(NetworkError::DuplicateSynapse { pre, post, kind });
        }
        if kind == SynapseKind::ApicalInhibitory {
            if neurons[pre.index()].kind != NeuronKind::Inhibitory {
                return Err(NetworkError::ApicalFromExcitatory { pre, post });
            }
            if neurons[post.index()].kind == NeuronKind::Inhibitory {
                return Err(NetworkError::ApicalOntoInhibitory { pre, post });
            }
            neurons[post.index()].apical_sources.insert(pre);
        }
        synapses.push(Synapse {
            pre,
            post,
            weight,
            kind,
        });
    }

    let adjacency = Adjacency::build(n, &synapses);
    Ok(Network {
        neurons,
        synapses,
        regions: spec.regions.clone(),
        adjacency,
    })
}

/// Subgraph of driving synapses with weight >= `explain_threshold`, over
/// excitatory neurons only. A neuron with an active strong out-neighbor is
/// "explained" and stays out of bursting mode.
///
/// `explain_threshold` must lie in (0, 1].
pub fn strong_subgraph(net: &Network, explain_threshold: f64) -> StrongGraph {
    debug_assert!(explain_threshold > 0.0 && explain_threshold <= 1.0);
    let mut out = vec![Vec::new(); net.n_neurons()];
    for s in &net.synapses {
        if s.kind == SynapseKind::Driving
            && s.weight >= explain_threshold
            && net.is_excitatory(s.pre)
            && net.is_excitatory(s.post)
        {
            out[s.pre.index()].push(s.post);
        }
    }
    StrongGraph { out }
}
