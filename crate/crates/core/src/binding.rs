//! Synchrony ensembles: partition the window's bursting neurons into bound
//! groups, hand each a gamma phase slot, and pick the dominant one for
//! attention.
//!
//! Two bursting neurons bind when their active tonic support sets intersect,
//! or when a relay synapse of sufficient weight links their support or
//! member sets. Neurons reactivated together by episodic recall arrive
//! already synchronized and bind as one group.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dynamics::{FiringMode, ModeMap};
use crate::netcore::{Network, NeuronId};
use crate::neuromod::{state_key, AmygdalaStore, ModulatorState};

/// A synchrony group of bursting neurons plus its tonic support set. The id
/// is the lowest member id; phase slots are distinct per window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ensemble {
    pub id: u32,
    pub members: BTreeSet<NeuronId>,
    pub support: BTreeSet<NeuronId>,
    pub rate_hz: f64,
    pub phase_slot: u16,
}

/// Attention outcome: the dominant ensemble id (if any) and the per-ensemble
/// scores that produced it.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AttentionState {
    pub dominant: Option<u32>,
    pub scores: BTreeMap<u32, f64>,
}

/// Score weights for dominance: alpha on member count, beta on firing rate,
/// gamma on neuromodulatory gain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AttentionWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for AttentionWeights {
    fn default() -> Self {
        // member counts are small integers, rates sit in 40-60 Hz; beta
        // rescales rate to a comparable magnitude
        AttentionWeights {
            alpha: 1.0,
            beta: 0.05,
            gamma: 1.0,
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Tonic ancestors of `root` along active driving edges: walk upstream
/// through tonic-active neurons only.
pub fn support_of(net: &Network, modes: &ModeMap, root: NeuronId) -> BTreeSet<NeuronId> {
    let mut support = BTreeSet::new();
    let mut stack = vec![root];
    let mut seen: BTreeSet<NeuronId> = [root].into();
    while let Some(u) = stack.pop() {
        for syn in net.driving_in(u) {
            let p = syn.pre;
            if !seen.contains(&p) && modes.mode_of(p) == FiringMode::Tonic {
                seen.insert(p);
                support.insert(p);
                stack.push(p);
            }
        }
    }
    support
}

/// Partition the bursting set into ensembles. Ensembles are the connected
/// components of the binding graph; each gets the lowest member id as its
/// id, a distinct phase slot in component-id order, and a firing rate mapped
/// linearly from normalized support size into the 40-60 Hz band.
pub fn form_ensembles(modes: &ModeMap, net: &Network, bind_threshold: f64) -> Vec<Ensemble> {
    form_ensembles_with_forced(modes, net, bind_threshold, &BTreeSet::new())
}

/// Ensemble formation that also binds co-recalled neurons: a forced set is
/// one reactivated pattern, so its bursting members share a component.
pub fn form_ensembles_with_forced(
    modes: &ModeMap,
    net: &Network,
    bind_threshold: f64,
    forced: &BTreeSet<NeuronId>,
) -> Vec<Ensemble> {
    debug_assert!(bind_threshold > 0.0 && bind_threshold <= 1.0);
    let bursting: Vec<NeuronId> = modes.bursting().collect();
    if bursting.is_empty() {
        return Vec::new();
    }
    let index_of: BTreeMap<NeuronId, usize> = bursting
        .iter()
        .enumerate()
        .map(|(i, &n)| (n, i))
        .collect();

    let supports: Vec<BTreeSet<NeuronId>> = bursting
        .iter()
        .map(|&b| support_of(net, modes, b))
        .collect();

    let mut uf = UnionFind::new(bursting.len());

    // shared tonic support: invert support sets and union co-supported members
    let mut owner_of_support: BTreeMap<NeuronId, usize> = BTreeMap::new();
    for (i, sup) in supports.iter().enumerate() {
        for &s in sup {
            match owner_of_support.get(&s) {
                Some(&j) => uf.union(i, j),
                None => {
                    owner_of_support.insert(s, i);
                }
            }
        }
    }

    // relay links across member-or-support sets, either direction
    let mut reach_of: BTreeMap<NeuronId, Vec<usize>> = BTreeMap::new();
    for (i, (&b, sup)) in bursting.iter().zip(supports.iter()).enumerate() {
        reach_of.entry(b).or_default().push(i);
        for &s in sup {
            reach_of.entry(s).or_default().push(i);
        }
    }
    for syn in net.relay_synapses() {
        if syn.weight < bind_threshold {
            continue;
        }
        if let (Some(pre_owners), Some(post_owners)) =
            (reach_of.get(&syn.pre), reach_of.get(&syn.post))
        {
            for &i in pre_owners {
                for &j in post_owners {
                    uf.union(i, j);
                }
            }
        }
    }

    // co-recalled members arrive synchronized
    let forced_members: Vec<usize> = forced
        .iter()
        .filter_map(|n| index_of.get(n).copied())
        .collect();
    for w in forced_members.windows(2) {
        uf.union(w[0], w[1]);
    }

    let mut components: BTreeMap<usize, (BTreeSet<NeuronId>, BTreeSet<NeuronId>)> =
        BTreeMap::new();
    for (i, &b) in bursting.iter().enumerate() {
        let root = uf.find(i);
        let entry = components.entry(root).or_default();
        entry.0.insert(b);
        entry.1.extend(supports[i].iter().copied());
    }

    let tonic_total = modes.tonic_count().max(1) as f64;
    let mut ensembles: Vec<Ensemble> = components
        .into_values()
        .map(|(members, support)| {
            let id = members.iter().next().expect("non-empty component").0;
            let score_raw = support.len() as f64 / tonic_total;
            Ensemble {
                id,
                members,
                support,
                rate_hz: (40.0 + 20.0 * score_raw).clamp(40.0, 60.0),
                phase_slot: 0,
            }
        })
        .collect();
    ensembles.sort_by_key(|e| e.id);
    for (slot, e) in ensembles.iter_mut().enumerate() {
        e.phase_slot = slot as u16;
    }
    ensembles
}

/// Per-neuron phase slots for spike emission: ensemble members take their
/// ensemble's slot, tonic neurons slot 0.
pub fn phase_map(ensembles: &[Ensemble]) -> BTreeMap<NeuronId, u16> {
    let mut map = BTreeMap::new();
    for e in ensembles {
        for &m in &e.members {
            map.insert(m, e.phase_slot);
        }
    }
    map
}

/// Attention gain an ensemble receives from neuromodulation: the NA level
/// biases toward ensembles whose member pattern carries an amygdala
/// association, of either sign.
pub fn mod_gain(ensemble: &Ensemble, mods: &ModulatorState, amygdala: &AmygdalaStore) -> f64 {
    mods.na * amygdala.valence_of(state_key(&ensemble.members)).abs()
}

/// Score every ensemble and pick the winner; ties break toward the lowest
/// ensemble id.
pub fn select_dominant(
    ensembles: &[Ensemble],
    mods: &ModulatorState,
    weights: &AttentionWeights,
    amygdala: &AmygdalaStore,
) -> AttentionState {
    let mut state = AttentionState::default();
    let mut best: Option<(f64, u32)> = None;
    for e in ensembles {
        let score = weights.alpha * e.members.len() as f64
            + weights.beta * e.rate_hz
            + weights.gamma * mod_gain(e, mods, amygdala);
        state.scores.insert(e.id, score);
        best = match best {
            None => Some((score, e.id)),
            Some((bs, bid)) if score > bs || (score == bs && e.id < bid) => Some((score, e.id)),
            other => other,
        };
    }
    state.dominant = best.map(|(_, id)| id);
    state
}
