//! Shared generators and independent oracles for the integration suites.
//! Oracle implementations deliberately take different code paths than the
//! library (naive fixpoint sweeps, recursive DFS, pairwise union-find).

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use burstnet_core::{
    FiringMode, ModeMap, ModulatorKind, Network, NetworkSpec, NeuronDecl, NeuronId, NeuronKind,
    Region, Stimulus, SynapseKind,
};

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn required_regions() -> Vec<Region> {
    vec![
        Region::Hippocampus,
        Region::Amygdala,
        Region::MidbrainNucleus(ModulatorKind::Da),
        Region::MidbrainNucleus(ModulatorKind::Ht5),
        Region::MidbrainNucleus(ModulatorKind::Na),
        Region::MidbrainNucleus(ModulatorKind::Ach),
    ]
}

/// Random network of at most 50 neurons: a sensory layer, an excitatory
/// downstream pool, a few inhibitory interneurons, random driving and relay
/// wiring (cycles allowed), plus a random stimulus.
pub fn random_network(seed: u64) -> (Network, Stimulus) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sensory = rng.gen_range(2..=12u32);
    let n_down = rng.gen_range(2..=30u32);
    let n_inhib = rng.gen_range(0..=4u32);
    let total = n_sensory + n_down + n_inhib;

    let mut regions = required_regions();
    regions.push(Region::SensoryCortex(0));
    regions.push(Region::MotorCortex);
    let mut neurons = vec![
        NeuronDecl {
            region: Region::SensoryCortex(0),
            count: n_sensory,
            kind: NeuronKind::Excitatory,
        },
        NeuronDecl {
            region: Region::MotorCortex,
            count: n_down,
            kind: NeuronKind::Excitatory,
        },
    ];
    if n_inhib > 0 {
        neurons.push(NeuronDecl {
            region: Region::MotorCortex,
            count: n_inhib,
            kind: NeuronKind::Inhibitory,
        });
    }

    let mut synapses: Vec<(u32, u32, f64, SynapseKind)> = Vec::new();
    let mut used: BTreeSet<(u32, u32, SynapseKind)> = BTreeSet::new();
    let n_edges = rng.gen_range(total..total * 3);
    for _ in 0..n_edges {
        let pre = rng.gen_range(0..total);
        let post = rng.gen_range(0..total);
        if pre == post {
            continue;
        }
        let kind = if rng.gen_bool(0.15) {
            SynapseKind::Relay
        } else {
            SynapseKind::Driving
        };
        if used.insert((pre, post, kind)) {
            synapses.push((pre, post, rng.gen_range(0.05..1.0), kind));
        }
    }

    let net = burstnet_core::build_network(&NetworkSpec {
        regions,
        neurons,
        synapses,
        seed,
    })
    .expect("generated spec is valid");

    let mut stim = Stimulus::empty();
    for s in 0..n_sensory {
        if rng.gen_bool(0.6) {
            stim.drive.insert(NeuronId(s), rng.gen_range(0.3..1.0));
        }
    }
    (net, stim)
}

/// Layered random network: sensory inputs feed two downstream layers so
/// tonic support structure actually arises; relay edges sprinkle across the
/// whole graph.
pub fn layered_network(seed: u64) -> (Network, Stimulus) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width0 = rng.gen_range(4..=12u32);
    let width1 = rng.gen_range(2..=8u32);
    let width2 = rng.gen_range(1..=6u32);
    let total = width0 + width1 + width2;

    let mut regions = required_regions();
    regions.push(Region::SensoryCortex(0));
    regions.push(Region::MotorCortex);
    let neurons = vec![
        NeuronDecl {
            region: Region::SensoryCortex(0),
            count: width0,
            kind: NeuronKind::Excitatory,
        },
        NeuronDecl {
            region: Region::MotorCortex,
            count: width1 + width2,
            kind: NeuronKind::Excitatory,
        },
    ];

    let mut synapses: Vec<(u32, u32, f64, SynapseKind)> = Vec::new();
    let mut used: BTreeSet<(u32, u32, SynapseKind)> = BTreeSet::new();
    for post in width0..width0 + width1 {
        for _ in 0..rng.gen_range(1..=4) {
            let pre = rng.gen_range(0..width0);
            if used.insert((pre, post, SynapseKind::Driving)) {
                synapses.push((pre, post, rng.gen_range(0.2..1.0), SynapseKind::Driving));
            }
        }
    }
    for post in width0 + width1..total {
        for _ in 0..rng.gen_range(1..=3) {
            let pre = rng.gen_range(width0..width0 + width1);
            if used.insert((pre, post, SynapseKind::Driving)) {
                synapses.push((pre, post, rng.gen_range(0.2..1.0), SynapseKind::Driving));
            }
        }
    }
    for _ in 0..rng.gen_range(0..=6) {
        let pre = rng.gen_range(0..total);
        let post = rng.gen_range(0..total);
        if pre != post && used.insert((pre, post, SynapseKind::Relay)) {
            synapses.push((pre, post, rng.gen_range(0.2..1.0), SynapseKind::Relay));
        }
    }

    let net = burstnet_core::build_network(&NetworkSpec {
        regions,
        neurons,
        synapses,
        seed,
    })
    .expect("generated spec is valid");

    let mut stim = Stimulus::empty();
    for s in 0..width0 {
        if rng.gen_bool(0.7) {
            stim.drive.insert(NeuronId(s), 1.0);
        }
    }
    (net, stim)
}

/// Brute-force activation fixpoint: sweep every neuron until stable.
pub fn oracle_forward(net: &Network, stim: &Stimulus, threshold: f64) -> BTreeSet<NeuronId> {
    let mut active: BTreeSet<NeuronId> = BTreeSet::new();
    loop {
        let mut changed = false;
        for id in 0..net.n_neurons() {
            let n = NeuronId(id as u32);
            if active.contains(&n) {
                continue;
            }
            let on = if net.is_sensory(n) {
                stim.drive.get(&n).copied().unwrap_or(0.0) >= threshold
            } else {
                net.driving_in(n)
                    .filter(|s| active.contains(&s.pre))
                    .map(|s| s.weight)
                    .sum::<f64>()
                    >= threshold
            };
            if on {
                active.insert(n);
                changed = true;
            }
        }
        if !changed {
            return active;
        }
    }
}

/// Recursive tonic-ancestor walk, independent of the library's BFS.
pub fn oracle_support(net: &Network, modes: &ModeMap, root: NeuronId) -> BTreeSet<NeuronId> {
    fn visit(
        net: &Network,
        modes: &ModeMap,
        u: NeuronId,
        seen: &mut BTreeSet<NeuronId>,
        out: &mut BTreeSet<NeuronId>,
    ) {
        for syn in &net.synapses {
            if syn.kind == SynapseKind::Driving
                && syn.post == u
                && modes.mode_of(syn.pre) == FiringMode::Tonic
                && seen.insert(syn.pre)
            {
                out.insert(syn.pre);
                visit(net, modes, syn.pre, seen, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    let mut seen: BTreeSet<NeuronId> = [root].into();
    visit(net, modes, root, &mut seen, &mut out);
    out
}

/// Naive union-find: parent vector, full-path find, no ranks.
struct NaiveUf(Vec<usize>);

impl NaiveUf {
    fn find(&self, mut i: usize) -> usize {
        while self.0[i] != i {
            i = self.0[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

/// Brute-force ensemble partition: evaluate the pairwise binding predicate
/// over every bursting pair, union matching pairs, return the sorted member
/// partition.
pub fn oracle_ensembles(
    modes: &ModeMap,
    net: &Network,
    bind_threshold: f64,
) -> Vec<BTreeSet<NeuronId>> {
    let bursting: Vec<NeuronId> = modes.bursting().collect();
    let supports: Vec<BTreeSet<NeuronId>> = bursting
        .iter()
        .map(|&b| oracle_support(net, modes, b))
        .collect();
    let reach: Vec<BTreeSet<NeuronId>> = bursting
        .iter()
        .zip(&supports)
        .map(|(&b, s)| {
            let mut r = s.clone();
            r.insert(b);
            r
        })
        .collect();

    let pair_bound = |i: usize, j: usize| -> bool {
        if supports[i].intersection(&supports[j]).next().is_some() {
            return true;
        }
        net.relay_synapses().any(|syn| {
            syn.weight >= bind_threshold
                && ((reach[i].contains(&syn.pre) && reach[j].contains(&syn.post))
                    || (reach[j].contains(&syn.pre) && reach[i].contains(&syn.post)))
        })
    };

    let mut uf = NaiveUf((0..bursting.len()).collect());
    for i in 0..bursting.len() {
        for j in i + 1..bursting.len() {
            if pair_bound(i, j) {
                uf.union(i, j);
            }
        }
    }
    let mut components: std::collections::BTreeMap<usize, BTreeSet<NeuronId>> = Default::default();
    for (i, &b) in bursting.iter().enumerate() {
        components.entry(uf.find(i)).or_default().insert(b);
    }
    let mut out: Vec<BTreeSet<NeuronId>> = components.into_values().collect();
    out.sort_by_key(|m| *m.iter().next().unwrap());
    out
}
