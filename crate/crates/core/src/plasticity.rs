//! Pair-based STDP with eligibility traces, neuromodulator gating, and the
//! offline replay procedure that consolidates episodic traces into cortical
//! weights.
//!
//! Weight changes accumulate short-term in an eligibility trace and commit
//! to long-term weights only when NA is high enough; entries left
//! unconsolidated expire. Replay runs the regular window machinery with the
//! stored pattern forced to burst, NA clamped high, and ACh clamped low.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binding::{form_ensembles_with_forced, phase_map};
use crate::dynamics::{
    assign_modes, assign_modes_with_forced, emit_spikes, forward_core, forward_pass, ClockParams,
    DynamicsError, SpikeEvent, Stimulus,
};
use crate::episodic::EpisodicStore;
use crate::netcore::{Network, NeuronId, StrongGraph, SynapseKind};
use crate::neuromod::{state_key, GateSet, ModulatorBaseline, ModulatorState, StateKey};

/// Exponential pair-kernel constants. Depression is slightly stronger than
/// potentiation for stability; weights are clamped to [0,1].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StdpParams {
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau_plus_ms: f64,
    pub tau_minus_ms: f64,
    /// Windows an unconsolidated pending entry survives.
    pub ttl_windows: u32,
}

impl Default for StdpParams {
    fn default() -> Self {
        StdpParams {
            a_plus: 0.05,
            a_minus: 0.055,
            tau_plus_ms: 20.0,
            tau_minus_ms: 20.0,
            ttl_windows: 20,
        }
    }
}

/// Modulator thresholds gating plasticity: forced depression above the ACh
/// threshold, depression-to-potentiation flip above the DA threshold, and
/// the NA floor for consolidation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GateThresholds {
    pub ach_ltd: f64,
    pub da_flip: f64,
    pub na_consolidate: f64,
}

impl Default for GateThresholds {
    fn default() -> Self {
        GateThresholds {
            ach_ltd: 0.7,
            da_flip: 0.6,
            na_consolidate: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Pending {
    dw: f64,
    age_windows: u32,
}

/// Short-term pending weight changes per driving synapse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EligibilityTrace {
    pending: BTreeMap<(NeuronId, NeuronId), Pending>,
}

impl EligibilityTrace {
    pub fn new() -> EligibilityTrace {
        EligibilityTrace {
            pending: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn pending_for(&self, pre: NeuronId, post: NeuronId) -> f64 {
        self.pending.get(&(pre, post)).map(|p| p.dw).unwrap_or(0.0)
    }
}

impl Default for EligibilityTrace {
    fn default() -> Self {
        EligibilityTrace::new()
    }
}

/// What one replay call did, with bursting counts measured on the same probe
/// stimulus before and after.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsolidationReport {
    pub pattern_key: StateKey,
    pub synapses_changed: usize,
    pub bursting_before: usize,
    pub bursting_after: usize,
}

#[derive(Debug, Error)]
pub enum PlasticityError {
    #[error("replay requires at least one cycle")]
    InvalidCycles,
    #[error("episodic store is empty, nothing to replay")]
    EmptyStore,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Pair kernel: potentiation when the pre spike leads (`dt > 0`),
/// depression when it lags, nothing for coincident spikes.
pub fn stdp_delta(dt_ms: f64, p: &StdpParams) -> f64 {
    if dt_ms > 0.0 {
        p.a_plus * (-dt_ms / p.tau_plus_ms).exp()
    } else if dt_ms < 0.0 {
        -p.a_minus * (dt_ms / p.tau_minus_ms).exp()
    } else {
        0.0
    }
}

/// Modulator gating of one raw pair update, in precedence order: high ACh
/// forces depression regardless of spike order; otherwise high DA converts
/// post-before-pre depression into potentiation; the result is then scaled
/// by the memory gates, never below zero.
pub fn apply_gates(
    raw_dw: f64,
    gates: &GateSet,
    mods: &ModulatorState,
    th: &GateThresholds,
) -> f64 {
    let routed = if mods.ach >= th.ach_ltd {
        -raw_dw.abs()
    } else if raw_dw < 0.0 && mods.da >= th.da_flip {
        raw_dw.abs()
    } else {
        raw_dw
    };
    let scale = (1.0 + gates.memory_learn - gates.memory_unlearn).max(0.0);
    routed * scale
}

/// Nearest-neighbor pair deltas between two sorted spike trains: each post
/// spike pairs with the closest strictly-earlier pre spike, each pre spike
/// with the closest strictly-earlier post spike.
fn pair_deltas(pre: &[i64], post: &[i64], p: &StdpParams) -> Vec<f64> {
    let mut deltas = Vec::new();
    for &tq in post {
        if let Some(&tp) = pre.iter().take_while(|&&t| t < tq).last() {
            deltas.push(stdp_delta((tq - tp) as f64, p));
        }
    }
    for &tp in pre {
        if let Some(&tq) = post.iter().take_while(|&&t| t < tp).last() {
            deltas.push(stdp_delta((tq - tp) as f64, p));
        }
    }
    deltas
}

/// Accumulate gated STDP into the eligibility trace for every driving
/// synapse whose pre and post neurons both spiked this window.
pub fn accumulate(
    spikes: &[SpikeEvent],
    net: &Network,
    p: &StdpParams,
    gates: &GateSet,
    mods: &ModulatorState,
    th: &GateThresholds,
    trace: &mut EligibilityTrace,
) {
    let mut times: BTreeMap<NeuronId, Vec<i64>> = BTreeMap::new();
    for s in spikes {
        times.entry(s.neuron).or_default().push(s.t);
    }
    for syn in &net.synapses {
        if syn.kind != SynapseKind::Driving {
            continue;
        }
        let (Some(pre), Some(post)) = (times.get(&syn.pre), times.get(&syn.post)) else {
            continue;
        };
        let mut dw = 0.0;
        for raw in pair_deltas(pre, post, p) {
            dw += apply_gates(raw, gates, mods, th);
        }
        if dw != 0.0 {
            let e = trace
                .pending
                .entry((syn.pre, syn.post))
                .or_insert(Pending {
                    dw: 0.0,
                    age_windows: 0,
                });
            e.dw += dw;
            e.age_windows = 0;
        }
    }
}

/// Commit or age the trace. With NA at or above the consolidation threshold
/// every pending change is applied to the weights (clamped to [0,1]) and the
/// trace cleared; otherwise entries age and expire past their TTL. Returns
/// the number of synapses whose weight actually changed.
pub fn consolidate(
    trace: &mut EligibilityTrace,
    na_level: f64,
    th: &GateThresholds,
    ttl_windows: u32,
    net: &mut Network,
) -> usize {
    if na_level >= th.na_consolidate {
        let index = net.driving_index();
        let mut changed = 0;
        for (&(pre, post), pending) in &trace.pending {
            if let Some(&i) = index.get(&(pre, post)) {
                let w = net.synapses[i].weight;
                let nw = (w + pending.dw).clamp(0.0, 1.0);
                if nw != w {
                    net.synapses[i].weight = nw;
                    changed += 1;
                }
            }
        }
        trace.pending.clear();
        changed
    } else {
        for p in trace.pending.values_mut() {
            p.age_windows += 1;
        }
        trace.pending.retain(|_, p| p.age_windows <= ttl_windows);
        0
    }
}

/// Everything the replay procedure needs from the run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemParams {
    pub clock: ClockParams,
    pub stdp: StdpParams,
    pub gate_thresholds: GateThresholds,
    pub forward_threshold: f64,
    pub explain_threshold: f64,
    pub bind_threshold: f64,
    pub baseline: ModulatorBaseline,
    /// NA clamp during replay; high so every cycle consolidates.
    pub na_clamp: f64,
    /// ACh clamp during replay; low so forced depression stays off.
    pub ach_clamp: f64,
}

impl RemParams {
    pub fn with_defaults(clock: ClockParams) -> RemParams {
        RemParams {
            clock,
            stdp: StdpParams::default(),
            gate_thresholds: GateThresholds::default(),
            forward_threshold: 0.5,
            explain_threshold: 0.5,
            bind_threshold: 0.5,
            baseline: ModulatorBaseline::default(),
            na_clamp: 0.9,
            ach_clamp: 0.1,
        }
    }
}

/// Count bursting neurons the probe stimulus produces on the current
/// weights.
pub fn probe_bursting(net: &Network, probe: &Stimulus, params: &RemParams) -> usize {
    let active = forward_pass(net, probe, params.forward_threshold);
    let strong = crate::netcore::strong_subgraph(net, params.explain_threshold);
    assign_modes(&active, &strong, net).bursting_count()
}

/// Replay every stored trace `cycles` times, forcing each item's neurons to
/// burst in sequence. Forced bursts drive downstream propagation with the
/// burst spike count as gain (a burst sums k spikes of charge within the
/// window), so patterns slightly below the awake threshold can recruit their
/// next abstraction level. Consolidation runs once per cycle.
pub fn rem_replay(
    store: &EpisodicStore,
    net: &mut Network,
    probe: &Stimulus,
    cycles: u32,
    params: &RemParams,
) -> Result<ConsolidationReport, PlasticityError> {
    if cycles == 0 {
        return Err(PlasticityError::InvalidCycles);
    }
    if store.is_empty() {
        return Err(PlasticityError::EmptyStore);
    }

    let bursting_before = probe_bursting(net, probe, params);

    let mods = ModulatorState {
        da: params.baseline.da,
        ht5: params.baseline.ht5,
        na: params.na_clamp,
        ach: params.ach_clamp,
        baseline: params.baseline,
    };
    let gates = GateSet {
        memory_learn: params.na_clamp,
        memory_unlearn: params.ach_clamp,
        action_reinforce: 0.0,
        action_avert: 0.0,
    };
    let burst_gain = params.clock.burst_spike_count as f64;

    let mut trace = EligibilityTrace::new();
    let mut synapses_changed = 0;
    let mut window_index = 0u64;

    for _ in 0..cycles {
        for episodic_trace in &store.traces {
            for item in &episodic_trace.items {
                let forced = item.neurons.clone();
                let active = forward_core(
                    net,
                    &Stimulus::empty(),
                    &forced,
                    params.forward_threshold,
                    burst_gain,
                );
                let strong: StrongGraph =
                    crate::netcore::strong_subgraph(net, params.explain_threshold);
                let modes = assign_modes_with_forced(&active, &strong, net, &forced);
                let ensembles =
                    form_ensembles_with_forced(&modes, net, params.bind_threshold, &forced);
                let phases = phase_map(&ensembles);
                let spikes = emit_spikes(&modes, &phases, &params.clock, window_index, net)?;
                accumulate(
                    &spikes,
                    net,
                    &params.stdp,
                    &gates,
                    &mods,
                    &params.gate_thresholds,
                    &mut trace,
                );
                window_index += 1;
            }
        }
        synapses_changed += consolidate(
            &mut trace,
            params.na_clamp,
            &params.gate_thresholds,
            params.stdp.ttl_windows,
            net,
        );
    }

    let bursting_after = probe_bursting(net, probe, params);
    Ok(ConsolidationReport {
        pattern_key: state_key(&probe.driven_set()),
        synapses_changed,
        bursting_before,
        bursting_after,
    })
}
