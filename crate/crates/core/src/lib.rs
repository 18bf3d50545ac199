//! burstnet: an event-driven spiking-network simulator built around
//! burst/tonic dual-mode coding of novelty.
//!
//! A window-based forward pass activates neurons; the bursting-inhibition
//! rule keeps only unexplained top-of-tree neurons in bursting mode;
//! bursting neurons bind into gamma-synchrony ensembles that compete for
//! attention; the dominant ensemble drives hippocampal episodic encoding
//! and recall; neuromodulators turn prediction errors and conditioned
//! valence into learning gates; and gated STDP with offline replay
//! consolidates weights so bursting climbs to higher abstraction levels.

pub mod binding;
pub mod dynamics;
pub mod episodic;
pub mod harness;
pub mod netcore;
pub mod netspec;
pub mod neuromod;
pub mod plasticity;

pub use binding::{
    form_ensembles, form_ensembles_with_forced, mod_gain, phase_map, select_dominant,
    AttentionState, AttentionWeights, Ensemble,
};
pub use dynamics::{
    assign_modes, assign_modes_with_forced, emit_spikes, forward_pass, forward_pass_with_forced,
    ClockParams, DynamicsError, FiringMode, ModeMap, SpikeEvent, Stimulus, WindowState,
};
pub use episodic::{
    jaccard, merge_step, EpisodicError, EpisodicStore, EpisodicTrace, MemoryItem, RecallHit,
    RecallResult,
};
pub use harness::{
    emit_plotdata, replay_dir, run_to_dir, MetricsRecord, PlotSeries, RunConfig, RunError,
    Simulation, TaskSpec,
};
pub use netcore::{
    build_network, strong_subgraph, Network, NetworkError, Neuron, NeuronId, NeuronKind, Region,
    StrongGraph, Synapse, SynapseKind,
};
pub use netspec::{parse_network_spec, NetworkSpec, NeuronDecl};
pub use neuromod::{
    amygdala_react, classify_scenario, compute_pe, state_key, update_modulators, AmygdalaStore,
    GateSet, ModGains, ModulatorBaseline, ModulatorKind, ModulatorState, NeuromodError, Scenario,
    StateKey, ValenceSign, ValueTable,
};
pub use plasticity::{
    accumulate, apply_gates, consolidate, probe_bursting, rem_replay, stdp_delta,
    ConsolidationReport, EligibilityTrace, GateThresholds, PlasticityError, RemParams, StdpParams,
};
