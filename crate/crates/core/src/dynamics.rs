//! Per-window forward pass, bursting-inhibition mode assignment, and spike
//! emission.
//!
//! Activation is binary per integration window: a neuron is either active or
//! silent, and active neurons carry one of two firing modes. Bursting marks
//! an unexplained (novel) top-of-tree percept; tonic marks activity that a
//! stronger downstream abstraction already accounts for.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcore::{Network, NeuronId, NeuronKind, StrongGraph};

/// Spacing between adjacent ensemble phase slots, in milliseconds. With
/// 3-spike bursts at 5 ms ISI, offsets spaced 1 ms apart keep up to five
/// concurrent ensembles free of spike-time collisions within a gamma cycle.
pub const SLOT_SPACING_MS: i64 = 1;

/// Firing mode of one neuron in one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiringMode {
    Silent,
    Tonic,
    Bursting,
}

/// External input drive per window, applied only to sensory-cortex neurons.
/// Drives are in [0,1]; keys on non-sensory neurons are ignored.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Stimulus {
    pub drive: BTreeMap<NeuronId, f64>,
}

impl Stimulus {
    pub fn empty() -> Stimulus {
        Stimulus::default()
    }

    /// Full drive (1.0) on every listed neuron.
    pub fn on(ids: &[NeuronId]) -> Stimulus {
        Stimulus {
            drive: ids.iter().map(|&n| (n, 1.0)).collect(),
        }
    }

    pub fn driven_set(&self) -> BTreeSet<NeuronId> {
        self.drive.keys().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.drive.is_empty()
    }
}

/// One emitted spike. `t` is in integer milliseconds from simulation start
/// and lies strictly within the emitting window's half-open interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub neuron: NeuronId,
    pub t: i64,
}

/// Mode assignment for one window. Only non-silent neurons are stored;
/// `mode_of` reports `Silent` for everything else, so the map and the active
/// set agree by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeMap {
    modes: BTreeMap<NeuronId, FiringMode>,
}

impl ModeMap {
    pub fn mode_of(&self, n: NeuronId) -> FiringMode {
        self.modes.get(&n).copied().unwrap_or(FiringMode::Silent)
    }

    pub fn bursting(&self) -> impl Iterator<Item = NeuronId> + '_ {
        self.modes
            .iter()
            .filter(|(_, m)| **m == FiringMode::Bursting)
            .map(|(n, _)| *n)
    }

    pub fn tonic(&self) -> impl Iterator<Item = NeuronId> + '_ {
        self.modes
            .iter()
            .filter(|(_, m)| **m == FiringMode::Tonic)
            .map(|(n, _)| *n)
    }

    pub fn bursting_set(&self) -> BTreeSet<NeuronId> {
        self.bursting().collect()
    }

    pub fn bursting_count(&self) -> usize {
        self.bursting().count()
    }

    pub fn tonic_count(&self) -> usize {
        self.tonic().count()
    }

    pub fn non_silent(&self) -> impl Iterator<Item = (NeuronId, FiringMode)> + '_ {
        self.modes.iter().map(|(n, m)| (*n, *m))
    }
}

/// Everything one window produced: the active set, firing modes, and the
/// spike train sorted by time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowState {
    pub window_index: u64,
    pub active: BTreeSet<NeuronId>,
    pub modes: ModeMap,
    pub spikes: Vec<SpikeEvent>,
}

/// Timing constants for one run. The integration window is the outer step;
/// theta indexes windows for episodic memory and gamma subdivides a window
/// into spike-emission cycles.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClockParams {
    pub window_ms: u32,
    pub theta_hz: f64,
    pub gamma_hz: f64,
    pub burst_spike_count: u32,
    pub burst_isi_ms: u32,
}

impl Default for ClockParams {
    fn default() -> Self {
        ClockParams {
            window_ms: 100,
            theta_hz: 5.0,
            gamma_hz: 40.0,
            burst_spike_count: 3,
            burst_isi_ms: 5,
        }
    }
}

impl ClockParams {
    /// Gamma cycle length in whole milliseconds.
    pub fn gamma_period_ms(&self) -> i64 {
        (1000.0 / self.gamma_hz).round() as i64
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(50..=250).contains(&self.window_ms) {
            return Err(DynamicsError::BadClock(format!(
                "window_ms {} outside 50..=250",
                self.window_ms
            )));
        }
        if !(4.0..=7.0).contains(&self.theta_hz) {
            return Err(DynamicsError::BadClock(format!(
                "theta_hz {} outside 4..=7",
                self.theta_hz
            )));
        }
        if self.gamma_hz <= 0.0 || self.burst_spike_count == 0 || self.burst_isi_ms == 0 {
            return Err(DynamicsError::BadClock("gamma/burst params must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("bursting neuron {0} has no phase slot")]
    PhaseMissing(NeuronId),
    #[error("bad clock params: {0}")]
    BadClock(String),
}

/// Feed-forward activation to fixpoint. Sensory neurons activate when their
/// drive reaches `threshold`; every other neuron activates when the summed
/// weight of driving synapses from active pre-neurons reaches it. Activation
/// is monotone, so the fixpoint is unique.
pub fn forward_pass(net: &Network, stim: &Stimulus, threshold: f64) -> BTreeSet<NeuronId> {
    forward_core(net, stim, &BTreeSet::new(), threshold, 1.0)
}

/// Forward pass with externally forced sources (episodic recall, motor
/// volition). Forced neurons are active regardless of region or drive.
pub fn forward_pass_with_forced(
    net: &Network,
    stim: &Stimulus,
    forced: &BTreeSet<NeuronId>,
    threshold: f64,
) -> BTreeSet<NeuronId> {
    forward_core(net, stim, forced, threshold, 1.0)
}

/// Shared fixpoint. `forced_gain` multiplies the drive contributed by forced
/// (bursting) sources: a burst of k spikes sums to k times the charge of a
/// single spike within one integration window. Awake propagation uses 1.0;
/// offline replay uses the burst spike count.
pub(crate) fn forward_core(
    net: &Network,
    stim: &Stimulus,
    forced: &BTreeSet<NeuronId>,
    threshold: f64,
    forced_gain: f64,
) -> BTreeSet<NeuronId> {
    debug_assert!(threshold > 0.0 && threshold <= 1.0);
    let n = net.n_neurons();
    let mut active = vec![false; n];
    let mut input = vec![0.0f64; n];
    let mut queue: VecDeque<NeuronId> = VecDeque::new();

    for &f in forced {
        if f.index() < n && !active[f.index()] {
            active[f.index()] = true;
            queue.push_back(f);
        }
    }
    for (&s, &drive) in &stim.drive {
        if s.index() < n && net.is_sensory(s) && drive >= threshold && !active[s.index()] {
            active[s.index()] = true;
            queue.push_back(s);
        }
    }

    while let Some(u) = queue.pop_front() {
        let gain = if forced.contains(&u) { forced_gain } else { 1.0 };
        for syn in net.driving_out(u) {
            let p = syn.post.index();
            if active[p] || net.is_sensory(syn.post) {
                continue;
            }
            input[p] += syn.weight * gain;
            if input[p] >= threshold {
                active[p] = true;
                queue.push_back(syn.post);
            }
        }
    }

    active
        .iter()
        .enumerate()
        .filter(|(_, a)| **a)
        .map(|(i, _)| NeuronId(i as u32))
        .collect()
}

/// Bursting-inhibition rule: an active excitatory neuron bursts iff it has
/// no active strong out-neighbor (nothing downstream explains it); otherwise
/// it is demoted to tonic. Active inhibitory neurons are always tonic.
pub fn assign_modes(
    active: &BTreeSet<NeuronId>,
    strong: &StrongGraph,
    net: &Network,
) -> ModeMap {
    assign_modes_with_forced(active, strong, net, &BTreeSet::new())
}

/// Mode assignment with a forced-burst set: recalled neurons bypass bursting
/// inhibition for exactly one window.
pub fn assign_modes_with_forced(
    active: &BTreeSet<NeuronId>,
    strong: &StrongGraph,
    net: &Network,
    forced: &BTreeSet<NeuronId>,
) -> ModeMap {
    let mut modes = BTreeMap::new();
    for &n in active {
        let mode = match net.neuron(n).kind {
            NeuronKind::Inhibitory => FiringMode::Tonic,
            NeuronKind::Excitatory => {
                if forced.contains(&n) {
                    FiringMode::Bursting
                } else {
                    let explained = strong
                        .out_neighbors(n)
                        .iter()
                        .any(|m| active.contains(m));
                    if explained {
                        FiringMode::Tonic
                    } else {
                        FiringMode::Bursting
                    }
                }
            }
        };
        modes.insert(n, mode);
    }
    ModeMap { modes }
}

/// Emit the window's spike train. Tonic neurons fire once per gamma cycle at
/// their slot offset; bursting neurons fire `burst_spike_count` spikes at
/// `burst_isi_ms` spacing per cycle. Interneuron spikes lag one ISI behind
/// local excitation. Spikes falling past the window end are dropped so the
/// containment invariant holds for any slot.
pub fn emit_spikes(
    modes: &ModeMap,
    phase_of: &BTreeMap<NeuronId, u16>,
    clock: &ClockParams,
    window_index: u64,
    net: &Network,
) -> Result<Vec<SpikeEvent>, DynamicsError> {
    let window_start = window_index as i64 * clock.window_ms as i64;
    let window_end = window_start + clock.window_ms as i64;
    let period = clock.gamma_period_ms();
    let isi = clock.burst_isi_ms as i64;

    let mut spikes = Vec::new();
    for (n, mode) in modes.non_silent() {
        let slot = match phase_of.get(&n) {
            Some(&s) => s as i64,
            None if mode == FiringMode::Bursting => return Err(DynamicsError::PhaseMissing(n)),
            None => 0,
        };
        let lag = if net.neuron(n).kind == NeuronKind::Inhibitory {
            isi
        } else {
            0
        };
        let offset = slot * SLOT_SPACING_MS + lag;
        let mut cycle_start = window_start;
        while cycle_start < window_end {
            match mode {
                FiringMode::Tonic => {
                    let t = cycle_start + offset;
                    if t < window_end {
                        spikes.push(SpikeEvent { neuron: n, t });
                    }
                }
                FiringMode::Bursting => {
                    for j in 0..clock.burst_spike_count as i64 {
                        let t = cycle_start + offset + j * isi;
                        if t < window_end {
                            spikes.push(SpikeEvent { neuron: n, t });
                        }
                    }
                }
                FiringMode::Silent => unreachable!("ModeMap stores no silent entries"),
            }
            cycle_start += period;
        }
    }
    spikes.sort_by_key(|s| (s.t, s.neuron));
    Ok(spikes)
}
