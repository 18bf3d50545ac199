//! The deterministic run loop: one fixed per-window phase order tying
//! dynamics, binding, episodic memory, neuromodulation, and plasticity
//! together, plus run-directory output and bit-exact replay.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binding::{form_ensembles_with_forced, phase_map, select_dominant, Ensemble};
use crate::dynamics::{
    assign_modes_with_forced, emit_spikes, forward_pass_with_forced, DynamicsError, WindowState,
};
use crate::episodic::{merge_step, EpisodicStore};
use crate::harness::config::{ConfigError, RunConfig};
use crate::harness::task::{ActionValues, TaskState};
use crate::netcore::{build_network, strong_subgraph, Network, NetworkError, NeuronId};
use crate::netspec::parse_network_spec;
use crate::neuromod::{
    amygdala_react, classify_scenario, compute_pe, state_key, AmygdalaStore, GateSet,
    ModulatorState, Scenario, StateKey, ValenceSign, ValueTable,
};
use crate::plasticity::{
    accumulate, consolidate, rem_replay, ConsolidationReport, EligibilityTrace, PlasticityError,
    RemParams,
};

pub const METRICS_FILE: &str = "metrics.tsv";
pub const ENSEMBLES_FILE: &str = "ensembles.tsv";
pub const STORE_FILE: &str = "store.csv";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

/// One row of the per-window log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub window: u64,
    pub bursting_count: usize,
    pub tonic_count: usize,
    pub ensemble_count: usize,
    pub dominant_id: Option<u32>,
    pub delta: f64,
    pub da: f64,
    pub ht5: f64,
    pub na: f64,
    pub ach: f64,
    pub scenario: Option<Scenario>,
    pub reward: f64,
}

impl MetricsRecord {
    pub fn header() -> &'static str {
        "window\tbursting_count\ttonic_count\tensemble_count\tdominant_id\tdelta\tda\tht5\tna\tach\tscenario\treward"
    }

    pub fn to_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{:.6}",
            self.window,
            self.bursting_count,
            self.tonic_count,
            self.ensemble_count,
            self.dominant_id
                .map(|d| d.to_string())
                .unwrap_or_else(|| "-".into()),
            self.delta,
            self.da,
            self.ht5,
            self.na,
            self.ach,
            self.scenario
                .map(|s| s.to_string())
                .unwrap_or_else(|| "-".into()),
            self.reward,
        )
    }
}

/// One row of the per-ensemble log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub window: u64,
    pub ensemble_id: u32,
    pub size: usize,
    pub support_size: usize,
    pub rate_hz: f64,
    pub phase_slot: u16,
    pub score: f64,
    pub dominant: bool,
}

impl EnsembleRecord {
    pub fn header() -> &'static str {
        "window\tensemble_id\tsize\tsupport_size\trate_hz\tphase_slot\tscore\tdominant_flag"
    }

    pub fn to_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:.6}\t{}\t{:.6}\t{}",
            self.window,
            self.ensemble_id,
            self.size,
            self.support_size,
            self.rate_hz,
            self.phase_slot,
            self.score,
            u8::from(self.dominant),
        )
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Plasticity(#[from] PlasticityError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("snapshot missing or unreadable at {0}")]
    SnapshotMissing(PathBuf),
    #[error("replay diverged at window {0}")]
    Divergence(u64),
    #[error("snapshot decode: {0}")]
    SnapshotDecode(#[from] serde_json::Error),
}

/// Everything a finished run leaves behind in memory.
pub struct RunResult {
    pub metrics: Vec<MetricsRecord>,
    pub ensembles: Vec<EnsembleRecord>,
    pub network: Network,
    pub store: EpisodicStore,
}

/// Snapshot written next to the metrics so a run can be re-executed
/// byte-identically without the original network file.
#[derive(Serialize, Deserialize)]
struct Snapshot {
    config: RunConfig,
    network: Network,
}

/// Sequential simulation state. One loop owns everything mutable; windows
/// run strictly in order because each depends on the last through recall
/// and plasticity.
pub struct Simulation {
    config: RunConfig,
    net: Network,
    store: EpisodicStore,
    mods: ModulatorState,
    values: ValueTable,
    amygdala: AmygdalaStore,
    action_values: ActionValues,
    eligibility: EligibilityTrace,
    task: TaskState,
    rng: ChaCha8Rng,
    forced_next: BTreeSet<NeuronId>,
    /// Dominant-state keys of recent windows, for antecedent conditioning.
    recent_keys: VecDeque<(u64, Option<StateKey>)>,
    /// Sensory-side state key of the previous window, for action policy.
    policy_state: Option<StateKey>,
    window: u64,
    excitatory_total: usize,
}

/// Per-window outcome handed to metrics and tests.
pub struct WindowOutcome {
    pub state: WindowState,
    pub ensembles: Vec<Ensemble>,
    pub dominant_id: Option<u32>,
    pub delta: f64,
    pub reward: f64,
    pub scenario: Option<Scenario>,
    pub executed: Option<NeuronId>,
    pub gates: GateSet,
    pub mods: ModulatorState,
    pub scores: std::collections::BTreeMap<u32, f64>,
}

impl Simulation {
    pub fn new(config: RunConfig, net: Network) -> Simulation {
        let excitatory_total = net.excitatory_count();
        let mods = ModulatorState::at_baseline(config.baselines);
        let store = EpisodicStore::new(
            config.episodic.capacity_per_cycle,
            config.episodic.recall_threshold,
            config.episodic.ach_suppress,
        );
        let values = ValueTable::new(config.learning.value_lr);
        let task = TaskState::new(config.task.clone());
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Simulation {
            config,
            net,
            store,
            mods,
            values,
            amygdala: AmygdalaStore::default(),
            action_values: ActionValues::default(),
            eligibility: EligibilityTrace::new(),
            task,
            rng,
            forced_next: BTreeSet::new(),
            recent_keys: VecDeque::new(),
            policy_state: None,
            window: 0,
            excitatory_total,
        }
    }

    pub fn from_config(config: RunConfig) -> Result<Simulation, RunError> {
        let text = std::fs::read_to_string(&config.network_path)
            .map_err(|e| ConfigError::Io(e))?;
        let spec = parse_network_spec(&text)?;
        let net = build_network(&spec)?;
        Ok(Simulation::new(config, net))
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn store(&self) -> &EpisodicStore {
        &self.store
    }

    pub fn eligibility(&self) -> &EligibilityTrace {
        &self.eligibility
    }

    pub fn rem_params(&self) -> RemParams {
        RemParams {
            clock: self.config.clock,
            stdp: self.config.stdp,
            gate_thresholds: self.config.gate_thresholds,
            forward_threshold: self.config.thresholds.forward,
            explain_threshold: self.config.thresholds.explain,
            bind_threshold: self.config.thresholds.bind,
            baseline: self.config.baselines,
            na_clamp: self.config.learning.rem_na_clamp,
            ach_clamp: self.config.learning.rem_ach_clamp,
        }
    }

    /// Run replay against the task's probe pattern on the current store.
    pub fn replay_consolidate(&mut self, cycles: u32) -> Result<ConsolidationReport, RunError> {
        let probe = self.task.probe();
        let params = self.rem_params();
        Ok(rem_replay(
            &self.store,
            &mut self.net,
            &probe,
            cycles,
            &params,
        )?)
    }

    /// Advance one window through the fixed phase order: stimulus, forward
    /// pass, mode assignment, binding, attention, episodic encode/recall,
    /// reward, prediction error, modulator update, gating, accumulation,
    /// consolidation.
    pub fn step(&mut self) -> Result<WindowOutcome, RunError> {
        let w = self.window;
        let cfg = &self.config;

        let plan = self.task.plan(
            w,
            &mut self.rng,
            &self.action_values,
            self.policy_state,
            cfg.learning.epsilon,
        );
        let mut forced = std::mem::take(&mut self.forced_next);
        if let Some(arm) = plan.action {
            forced.insert(arm);
        }

        let active = forward_pass_with_forced(
            &self.net,
            &plan.stimulus,
            &forced,
            cfg.thresholds.forward,
        );
        let strong = strong_subgraph(&self.net, cfg.thresholds.explain);
        let modes = assign_modes_with_forced(&active, &strong, &self.net, &forced);
        let ensembles =
            form_ensembles_with_forced(&modes, &self.net, cfg.thresholds.bind, &forced);
        let attention = select_dominant(&ensembles, &self.mods, &cfg.attention, &self.amygdala);
        let phases = phase_map(&ensembles);
        let spikes = emit_spikes(&modes, &phases, &cfg.clock, w, &self.net)?;

        let dominant = attention
            .dominant
            .and_then(|id| ensembles.iter().find(|e| e.id == id));
        let dominant_members = dominant.map(|e| e.members.clone());
        let dominant_key = dominant_members.as_ref().map(|m| state_key(m));

        // episodic encode (salience = NA at encoding time), then recall; the
        // recalled pattern is forced to burst next window
        if let Some(members) = &dominant_members {
            self.store.encode(members, w, self.mods.na);
            let recall = self
                .store
                .recall(members, self.mods.ach)
                .expect("dominant members are non-empty");
            if let Some(hit) = recall.hit {
                self.forced_next = merge_step(&hit.recalled, &BTreeSet::new());
            }
        }

        // reward and the executed action
        let executed = plan.action;
        let reward = self.task.reward(w, executed, &mut self.rng);

        // prediction error against the attended state
        let delta = match dominant_key {
            Some(key) => compute_pe(reward, key, &mut self.values),
            None => 0.0,
        };

        // amygdala reactivation over every active ensemble's pattern
        let active_keys: Vec<StateKey> =
            ensembles.iter().map(|e| state_key(&e.members)).collect();
        let valence = amygdala_react(&active_keys, &self.amygdala);

        self.mods = crate::neuromod::update_modulators(
            &self.mods,
            delta,
            modes.bursting_count(),
            self.excitatory_total,
            valence,
            &cfg.gains,
        );

        let (scenario, gates) = if delta != 0.0 {
            let sign = ValenceSign::infer(valence, reward);
            match classify_scenario(delta, sign, &self.mods) {
                Ok((s, g)) => (Some(s), g),
                Err(_) => (None, GateSet::default()),
            }
        } else {
            (None, GateSet::default())
        };

        // action-value update from the gates, keyed by the sensory side of
        // the attended state
        if let (Some(arm), Some(members)) = (executed, &dominant_members) {
            if scenario.is_some() {
                let sensory: BTreeSet<NeuronId> = members
                    .iter()
                    .copied()
                    .filter(|&n| !self.net.is_motor(n))
                    .collect();
                self.action_values.update(state_key(&sensory), arm, &gates);
            }
        }
        if let Some(members) = &dominant_members {
            let sensory: BTreeSet<NeuronId> = members
                .iter()
                .copied()
                .filter(|&n| !self.net.is_motor(n))
                .collect();
            if !sensory.is_empty() {
                self.policy_state = Some(state_key(&sensory));
            }
        }

        // plasticity: gates and levels from this same window
        accumulate(
            &spikes,
            &self.net,
            &cfg.stdp,
            &gates,
            &self.mods,
            &cfg.gate_thresholds,
            &mut self.eligibility,
        );
        let na_for_commit = if cfg.learning.awake_consolidation {
            self.mods.na
        } else {
            0.0
        };
        consolidate(
            &mut self.eligibility,
            na_for_commit,
            &cfg.gate_thresholds,
            cfg.stdp.ttl_windows,
            &mut self.net,
        );

        // Pavlovian conditioning of antecedent percepts
        if reward != 0.0 {
            let lag = cfg.learning.conditioning_lag;
            for &(pw, key) in &self.recent_keys {
                if pw + lag >= w && pw < w {
                    if let Some(k) = key {
                        let _ = self.amygdala.condition(k, reward.clamp(-1.0, 1.0));
                    }
                }
            }
        }
        self.recent_keys.push_back((w, dominant_key));
        while self.recent_keys.len() as u64 > cfg.learning.conditioning_lag + 1 {
            self.recent_keys.pop_front();
        }

        // optional interleaved replay
        if cfg.learning.rem_every_n_windows > 0
            && (w + 1) % cfg.learning.rem_every_n_windows == 0
            && !self.store.is_empty()
        {
            self.replay_consolidate(1)?;
        }

        self.window += 1;
        log::debug!(
            "window {w}: delta {delta:.3} da {:.3} ht5 {:.3} na {:.3} ach {:.3} scenario {:?} valence {valence:.3}",
            self.mods.da,
            self.mods.ht5,
            self.mods.na,
            self.mods.ach,
            scenario
        );

        Ok(WindowOutcome {
            state: WindowState {
                window_index: w,
                active,
                modes,
                spikes,
            },
            dominant_id: attention.dominant,
            scores: attention.scores,
            ensembles,
            delta,
            reward,
            scenario,
            executed,
            gates,
            mods: self.mods,
        })
    }

    /// Run the configured number of windows, collecting both logs.
    pub fn run(mut self) -> Result<RunResult, RunError> {
        let mut metrics = Vec::new();
        let mut ensembles_log = Vec::new();
        for _ in 0..self.config.windows {
            let out = self.step()?;
            metrics.push(MetricsRecord {
                window: out.state.window_index,
                bursting_count: out.state.modes.bursting_count(),
                tonic_count: out.state.modes.tonic_count(),
                ensemble_count: out.ensembles.len(),
                dominant_id: out.dominant_id,
                delta: out.delta,
                da: out.mods.da,
                ht5: out.mods.ht5,
                na: out.mods.na,
                ach: out.mods.ach,
                scenario: out.scenario,
                reward: out.reward,
            });
            for e in &out.ensembles {
                ensembles_log.push(EnsembleRecord {
                    window: out.state.window_index,
                    ensemble_id: e.id,
                    size: e.members.len(),
                    support_size: e.support.len(),
                    rate_hz: e.rate_hz,
                    phase_slot: e.phase_slot,
                    score: out.scores.get(&e.id).copied().unwrap_or(0.0),
                    dominant: out.dominant_id == Some(e.id),
                });
            }
        }
        Ok(RunResult {
            metrics,
            ensembles: ensembles_log,
            network: self.net,
            store: self.store,
        })
    }
}

pub fn metrics_to_text(metrics: &[MetricsRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", MetricsRecord::header());
    for m in metrics {
        let _ = writeln!(out, "{}", m.to_row());
    }
    out
}

pub fn ensembles_to_text(rows: &[EnsembleRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", EnsembleRecord::header());
    for r in rows {
        let _ = writeln!(out, "{}", r.to_row());
    }
    out
}

/// Execute a config and write the run directory: metrics, ensemble log,
/// store dump, and the replay snapshot.
pub fn run_to_dir(config: &RunConfig, out_dir: &Path) -> Result<RunResult, RunError> {
    let sim = Simulation::from_config(config.clone())?;
    let snapshot = Snapshot {
        config: config.clone(),
        network: sim.network().clone(),
    };
    let result = sim.run()?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(METRICS_FILE), metrics_to_text(&result.metrics))?;
    std::fs::write(
        out_dir.join(ENSEMBLES_FILE),
        ensembles_to_text(&result.ensembles),
    )?;
    std::fs::write(out_dir.join(STORE_FILE), result.store.dump())?;
    std::fs::write(
        out_dir.join(SNAPSHOT_FILE),
        serde_json::to_string_pretty(&snapshot)?,
    )?;
    Ok(result)
}

/// Re-execute a run directory's snapshot and compare metrics line by line.
/// Returns the reproduced metrics on success; reports the first divergent
/// window otherwise.
pub fn replay_dir(run_dir: &Path) -> Result<Vec<MetricsRecord>, RunError> {
    let snap_path = run_dir.join(SNAPSHOT_FILE);
    let metrics_path = run_dir.join(METRICS_FILE);
    if !snap_path.exists() || !metrics_path.exists() {
        return Err(RunError::SnapshotMissing(run_dir.to_path_buf()));
    }
    let snapshot: Snapshot = serde_json::from_str(&std::fs::read_to_string(&snap_path)?)?;
    let recorded = std::fs::read_to_string(&metrics_path)?;

    let sim = Simulation::new(snapshot.config, snapshot.network);
    let result = sim.run()?;
    let reproduced = metrics_to_text(&result.metrics);

    if reproduced == recorded {
        return Ok(result.metrics);
    }
    // locate the first differing window
    let mut recorded_lines = recorded.lines();
    let mut reproduced_lines = reproduced.lines();
    recorded_lines.next();
    reproduced_lines.next();
    let mut window = 0u64;
    loop {
        match (recorded_lines.next(), reproduced_lines.next()) {
            (Some(a), Some(b)) if a == b => window += 1,
            _ => return Err(RunError::Divergence(window)),
        }
    }
}

/// Exit codes for the command-line surface.
pub fn exit_code_for(err: &RunError) -> i32 {
    match err {
        RunError::Config(_) | RunError::SnapshotMissing(_) | RunError::SnapshotDecode(_) => 2,
        RunError::Divergence(_) => 3,
        RunError::Network(_)
        | RunError::Dynamics(_)
        | RunError::Plasticity(_)
        | RunError::Io(_) => 4,
    }
}
