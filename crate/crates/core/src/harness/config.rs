//! Run configuration: one sectioned text file holding every clock constant,
//! threshold, gain, and the task description. Same grammar as network spec
//! files; unknown sections or keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binding::AttentionWeights;
use crate::dynamics::ClockParams;
use crate::netcore::{NetworkError, NeuronId};
use crate::netspec::tokenize_sections;
use crate::neuromod::{ModGains, ModulatorBaseline};
use crate::plasticity::{GateThresholds, StdpParams};

/// Activation and binding thresholds, all in (0,1].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Thresholds {
    pub forward: f64,
    pub explain: f64,
    pub bind: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            forward: 0.5,
            explain: 0.5,
            bind: 0.5,
        }
    }
}

/// Episodic store parameters. Capacity follows the 7+/-2 working-memory
/// span; recall threshold is Jaccard similarity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpisodicParams {
    pub capacity_per_cycle: usize,
    pub recall_threshold: f64,
    pub ach_suppress: f64,
}

impl Default for EpisodicParams {
    fn default() -> Self {
        EpisodicParams {
            capacity_per_cycle: 9,
            recall_threshold: 0.6,
            ach_suppress: 0.7,
        }
    }
}

/// Learning-loop knobs that sit above the individual modules.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LearningParams {
    /// Value-table learning rate.
    pub value_lr: f64,
    /// Exploration rate for action selection.
    pub epsilon: f64,
    /// Commit eligibility during waking when NA allows it.
    pub awake_consolidation: bool,
    /// Interleave one replay cycle every N windows; 0 disables.
    pub rem_every_n_windows: u64,
    /// How many antecedent windows a reward conditions.
    pub conditioning_lag: u64,
    /// NA/ACh clamps applied during replay.
    pub rem_na_clamp: f64,
    pub rem_ach_clamp: f64,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams {
            value_lr: 0.2,
            epsilon: 0.1,
            awake_consolidation: false,
            rem_every_n_windows: 0,
            conditioning_lag: 1,
            rem_na_clamp: 0.9,
            rem_ach_clamp: 0.1,
        }
    }
}

/// Task environments the harness can drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TaskSpec {
    /// One fixed pattern every window; nothing rewarded.
    Habituation { pattern: Vec<NeuronId> },
    /// CS pattern, then reward plus US pattern `lag` windows later, repeated
    /// for `pairing_trials`, then `omission_trials` with the US withheld.
    TraceConditioning {
        cs: Vec<NeuronId>,
        us: Vec<NeuronId>,
        lag_windows: u64,
        gap_windows: u64,
        pairing_trials: u64,
        omission_trials: u64,
        reward: f64,
    },
    /// Two-armed bandit: a fixed context pattern plus two motor neurons.
    Bandit {
        context: Vec<NeuronId>,
        arm_a: NeuronId,
        arm_b: NeuronId,
        p_reward: f64,
        p_punish: f64,
    },
    /// Present a pattern sequence once, re-cue the first item, then leave
    /// the stimulus off and let recall replay the rest.
    SequenceRecall {
        items: Vec<Vec<NeuronId>>,
        cue_index: usize,
    },
}

impl TaskSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TaskSpec::Habituation { .. } => "habituation",
            TaskSpec::TraceConditioning { .. } => "trace_conditioning",
            TaskSpec::Bandit { .. } => "bandit",
            TaskSpec::SequenceRecall { .. } => "sequence_recall",
        }
    }
}

/// Full run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub network_path: PathBuf,
    pub windows: u64,
    pub seed: u64,
    pub clock: ClockParams,
    pub thresholds: Thresholds,
    pub gate_thresholds: GateThresholds,
    pub attention: AttentionWeights,
    pub gains: ModGains,
    pub baselines: ModulatorBaseline,
    pub stdp: StdpParams,
    pub episodic: EpisodicParams,
    pub learning: LearningParams,
    pub task: TaskSpec,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
    #[error("network spec: {0}")]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

struct Kv {
    line: usize,
    key: String,
    values: Vec<String>,
}

fn parse_f64(kv: &Kv) -> Result<f64, ConfigError> {
    kv.values
        .first()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| ConfigError::Parse {
            line: kv.line,
            message: format!("`{}` needs a numeric value", kv.key),
        })
}

fn parse_u64(kv: &Kv) -> Result<u64, ConfigError> {
    kv.values
        .first()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| ConfigError::Parse {
            line: kv.line,
            message: format!("`{}` needs an integer value", kv.key),
        })
}

fn parse_bool(kv: &Kv) -> Result<bool, ConfigError> {
    match kv.values.first().map(String::as_str) {
        Some("on") | Some("true") => Ok(true),
        Some("off") | Some("false") => Ok(false),
        _ => Err(ConfigError::Parse {
            line: kv.line,
            message: format!("`{}` needs on/off", kv.key),
        }),
    }
}

fn parse_ids(kv: &Kv) -> Result<Vec<NeuronId>, ConfigError> {
    if kv.values.is_empty() {
        return Err(ConfigError::Parse {
            line: kv.line,
            message: format!("`{}` needs at least one neuron id", kv.key),
        });
    }
    kv.values
        .iter()
        .map(|v| {
            v.parse::<u32>().map(NeuronId).map_err(|_| ConfigError::Parse {
                line: kv.line,
                message: format!("bad neuron id `{v}`"),
            })
        })
        .collect()
}

fn unknown_key(kv: &Kv, section: &str) -> ConfigError {
    ConfigError::Parse {
        line: kv.line,
        message: format!("unknown key `{}` in [{section}]", kv.key),
    }
}

impl RunConfig {
    /// Parse a config file; relative network paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
        let sections = tokenize_sections(text).map_err(|e| match e {
            NetworkError::Parse { line, message } => ConfigError::Parse { line, message },
            other => ConfigError::Network(other),
        })?;

        let mut network_path: Option<PathBuf> = None;
        let mut windows: Option<u64> = None;
        let mut seed = 0u64;
        let mut clock = ClockParams::default();
        let mut thresholds = Thresholds::default();
        let mut gate_thresholds = GateThresholds::default();
        let mut attention = AttentionWeights::default();
        let mut gains = ModGains::default();
        let mut baselines = ModulatorBaseline::default();
        let mut stdp = StdpParams::default();
        let mut episodic = EpisodicParams::default();
        let mut learning = LearningParams::default();

        let mut task_kind: Option<String> = None;
        let mut task_kvs: Vec<Kv> = Vec::new();

        for (name, lines) in sections {
            let kvs: Vec<Kv> = lines
                .into_iter()
                .map(|(line, mut toks)| Kv {
                    line,
                    key: toks.remove(0),
                    values: toks,
                })
                .collect();
            match name.as_str() {
                "run" => {
                    for kv in &kvs {
                        match kv.key.as_str() {
                            "network" => {
                                let p = kv.values.first().ok_or_else(|| ConfigError::Parse {
                                    line: kv.line,
                                    message: "`network` needs a path".into(),
                                })?;
                                let p = PathBuf::from(p);
                                network_path = Some(if p.is_relative() {
                                    base_dir.join(p)
                                } else {
                                    p
                                });
                            }
                            "windows" => windows = Some(parse_u64(kv)?),
                            "seed" => seed = parse_u64(kv)?,
                            _ => return Err(unknown_key(kv, "run")),
                        }
                    }
                }
                "clock" => {
                    for kv in &kvs {
                        match kv.key.as_str() {
                            "window_ms" => clock.window_ms = parse_u64(kv)? as u32,
                            "theta_hz" => clock.theta_hz = parse_f64(kv)?,
                            "gamma_hz" => clock.gamma_hz = parse_f64(kv)?,
                            "burst_spike_count" => {
                                clock.burst_spike_count = parse_u64(kv)? as u32
                            }
                            "burst_isi_ms" => clock.burst_isi_ms = parse_u64(kv)? as u32,
                            _ => return Err(unknown_key(kv, "clock")),
                        }
                    }
                }
                "thresholds" => {
                    for kv in &kvs {
                        match kv.key.as_str() {
                            "forward" => thresholds.forward = parse_f64(kv)?,
                            "explain" => thresholds.explain = parse_f64(kv)?,
                            "bind" => thresholds.bind = parse_f64(kv)?,
                            "recall" => episodic.recall_threshold = parse_f64(kv)?,
                            "ach_suppress" => episodic.ach_suppress = parse_f64(kv)?,
                            "ach_ltd" => gate_thresholds.ach_ltd = parse_f64(kv)?,
                            "da_flip" => gate_thresholds.da_flip = parse_f64(kv)?,
                            "na_consolidate" => gate_thresholds.na_consolidate = parse_f64(kv)?,
                            _ => return Err(unknown_key(kv, "thresholds")),
                        }
                    }
                }
                "attention" => {
                    for kv in &kvs {
                        match kv.key.as_str() {
                            "alpha" => attention.alpha = parse_f64(kv)?,
                            "beta" => attention.beta = parse_f64(kv)?,
                            "gamma" => attention.gamma = parse_f64(kv)?,
                            _ => return Err(unknown_key(kv, "attention")),
                        }
                    }
                }
                "gains" => {
                    for kv in &kvs {
                        match kv.key.as_str() {
                            "k_da" => gains.k_da = parse_f64(kv)?,
                            "k_ht" => gains.k_ht = parse_f64(kv)?,
                            "k_na" => gains.k_na = parse_f64(kv)?,
                            "k_ach" => gains.k_ach = parse_f64(kv)?,
                            "ht_half_life_windows" => {
                                gains.ht_half_life_windows = parse_f64(kv)?
                            }
                            _ => return Err(unknown_key(kv, "gains")),
                        }
                    }
                }
                "baselines" => {
                    for kv in &kvs {
                        match kv.key.as_str() {
                            "da" => baselines.da = parse_f64(kv)?,
                            "ht5" => baselines.ht5 = parse_f64(kv)?,
                            "na" => baselines.na = parse_f64(kv)?,
                            "ach" => baselines.ach = parse_f64(kv)?,
                            _ => return Err(unknown_key(kv, "baselines")),
                        }
                    }
                }
                "stdp" => {
                    for kv in &kvs {
                        match kv.key.as_str() {
                            "a_plus" => stdp.a_plus = parse_f64(kv)?,
                            "a_minus" => stdp.a_minus = parse_f64(kv)?,
                            "tau_plus_ms" => stdp.tau_plus_ms = parse_f64(kv)?,
                            "tau_minus_ms" => stdp.tau_minus_ms = parse_f64(kv)?,
                            "ttl_windows" => stdp.ttl_windows = parse_u64(kv)? as u32,
                            _ => return Err(unknown_key(kv, "stdp")),
                        }
                    }
                }
                "episodic" => {
                    for kv in &kvs {
                        match kv.key.as_str() {
                            "capacity_per_cycle" => {
                                episodic.capacity_per_cycle = parse_u64(kv)? as usize
                            }
                            _ => return Err(unknown_key(kv, "episodic")),
                        }
                    }
                }
                "learning" => {
                    for kv in &kvs {
                        match kv.key.as_str() {
                            "value_lr" => learning.value_lr = parse_f64(kv)?,
                            "epsilon" => learning.epsilon = parse_f64(kv)?,
                            "awake_consolidation" => {
                                learning.awake_consolidation = parse_bool(kv)?
                            }
                            "rem_every_n_windows" => {
                                learning.rem_every_n_windows = parse_u64(kv)?
                            }
                            "conditioning_lag" => learning.conditioning_lag = parse_u64(kv)?,
                            "rem_na" => learning.rem_na_clamp = parse_f64(kv)?,
                            "rem_ach" => learning.rem_ach_clamp = parse_f64(kv)?,
                            _ => return Err(unknown_key(kv, "learning")),
                        }
                    }
                }
                "task" => {
                    for kv in kvs {
                        if kv.key == "kind" {
                            task_kind = kv.values.first().cloned();
                        } else {
                            task_kvs.push(kv);
                        }
                    }
                }
                other => {
                    return Err(ConfigError::Parse {
                        line: 0,
                        message: format!("unknown section [{other}]"),
                    })
                }
            }
        }

        let task = build_task(
            task_kind.ok_or_else(|| ConfigError::Missing("task kind".into()))?,
            task_kvs,
        )?;

        let config = RunConfig {
            network_path: network_path
                .ok_or_else(|| ConfigError::Missing("run network".into()))?,
            windows: windows.ok_or_else(|| ConfigError::Missing("run windows".into()))?,
            seed,
            clock,
            thresholds,
            gate_thresholds,
            attention,
            gains,
            baselines,
            stdp,
            episodic,
            learning,
            task,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.clock
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        let unit = |v: f64, name: &str| -> Result<(), ConfigError> {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} {v} outside (0,1]")))
            }
        };
        unit(self.thresholds.forward, "forward threshold")?;
        unit(self.thresholds.explain, "explain threshold")?;
        unit(self.thresholds.bind, "bind threshold")?;
        unit(self.episodic.recall_threshold, "recall threshold")?;
        if !(5..=9).contains(&self.episodic.capacity_per_cycle) {
            return Err(invalid(format!(
                "capacity_per_cycle {} outside 5..=9",
                self.episodic.capacity_per_cycle
            )));
        }
        if !(0.0..=1.0).contains(&self.learning.epsilon) {
            return Err(invalid("epsilon outside [0,1]"));
        }
        unit(self.learning.value_lr, "value_lr")?;
        for (v, name) in [
            (self.baselines.da, "baseline da"),
            (self.baselines.ht5, "baseline ht5"),
            (self.baselines.na, "baseline na"),
            (self.baselines.ach, "baseline ach"),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} {v} outside [0,1]")));
            }
        }
        if self.stdp.a_plus <= 0.0
            || self.stdp.a_minus <= 0.0
            || self.stdp.tau_plus_ms <= 0.0
            || self.stdp.tau_minus_ms <= 0.0
        {
            return Err(invalid("stdp constants must be positive"));
        }
        match &self.task {
            TaskSpec::Habituation { pattern } => {
                if pattern.is_empty() {
                    return Err(invalid("habituation needs a pattern"));
                }
            }
            TaskSpec::TraceConditioning {
                cs,
                us,
                lag_windows,
                pairing_trials,
                ..
            } => {
                if cs.is_empty() || us.is_empty() {
                    return Err(invalid("trace_conditioning needs cs and us patterns"));
                }
                if *lag_windows == 0 || *pairing_trials == 0 {
                    return Err(invalid(
                        "trace_conditioning needs lag_windows >= 1 and pairing trials",
                    ));
                }
            }
            TaskSpec::Bandit {
                context,
                arm_a,
                arm_b,
                p_reward,
                p_punish,
            } => {
                if context.is_empty() {
                    return Err(invalid("bandit needs a context pattern"));
                }
                if arm_a == arm_b {
                    return Err(invalid("bandit arms must differ"));
                }
                for p in [p_reward, p_punish] {
                    if !(0.0..=1.0).contains(p) {
                        return Err(invalid("bandit probabilities outside [0,1]"));
                    }
                }
            }
            TaskSpec::SequenceRecall { items, cue_index } => {
                if items.len() < 2 {
                    return Err(invalid("sequence_recall needs at least two items"));
                }
                if *cue_index >= items.len() {
                    return Err(invalid("cue_index outside the item list"));
                }
            }
        }
        Ok(())
    }
}

fn build_task(kind: String, kvs: Vec<Kv>) -> Result<TaskSpec, ConfigError> {
    let find = |key: &str| -> Option<&Kv> { kvs.iter().find(|kv| kv.key == key) };
    match kind.as_str() {
        "habituation" => {
            let pattern = find("pattern")
                .map(parse_ids)
                .transpose()?
                .ok_or_else(|| ConfigError::Missing("task pattern".into()))?;
            for kv in &kvs {
                if kv.key != "pattern" {
                    return Err(unknown_key(kv, "task"));
                }
            }
            Ok(TaskSpec::Habituation { pattern })
        }
        "trace_conditioning" => {
            let cs = find("cs")
                .map(parse_ids)
                .transpose()?
                .ok_or_else(|| ConfigError::Missing("task cs".into()))?;
            let us = find("us")
                .map(parse_ids)
                .transpose()?
                .ok_or_else(|| ConfigError::Missing("task us".into()))?;
            let lag_windows = find("lag_windows").map(parse_u64).transpose()?.unwrap_or(1);
            let gap_windows = find("gap_windows").map(parse_u64).transpose()?.unwrap_or(1);
            let pairing_trials = find("pairing_trials")
                .map(parse_u64)
                .transpose()?
                .ok_or_else(|| ConfigError::Missing("task pairing_trials".into()))?;
            let omission_trials = find("omission_trials")
                .map(parse_u64)
                .transpose()?
                .unwrap_or(0);
            let reward = find("reward").map(parse_f64).transpose()?.unwrap_or(1.0);
            for kv in &kvs {
                if ![
                    "cs",
                    "us",
                    "lag_windows",
                    "gap_windows",
                    "pairing_trials",
                    "omission_trials",
                    "reward",
                ]
                .contains(&kv.key.as_str())
                {
                    return Err(unknown_key(kv, "task"));
                }
            }
            Ok(TaskSpec::TraceConditioning {
                cs,
                us,
                lag_windows,
                gap_windows,
                pairing_trials,
                omission_trials,
                reward,
            })
        }
        "bandit" => {
            let context = find("context")
                .map(parse_ids)
                .transpose()?
                .ok_or_else(|| ConfigError::Missing("task context".into()))?;
            let arm = |key: &str| -> Result<NeuronId, ConfigError> {
                kvs.iter()
                    .find(|kv| kv.key == key)
                    .map(|kv| parse_ids(kv).map(|v| v[0]))
                    .transpose()?
                    .ok_or_else(|| ConfigError::Missing(format!("task {key}")))
            };
            let arm_a = arm("arm_a")?;
            let arm_b = arm("arm_b")?;
            let p_reward = find("p_reward").map(parse_f64).transpose()?.unwrap_or(0.9);
            let p_punish = find("p_punish").map(parse_f64).transpose()?.unwrap_or(0.9);
            for kv in &kvs {
                if !["context", "arm_a", "arm_b", "p_reward", "p_punish"]
                    .contains(&kv.key.as_str())
                {
                    return Err(unknown_key(kv, "task"));
                }
            }
            Ok(TaskSpec::Bandit {
                context,
                arm_a,
                arm_b,
                p_reward,
                p_punish,
            })
        }
        "sequence_recall" => {
            let mut items = Vec::new();
            let mut cue_index = 0usize;
            for kv in &kvs {
                match kv.key.as_str() {
                    "item" => items.push(parse_ids(kv)?),
                    "cue_index" => cue_index = parse_u64(kv)? as usize,
                    _ => return Err(unknown_key(kv, "task")),
                }
            }
            Ok(TaskSpec::SequenceRecall { items, cue_index })
        }
        other => Err(invalid(format!("unknown task kind `{other}`"))),
    }
}
