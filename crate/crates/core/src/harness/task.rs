//! Task environments: per-window stimulus schedules, action selection for
//! the bandit, and reward delivery.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Stimulus;
use crate::harness::config::TaskSpec;
use crate::netcore::NeuronId;
use crate::neuromod::{GateSet, StateKey};

/// Action-state values built from the action gates: reinforcement adds the
/// DA gate, aversion subtracts the 5-HT gate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ActionValues {
    pub q: BTreeMap<(StateKey, NeuronId), f64>,
}

impl ActionValues {
    pub fn value(&self, state: StateKey, action: NeuronId) -> f64 {
        self.q.get(&(state, action)).copied().unwrap_or(0.0)
    }

    pub fn update(&mut self, state: StateKey, action: NeuronId, gates: &GateSet) {
        *self.q.entry((state, action)).or_insert(0.0) +=
            gates.action_reinforce - gates.action_avert;
    }

    /// Greedy pick over the given actions; ties break to the lowest id.
    pub fn argmax(&self, state: StateKey, actions: &[NeuronId]) -> NeuronId {
        let mut best = actions[0];
        let mut best_v = self.value(state, best);
        for &a in &actions[1..] {
            let v = self.value(state, a);
            if v > best_v || (v == best_v && a < best) {
                best = a;
                best_v = v;
            }
        }
        best
    }
}

/// What the environment contributes to one window before the network runs.
#[derive(Debug, Clone)]
pub struct WindowPlan {
    pub stimulus: Stimulus,
    /// Motor neuron forced to burst this window (bandit volition).
    pub action: Option<NeuronId>,
}

/// Runtime task state. Only the bandit consumes randomness; draws happen in
/// a fixed per-window order so runs replay bit-identically.
#[derive(Debug, Clone)]
pub struct TaskState {
    spec: TaskSpec,
}

impl TaskState {
    pub fn new(spec: TaskSpec) -> TaskState {
        TaskState { spec }
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    /// The pattern whose consolidation is of interest; used as the replay
    /// probe.
    pub fn probe(&self) -> Stimulus {
        match &self.spec {
            TaskSpec::Habituation { pattern } => Stimulus::on(pattern),
            TaskSpec::TraceConditioning { cs, .. } => Stimulus::on(cs),
            TaskSpec::Bandit { context, .. } => Stimulus::on(context),
            TaskSpec::SequenceRecall { items, cue_index } => Stimulus::on(&items[*cue_index]),
        }
    }

    pub fn arms(&self) -> Option<[NeuronId; 2]> {
        match &self.spec {
            TaskSpec::Bandit { arm_a, arm_b, .. } => Some([*arm_a, *arm_b]),
            _ => None,
        }
    }

    /// Stimulus and forced action for window `w`.
    pub fn plan(
        &self,
        w: u64,
        rng: &mut ChaCha8Rng,
        values: &ActionValues,
        policy_state: Option<StateKey>,
        epsilon: f64,
    ) -> WindowPlan {
        match &self.spec {
            TaskSpec::Habituation { pattern } => WindowPlan {
                stimulus: Stimulus::on(pattern),
                action: None,
            },
            TaskSpec::TraceConditioning {
                cs,
                us,
                lag_windows,
                gap_windows,
                pairing_trials,
                omission_trials,
                ..
            } => {
                let span = lag_windows + 1 + gap_windows;
                let trial = w / span;
                let phase = w % span;
                let stimulus = if trial >= pairing_trials + omission_trials {
                    Stimulus::empty()
                } else if phase == 0 {
                    Stimulus::on(cs)
                } else if phase == *lag_windows && trial < *pairing_trials {
                    Stimulus::on(us)
                } else {
                    Stimulus::empty()
                };
                WindowPlan {
                    stimulus,
                    action: None,
                }
            }
            TaskSpec::Bandit {
                context,
                arm_a,
                arm_b,
                ..
            } => {
                let arms = [*arm_a, *arm_b];
                let explore = rng.gen::<f64>() < epsilon;
                let action = match policy_state {
                    Some(state) if !explore => values.argmax(state, &arms),
                    _ => arms[rng.gen_range(0..2)],
                };
                WindowPlan {
                    stimulus: Stimulus::on(context),
                    action: Some(action),
                }
            }
            TaskSpec::SequenceRecall { items, cue_index } => {
                let n = items.len() as u64;
                let stimulus = if w < n {
                    Stimulus::on(&items[w as usize])
                } else if w == n {
                    Stimulus::on(&items[*cue_index])
                } else {
                    Stimulus::empty()
                };
                WindowPlan {
                    stimulus,
                    action: None,
                }
            }
        }
    }

    /// Reward delivered at window `w` given the executed action.
    pub fn reward(&self, w: u64, action: Option<NeuronId>, rng: &mut ChaCha8Rng) -> f64 {
        match &self.spec {
            TaskSpec::Habituation { .. } | TaskSpec::SequenceRecall { .. } => 0.0,
            TaskSpec::TraceConditioning {
                lag_windows,
                gap_windows,
                pairing_trials,
                reward,
                ..
            } => {
                let span = lag_windows + 1 + gap_windows;
                let trial = w / span;
                let phase = w % span;
                if trial < *pairing_trials && phase == *lag_windows {
                    *reward
                } else {
                    0.0
                }
            }
            TaskSpec::Bandit {
                arm_a,
                arm_b,
                p_reward,
                p_punish,
                ..
            } => {
                // one draw per window keeps the stream aligned across arms
                let roll = rng.gen::<f64>();
                match action {
                    Some(a) if a == *arm_a => {
                        if roll < *p_reward {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Some(b) if b == *arm_b => {
                        if roll < *p_punish {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                    _ => 0.0,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn ids(v: &[u32]) -> Vec<NeuronId> {
        v.iter().map(|&i| NeuronId(i)).collect()
    }

    #[test]
    fn trace_conditioning_schedule() {
        let task = TaskState::new(TaskSpec::TraceConditioning {
            cs: ids(&[0, 1]),
            us: ids(&[2, 3]),
            lag_windows: 1,
            gap_windows: 1,
            pairing_trials: 2,
            omission_trials: 1,
            reward: 1.0,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let values = ActionValues::default();
        // trial 0: CS at w0, US+reward at w1, blank at w2
        let p0 = task.plan(0, &mut rng, &values, None, 0.0);
        assert_eq!(p0.stimulus.driven_set(), ids(&[0, 1]).into_iter().collect());
        let p1 = task.plan(1, &mut rng, &values, None, 0.0);
        assert_eq!(p1.stimulus.driven_set(), ids(&[2, 3]).into_iter().collect());
        assert_eq!(task.reward(1, None, &mut rng), 1.0);
        assert!(task.plan(2, &mut rng, &values, None, 0.0).stimulus.is_empty());
        assert_eq!(task.reward(2, None, &mut rng), 0.0);
        // omission trial 2: CS at w6, nothing at w7
        let p6 = task.plan(6, &mut rng, &values, None, 0.0);
        assert_eq!(p6.stimulus.driven_set(), ids(&[0, 1]).into_iter().collect());
        assert!(task.plan(7, &mut rng, &values, None, 0.0).stimulus.is_empty());
        assert_eq!(task.reward(7, None, &mut rng), 0.0);
        // past the protocol: silence
        assert!(task.plan(9, &mut rng, &values, None, 0.0).stimulus.is_empty());
    }

    #[test]
    fn sequence_schedule_presents_then_cues_then_stops() {
        let task = TaskState::new(TaskSpec::SequenceRecall {
            items: vec![ids(&[0]), ids(&[1]), ids(&[2])],
            cue_index: 0,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let values = ActionValues::default();
        for w in 0..3u64 {
            let p = task.plan(w, &mut rng, &values, None, 0.0);
            assert_eq!(
                p.stimulus.driven_set(),
                ids(&[w as u32]).into_iter().collect()
            );
        }
        let cue = task.plan(3, &mut rng, &values, None, 0.0);
        assert_eq!(cue.stimulus.driven_set(), ids(&[0]).into_iter().collect());
        assert!(task.plan(4, &mut rng, &values, None, 0.0).stimulus.is_empty());
    }

    #[test]
    fn bandit_exploits_learned_values() {
        let task = TaskState::new(TaskSpec::Bandit {
            context: ids(&[0]),
            arm_a: NeuronId(3),
            arm_b: NeuronId(4),
            p_reward: 1.0,
            p_punish: 1.0,
        });
        let state = StateKey(7);
        let mut values = ActionValues::default();
        values.q.insert((state, NeuronId(4)), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // epsilon 0: always greedy
        let p = task.plan(5, &mut rng, &values, Some(state), 0.0);
        assert_eq!(p.action, Some(NeuronId(4)));
        // rewards follow the picked arm
        assert_eq!(task.reward(5, Some(NeuronId(3)), &mut rng), 1.0);
        assert_eq!(task.reward(5, Some(NeuronId(4)), &mut rng), -1.0);
    }

    #[test]
    fn argmax_ties_break_to_lower_id() {
        let values = ActionValues::default();
        let pick = values.argmax(StateKey(0), &[NeuronId(9), NeuronId(3)]);
        assert_eq!(pick, NeuronId(3));
    }
}
