//! Neuromodulation: reward prediction errors, DA/5-HT/NA/ACh level updates,
//! amygdala conditioning, and the four learning gates.
//!
//! Per window the fixed phase order is: prediction error, then modulator
//! levels, then gates. DA carries signed PE plus amygdala reactivation of a
//! positive association; 5-HT carries unsigned PE with a slow decay; NA
//! responds to surprise and emotional salience of either sign; ACh tracks
//! novelty, omission, and negative valence.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcore::NeuronId;

/// The four modulators under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModulatorKind {
    Da,
    Ht5,
    Na,
    Ach,
}

impl fmt::Display for ModulatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModulatorKind::Da => write!(f, "da"),
            ModulatorKind::Ht5 => write!(f, "ht5"),
            ModulatorKind::Na => write!(f, "na"),
            ModulatorKind::Ach => write!(f, "ach"),
        }
    }
}

/// Resting levels. NA sits lowest, matching its slow tonic firing at rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulatorBaseline {
    pub da: f64,
    pub ht5: f64,
    pub na: f64,
    pub ach: f64,
}

impl Default for ModulatorBaseline {
    fn default() -> Self {
        ModulatorBaseline {
            da: 0.3,
            ht5: 0.2,
            na: 0.1,
            ach: 0.2,
        }
    }
}

/// Current levels plus their baselines, all in [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulatorState {
    pub da: f64,
    pub ht5: f64,
    pub na: f64,
    pub ach: f64,
    pub baseline: ModulatorBaseline,
}

impl ModulatorState {
    pub fn at_baseline(baseline: ModulatorBaseline) -> ModulatorState {
        ModulatorState {
            da: baseline.da,
            ht5: baseline.ht5,
            na: baseline.na,
            ach: baseline.ach,
            baseline,
        }
    }

    pub fn level(&self, kind: ModulatorKind) -> f64 {
        match kind {
            ModulatorKind::Da => self.da,
            ModulatorKind::Ht5 => self.ht5,
            ModulatorKind::Na => self.na,
            ModulatorKind::Ach => self.ach,
        }
    }
}

/// Gain constants for the level-update formulas, all config-exposed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModGains {
    pub k_da: f64,
    pub k_ht: f64,
    pub k_na: f64,
    pub k_ach: f64,
    /// 5-HT half-life toward baseline, in windows.
    pub ht_half_life_windows: f64,
}

impl Default for ModGains {
    fn default() -> Self {
        ModGains {
            k_da: 0.5,
            k_ht: 0.4,
            k_na: 0.6,
            k_ach: 0.5,
            ht_half_life_windows: 3.0,
        }
    }
}

/// Canonical key of a neuron set: FNV-1a over the sorted ids. Stable across
/// runs and platforms, so metric files diff cleanly.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct StateKey(pub u64);

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

pub fn state_key(neurons: &BTreeSet<NeuronId>) -> StateKey {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for n in neurons {
        for byte in n.0.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    StateKey(h)
}

/// Learned reward predictions per attended state, bounded to [-1, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueTable {
    pub v: std::collections::BTreeMap<StateKey, f64>,
    pub learning_rate: f64,
}

impl ValueTable {
    pub fn new(learning_rate: f64) -> ValueTable {
        ValueTable {
            v: Default::default(),
            learning_rate,
        }
    }

    pub fn value_of(&self, key: StateKey) -> f64 {
        self.v.get(&key).copied().unwrap_or(0.0)
    }
}

/// Prediction error against the learned value of the attended state, then a
/// value update toward the observed reward. Missing keys read as zero.
pub fn compute_pe(reward: f64, key: StateKey, vt: &mut ValueTable) -> f64 {
    let v = vt.value_of(key);
    let delta = reward - v;
    let updated = (v + vt.learning_rate * delta).clamp(-1.0, 1.0);
    vt.v.insert(key, updated);
    delta
}

/// Pavlovian associations: state key -> valence, latest conditioning wins.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AmygdalaStore {
    pub associations: std::collections::BTreeMap<StateKey, f64>,
}

impl AmygdalaStore {
    /// Bind a percept to an emotional valence. Zero valence is rejected;
    /// there is nothing to associate.
    pub fn condition(&mut self, key: StateKey, us_valence: f64) -> Result<(), NeuromodError> {
        if us_valence == 0.0 {
            return Err(NeuromodError::ZeroValence);
        }
        self.associations
            .insert(key, us_valence.clamp(-1.0, 1.0));
        Ok(())
    }

    pub fn valence_of(&self, key: StateKey) -> f64 {
        self.associations.get(&key).copied().unwrap_or(0.0)
    }
}

/// Max-magnitude stored valence among the active keys; zero when none carry
/// an association. This reactivation is fast and precedes any reward.
pub fn amygdala_react(active_keys: &[StateKey], store: &AmygdalaStore) -> f64 {
    let mut best = 0.0f64;
    for k in active_keys {
        let v = store.valence_of(*k);
        if v.abs() > best.abs() {
            best = v;
        }
    }
    best
}

/// New modulator levels from this window's signals. DA is recomputed fresh
/// each window (fast transients); 5-HT decays slowly toward baseline so its
/// response outlasts DA's.
pub fn update_modulators(
    prev: &ModulatorState,
    delta: f64,
    novelty_count: usize,
    total_excitatory: usize,
    amygdala_valence: f64,
    gains: &ModGains,
) -> ModulatorState {
    let b = prev.baseline;
    let novelty_norm = novelty_count as f64 / total_excitatory.max(1) as f64;

    let da = b.da + gains.k_da * (delta + amygdala_valence.max(0.0));

    let decay = 0.5f64.powf(1.0 / gains.ht_half_life_windows.max(f64::EPSILON));
    let decayed = b.ht5 + (prev.ht5 - b.ht5) * decay;
    let impulse = b.ht5 + gains.k_ht * delta.abs();
    let ht5 = decayed.max(impulse);

    let na = b.na + gains.k_na * (delta.abs() + amygdala_valence.abs());
    let ach = b.ach
        + gains.k_ach * (novelty_norm + (-delta).max(0.0) + (-amygdala_valence).max(0.0));

    ModulatorState {
        da: da.clamp(0.0, 1.0),
        ht5: ht5.clamp(0.0, 1.0),
        na: na.clamp(0.0, 1.0),
        ach: ach.clamp(0.0, 1.0),
        baseline: b,
    }
}

/// Which of the four reinforcement situations a learning event falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    ReinforceReward,
    AvoidPunishment,
    UnlearnRewardPath,
    ReinforceNonPunishment,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::ReinforceReward => write!(f, "reinforce_reward"),
            Scenario::AvoidPunishment => write!(f, "avoid_punishment"),
            Scenario::UnlearnRewardPath => write!(f, "unlearn_reward_path"),
            Scenario::ReinforceNonPunishment => write!(f, "reinforce_non_punishment"),
        }
    }
}

/// Valence axis of the current state: learned association when present,
/// otherwise the sign of the raw outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValenceSign {
    Positive,
    Negative,
}

impl ValenceSign {
    /// Pleasure is presumed when neither an association nor a raw outcome
    /// says otherwise.
    pub fn infer(amygdala_valence: f64, raw_reward: f64) -> ValenceSign {
        if amygdala_valence < 0.0 || (amygdala_valence == 0.0 && raw_reward < 0.0) {
            ValenceSign::Negative
        } else {
            ValenceSign::Positive
        }
    }
}

/// The four neuromodulator-driven learning scalars. Memory gates scale
/// eligibility; action gates adjust action values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GateSet {
    /// NA-driven memory consolidation gate.
    pub memory_learn: f64,
    /// ACh-driven memory unlearning gate.
    pub memory_unlearn: f64,
    /// DA-driven action reinforcement gate.
    pub action_reinforce: f64,
    /// 5-HT-driven action aversion gate.
    pub action_avert: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum NeuromodError {
    #[error("zero prediction error produces no learning event")]
    ZeroDelta,
    #[error("zero-valence conditioning is a no-op")]
    ZeroValence,
}

/// Map (PE sign x valence) to a scenario and its gates. Gate magnitudes are
/// the current modulator levels; each role reads exactly one modulator.
pub fn classify_scenario(
    delta: f64,
    valence: ValenceSign,
    mods: &ModulatorState,
) -> Result<(Scenario, GateSet), NeuromodError> {
    if delta == 0.0 {
        return Err(NeuromodError::ZeroDelta);
    }
    let mut gates = GateSet::default();
    let scenario = match (delta > 0.0, valence) {
        (true, ValenceSign::Positive) => {
            gates.memory_learn = mods.na;
            gates.action_reinforce = mods.da;
            Scenario::ReinforceReward
        }
        (true, ValenceSign::Negative) => {
            gates.memory_learn = mods.na;
            gates.action_avert = mods.ht5;
            Scenario::AvoidPunishment
        }
        (false, ValenceSign::Positive) => {
            gates.memory_unlearn = mods.ach;
            gates.action_avert = mods.ht5;
            Scenario::UnlearnRewardPath
        }
        (false, ValenceSign::Negative) => {
            gates.memory_unlearn = mods.ach;
            gates.action_reinforce = mods.da;
            Scenario::ReinforceNonPunishment
        }
    };
    Ok((scenario, gates))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(ids: &[u32]) -> StateKey {
        state_key(&ids.iter().map(|&i| NeuronId(i)).collect())
    }

    fn mods() -> ModulatorState {
        ModulatorState::at_baseline(ModulatorBaseline::default())
    }

    #[test]
    fn unexpected_reward_full_positive_pe() {
        let mut vt = ValueTable::new(0.2);
        assert_eq!(compute_pe(1.0, key_of(&[1]), &mut vt), 1.0);
    }

    #[test]
    fn fully_predicted_reward_zero_pe() {
        let mut vt = ValueTable::new(0.2);
        vt.v.insert(key_of(&[1]), 1.0);
        assert_eq!(compute_pe(1.0, key_of(&[1]), &mut vt), 0.0);
    }

    #[test]
    fn omitted_reward_full_negative_pe() {
        let mut vt = ValueTable::new(0.2);
        vt.v.insert(key_of(&[1]), 1.0);
        assert_eq!(compute_pe(0.0, key_of(&[1]), &mut vt), -1.0);
    }

    #[test]
    fn value_moves_toward_reward() {
        let mut vt = ValueTable::new(0.5);
        compute_pe(1.0, key_of(&[1]), &mut vt);
        assert_eq!(vt.value_of(key_of(&[1])), 0.5);
        compute_pe(1.0, key_of(&[1]), &mut vt);
        assert_eq!(vt.value_of(key_of(&[1])), 0.75);
    }

    #[test]
    fn quiet_window_leaves_levels_at_baseline() {
        let next = update_modulators(&mods(), 0.0, 0, 10, 0.0, &ModGains::default());
        assert_eq!(next, mods());
    }

    #[test]
    fn negative_pe_drops_da_and_raises_ht5() {
        let next = update_modulators(&mods(), -1.0, 0, 10, 0.0, &ModGains::default());
        assert!(next.da < next.baseline.da);
        assert!(next.ht5 > next.baseline.ht5);
    }

    #[test]
    fn levels_match_closed_form() {
        // delta = 0.5, novelty 2 of 8, valence 0, defaults
        let next = update_modulators(&mods(), 0.5, 2, 8, 0.0, &ModGains::default());
        assert!((next.da - (0.3 + 0.5 * 0.5)).abs() < 1e-12);
        assert!((next.ht5 - (0.2 + 0.4 * 0.5)).abs() < 1e-12);
        assert!((next.na - (0.1 + 0.6 * 0.5)).abs() < 1e-12);
        assert!((next.ach - (0.2 + 0.5 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn ht5_is_unsigned_in_delta() {
        let up = update_modulators(&mods(), 0.8, 0, 10, 0.0, &ModGains::default());
        let down = update_modulators(&mods(), -0.8, 0, 10, 0.0, &ModGains::default());
        assert_eq!(up.ht5, down.ht5);
    }

    #[test]
    fn ht5_decays_slower_than_da_recovers() {
        let spike = update_modulators(&mods(), -1.0, 0, 10, 0.0, &ModGains::default());
        let after = update_modulators(&spike, 0.0, 0, 10, 0.0, &ModGains::default());
        // DA snaps back to baseline; 5-HT is still elevated
        assert_eq!(after.da, after.baseline.da);
        assert!(after.ht5 > after.baseline.ht5 + 0.1);
    }

    #[test]
    fn positive_association_reactivates_da() {
        let next = update_modulators(&mods(), 0.0, 0, 10, 1.0, &ModGains::default());
        assert!((next.da - 0.8).abs() < 1e-12);
        // negative associations do not push DA below baseline on their own
        let fear = update_modulators(&mods(), 0.0, 0, 10, -1.0, &ModGains::default());
        assert_eq!(fear.da, fear.baseline.da);
        assert!(fear.na > fear.baseline.na);
        assert!(fear.ach > fear.baseline.ach);
    }

    #[test]
    fn quadrants_map_to_documented_scenarios_and_gates() {
        let m = ModulatorState {
            da: 0.6,
            ht5: 0.5,
            na: 0.4,
            ach: 0.3,
            baseline: ModulatorBaseline::default(),
        };
        let (s, g) = classify_scenario(0.8, ValenceSign::Positive, &m).unwrap();
        assert_eq!(s, Scenario::ReinforceReward);
        assert_eq!((g.memory_learn, g.action_reinforce), (0.4, 0.6));
        assert_eq!((g.memory_unlearn, g.action_avert), (0.0, 0.0));

        let (s, g) = classify_scenario(0.8, ValenceSign::Negative, &m).unwrap();
        assert_eq!(s, Scenario::AvoidPunishment);
        assert_eq!((g.memory_learn, g.action_avert), (0.4, 0.5));
        assert_eq!((g.memory_unlearn, g.action_reinforce), (0.0, 0.0));

        let (s, g) = classify_scenario(-0.8, ValenceSign::Positive, &m).unwrap();
        assert_eq!(s, Scenario::UnlearnRewardPath);
        assert_eq!((g.memory_unlearn, g.action_avert), (0.3, 0.5));
        assert_eq!((g.memory_learn, g.action_reinforce), (0.0, 0.0));

        let (s, g) = classify_scenario(-0.8, ValenceSign::Negative, &m).unwrap();
        assert_eq!(s, Scenario::ReinforceNonPunishment);
        assert_eq!((g.memory_unlearn, g.action_reinforce), (0.3, 0.6));
        assert_eq!((g.memory_learn, g.action_avert), (0.0, 0.0));
    }

    #[test]
    fn zero_delta_is_no_learning_event() {
        assert_eq!(
            classify_scenario(0.0, ValenceSign::Positive, &mods()).unwrap_err(),
            NeuromodError::ZeroDelta
        );
    }

    #[test]
    fn conditioning_stores_and_overwrites() {
        let mut store = AmygdalaStore::default();
        store.condition(key_of(&[1]), -1.0).unwrap();
        assert_eq!(store.valence_of(key_of(&[1])), -1.0);
        store.condition(key_of(&[1]), 0.5).unwrap();
        assert_eq!(store.valence_of(key_of(&[1])), 0.5);
        assert_eq!(store.valence_of(key_of(&[9])), 0.0);
        assert_eq!(
            store.condition(key_of(&[2]), 0.0).unwrap_err(),
            NeuromodError::ZeroValence
        );
    }

    #[test]
    fn react_picks_max_magnitude_valence() {
        let mut store = AmygdalaStore::default();
        store.condition(key_of(&[1]), 0.3).unwrap();
        store.condition(key_of(&[2]), -0.9).unwrap();
        assert_eq!(amygdala_react(&[], &store), 0.0);
        assert_eq!(
            amygdala_react(&[key_of(&[1]), key_of(&[2])], &store),
            -0.9
        );
        assert_eq!(amygdala_react(&[key_of(&[7])], &store), 0.0);
    }

    #[test]
    fn state_key_is_order_independent_and_stable() {
        let a: BTreeSet<NeuronId> = [NeuronId(3), NeuronId(1), NeuronId(2)].into();
        let b: BTreeSet<NeuronId> = [NeuronId(1), NeuronId(2), NeuronId(3)].into();
        assert_eq!(state_key(&a), state_key(&b));
        assert_ne!(state_key(&a), state_key(&[NeuronId(1)].into()));
    }

    #[test]
    fn valence_sign_inference() {
        assert_eq!(ValenceSign::infer(0.5, -1.0), ValenceSign::Positive);
        assert_eq!(ValenceSign::infer(-0.5, 1.0), ValenceSign::Negative);
        assert_eq!(ValenceSign::infer(0.0, -1.0), ValenceSign::Negative);
        assert_eq!(ValenceSign::infer(0.0, 0.0), ValenceSign::Positive);
    }
}
