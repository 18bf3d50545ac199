//! Hippocampal episodic store: theta-indexed traces of dominant bursting
//! patterns, recalled as cue -> successor pairs and merged with current
//! stimulus-driven activity to form the stream of thoughts.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcore::NeuronId;

/// One stored pattern: the dominant ensemble's members plus the NA level at
/// encoding time as salience.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemoryItem {
    pub neurons: BTreeSet<NeuronId>,
    pub salience: f64,
}

/// Ordered item sequence on the theta clock. Consecutive items form implicit
/// cue -> recall pairs. Theta indices are non-decreasing; several items may
/// share a cycle up to the store capacity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodicTrace {
    pub trace_id: u32,
    pub items: Vec<MemoryItem>,
    pub theta_indices: Vec<u64>,
}

impl EpisodicTrace {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn last_theta(&self) -> Option<u64> {
        self.theta_indices.last().copied()
    }
}

/// Where a recall hit landed and what it reactivates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallHit {
    pub trace_id: u32,
    pub position: usize,
    pub recalled: BTreeSet<NeuronId>,
}

/// Outcome of a recall attempt. A hit is only reported when similarity
/// reaches the store's recall threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallResult {
    pub hit: Option<RecallHit>,
    pub similarity: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum EpisodicError {
    #[error("recall cue must be non-empty")]
    EmptyCue,
    #[error("zero-valence conditioning is a no-op")]
    ZeroValence,
}

/// The store itself. Capacity bounds items per theta cycle (working-memory
/// span); the recall threshold is Jaccard similarity on neuron-id sets; ACh
/// at or above the suppression threshold blocks recall entirely.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodicStore {
    pub traces: Vec<EpisodicTrace>,
    pub capacity_per_cycle: usize,
    pub recall_threshold: f64,
    pub ach_suppress: f64,
}

impl EpisodicStore {
    pub fn new(capacity_per_cycle: usize, recall_threshold: f64, ach_suppress: f64) -> Self {
        EpisodicStore {
            traces: Vec::new(),
            capacity_per_cycle,
            recall_threshold,
            ach_suppress,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn item_count(&self) -> usize {
        self.traces.iter().map(|t| t.len()).sum()
    }

    /// Append the dominant pattern at `theta_index`. A new trace opens when
    /// the previous theta index is not consecutive; when a cycle is already
    /// at capacity, the lowest-salience item in that cycle is evicted first.
    pub fn encode(&mut self, members: &BTreeSet<NeuronId>, theta_index: u64, salience: f64) {
        debug_assert!(!members.is_empty(), "encoded pattern must be non-empty");
        let open = match self.traces.last() {
            Some(t) => {
                let last = t.last_theta().expect("traces are never empty");
                last == theta_index || last + 1 == theta_index
            }
            None => false,
        };
        if !open {
            let trace_id = self.traces.len() as u32;
            self.traces.push(EpisodicTrace {
                trace_id,
                items: Vec::new(),
                theta_indices: Vec::new(),
            });
        }
        let trace = self.traces.last_mut().expect("just ensured");

        let in_cycle: Vec<usize> = trace
            .theta_indices
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == theta_index)
            .map(|(i, _)| i)
            .collect();
        if in_cycle.len() >= self.capacity_per_cycle {
            let evict = in_cycle
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    trace.items[a]
                        .salience
                        .partial_cmp(&trace.items[b].salience)
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("cycle at capacity is non-empty");
            trace.items.remove(evict);
            trace.theta_indices.remove(evict);
        }

        trace.items.push(MemoryItem {
            neurons: members.clone(),
            salience,
        });
        trace.theta_indices.push(theta_index);
    }

    /// Cue-driven recall. High ACh suppresses retrieval so current sensory
    /// coding is not disrupted. Otherwise the best-matching stored item that
    /// has a successor wins (ties: most recent trace, then earliest
    /// position) and its successor is returned for forced reactivation.
    pub fn recall(
        &self,
        cue: &BTreeSet<NeuronId>,
        ach_level: f64,
    ) -> Result<RecallResult, EpisodicError> {
        if cue.is_empty() {
            return Err(EpisodicError::EmptyCue);
        }
        if ach_level >= self.ach_suppress {
            return Ok(RecallResult {
                hit: None,
                similarity: 0.0,
            });
        }
        let mut best: Option<(f64, usize, usize)> = None; // (sim, trace idx, pos)
        for (ti, trace) in self.traces.iter().enumerate() {
            if trace.len() < 2 {
                continue;
            }
            for pos in 0..trace.len() - 1 {
                let sim = jaccard(cue, &trace.items[pos].neurons);
                let better = match best {
                    None => true,
                    Some((bs, bt, bp)) => {
                        sim > bs || (sim == bs && (ti > bt || (ti == bt && pos < bp)))
                    }
                };
                if better {
                    best = Some((sim, ti, pos));
                }
            }
        }
        match best {
            Some((sim, ti, pos)) if sim >= self.recall_threshold => Ok(RecallResult {
                hit: Some(RecallHit {
                    trace_id: self.traces[ti].trace_id,
                    position: pos,
                    recalled: self.traces[ti].items[pos + 1].neurons.clone(),
                }),
                similarity: sim,
            }),
            Some((sim, _, _)) => Ok(RecallResult {
                hit: None,
                similarity: sim,
            }),
            None => Ok(RecallResult {
                hit: None,
                similarity: 0.0,
            }),
        }
    }

    /// Dump format: one record per item,
    /// `trace_id, position, theta_index, salience, id;id;id`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for trace in &self.traces {
            for (pos, (item, theta)) in trace
                .items
                .iter()
                .zip(trace.theta_indices.iter())
                .enumerate()
            {
                let ids: Vec<String> = item.neurons.iter().map(|n| n.to_string()).collect();
                let _ = writeln!(
                    out,
                    "{}, {}, {}, {:.6}, {}",
                    trace.trace_id,
                    pos,
                    theta,
                    item.salience,
                    ids.join(";")
                );
            }
        }
        out
    }
}

/// Jaccard similarity of two neuron-id sets.
pub fn jaccard(a: &BTreeSet<NeuronId>, b: &BTreeSet<NeuronId>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    inter / union
}

/// Merge recalled neurons with the stimulus-driven bursting set; the union
/// is forced to bursting in the next window, bypassing inhibition once.
pub fn merge_step(
    recalled: &BTreeSet<NeuronId>,
    stimulus_bursting: &BTreeSet<NeuronId>,
) -> BTreeSet<NeuronId> {
    recalled.union(stimulus_bursting).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[u32]) -> BTreeSet<NeuronId> {
        ids.iter().map(|&i| NeuronId(i)).collect()
    }

    fn store() -> EpisodicStore {
        EpisodicStore::new(9, 0.6, 0.7)
    }

    #[test]
    fn consecutive_windows_share_one_trace() {
        let mut s = store();
        s.encode(&set(&[0, 1]), 0, 0.1);
        s.encode(&set(&[2, 3]), 1, 0.1);
        s.encode(&set(&[4, 5]), 2, 0.1);
        assert_eq!(s.traces.len(), 1);
        assert_eq!(s.traces[0].len(), 3);
    }

    #[test]
    fn theta_gap_opens_new_trace() {
        let mut s = store();
        s.encode(&set(&[0]), 0, 0.1);
        s.encode(&set(&[1]), 5, 0.1);
        assert_eq!(s.traces.len(), 2);
        assert_eq!(s.traces[1].trace_id, 1);
    }

    #[test]
    fn cycle_capacity_evicts_lowest_salience() {
        let mut s = store();
        for i in 0..10u32 {
            // salience dips lowest at i == 4
            let salience = if i == 4 { 0.01 } else { 0.2 + i as f64 * 0.01 };
            s.encode(&set(&[i]), 7, salience);
        }
        assert_eq!(s.traces[0].len(), 9);
        // survivor set oracle: sort by salience, drop the single lowest
        let survivors: BTreeSet<u32> = s.traces[0]
            .items
            .iter()
            .map(|it| it.neurons.iter().next().unwrap().0)
            .collect();
        assert!(!survivors.contains(&4));
        assert_eq!(survivors.len(), 9);
    }

    #[test]
    fn exact_cue_recalls_successor() {
        let mut s = store();
        s.encode(&set(&[0, 1]), 0, 0.1); // A
        s.encode(&set(&[2, 3]), 1, 0.1); // B
        s.encode(&set(&[4, 5]), 2, 0.1); // C
        let r = s.recall(&set(&[0, 1]), 0.2).unwrap();
        assert_eq!(r.similarity, 1.0);
        let hit = r.hit.unwrap();
        assert_eq!(hit.recalled, set(&[2, 3]));
        assert_eq!(hit.position, 0);
    }

    #[test]
    fn empty_store_no_hit() {
        let s = store();
        let r = s.recall(&set(&[0]), 0.2).unwrap();
        assert_eq!(r.similarity, 0.0);
        assert!(r.hit.is_none());
    }

    #[test]
    fn partial_overlap_below_threshold_no_hit() {
        let mut s = store();
        s.encode(&set(&[0, 1, 2, 3]), 0, 0.1); // A, |A| = 4
        s.encode(&set(&[9]), 1, 0.1);
        // cue overlaps A at 2 of 4 elements: jaccard = 2/6 < 0.6
        let cue = set(&[0, 1, 7, 8]);
        let r = s.recall(&cue, 0.2).unwrap();
        assert_eq!(r.similarity, 2.0 / 6.0);
        assert!(r.similarity < 0.6);
        assert!(r.hit.is_none());
    }

    #[test]
    fn last_item_never_matches() {
        let mut s = store();
        s.encode(&set(&[0]), 0, 0.1);
        s.encode(&set(&[1]), 1, 0.1);
        // cue equals the final item, which has no successor
        let r = s.recall(&set(&[1]), 0.2).unwrap();
        assert!(r.hit.is_none());
    }

    #[test]
    fn high_ach_suppresses_recall() {
        let mut s = store();
        s.encode(&set(&[0]), 0, 0.1);
        s.encode(&set(&[1]), 1, 0.1);
        let r = s.recall(&set(&[0]), 0.7).unwrap();
        assert!(r.hit.is_none());
        assert_eq!(r.similarity, 0.0);
    }

    #[test]
    fn empty_cue_is_an_error() {
        let s = store();
        assert_eq!(s.recall(&set(&[]), 0.2).unwrap_err(), EpisodicError::EmptyCue);
    }

    #[test]
    fn equal_similarity_prefers_recent_trace_then_earliest_position() {
        let mut s = store();
        // trace 0: [X, A]
        s.encode(&set(&[0]), 0, 0.1);
        s.encode(&set(&[1]), 1, 0.1);
        // trace 1 (gap): [X, B]
        s.encode(&set(&[0]), 10, 0.1);
        s.encode(&set(&[2]), 11, 0.1);
        let r = s.recall(&set(&[0]), 0.2).unwrap();
        let hit = r.hit.unwrap();
        assert_eq!(hit.trace_id, 1);
        assert_eq!(hit.recalled, set(&[2]));

        // same-trace tie: [X, A, X, B] -> earliest position wins
        let mut s2 = store();
        s2.encode(&set(&[0]), 0, 0.1);
        s2.encode(&set(&[1]), 1, 0.1);
        s2.encode(&set(&[0]), 2, 0.1);
        s2.encode(&set(&[2]), 3, 0.1);
        let hit2 = s2.recall(&set(&[0]), 0.2).unwrap().hit.unwrap();
        assert_eq!(hit2.position, 0);
        assert_eq!(hit2.recalled, set(&[1]));
    }

    #[test]
    fn merge_step_is_set_union() {
        assert_eq!(merge_step(&set(&[]), &set(&[7])), set(&[7]));
        assert_eq!(merge_step(&set(&[0, 1]), &set(&[1, 2])), set(&[0, 1, 2]));
        assert_eq!(merge_step(&set(&[]), &set(&[])), set(&[]));
    }

    #[test]
    fn closed_loop_replays_with_period_three() {
        // store [A, B, C, A]; recall-force loop with no stimulus cycles A,B,C
        let mut s = store();
        let (a, b, c) = (set(&[0, 1]), set(&[2, 3]), set(&[4, 5]));
        s.encode(&a, 0, 0.1);
        s.encode(&b, 1, 0.1);
        s.encode(&c, 2, 0.1);
        s.encode(&a, 3, 0.1);

        let mut current = a.clone();
        let mut seen = Vec::new();
        for _ in 0..12 {
            let r = s.recall(&current, 0.2).unwrap();
            let next = r.hit.expect("loop must keep recalling").recalled;
            seen.push(next.clone());
            current = merge_step(&next, &BTreeSet::new());
        }
        for (i, got) in seen.iter().enumerate() {
            let expect = match i % 3 {
                0 => &b,
                1 => &c,
                _ => &a,
            };
            assert_eq!(got, expect, "window {i}");
        }
    }

    #[test]
    fn dump_lists_every_item_in_order() {
        let mut s = store();
        s.encode(&set(&[3, 1]), 0, 0.5);
        s.encode(&set(&[2]), 1, 0.25);
        let dump = s.dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "0, 0, 0, 0.500000, 1;3");
        assert_eq!(lines[1], "0, 1, 1, 0.250000, 2");
    }
}
