//! Viterbi decoding of the minimum-cost pattern sequence.
//!
//! The state at each measure is a (pattern, phase) pair; the second measure
//! of a two-measure pattern is reached only from its first measure, at no
//! cost. Transition costs are charged between consecutive pattern starts.
//! Because the transition cost only depends on whether the pattern and its
//! time signature change, the best predecessor of every pattern can be found
//! from per-signature minima, so one step costs O(patterns x signatures)
//! instead of O(patterns^2).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{emission_cost_positions, transition_cost, DecoderConfig};
use crate::timeline::{BarlineTrack, MeasureStrums, StrumSequence};
use crate::vocabulary::{TimeSignature, Vocabulary};

/// A Viterbi state: which pattern, and which of its measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecoderState {
    pub pattern_index: usize,
    pub phase: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptionEntry {
    #[serde(rename = "index")]
    pub measure_index: usize,
    pub pattern_id: String,
    pub phase: usize,
    pub time_signature: TimeSignature,
}

/// One pattern assignment per measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcription {
    pub total_cost: f64,
    #[serde(rename = "measures")]
    pub entries: Vec<TranscriptionEntry>,
}

impl Transcription {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Pattern id of every pattern occurrence, in order.
    pub fn pattern_starts(&self) -> impl Iterator<Item = &TranscriptionEntry> {
        self.entries.iter().filter(|e| e.phase == 0)
    }

    /// Checks coverage and phase consistency against `vocab`.
    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        let mut expected_phase1: Option<&str> = None;
        for (m, e) in self.entries.iter().enumerate() {
            if e.measure_index != m {
                return Err(Error::InvalidInput(format!(
                    "transcription entry {m} has index {}",
                    e.measure_index
                )));
            }
            let p = vocab
                .by_id(&e.pattern_id)
                .ok_or_else(|| Error::UnknownPattern(e.pattern_id.clone()))?;
            if p.time_signature() != e.time_signature {
                return Err(Error::InvalidInput(format!(
                    "measure {m}: pattern `{}` is {}, not {}",
                    p.id(),
                    p.time_signature(),
                    e.time_signature
                )));
            }
            match (expected_phase1.take(), e.phase) {
                (Some(id), 1) if id == e.pattern_id => {}
                (Some(id), _) => {
                    return Err(Error::InvalidInput(format!(
                        "measure {m}: two-measure pattern `{id}` is cut short"
                    )))
                }
                (None, 0) => {
                    if p.measures() == 2 {
                        expected_phase1 = Some(p.id());
                    }
                }
                (None, phase) => {
                    return Err(Error::InvalidInput(format!(
                        "measure {m}: phase {phase} without a preceding pattern start"
                    )))
                }
            }
        }
        if let Some(id) = expected_phase1 {
            return Err(Error::InvalidInput(format!(
                "two-measure pattern `{id}` runs past the final measure"
            )));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcription serializes")
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

#[derive(Clone, Copy)]
struct GroupBest {
    value: f64,
    index: usize,
}

fn better(a: (f64, u8, usize), b: (f64, u8, usize)) -> bool {
    // Lexicographic on (cost, stay-rank, pattern index).
    a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2))
}

/// Finds the covering pattern sequence with the lowest total cost.
pub fn decode(
    measures: &[MeasureStrums],
    vocab: &Vocabulary,
    cfg: &DecoderConfig,
) -> Result<Transcription> {
    cfg.validate()?;
    let n_measures = measures.len();
    if n_measures == 0 {
        return Err(Error::EmptySong);
    }
    let patterns = vocab.patterns();
    let n_patterns = patterns.len();

    let signatures: Vec<TimeSignature> = vocab.signatures().collect();
    let sig_of: Vec<usize> = patterns
        .iter()
        .map(|p| {
            signatures
                .iter()
                .position(|&s| s == p.time_signature())
                .expect("signature indexed")
        })
        .collect();
    let switch_same = cfg.c1;
    let switch_other = cfg.c1 + cfg.c2;

    // Cost of the best path whose pattern starting at m is n.
    let mut start_cost: Vec<Vec<Option<f64>>> = vec![vec![None; n_patterns]; n_measures];
    let mut start_pred: Vec<Vec<Option<usize>>> = vec![vec![None; n_patterns]; n_measures];
    // Cost of the best path whose pattern ending at m is n.
    let mut end_cost: Vec<Vec<Option<f64>>> = vec![vec![None; n_patterns]; n_measures];

    let mut group_best: Vec<Option<GroupBest>> = vec![None; signatures.len()];
    for m in 0..n_measures {
        if m > 0 {
            group_best.iter_mut().for_each(|g| *g = None);
            for (n, cost) in end_cost[m - 1].iter().enumerate() {
                if let Some(v) = *cost {
                    let g = &mut group_best[sig_of[n]];
                    if g.is_none_or(|b| v < b.value) {
                        *g = Some(GroupBest { value: v, index: n });
                    }
                }
            }
        }

        for (n, pattern) in patterns.iter().enumerate() {
            let span = pattern.measures();
            if m + span > n_measures {
                continue;
            }
            let Some(emission) = emission_cost_positions(&measures[m..m + span], pattern, cfg).value() else {
                continue;
            };

            let (prior, pred) = if m == 0 {
                (0.0, None)
            } else {
                let mut best: Option<(f64, u8, usize)> = None;
                let mut offer = |cand: (f64, u8, usize)| {
                    if best.is_none_or(|b| better(cand, b)) {
                        best = Some(cand);
                    }
                };
                if let Some(v) = end_cost[m - 1][n] {
                    offer((v, 0, n));
                }
                for (g, entry) in group_best.iter().enumerate() {
                    let Some(b) = entry else { continue };
                    if g == sig_of[n] {
                        if b.index != n {
                            offer((b.value + switch_same, 1, b.index));
                        }
                    } else {
                        offer((b.value + switch_other, 1, b.index));
                    }
                }
                match best {
                    Some((v, _, p)) => (v, Some(p)),
                    None => continue,
                }
            };

            let total = prior + emission;
            start_cost[m][n] = Some(total);
            start_pred[m][n] = pred;
            end_cost[m + span - 1][n] = Some(total);
        }
    }

    let last = n_measures - 1;
    let mut final_state: Option<(f64, usize)> = None;
    for (n, cost) in end_cost[last].iter().enumerate() {
        if let Some(v) = *cost {
            if final_state.is_none_or(|(b, _)| v < b) {
                final_state = Some((v, n));
            }
        }
    }
    let Some((total_cost, mut n)) = final_state else {
        let measure = (0..n_measures)
            .find(|&m| {
                end_cost[m].iter().all(Option::is_none) && start_cost[m].iter().all(Option::is_none)
            })
            .unwrap_or(last);
        return Err(Error::Infeasible { measure });
    };

    let mut entries = Vec::with_capacity(n_measures);
    let mut end = last;
    loop {
        let pattern = &patterns[n];
        let start = end + 1 - pattern.measures();
        for phase in (0..pattern.measures()).rev() {
            entries.push(TranscriptionEntry {
                measure_index: start + phase,
                pattern_id: pattern.id().to_string(),
                phase,
                time_signature: pattern.time_signature(),
            });
        }
        if start == 0 {
            break;
        }
        n = start_pred[start][n].expect("reachable state has a predecessor");
        end = start - 1;
    }
    entries.reverse();
    Ok(Transcription {
        total_cost,
        entries,
    })
}

/// Recomputes the cost of `t` from its emissions and transitions.
pub fn transcription_cost(
    t: &Transcription,
    measures: &[MeasureStrums],
    vocab: &Vocabulary,
    cfg: &DecoderConfig,
) -> Result<f64> {
    if t.len() != measures.len() {
        return Err(Error::MeasureCountMismatch {
            transcription: t.len(),
            bars: measures.len(),
        });
    }
    t.validate(vocab)?;
    let mut total = 0.0;
    let mut prev: Option<usize> = None;
    for e in t.pattern_starts() {
        let n = vocab.index_of(&e.pattern_id).expect("validated");
        let pattern = &vocab.patterns()[n];
        let m = e.measure_index;
        if let Some(p) = prev {
            total += transition_cost(&vocab.patterns()[p], pattern, cfg);
        }
        match emission_cost_positions(&measures[m..m + pattern.measures()], pattern, cfg).value() {
            Some(v) => total += v,
            None => return Ok(f64::INFINITY),
        }
        prev = Some(n);
    }
    Ok(total)
}

/// Writes the decoded patterns out as nominal strum times on `bars`.
pub fn reconstruct_strums(
    t: &Transcription,
    bars: &BarlineTrack,
    vocab: &Vocabulary,
) -> Result<StrumSequence> {
    if t.len() != bars.measure_count() {
        return Err(Error::MeasureCountMismatch {
            transcription: t.len(),
            bars: bars.measure_count(),
        });
    }
    let mut times = Vec::new();
    for e in &t.entries {
        let p = vocab
            .by_id(&e.pattern_id)
            .ok_or_else(|| Error::UnknownPattern(e.pattern_id.clone()))?;
        if e.phase >= p.measures() {
            return Err(Error::InvalidInput(format!(
                "measure {}: pattern `{}` has no phase {}",
                e.measure_index, e.pattern_id, e.phase
            )));
        }
        times.extend(
            p.measure_onsets(e.phase)
                .iter()
                .map(|&pos| bars.time_at(e.measure_index, pos)),
        );
    }
    Ok(StrumSequence::from_unsorted(times))
}
