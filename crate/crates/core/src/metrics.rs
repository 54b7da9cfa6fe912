//! Evaluation: tolerance-window event matching and readability rates.

use serde::{Deserialize, Serialize};

use crate::barlines::discontinuity_rate;
use crate::decoder::{reconstruct_strums, Transcription};
use crate::error::Result;
use crate::timeline::{BarlineTrack, StrumSequence};
use crate::vocabulary::Vocabulary;

pub const STRUM_TOLERANCE_SEC: f64 = 0.05;
pub const BARLINE_TOLERANCE_SEC: f64 = 0.07;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MatchResult {
    pub fn from_counts(tp: usize, n_reference: usize, n_estimate: usize) -> Self {
        let fp = n_estimate - tp;
        let fn_ = n_reference - tp;
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Maximum one-to-one matching between reference and estimated event times,
/// where an edge exists when the times differ by at most `tolerance_sec`.
pub fn match_events(reference: &[f64], estimate: &[f64], tolerance_sec: f64) -> MatchResult {
    let mut est_sorted: Vec<(f64, usize)> = estimate.iter().copied().zip(0..).collect();
    est_sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let adjacency: Vec<Vec<usize>> = reference
        .iter()
        .map(|&r| {
            let lo = est_sorted.partition_point(|&(e, _)| e < r - tolerance_sec);
            est_sorted[lo..]
                .iter()
                .take_while(|&&(e, _)| e <= r + tolerance_sec)
                .filter(|&&(e, _)| (e - r).abs() <= tolerance_sec)
                .map(|&(_, j)| j)
                .collect()
        })
        .collect();
    let tp = hopcroft_karp(&adjacency, estimate.len());
    MatchResult::from_counts(tp, reference.len(), estimate.len())
}

/// Size of a maximum matching in the bipartite graph `adj` (left -> right).
fn hopcroft_karp(adj: &[Vec<usize>], n_right: usize) -> usize {
    const NIL: usize = usize::MAX;
    let n_left = adj.len();
    let mut match_left = vec![NIL; n_left];
    let mut match_right = vec![NIL; n_right];
    let mut dist = vec![0usize; n_left];
    let mut matched = 0;

    fn dfs(
        u: usize,
        adj: &[Vec<usize>],
        match_left: &mut [usize],
        match_right: &mut [usize],
        dist: &mut [usize],
    ) -> bool {
        for &v in &adj[u] {
            let w = match_right[v];
            let free_or_deeper = w == NIL
                || (dist[w] == dist[u] + 1 && dfs(w, adj, match_left, match_right, dist));
            if free_or_deeper {
                match_left[u] = v;
                match_right[v] = u;
                return true;
            }
        }
        dist[u] = usize::MAX;
        false
    }

    loop {
        // Layered BFS from free left vertices.
        let mut queue = std::collections::VecDeque::new();
        for u in 0..n_left {
            if match_left[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_right[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        for u in 0..n_left {
            if match_left[u] == NIL && dfs(u, adj, &mut match_left, &mut match_right, &mut dist) {
                matched += 1;
            }
        }
    }
    matched
}

/// Pattern changes per measure. Only pattern starts can be changes, and the
/// first pattern has no predecessor.
pub fn pattern_discontinuity(t: &Transcription) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    let starts: Vec<&str> = t.pattern_starts().map(|e| e.pattern_id.as_str()).collect();
    let changes = starts.windows(2).filter(|w| w[0] != w[1]).count();
    changes as f64 / t.len() as f64
}

/// Time-signature changes per measure.
pub fn timesig_discontinuity(t: &Transcription) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    let changes = t
        .entries
        .windows(2)
        .filter(|w| w[0].time_signature != w[1].time_signature)
        .count();
    changes as f64 / t.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub song_id: Option<String>,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub pattern_disc: f64,
    pub timesig_disc: f64,
    pub measure_disc: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Compares the written-out transcription with ground-truth strums and adds
/// the three discontinuity rates.
pub fn evaluate_transcription(
    t: &Transcription,
    bars: &BarlineTrack,
    vocab: &Vocabulary,
    ground_truth: &StrumSequence,
    tolerance_sec: f64,
) -> Result<EvaluationReport> {
    let reconstructed = reconstruct_strums(t, bars, vocab)?;
    let m = match_events(ground_truth.times(), reconstructed.times(), tolerance_sec);
    Ok(EvaluationReport {
        song_id: None,
        f1: m.f1,
        precision: m.precision,
        recall: m.recall,
        pattern_disc: pattern_discontinuity(t),
        timesig_disc: timesig_discontinuity(t),
        measure_disc: discontinuity_rate(bars),
        true_positives: m.true_positives,
        false_positives: m.false_positives,
        false_negatives: m.false_negatives,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSem {
    pub mean: f64,
    /// Standard error of the mean (sample standard deviation / sqrt(n)).
    pub sem: f64,
}

impl MeanSem {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, sem: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, sem: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self {
            mean,
            sem: (var / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub songs: usize,
    pub f1: MeanSem,
    pub precision: MeanSem,
    pub recall: MeanSem,
    pub pattern_disc: MeanSem,
    pub timesig_disc: MeanSem,
    pub measure_disc: MeanSem,
}

pub fn aggregate(reports: &[EvaluationReport]) -> AggregateReport {
    let col = |f: fn(&EvaluationReport) -> f64| {
        MeanSem::of(&reports.iter().map(f).collect::<Vec<_>>())
    };
    AggregateReport {
        songs: reports.len(),
        f1: col(|r| r.f1),
        precision: col(|r| r.precision),
        recall: col(|r| r.recall),
        pattern_disc: col(|r| r.pattern_disc),
        timesig_disc: col(|r| r.timesig_disc),
        measure_disc: col(|r| r.measure_disc),
    }
}
