//! Brute-force oracles and fixture vocabularies shared by the integration
//! tests. Oracles enumerate every candidate and never call the optimized
//! code paths they are checked against.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strumscribe::{
    BarlineTrack, DecoderConfig, MeasureStrums, PostprocConfig, RhythmicPattern, TimeSignature,
    Vocabulary,
};

pub fn ts(s: &str) -> TimeSignature {
    s.parse().unwrap()
}

pub fn pattern(id: &str, sig: &str, onsets: &[&[f64]]) -> RhythmicPattern {
    RhythmicPattern::new(id, ts(sig), onsets.iter().map(|m| m.to_vec()).collect()).unwrap()
}

fn eighths(steps: &[u32]) -> Vec<f64> {
    steps.iter().map(|&s| s as f64 / 8.0).collect()
}

/// Common 4/4 strumming patterns on an eighth-note grid. The two-measure
/// patterns are concatenations of one-measure ones, so a repeated
/// two-measure pattern can also be written as alternating single measures.
pub fn strumming_vocab_4_4() -> Vocabulary {
    let one = |id: &str, steps: &[u32]| {
        RhythmicPattern::new(id, ts("4/4"), vec![eighths(steps)]).unwrap()
    };
    let two = |id: &str, a: &[u32], b: &[u32]| {
        RhythmicPattern::new(id, ts("4/4"), vec![eighths(a), eighths(b)]).unwrap()
    };
    Vocabulary::new(vec![
        one("whole", &[0]),
        one("half", &[0, 4]),
        one("quarters", &[0, 2, 4, 6]),
        one("eighths", &[0, 1, 2, 3, 4, 5, 6, 7]),
        one("d_du_udu", &[0, 2, 3, 5, 6, 7]),
        one("d_du_u_u", &[0, 2, 3, 5, 7]),
        one("d_dudu", &[0, 2, 3, 4, 5]),
        one("dud_du", &[0, 1, 2, 4, 5]),
        one("tresillo", &[0, 3, 6]),
        one("dd_ud", &[0, 2, 5, 6]),
        two("ballad", &[0, 4], &[0, 2, 3, 5, 6, 7]),
        two("charleston", &[0, 3, 6], &[0, 2, 4, 6]),
    ])
    .unwrap()
}

/// 3/4 and 4/4 patterns. A single strum per measure reads the same in
/// both signatures, so "dotted_half" and "whole" have identical positions.
pub fn mixed_vocab() -> Vocabulary {
    let third = 1.0 / 3.0;
    let sixth = 1.0 / 6.0;
    Vocabulary::new(vec![
        pattern("dotted_half", "3/4", &[&[0.0]]),
        pattern("waltz", "3/4", &[&[0.0, third, 2.0 * third]]),
        pattern("waltz_du", "3/4", &[&[0.0, third, 3.0 * sixth, 2.0 * third, 5.0 * sixth]]),
        pattern("waltz_d_du", "3/4", &[&[0.0, third, 2.0 * third, 5.0 * sixth]]),
        pattern("whole", "4/4", &[&[0.0]]),
        pattern("half", "4/4", &[&[0.0, 0.5]]),
        pattern("quarters", "4/4", &[&[0.0, 0.25, 0.5, 0.75]]),
        pattern("d_du_udu", "4/4", &[&eighths(&[0, 2, 3, 5, 6, 7])]),
        pattern("tresillo", "4/4", &[&eighths(&[0, 3, 6])]),
    ])
    .unwrap()
}

// ---------------------------------------------------------------- emission

fn nearest_sq(x: f64, set: &[f64]) -> f64 {
    set.iter().map(|&y| (x - y).abs()).fold(f64::INFINITY, f64::min).powi(2)
}

/// Two-way mismatch by exhaustive nearest-neighbour search; `None` when
/// exactly one side of some measure is empty.
pub fn oracle_emission(observed: &[&[f64]], p: &RhythmicPattern, sigma: f64) -> Option<f64> {
    let scale = 2.0 * sigma * sigma;
    let mut total = 0.0;
    for (k, obs) in observed.iter().enumerate() {
        let pat = p.measure_onsets(k);
        match (obs.is_empty(), pat.is_empty()) {
            (true, true) => {}
            (false, false) => {
                let fwd: f64 = obs.iter().map(|&s| nearest_sq(s, pat)).sum();
                let bwd: f64 = pat.iter().map(|&r| nearest_sq(r, obs)).sum();
                total += (fwd + bwd) / scale;
            }
            _ => return None,
        }
    }
    Some(total)
}

// ----------------------------------------------------------------- viterbi

/// Minimum-cost segmentation found by exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct ViterbiOracle {
    pub cost: f64,
    /// Pattern index of every measure.
    pub per_measure: Vec<usize>,
    pub candidates: usize,
}

fn tie_key(segments: &[usize]) -> Vec<(bool, usize)> {
    // Compared from the last segment backwards: the last segment prefers the
    // lowest index, every earlier one prefers continuing its successor, then
    // the lowest index.
    let mut key = Vec::with_capacity(segments.len());
    for (i, &p) in segments.iter().enumerate().rev() {
        let switches = i + 1 < segments.len() && segments[i + 1] != p;
        key.push((switches, p));
    }
    key
}

pub fn viterbi_oracle(
    measures: &[MeasureStrums],
    vocab: &Vocabulary,
    cfg: &DecoderConfig,
) -> Option<ViterbiOracle> {
    let patterns = vocab.patterns();
    let n = measures.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut candidates = 0;
    let mut stack: Vec<usize> = Vec::new();

    fn recurse(
        m: usize,
        acc: f64,
        stack: &mut Vec<usize>,
        measures: &[MeasureStrums],
        patterns: &[RhythmicPattern],
        cfg: &DecoderConfig,
        best: &mut Option<(f64, Vec<usize>)>,
        candidates: &mut usize,
    ) {
        if m == measures.len() {
            *candidates += 1;
            let better = match best {
                None => true,
                Some((c, segs)) => acc < *c || (acc == *c && tie_key(stack) < tie_key(segs)),
            };
            if better {
                *best = Some((acc, stack.clone()));
            }
            return;
        }
        for (idx, p) in patterns.iter().enumerate() {
            let span = p.measures();
            if m + span > measures.len() {
                continue;
            }
            let obs: Vec<&[f64]> = measures[m..m + span].iter().map(|s| s.positions.as_slice()).collect();
            let Some(e) = oracle_emission(&obs, p, cfg.sigma) else { continue };
            let mut next = acc;
            if let Some(&prev) = stack.last() {
                let q: &RhythmicPattern = &patterns[prev];
                next += if prev == idx {
                    0.0
                } else if q.time_signature() == p.time_signature() {
                    cfg.c1
                } else {
                    cfg.c1 + cfg.c2
                };
            }
            next += e;
            stack.push(idx);
            recurse(m + span, next, stack, measures, patterns, cfg, best, candidates);
            stack.pop();
        }
    }

    recurse(0, 0.0, &mut stack, measures, patterns, cfg, &mut best, &mut candidates);
    let (cost, segs) = best?;
    let mut per_measure = Vec::with_capacity(n);
    for idx in segs {
        per_measure.extend(std::iter::repeat_n(idx, patterns[idx].measures()));
    }
    Some(ViterbiOracle { cost, per_measure, candidates })
}

/// A random decoding instance: up to 8 measures, a vocabulary of at most
/// five patterns (one spanning two measures) including the empty ones.
pub fn random_decoding_instance(rng: &mut ChaCha8Rng) -> (Vocabulary, Vec<MeasureStrums>, DecoderConfig) {
    let sigs = [ts("4/4"), ts("3/4")];
    let grid = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let k = rng.random_range(1..=4);
        let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(0..8) as f64 / 8.0).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let use_two_sigs = rng.random_bool(0.5);
    let n_non_empty = if use_two_sigs { 3 } else { 4 };
    let vocab = loop {
        let mut pats = Vec::new();
        for i in 0..n_non_empty {
            let sig = if use_two_sigs && i == 1 { sigs[1] } else { sigs[0] };
            let onsets = if i == 0 {
                vec![grid(rng), grid(rng)]
            } else {
                vec![grid(rng)]
            };
            pats.push(RhythmicPattern::new(format!("P{i}"), sig, onsets).unwrap());
        }
        if let Ok(v) = Vocabulary::new(pats) {
            break v;
        }
    };
    let n_measures = rng.random_range(1..=8);
    let measures = (0..n_measures)
        .map(|m| {
            let positions = if rng.random_bool(0.15) {
                Vec::new()
            } else {
                let k = rng.random_range(1..=5);
                let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            };
            MeasureStrums::new(m, positions).unwrap()
        })
        .collect();
    let cfg = DecoderConfig {
        sigma: rng.random_range(0.05..0.3),
        c1: [0.0, 0.5, 2.0][rng.random_range(0..3)],
        c2: [0.0, 1.0, 6.0][rng.random_range(0..3)],
        ..Default::default()
    };
    (vocab, measures, cfg)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- matching

/// Maximum one-to-one matching size by exhaustive search over assignments,
/// memoized on (reference index, used-estimate mask).
pub fn oracle_matching(reference: &[f64], estimate: &[f64], tol: f64) -> usize {
    assert!(estimate.len() <= 16);
    let mut memo = std::collections::HashMap::new();
    fn go(
        i: usize,
        used: u32,
        r: &[f64],
        e: &[f64],
        tol: f64,
        memo: &mut std::collections::HashMap<(usize, u32), usize>,
    ) -> usize {
        if i == r.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, used)) {
            return v;
        }
        let mut best = go(i + 1, used, r, e, tol, memo);
        for (j, &x) in e.iter().enumerate() {
            if used & (1 << j) == 0 && (r[i] - x).abs() <= tol {
                best = best.max(1 + go(i + 1, used | (1 << j), r, e, tol, memo));
            }
        }
        memo.insert((i, used), best);
        best
    }
    go(0, 0, reference, estimate, tol, &mut memo)
}

// ---------------------------------------------------------------- barlines

/// Minimum post-processing cost over every subset of kept estimates (first
/// and last always kept) and every subdivision factor per span.
pub fn oracle_postprocess_cost(raw: &BarlineTrack, cfg: &PostprocConfig) -> f64 {
    let r = raw.times();
    let n = r.len();
    assert!(n <= 16);
    let interior = n - 2;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << interior) {
        let mut kept = vec![0];
        kept.extend((0..interior).filter(|b| mask & (1 << b) != 0).map(|b| b + 1));
        kept.push(n - 1);
        if kept.windows(2).any(|w| w[1] - w[0] > cfg.max_lookahead) {
            continue;
        }
        let spans = kept.len() - 1;
        let deleted = (n - kept.len()) as f64 * cfg.deletion_penalty;
        let nf = cfg.subdivision_factors.len();
        let mut choice = vec![0usize; spans];
        loop {
            let mut cost = deleted;
            let mut prev_len: Option<f64> = None;
            for s in 0..spans {
                let k = cfg.subdivision_factors[choice[s]];
                cost += (k - 1) as f64 * cfg.insertion_penalty;
                let len = (r[kept[s + 1]] - r[kept[s]]) / k as f64;
                if let Some(p) = prev_len {
                    let rel = (len - p).abs() / p;
                    cost += cfg.tempo_change_penalty * (rel - cfg.tempo_free_band).max(0.0);
                }
                prev_len = Some(len);
            }
            best = best.min(cost);
            let mut s = 0;
            while s < spans {
                choice[s] += 1;
                if choice[s] < nf {
                    break;
                }
                choice[s] = 0;
                s += 1;
            }
            if s == spans {
                break;
            }
        }
    }
    best
}
