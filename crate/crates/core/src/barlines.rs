//! Bar-line cleanup under a steady-tempo assumption.
//!
//! Raw downbeat estimates are edited in two ways only: an estimate can be
//! deleted, and the span between two kept estimates can be split into `k`
//! equal measures. A dynamic program picks the edits minimizing
//!
//! ```text
//!   deletion_penalty * (#deleted)
//! + insertion_penalty * (#inserted)
//! + tempo_change_penalty * sum max(0, |len_m - len_{m-1}| / len_{m-1} - free_band)
//! ```
//!
//! Without the insertion term, halving every measure would be as cheap as
//! deleting a spurious estimate.
//!
//! The DP state is (last kept estimate, previous kept estimate, factor of the
//! span between them); that pair fixes the incoming measure length exactly,
//! so no length discretization is needed. Spans are limited to
//! `max_lookahead` estimates, giving O(N * L^2 * F^2) work.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeline::{measure_durations, BarlineTrack};

/// Relative measure-length change above which a measure counts as a
/// discontinuity.
pub const DISCONTINUITY_THRESHOLD: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocConfig {
    pub subdivision_factors: Vec<u32>,
    pub deletion_penalty: f64,
    /// Cost per bar line inserted by subdivision.
    pub insertion_penalty: f64,
    pub tempo_change_penalty: f64,
    /// Deviation within which an inserted bar line counts as recovering a
    /// deleted estimate (reporting only).
    pub snap_tolerance_sec: f64,
    /// Largest index distance between consecutive kept estimates.
    pub max_lookahead: usize,
    /// Relative tempo change that is not penalized.
    pub tempo_free_band: f64,
}

impl Default for PostprocConfig {
    fn default() -> Self {
        Self {
            subdivision_factors: vec![1, 2, 3, 4],
            deletion_penalty: 1.0,
            insertion_penalty: 0.75,
            tempo_change_penalty: 8.0,
            snap_tolerance_sec: 0.07,
            max_lookahead: 4,
            tempo_free_band: 0.05,
        }
    }
}

impl PostprocConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subdivision_factors.is_empty() || self.subdivision_factors.contains(&0) {
            return Err(Error::Config(
                "subdivision_factors must be a non-empty set of integers >= 1".into(),
            ));
        }
        for (name, v) in [
            ("deletion_penalty", self.deletion_penalty),
            ("insertion_penalty", self.insertion_penalty),
            ("tempo_change_penalty", self.tempo_change_penalty),
            ("tempo_free_band", self.tempo_free_band),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.snap_tolerance_sec.is_finite() && self.snap_tolerance_sec > 0.0) {
            return Err(Error::Config("snap_tolerance_sec must be > 0".into()));
        }
        if self.max_lookahead == 0 {
            return Err(Error::Config("max_lookahead must be >= 1".into()));
        }
        Ok(())
    }

    fn factors(&self) -> Vec<u32> {
        let mut f = self.subdivision_factors.clone();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Smoothness cost between two consecutive measure lengths.
    pub fn tempo_cost(&self, prev_len: f64, next_len: f64) -> f64 {
        let rel = (next_len - prev_len).abs() / prev_len;
        self.tempo_change_penalty * (rel - self.tempo_free_band).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostprocOutcome {
    pub track: BarlineTrack,
    pub cost: f64,
    /// Indices of the raw estimates that were kept.
    pub kept: Vec<usize>,
    /// Subdivision factor of each span between consecutive kept estimates.
    pub factors: Vec<u32>,
    /// Inserted bar lines lying within the snap tolerance of a deleted estimate.
    pub recovered: usize,
}

#[derive(Clone, Copy)]
struct Cell {
    cost: f64,
    back: Option<(usize, usize)>,
}

/// Cleans `raw` into a steady bar-line track. First and last estimates are
/// always kept.
pub fn postprocess_barlines(raw: &BarlineTrack, cfg: &PostprocConfig) -> Result<BarlineTrack> {
    Ok(postprocess_barlines_detailed(raw, cfg)?.track)
}

pub fn postprocess_barlines_detailed(
    raw: &BarlineTrack,
    cfg: &PostprocConfig,
) -> Result<PostprocOutcome> {
    cfg.validate()?;
    let r = raw.times();
    let n = r.len();
    let factors = cfg.factors();
    let nf = factors.len();
    let look = cfg.max_lookahead.min(n - 1);

    // dp[j][d - 1][f]: best cost with j the last kept estimate, reached from
    // j - d with factor factors[f].
    let mut dp: Vec<Vec<Vec<Option<Cell>>>> = vec![vec![vec![None; nf]; look]; n];
    for j in 1..n {
        for d in 1..=look.min(j) {
            let i = j - d;
            let deleted = (d - 1) as f64 * cfg.deletion_penalty;
            for (fi, &k) in factors.iter().enumerate() {
                let len = (r[j] - r[i]) / k as f64;
                let edits = deleted + (k - 1) as f64 * cfg.insertion_penalty;
                let cell = if i == 0 {
                    Some(Cell {
                        cost: edits,
                        back: None,
                    })
                } else {
                    let mut best: Option<Cell> = None;
                    for dp_prev in 1..=look.min(i) {
                        let h = i - dp_prev;
                        for (pf, &kp) in factors.iter().enumerate() {
                            let Some(prev) = dp[i][dp_prev - 1][pf] else {
                                continue;
                            };
                            let prev_len = (r[i] - r[h]) / kp as f64;
                            let cost = prev.cost + edits + cfg.tempo_cost(prev_len, len);
                            if best.is_none_or(|b| cost < b.cost) {
                                best = Some(Cell {
                                    cost,
                                    back: Some((dp_prev, pf)),
                                });
                            }
                        }
                    }
                    best
                };
                dp[j][d - 1][fi] = cell;
            }
        }
    }

    let last = n - 1;
    let mut best: Option<(f64, usize, usize)> = None;
    for d in 1..=look.min(last) {
        for (fi, cell) in dp[last][d - 1].iter().enumerate() {
            if let Some(c) = cell {
                if best.is_none_or(|(b, _, _)| c.cost < b) {
                    best = Some((c.cost, d, fi));
                }
            }
        }
    }
    let (cost, mut d, mut fi) = best.expect("the first span always yields a state");

    let mut spans = Vec::new();
    let mut j = last;
    loop {
        let i = j - d;
        spans.push((i, j, factors[fi]));
        match dp[j][d - 1][fi].and_then(|c| c.back) {
            Some((dp_prev, pf)) => {
                j = i;
                d = dp_prev;
                fi = pf;
            }
            None => break,
        }
    }
    spans.reverse();

    let mut times = vec![r[0]];
    let mut kept = vec![0];
    let mut span_factors = Vec::with_capacity(spans.len());
    let mut recovered = 0;
    for &(i, j, k) in &spans {
        let step = (r[j] - r[i]) / k as f64;
        for q in 1..k {
            let t = r[i] + q as f64 * step;
            if r[i + 1..j]
                .iter()
                .any(|&x| (x - t).abs() <= cfg.snap_tolerance_sec)
            {
                recovered += 1;
            }
            times.push(t);
        }
        times.push(r[j]);
        kept.push(j);
        span_factors.push(k);
    }
    Ok(PostprocOutcome {
        track: BarlineTrack::new(times)?,
        cost,
        kept,
        factors: span_factors,
        recovered,
    })
}

/// Fraction of measures whose length differs by more than 35% from the
/// previous measure. Tracks with fewer than two measures score 0.
pub fn discontinuity_rate(bars: &BarlineTrack) -> f64 {
    let lengths = measure_durations(bars);
    if lengths.len() < 2 {
        return 0.0;
    }
    let jumps = lengths
        .windows(2)
        .filter(|w| (w[1] - w[0]).abs() / w[0] > DISCONTINUITY_THRESHOLD)
        .count();
    jumps as f64 / lengths.len() as f64
}
