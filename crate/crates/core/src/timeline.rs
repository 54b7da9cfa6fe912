//! Conversions between absolute time and the measure grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum spacing between two strums; closer onsets are treated as one.
pub const MIN_STRUM_SPACING_SEC: f64 = 0.001;

/// Bar-line times in seconds. Measure `m` is `[times[m], times[m + 1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarlineTrack {
    times: Vec<f64>,
}

impl BarlineTrack {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a bar-line track needs at least 2 bar lines, got {}",
                times.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("bar-line times must be finite".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "bar-line times must be strictly ascending ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn measure_count(&self) -> usize {
        self.times.len() - 1
    }

    pub fn measure_start(&self, m: usize) -> f64 {
        self.times[m]
    }

    pub fn measure_duration(&self, m: usize) -> f64 {
        self.times[m + 1] - self.times[m]
    }

    /// Absolute time of a normalized position inside measure `m`.
    pub fn time_at(&self, m: usize, position: f64) -> f64 {
        self.times[m] + position * self.measure_duration(m)
    }

    pub fn into_times(self) -> Vec<f64> {
        self.times
    }
}

/// Ascending strum onset times in seconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrumSequence {
    times: Vec<f64>,
}

impl StrumSequence {
    /// Validating constructor for externally supplied onsets.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("strum times must be finite".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput(format!(
                "strum times must be ascending ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(w) = times
            .windows(2)
            .find(|w| w[1] - w[0] < MIN_STRUM_SPACING_SEC)
        {
            return Err(Error::InvalidInput(format!(
                "strums at {} and {} are closer than 1 ms",
                w[0], w[1]
            )));
        }
        Ok(Self { times })
    }

    /// Sorts `times` and drops any onset closer than 1 ms to the one kept
    /// before it. Non-finite values are removed.
    pub fn from_unsorted(mut times: Vec<f64>) -> Self {
        times.retain(|t| t.is_finite());
        times.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::with_capacity(times.len());
        for t in times {
            match out.last() {
                Some(&last) if t - last < MIN_STRUM_SPACING_SEC => {}
                _ => out.push(t),
            }
        }
        Self { times: out }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn into_times(self) -> Vec<f64> {
        self.times
    }
}

/// Strum positions inside one measure, normalized to `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureStrums {
    pub measure_index: usize,
    pub positions: Vec<f64>,
}

impl MeasureStrums {
    pub fn new(measure_index: usize, positions: Vec<f64>) -> Result<Self> {
        if positions
            .iter()
            .any(|p| !p.is_finite() || !(0.0..1.0).contains(p))
        {
            return Err(Error::InvalidInput(format!(
                "measure {measure_index}: strum positions must lie in [0, 1)"
            )));
        }
        if positions.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput(format!(
                "measure {measure_index}: strum positions must be ascending"
            )));
        }
        Ok(Self {
            measure_index,
            positions,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

impl AsRef<[f64]> for MeasureStrums {
    fn as_ref(&self) -> &[f64] {
        &self.positions
    }
}

/// Assigns each strum to the measure containing it and normalizes its
/// position. Returns the per-measure views and the number of strums that fell
/// outside the bar-line track.
pub fn bin_strums(strums: &StrumSequence, bars: &BarlineTrack) -> (Vec<MeasureStrums>, usize) {
    let times = bars.times();
    let first = times[0];
    let last = times[times.len() - 1];
    let mut measures: Vec<MeasureStrums> = (0..bars.measure_count())
        .map(|m| MeasureStrums {
            measure_index: m,
            positions: Vec::new(),
        })
        .collect();
    let mut discarded = 0;
    for &t in strums.times() {
        if t < first || t >= last {
            discarded += 1;
            continue;
        }
        // Largest m with times[m] <= t.
        let m = times.partition_point(|&b| b <= t) - 1;
        let pos = (t - times[m]) / (times[m + 1] - times[m]);
        let pos = if pos >= 1.0 { 1.0 - f64::EPSILON / 2.0 } else { pos };
        measures[m].positions.push(pos);
    }
    (measures, discarded)
}

pub fn measure_durations(bars: &BarlineTrack) -> Vec<f64> {
    bars.times().windows(2).map(|w| w[1] - w[0]).collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrumFile {
    strums_sec: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BarlineFile {
    barlines_sec: Vec<f64>,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn strums_from_json(json: &str) -> Result<StrumSequence> {
    let file: StrumFile = serde_json::from_str(json)?;
    StrumSequence::new(file.strums_sec)
}

pub fn strums_to_json(strums: &StrumSequence) -> String {
    serde_json::to_string(&StrumFile {
        strums_sec: strums.times.clone(),
    })
    .expect("strums serialize")
}

pub fn load_strums(path: impl AsRef<Path>) -> Result<StrumSequence> {
    strums_from_json(&read_text(path.as_ref())?)
}

pub fn barlines_from_json(json: &str) -> Result<BarlineTrack> {
    let file: BarlineFile = serde_json::from_str(json)?;
    BarlineTrack::new(file.barlines_sec)
}

pub fn barlines_to_json(bars: &BarlineTrack) -> String {
    serde_json::to_string(&BarlineFile {
        barlines_sec: bars.times.clone(),
    })
    .expect("bar lines serialize")
}

pub fn load_barlines(path: impl AsRef<Path>) -> Result<BarlineTrack> {
    barlines_from_json(&read_text(path.as_ref())?)
}
