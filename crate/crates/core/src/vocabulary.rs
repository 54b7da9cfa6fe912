//! Rhythmic pattern vocabulary: time signatures, patterns and the validated
//! collection the decoder searches over.
//!
//! Patterns store onset positions as fractions of a measure in `[0, 1)`.
//! Loading a vocabulary appends one empty pattern (`EMPTY_<num>_<den>`) for
//! every time signature that does not already have one, so silent measures
//! can always be covered.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Musical meter, e.g. 4/4 or 6/8. Equality is componentwise, so 6/8 != 3/4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TimeSignature {
    numerator: u32,
    denominator: u32,
}

impl TimeSignature {
    pub fn new(numerator: u32, denominator: u32) -> Result<Self> {
        if numerator == 0 {
            return Err(Error::InvalidInput(
                "time signature numerator must be at least 1".into(),
            ));
        }
        if !matches!(denominator, 1 | 2 | 4 | 8 | 16 | 32) {
            return Err(Error::InvalidInput(format!(
                "time signature denominator {denominator} is not one of 1, 2, 4, 8, 16, 32"
            )));
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    pub fn numerator(&self) -> u32 {
        self.numerator
    }

    pub fn denominator(&self) -> u32 {
        self.denominator
    }

    /// Measure duration in seconds at `tempo_bpm` quarter notes per minute.
    pub fn measure_seconds(&self, tempo_bpm: f64) -> f64 {
        self.numerator as f64 * (60.0 / tempo_bpm) * (4.0 / self.denominator as f64)
    }
}

impl fmt::Display for TimeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl FromStr for TimeSignature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (num, den) = s
            .trim()
            .split_once('/')
            .ok_or_else(|| Error::InvalidInput(format!("time signature `{s}` is not N/D")))?;
        let parse = |part: &str| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidInput(format!("time signature `{s}` is not N/D")))
        };
        TimeSignature::new(parse(num)?, parse(den)?)
    }
}

impl TryFrom<String> for TimeSignature {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<TimeSignature> for String {
    fn from(ts: TimeSignature) -> Self {
        ts.to_string()
    }
}

/// A one- or two-measure strumming template.
#[derive(Debug, Clone, PartialEq)]
pub struct RhythmicPattern {
    id: String,
    name: Option<String>,
    time_signature: TimeSignature,
    onsets: Vec<Vec<f64>>,
}

impl RhythmicPattern {
    pub fn new(
        id: impl Into<String>,
        time_signature: TimeSignature,
        onsets: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Vocabulary("pattern id must not be empty".into()));
        }
        if !(1..=2).contains(&onsets.len()) {
            return Err(Error::Vocabulary(format!(
                "pattern `{id}` has {} measures; only 1 or 2 are allowed",
                onsets.len()
            )));
        }
        for (k, measure) in onsets.iter().enumerate() {
            for &pos in measure {
                if !pos.is_finite() || !(0.0..1.0).contains(&pos) {
                    return Err(Error::Vocabulary(format!(
                        "pattern `{id}` measure {k}: position {pos} outside [0, 1)"
                    )));
                }
            }
            if measure.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Vocabulary(format!(
                    "pattern `{id}` measure {k}: non-ascending positions {measure:?}"
                )));
            }
        }
        Ok(Self {
            id,
            name: None,
            time_signature,
            onsets,
        })
    }

    /// The silent one-measure pattern for `ts`.
    pub fn empty(ts: TimeSignature) -> Self {
        Self {
            id: format!("EMPTY_{}_{}", ts.numerator, ts.denominator),
            name: None,
            time_signature: ts,
            onsets: vec![Vec::new()],
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn time_signature(&self) -> TimeSignature {
        self.time_signature
    }

    pub fn measures(&self) -> usize {
        self.onsets.len()
    }

    pub fn onsets(&self) -> &[Vec<f64>] {
        &self.onsets
    }

    /// Onset positions of one measure of the pattern (`phase` 0 or 1).
    pub fn measure_onsets(&self, phase: usize) -> &[f64] {
        &self.onsets[phase]
    }

    pub fn is_empty(&self) -> bool {
        self.onsets.iter().all(Vec::is_empty)
    }

    /// Flattens the pattern into `(measure_offset, position)` pairs in
    /// temporal order.
    pub fn positions_global(&self) -> Vec<(usize, f64)> {
        self.onsets
            .iter()
            .enumerate()
            .flat_map(|(k, m)| m.iter().map(move |&p| (k, p)))
            .collect()
    }

    fn same_rhythm(&self, other: &Self) -> bool {
        self.time_signature == other.time_signature && self.onsets == other.onsets
    }
}

/// Free-function form of [`RhythmicPattern::positions_global`].
pub fn pattern_positions_global(p: &RhythmicPattern) -> Vec<(usize, f64)> {
    p.positions_global()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternRecord {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    time_signature: TimeSignature,
    measures: usize,
    onsets: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabularyFile {
    patterns: Vec<PatternRecord>,
}

/// Validated, immutable collection of patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    patterns: Vec<RhythmicPattern>,
    by_signature: BTreeMap<TimeSignature, Vec<usize>>,
    empty_by_signature: BTreeMap<TimeSignature, usize>,
}

impl Vocabulary {
    /// Validates `patterns` and appends the missing empty patterns.
    pub fn new(mut patterns: Vec<RhythmicPattern>) -> Result<Self> {
        let mut seen_ids = std::collections::HashSet::new();
        let mut empty_by_signature = BTreeMap::new();
        for (idx, p) in patterns.iter().enumerate() {
            if !seen_ids.insert(p.id.clone()) {
                return Err(Error::Vocabulary(format!("duplicate pattern id `{}`", p.id)));
            }
            if p.is_empty() {
                if p.measures() != 1 {
                    return Err(Error::Vocabulary(format!(
                        "empty pattern `{}` must span exactly one measure",
                        p.id
                    )));
                }
                if empty_by_signature.insert(p.time_signature, idx).is_some() {
                    return Err(Error::Vocabulary(format!(
                        "more than one empty pattern for {}",
                        p.time_signature
                    )));
                }
            }
        }
        for (i, a) in patterns.iter().enumerate() {
            if a.is_empty() {
                continue;
            }
            if let Some(b) = patterns[..i].iter().find(|b| !b.is_empty() && b.same_rhythm(a)) {
                return Err(Error::Vocabulary(format!(
                    "patterns `{}` and `{}` are identical",
                    b.id, a.id
                )));
            }
        }

        let signatures: Vec<TimeSignature> = {
            let mut v: Vec<_> = patterns.iter().map(|p| p.time_signature).collect();
            v.sort();
            v.dedup();
            v
        };
        for ts in signatures {
            if empty_by_signature.contains_key(&ts) {
                continue;
            }
            let empty = RhythmicPattern::empty(ts);
            if !seen_ids.insert(empty.id.clone()) {
                return Err(Error::Vocabulary(format!(
                    "pattern id `{}` is reserved for the generated empty pattern",
                    empty.id
                )));
            }
            empty_by_signature.insert(ts, patterns.len());
            patterns.push(empty);
        }

        let mut by_signature: BTreeMap<TimeSignature, Vec<usize>> = BTreeMap::new();
        for (idx, p) in patterns.iter().enumerate() {
            by_signature.entry(p.time_signature).or_default().push(idx);
        }
        Ok(Self {
            patterns,
            by_signature,
            empty_by_signature,
        })
    }

    pub fn from_reader(mut source: impl Read) -> Result<Self> {
        let mut buf = String::new();
        source
            .read_to_string(&mut buf)
            .map_err(|e| Error::io("<vocabulary stream>", e))?;
        Self::from_json_str(&buf)
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let file: VocabularyFile = serde_json::from_str(json)?;
        let patterns = file
            .patterns
            .into_iter()
            .map(|rec| {
                if rec.measures != rec.onsets.len() {
                    return Err(Error::Vocabulary(format!(
                        "pattern `{}` declares {} measures but lists {} onset groups",
                        rec.id,
                        rec.measures,
                        rec.onsets.len()
                    )));
                }
                let mut p = RhythmicPattern::new(rec.id, rec.time_signature, rec.onsets)?;
                p.name = rec.name;
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(patterns)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let file = VocabularyFile {
            patterns: self
                .patterns
                .iter()
                .map(|p| PatternRecord {
                    id: p.id.clone(),
                    name: p.name.clone(),
                    time_signature: p.time_signature,
                    measures: p.measures(),
                    onsets: p.onsets.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes")
    }

    pub fn patterns(&self) -> &[RhythmicPattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&RhythmicPattern> {
        self.patterns.get(index)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.patterns.iter().position(|p| p.id == id)
    }

    pub fn by_id(&self, id: &str) -> Option<&RhythmicPattern> {
        self.patterns.iter().find(|p| p.id == id)
    }

    pub fn signatures(&self) -> impl Iterator<Item = TimeSignature> + '_ {
        self.by_signature.keys().copied()
    }

    /// Indices of every pattern (including the empty one) in `ts`.
    pub fn indices_with_signature(&self, ts: TimeSignature) -> &[usize] {
        self.by_signature.get(&ts).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn empty_pattern_index(&self, ts: TimeSignature) -> Option<usize> {
        self.empty_by_signature.get(&ts).copied()
    }
}

/// Parses and validates a vocabulary file.
pub fn load_vocabulary(source: impl Read) -> Result<Vocabulary> {
    Vocabulary::from_reader(source)
}
