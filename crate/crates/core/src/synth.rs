//! Synthetic ground truth: pattern sequences, bar lines and jittered strums.
//!
//! Everything is drawn from a ChaCha8 stream seeded by `SynthSpec::seed`, so
//! a spec and vocabulary fully determine the output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decoder::{reconstruct_strums, Transcription, TranscriptionEntry};
use crate::error::{Error, Result};
use crate::onsets::AudioBuffer;
use crate::timeline::{BarlineTrack, StrumSequence};
use crate::vocabulary::Vocabulary;

/// Truncation of the timing jitter, in standard deviations.
const JITTER_CLIP_SIGMAS: f64 = 3.0;
const MAX_JITTER_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub tempo_bpm: f64,
    pub measures: usize,
    /// Timing jitter standard deviation, in fractions of a measure.
    pub sigma_norm: f64,
    /// Probability of switching pattern at each pattern boundary.
    pub switch_prob: f64,
    /// When switching, probability that the new pattern has a different
    /// time signature.
    pub timesig_change_prob: f64,
    /// Expected spurious strums per nominal strum.
    pub spurious_rate: f64,
    /// Probability that a nominal strum goes undetected.
    pub miss_rate: f64,
    /// Time of the first bar line.
    pub start_sec: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            tempo_bpm: 120.0,
            measures: 32,
            sigma_norm: 0.0,
            switch_prob: 0.2,
            timesig_change_prob: 0.0,
            spurious_rate: 0.0,
            miss_rate: 0.0,
            start_sec: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tempo_bpm.is_finite() && self.tempo_bpm > 0.0) {
            return Err(Error::Config("tempo_bpm must be > 0".into()));
        }
        if self.measures == 0 {
            return Err(Error::Config("measures must be >= 1".into()));
        }
        if !(self.sigma_norm.is_finite() && self.sigma_norm >= 0.0) {
            return Err(Error::Config("sigma_norm must be >= 0".into()));
        }
        for (name, v) in [
            ("switch_prob", self.switch_prob),
            ("timesig_change_prob", self.timesig_change_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        for (name, v) in [("spurious_rate", self.spurious_rate), ("miss_rate", self.miss_rate)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1)")));
            }
        }
        if !self.start_sec.is_finite() {
            return Err(Error::Config("start_sec must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSong {
    pub ground_truth: Transcription,
    pub bars: BarlineTrack,
    pub nominal: StrumSequence,
    pub observed: StrumSequence,
}

#[derive(Serialize)]
struct Bundle<'a> {
    spec: &'a SynthSpec,
    transcription: &'a Transcription,
    barlines_sec: &'a [f64],
    nominal_strums_sec: &'a [f64],
    observed_strums_sec: &'a [f64],
}

impl SyntheticSong {
    /// Everything about the song in one JSON document.
    pub fn bundle_json(&self, spec: &SynthSpec) -> String {
        serde_json::to_string_pretty(&Bundle {
            spec,
            transcription: &self.ground_truth,
            barlines_sec: self.bars.times(),
            nominal_strums_sec: self.nominal.times(),
            observed_strums_sec: self.observed.times(),
        })
        .expect("bundle serializes")
    }
}

fn pick(rng: &mut ChaCha8Rng, pool: &[usize]) -> Option<usize> {
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.random_range(0..pool.len())])
    }
}

fn pattern_sequence(spec: &SynthSpec, vocab: &Vocabulary, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let patterns = vocab.patterns();
    let mut sources: Vec<usize> = (0..patterns.len()).filter(|&n| !patterns[n].is_empty()).collect();
    if sources.is_empty() {
        sources = (0..patterns.len()).collect();
    }
    let fits = |n: usize, remaining: usize| patterns[n].measures() <= remaining;

    let mut seq = Vec::new();
    let mut covered = 0;
    let mut current: Option<usize> = None;
    while covered < spec.measures {
        let remaining = spec.measures - covered;
        let desired = match current {
            None => {
                let pool: Vec<usize> = sources.iter().copied().filter(|&n| fits(n, remaining)).collect();
                pick(rng, &pool).unwrap_or(sources[0])
            }
            Some(cur) if rng.random::<f64>() < spec.switch_prob => {
                let ts = patterns[cur].time_signature();
                let change_sig = rng.random::<f64>() < spec.timesig_change_prob;
                let pool = |other_sig: bool| -> Vec<usize> {
                    sources
                        .iter()
                        .copied()
                        .filter(|&n| n != cur && fits(n, remaining))
                        .filter(|&n| (patterns[n].time_signature() != ts) == other_sig)
                        .collect()
                };
                let mut choice = pick(rng, &pool(change_sig));
                if choice.is_none() {
                    choice = pick(rng, &pool(!change_sig));
                }
                choice.unwrap_or(cur)
            }
            Some(cur) => cur,
        };
        let chosen = if fits(desired, remaining) {
            desired
        } else {
            let ts = patterns[desired].time_signature();
            let pool: Vec<usize> = sources
                .iter()
                .copied()
                .filter(|&n| patterns[n].time_signature() == ts && fits(n, remaining))
                .collect();
            pick(rng, &pool)
                .or_else(|| vocab.empty_pattern_index(ts))
                .expect("every signature has an empty pattern")
        };
        seq.push(chosen);
        covered += patterns[chosen].measures();
        current = Some(chosen);
    }
    seq
}

/// Generates one synthetic song.
pub fn generate_song(spec: &SynthSpec, vocab: &Vocabulary) -> Result<SyntheticSong> {
    spec.validate()?;
    if vocab.is_empty() {
        return Err(Error::InvalidInput("vocabulary has no patterns".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sequence = pattern_sequence(spec, vocab, &mut rng);

    let mut entries = Vec::with_capacity(spec.measures);
    let mut times = vec![spec.start_sec];
    for &n in &sequence {
        let p = &vocab.patterns()[n];
        let duration = p.time_signature().measure_seconds(spec.tempo_bpm);
        for phase in 0..p.measures() {
            entries.push(TranscriptionEntry {
                measure_index: entries.len(),
                pattern_id: p.id().to_string(),
                phase,
                time_signature: p.time_signature(),
            });
            let last = *times.last().expect("non-empty");
            times.push(last + duration);
        }
    }
    let ground_truth = Transcription {
        total_cost: 0.0,
        entries,
    };
    let bars = BarlineTrack::new(times)?;
    let nominal = reconstruct_strums(&ground_truth, &bars, vocab)?;

    let song_start = bars.times()[0];
    let song_end = *bars.times().last().expect("non-empty");
    let mut observed = Vec::with_capacity(nominal.len());
    let mut spurious = Vec::new();
    for &t in nominal.times() {
        let missed = rng.random::<f64>() < spec.miss_rate;
        let jittered = jitter(t, &bars, spec.sigma_norm, &mut rng);
        if rng.random::<f64>() < spec.spurious_rate {
            spurious.push(rng.random_range(song_start..song_end));
        }
        if !missed {
            observed.push(jittered);
        }
    }
    observed.extend(spurious);

    Ok(SyntheticSong {
        ground_truth,
        bars,
        nominal,
        observed: StrumSequence::from_unsorted(observed),
    })
}

/// Gaussian jitter truncated to +-3 sigma and to the strum's own measure.
fn jitter(t: f64, bars: &BarlineTrack, sigma_norm: f64, rng: &mut ChaCha8Rng) -> f64 {
    if sigma_norm == 0.0 {
        return t;
    }
    let times = bars.times();
    let m = times.partition_point(|&b| b <= t) - 1;
    let (lo, hi) = (times[m], times[m + 1]);
    let scale = sigma_norm * (hi - lo);
    for _ in 0..MAX_JITTER_DRAWS {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() > JITTER_CLIP_SIGMAS {
            continue;
        }
        let candidate = t + z * scale;
        if candidate >= lo && candidate < hi {
            return candidate;
        }
    }
    t
}

/// Renders exponentially decaying noise bursts starting at `onsets`.
pub fn pluck_train(onsets: &[f64], duration_sec: f64, sample_rate: u32, seed: u64) -> AudioBuffer {
    const DECAY_SEC: f64 = 0.03;
    const BURST_SEC: f64 = 0.25;
    const AMPLITUDE: f64 = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration_sec * sample_rate as f64).round() as usize;
    let mut samples = vec![0.0f32; n];
    let burst_len = (BURST_SEC * sample_rate as f64) as usize;
    for &t in onsets {
        let start = (t * sample_rate as f64).round() as usize;
        for i in 0..burst_len {
            let idx = start + i;
            if idx >= n {
                break;
            }
            let env = (-(i as f64) / (DECAY_SEC * sample_rate as f64)).exp();
            let noise: f64 = rng.random_range(-1.0..1.0);
            samples[idx] = (samples[idx] as f64 + AMPLITUDE * env * noise).clamp(-1.0, 1.0) as f32;
        }
    }
    AudioBuffer::new(samples, sample_rate).expect("rendered audio is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::pattern_discontinuity;
    use crate::vocabulary::{RhythmicPattern, TimeSignature};

    fn ts(s: &str) -> TimeSignature {
        s.parse().unwrap()
    }

    fn vocab() -> Vocabulary {
        Vocabulary::new(vec![
            RhythmicPattern::new("A", ts("4/4"), vec![vec![0.0, 0.25, 0.5, 0.75]]).unwrap(),
            RhythmicPattern::new("B", ts("4/4"), vec![vec![0.0, 0.375, 0.5]]).unwrap(),
            RhythmicPattern::new("L", ts("4/4"), vec![vec![0.0, 0.5], vec![0.25, 0.75]]).unwrap(),
            RhythmicPattern::new("W", ts("3/4"), vec![vec![0.0, 1.0 / 3.0, 2.0 / 3.0]]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn noiseless_observation_equals_nominal() {
        let spec = SynthSpec { seed: 3, ..Default::default() };
        let song = generate_song(&spec, &vocab()).unwrap();
        assert_eq!(song.observed, song.nominal);
        assert_eq!(song.ground_truth.len(), 32);
        assert_eq!(song.bars.measure_count(), 32);
        song.ground_truth.validate(&vocab()).unwrap();
    }

    #[test]
    fn no_switching_keeps_one_pattern() {
        for seed in 0..20 {
            let spec = SynthSpec { seed, switch_prob: 0.0, measures: 9, ..Default::default() };
            let song = generate_song(&spec, &vocab()).unwrap();
            song.ground_truth.validate(&vocab()).unwrap();
            // An odd song length can force a final fill-in after a two-measure pattern.
            let starts: Vec<_> = song.ground_truth.pattern_starts().map(|e| e.pattern_id.clone()).collect();
            if starts[0] != "L" {
                assert_eq!(pattern_discontinuity(&song.ground_truth), 0.0);
            }
        }
        let spec = SynthSpec { seed: 1, switch_prob: 0.0, measures: 8, ..Default::default() };
        assert_eq!(pattern_discontinuity(&generate_song(&spec, &vocab()).unwrap().ground_truth), 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec { seed: 11, sigma_norm: 0.02, miss_rate: 0.1, spurious_rate: 0.1, ..Default::default() };
        let a = generate_song(&spec, &vocab()).unwrap();
        let b = generate_song(&spec, &vocab()).unwrap();
        assert_eq!(a.bundle_json(&spec), b.bundle_json(&spec));
        let other = generate_song(&SynthSpec { seed: 12, ..spec.clone() }, &vocab()).unwrap();
        assert_ne!(a.observed, other.observed);
    }

    #[test]
    fn bar_spacing_follows_signature() {
        let spec = SynthSpec { seed: 5, switch_prob: 0.5, timesig_change_prob: 1.0, measures: 40, ..Default::default() };
        let song = generate_song(&spec, &vocab()).unwrap();
        let mut saw_waltz = false;
        for e in &song.ground_truth.entries {
            let expected = if e.time_signature == ts("3/4") { saw_waltz = true; 1.5 } else { 2.0 };
            assert!((song.bars.measure_duration(e.measure_index) - expected).abs() < 1e-9);
        }
        assert!(saw_waltz);
    }

    #[test]
    fn reconstruction_equals_nominal() {
        for seed in 0..10 {
            let spec = SynthSpec { seed, sigma_norm: 0.03, switch_prob: 0.4, timesig_change_prob: 0.3, ..Default::default() };
            let song = generate_song(&spec, &vocab()).unwrap();
            let back = reconstruct_strums(&song.ground_truth, &song.bars, &vocab()).unwrap();
            assert_eq!(back, song.nominal);
        }
    }

    #[test]
    fn jitter_stays_in_measure() {
        let spec = SynthSpec { seed: 9, sigma_norm: 0.05, switch_prob: 0.3, ..Default::default() };
        let song = generate_song(&spec, &vocab()).unwrap();
        let (_, discarded) = crate::timeline::bin_strums(&song.observed, &song.bars);
        assert_eq!(discarded, 0);
        assert_eq!(song.observed.len(), song.nominal.len());
    }

    #[test]
    fn empirical_jitter_matches_sigma() {
        // Interior onsets only, so the measure-boundary truncation is inactive.
        let v = Vocabulary::new(vec![
            RhythmicPattern::new("I", ts("4/4"), vec![vec![0.25, 0.5, 0.75]]).unwrap(),
        ])
        .unwrap();
        let sigma = 0.02;
        let spec = SynthSpec { seed: 42, sigma_norm: sigma, measures: 4000, ..Default::default() };
        let song = generate_song(&spec, &v).unwrap();
        assert!(song.nominal.len() >= 10_000);
        let dev: Vec<f64> = song
            .observed
            .times()
            .iter()
            .zip(song.nominal.times())
            .map(|(o, n)| (o - n) / 2.0)
            .collect();
        let mean = dev.iter().sum::<f64>() / dev.len() as f64;
        let sd = (dev.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (dev.len() - 1) as f64).sqrt();
        assert!((sd - sigma).abs() / sigma < 0.05, "sd {sd}");
    }

    #[test]
    fn detector_noise_rates() {
        let spec = SynthSpec { seed: 2, measures: 500, miss_rate: 0.1, spurious_rate: 0.05, ..Default::default() };
        let song = generate_song(&spec, &vocab()).unwrap();
        let n = song.nominal.len() as f64;
        let expected = n * (1.0 - 0.1 + 0.05);
        assert!((song.observed.len() as f64 - expected).abs() < 0.03 * n);
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            SynthSpec { tempo_bpm: 0.0, ..Default::default() },
            SynthSpec { measures: 0, ..Default::default() },
            SynthSpec { miss_rate: 1.0, ..Default::default() },
            SynthSpec { sigma_norm: -0.1, ..Default::default() },
        ];
        for spec in bad {
            assert!(generate_song(&spec, &vocab()).is_err());
        }
    }

    #[test]
    fn pluck_train_is_silent_between_bursts() {
        let audio = pluck_train(&[0.1], 1.0, 8000, 0);
        assert_eq!(audio.samples().len(), 8000);
        assert!(audio.samples()[..790].iter().all(|&s| s == 0.0));
        assert!(audio.samples()[800..900].iter().any(|&s| s.abs() > 0.1));
    }
}
