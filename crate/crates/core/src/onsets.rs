//! Baseline strum onset detector for isolated guitar audio.
//!
//! Onset strength is the half-wave rectified frame-to-frame increase of
//! log-compressed mel band magnitudes (spectral flux). Onsets are peaks of
//! the max-normalized envelope that dominate a local window, exceed the
//! local mean by `delta`, and respect a minimum gap.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::match_events;
use crate::timeline::StrumSequence;

/// Mono audio in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be > 0".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("audio samples must be finite".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads a PCM WAV file (16/24-bit integer or 32-bit float), averaging
/// channels down to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(std::io::BufReader::new(file))?;
    read_wav_from(reader)
}

fn read_wav_from<R: std::io::Read>(reader: hound::WavReader<R>) -> Result<AudioBuffer> {
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::InvalidInput("WAV file declares zero channels".into()));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = (1i64 << (bits - 1)) as f32;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<_, _>>()?,
        (format, bits) => {
            return Err(Error::InvalidInput(format!(
                "unsupported WAV encoding: {bits}-bit {format:?}"
            )))
        }
    };
    let mono = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f32>() / channels as f32)
        .collect();
    AudioBuffer::new(mono, spec.sample_rate)
}

/// Writes mono 32-bit float PCM.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &audio.samples {
        writer.write_sample(s)?;
    }
    writer.finalize()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnsetConfig {
    pub frame_size: usize,
    pub hop_size: usize,
    pub n_mels: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    /// Magnitudes are compressed as `ln(1 + log_compression * |X|)`.
    pub log_compression: f64,
    /// Threshold above the local mean, on the max-normalized envelope.
    pub delta: f64,
    pub pre_max: usize,
    pub post_max: usize,
    pub pre_avg: usize,
    pub post_avg: usize,
    pub min_gap_sec: f64,
}

impl Default for OnsetConfig {
    fn default() -> Self {
        Self {
            frame_size: 2048,
            hop_size: 512,
            n_mels: 128,
            fmin_hz: 30.0,
            fmax_hz: 11025.0,
            log_compression: 1000.0,
            delta: 0.07,
            pre_max: 3,
            post_max: 3,
            pre_avg: 8,
            post_avg: 8,
            min_gap_sec: 0.05,
        }
    }
}

impl OnsetConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.into()));
        if self.frame_size < 2 || self.hop_size == 0 || self.hop_size > self.frame_size {
            return fail("need 1 <= hop_size <= frame_size and frame_size >= 2");
        }
        if self.n_mels == 0 {
            return fail("n_mels must be >= 1");
        }
        if !(self.fmin_hz >= 0.0 && self.fmax_hz > self.fmin_hz) {
            return fail("need 0 <= fmin_hz < fmax_hz");
        }
        if !(self.log_compression > 0.0) {
            return fail("log_compression must be > 0");
        }
        if !(self.delta >= 0.0) {
            return fail("delta must be >= 0");
        }
        if [self.pre_max, self.post_max, self.pre_avg, self.post_avg].contains(&0) {
            return fail("peak-picking windows must be >= 1 frame");
        }
        if !(self.min_gap_sec >= 0.0) {
            return fail("min_gap_sec must be >= 0");
        }
        Ok(())
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters as sparse (first bin, weights) rows.
fn mel_filters(cfg: &OnsetConfig, sample_rate: u32) -> Vec<(usize, Vec<f64>)> {
    let n_bins = cfg.frame_size / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let fmax = cfg.fmax_hz.min(nyquist);
    let (lo, hi) = (hz_to_mel(cfg.fmin_hz), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / cfg.frame_size as f64;
    (0..cfg.n_mels)
        .map(|b| {
            let (left, center, right) = (edges[b], edges[b + 1], edges[b + 2]);
            let first = ((left / bin_hz).ceil() as usize).min(n_bins);
            let weights: Vec<f64> = (first..n_bins)
                .map(|k| k as f64 * bin_hz)
                .take_while(|&f| f < right)
                .map(|f| {
                    if f <= center {
                        (f - left) / (center - left)
                    } else {
                        (right - f) / (right - center)
                    }
                })
                .collect();
            (first, weights)
        })
        .collect()
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Spectral-flux onset strength, one value per hop. Samples outside the
/// signal are zero.
pub fn onset_strength(audio: &AudioBuffer, cfg: &OnsetConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let samples = audio.samples();
    if samples.len() < cfg.frame_size {
        return Err(Error::AudioTooShort {
            samples: samples.len(),
            needed: cfg.frame_size,
        });
    }
    let n = cfg.frame_size;
    // Frame t spans [t*hop - 3n/4, t*hop + n/4). Log compression makes the
    // flux respond as soon as an attack enters the window, so the frame time
    // sits near the leading edge rather than the center.
    let pad = 3 * n / 4;
    let n_frames = 1 + samples.len() / cfg.hop_size;
    let window = hann(n);
    let filters = mel_filters(cfg, audio.sample_rate());
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n);

    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut mags = vec![0.0; n / 2 + 1];
    let mut prev: Vec<f64> = vec![0.0; cfg.n_mels];
    let mut cur: Vec<f64> = vec![0.0; cfg.n_mels];
    let mut envelope = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let start = (t * cfg.hop_size) as isize - pad as isize;
        for (i, slot) in buf.iter_mut().enumerate() {
            let idx = start + i as isize;
            let x = if idx >= 0 && (idx as usize) < samples.len() {
                samples[idx as usize] as f64
            } else {
                0.0
            };
            *slot = Complex::new(x * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (m, c) in mags.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        for (band, (first, weights)) in cur.iter_mut().zip(&filters) {
            let energy: f64 = weights.iter().zip(&mags[*first..]).map(|(w, m)| w * m).sum();
            *band = (cfg.log_compression * energy).ln_1p();
        }
        let flux = if t == 0 {
            0.0
        } else {
            cur.iter().zip(&prev).map(|(c, p)| (c - p).max(0.0)).sum()
        };
        envelope.push(flux);
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(envelope)
}

/// Picks onset frames from `envelope` and converts them to seconds.
pub fn pick_peaks(envelope: &[f64], cfg: &OnsetConfig, sample_rate: u32) -> StrumSequence {
    let frame_sec = cfg.hop_size as f64 / sample_rate as f64;
    let peak = envelope.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return StrumSequence::default();
    }
    let env: Vec<f64> = envelope.iter().map(|v| v / peak).collect();
    let n = env.len();
    let avg_len = (cfg.pre_avg + cfg.post_avg + 1) as f64;
    let mut onsets: Vec<f64> = Vec::new();
    for t in 0..n {
        let v = env[t];
        if v <= 0.0 {
            continue;
        }
        let lo = t.saturating_sub(cfg.pre_max);
        let hi = (t + cfg.post_max).min(n - 1);
        if env[lo..=hi].iter().any(|&x| x > v) {
            continue;
        }
        // Frames outside the envelope count as zero in the local mean.
        let lo = t.saturating_sub(cfg.pre_avg);
        let hi = (t + cfg.post_avg).min(n - 1);
        let mean = env[lo..=hi].iter().sum::<f64>() / avg_len;
        if v < mean + cfg.delta {
            continue;
        }
        let time = t as f64 * frame_sec;
        if let Some(&last) = onsets.last() {
            if time - last < cfg.min_gap_sec {
                continue;
            }
        }
        onsets.push(time);
    }
    StrumSequence::from_unsorted(onsets)
}

pub fn detect_onsets(audio: &AudioBuffer, cfg: &OnsetConfig) -> Result<StrumSequence> {
    let env = onset_strength(audio, cfg)?;
    Ok(pick_peaks(&env, cfg, audio.sample_rate()))
}

/// Audio with its reference onset times.
#[derive(Debug, Clone)]
pub struct LabeledAudio {
    pub audio: AudioBuffer,
    pub onsets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub config: OnsetConfig,
    pub mean_f1: f64,
}

/// Random search over the peak-picking parameters (`delta`, the four
/// windows and `min_gap_sec`). The starting configuration is always scored
/// first, so the result is never worse than `base` on the labeled set.
pub fn tune_peak_picking(
    set: &[LabeledAudio],
    base: &OnsetConfig,
    trials: usize,
    seed: u64,
    tolerance_sec: f64,
) -> Result<TuningResult> {
    base.validate()?;
    let envelopes = set
        .iter()
        .map(|item| onset_strength(&item.audio, base))
        .collect::<Result<Vec<_>>>()?;
    let score = |cfg: &OnsetConfig| -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        let total: f64 = set
            .iter()
            .zip(&envelopes)
            .map(|(item, env)| {
                let est = pick_peaks(env, cfg, item.audio.sample_rate());
                match_events(&item.onsets, est.times(), tolerance_sec).f1
            })
            .sum();
        total / set.len() as f64
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = TuningResult {
        config: base.clone(),
        mean_f1: score(base),
    };
    for _ in 0..trials {
        let cfg = OnsetConfig {
            delta: rng.random_range(0.01..0.5),
            pre_max: rng.random_range(1..=10),
            post_max: rng.random_range(1..=10),
            pre_avg: rng.random_range(1..=20),
            post_avg: rng.random_range(1..=20),
            min_gap_sec: rng.random_range(0.0..0.1),
            ..base.clone()
        };
        let f1 = score(&cfg);
        if f1 > best.mean_f1 {
            best = TuningResult {
                config: cfg,
                mean_f1: f1,
            };
        }
    }
    Ok(best)
}
