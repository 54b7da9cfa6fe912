use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use strumscribe::metrics::{aggregate, AggregateReport, EvaluationReport};
use strumscribe::onsets::{read_wav, tune_peak_picking, write_wav, LabeledAudio};
use strumscribe::synth::pluck_train;
use strumscribe::timeline::{barlines_from_json, barlines_to_json, load_barlines, load_strums, strums_to_json};
use strumscribe::{
    bin_strums, decode, detect_onsets, evaluate_transcription, generate_song, postprocess_barlines,
    render_text, BarlineTrack, RunConfig, StrumSequence, SynthSpec, Transcription, Vocabulary,
};
use thiserror::Error;

use crate::args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] strumscribe::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for filesystem failures, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Core(e) if e.is_io() => 2,
            _ => 1,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, contents: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents)
                .and_then(|_| out.flush())
                .map_err(io_err(Path::new("<stdout>")))
        }
    }
}

fn with_newline(mut s: String) -> Vec<u8> {
    s.push('\n');
    s.into_bytes()
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }

    match cli.command {
        Command::Onsets { audio, out, onsets } => {
            onsets.apply(&mut cfg);
            cfg.validate()?;
            let strums = detect_onsets(&read_wav(&audio)?, &cfg.onsets)?;
            emit(out.as_deref(), &with_newline(strums_to_json(&strums)))
        }
        Command::Barlines { raw, out, postproc } => {
            postproc.apply(&mut cfg);
            cfg.validate()?;
            let text = read_text(&raw)?;
            let track = barlines_from_json(&text)?;
            if postproc.no_barline_postproc {
                return emit(out.as_deref(), text.as_bytes());
            }
            let cleaned = postprocess_barlines(&track, &cfg.postproc)?;
            emit(out.as_deref(), &with_newline(barlines_to_json(&cleaned)))
        }
        Command::Decode { strums, barlines, vocab, out, decoder } => {
            decoder.apply(&mut cfg);
            cfg.validate()?;
            let t = run_decode(&load_strums(&strums)?, &load_barlines(&barlines)?, &Vocabulary::load(&vocab)?, &cfg)?;
            emit(out.as_deref(), &with_newline(t.to_json_string()))
        }
        Command::Eval { transcription, barlines, vocab, ground_truth, manifest, tolerance, out } => {
            if let Some(tol) = tolerance {
                cfg.strum_tolerance_sec = tol;
            }
            cfg.validate()?;
            let json = match manifest {
                Some(path) => to_json(&eval_batch(&path, cfg.strum_tolerance_sec)?),
                None => {
                    let song = EvalRecord {
                        song_id: None,
                        transcription: transcription.expect("required by clap"),
                        barlines: barlines.expect("required by clap"),
                        vocab: vocab.expect("required by clap"),
                        ground_truth: ground_truth.expect("required by clap"),
                    };
                    to_json(&eval_one(&song, cfg.strum_tolerance_sec)?)
                }
            };
            emit(out.as_deref(), &with_newline(json))
        }
        Command::Synth {
            vocab,
            out_dir,
            measures,
            tempo,
            sigma_norm,
            switch_prob,
            timesig_change_prob,
            miss_rate,
            spurious_rate,
            start_sec,
            wav,
            sample_rate,
        } => {
            let spec = SynthSpec {
                seed: cfg.seed,
                tempo_bpm: tempo,
                measures,
                sigma_norm,
                switch_prob,
                timesig_change_prob,
                spurious_rate,
                miss_rate,
                start_sec,
            };
            let vocab = Vocabulary::load(&vocab)?;
            let song = generate_song(&spec, &vocab)?;
            let files = [
                ("strums.json", strums_to_json(&song.observed)),
                ("nominal_strums.json", strums_to_json(&song.nominal)),
                ("barlines.json", barlines_to_json(&song.bars)),
                ("ground_truth.json", song.ground_truth.to_json_string()),
                ("song.json", song.bundle_json(&spec)),
            ];
            for (name, text) in files {
                write_file(&out_dir.join(name), &with_newline(text))?;
            }
            if wav {
                const TAIL_SEC: f64 = 0.5;
                let end = song.bars.times().last().copied().unwrap_or(0.0) + TAIL_SEC;
                let audio = pluck_train(song.observed.times(), end, sample_rate, spec.seed);
                write_wav(out_dir.join("audio.wav"), &audio)?;
            }
            Ok(())
        }
        Command::Render { transcription, vocab, out, render } => {
            render.apply(&mut cfg);
            cfg.validate()?;
            let text = run_render(&Transcription::load(&transcription)?, &Vocabulary::load(&vocab)?, &cfg)?;
            emit(out.as_deref(), &text)
        }
        Command::Pipeline {
            audio,
            barlines,
            vocab,
            out,
            render_out,
            dump_dir,
            onsets,
            postproc,
            decoder,
            render,
        } => {
            onsets.apply(&mut cfg);
            postproc.apply(&mut cfg);
            decoder.apply(&mut cfg);
            render.apply(&mut cfg);
            cfg.validate()?;
            let vocab = Vocabulary::load(&vocab)?;
            let strums = detect_onsets(&read_wav(&audio)?, &cfg.onsets)?;
            let raw_text = read_text(&barlines)?;
            let raw = barlines_from_json(&raw_text)?;
            let bars = if postproc.no_barline_postproc {
                raw
            } else {
                postprocess_barlines(&raw, &cfg.postproc)?
            };
            let t = run_decode(&strums, &bars, &vocab, &cfg)?;
            let transcription = with_newline(t.to_json_string());
            let rendered = run_render(&t, &vocab, &cfg)?;
            if let Some(dir) = dump_dir {
                let cleaned = if postproc.no_barline_postproc {
                    raw_text.into_bytes()
                } else {
                    with_newline(barlines_to_json(&bars))
                };
                write_file(&dir.join("strums.json"), &with_newline(strums_to_json(&strums)))?;
                write_file(&dir.join("barlines.json"), &cleaned)?;
                write_file(&dir.join("transcription.json"), &transcription)?;
                write_file(&dir.join("render.txt"), &rendered)?;
                write_file(&dir.join("config.json"), &with_newline(to_json(&cfg)))?;
            }
            emit(out.as_deref(), &transcription)?;
            match render_out {
                Some(path) => write_file(&path, &rendered),
                None => {
                    eprint!("{}", String::from_utf8_lossy(&rendered));
                    Ok(())
                }
            }
        }
        Command::TuneOnsets { manifest, trials, out } => {
            cfg.validate()?;
            let set = load_labeled_set(&manifest)?;
            let tuned = tune_peak_picking(&set, &cfg.onsets, trials, cfg.seed, cfg.strum_tolerance_sec)?;
            eprintln!("mean F1 {:.4} over {} file(s)", tuned.mean_f1, set.len());
            cfg.onsets = tuned.config;
            emit(out.as_deref(), &with_newline(to_json(&cfg)))
        }
    }
}

fn run_decode(strums: &StrumSequence, bars: &BarlineTrack, vocab: &Vocabulary, cfg: &RunConfig) -> Result<Transcription> {
    let (measures, discarded) = bin_strums(strums, bars);
    if discarded > 0 {
        eprintln!("{discarded} strum(s) outside the bar-line range were discarded");
    }
    Ok(decode(&measures, vocab, &cfg.decoder)?)
}

fn run_render(t: &Transcription, vocab: &Vocabulary, cfg: &RunConfig) -> Result<Vec<u8>> {
    let rendered = render_text(t, vocab, &cfg.render)?;
    for w in &rendered.warnings {
        eprintln!("warning: {w}");
    }
    Ok(with_newline(rendered.text))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalRecord {
    #[serde(default)]
    song_id: Option<String>,
    transcription: PathBuf,
    barlines: PathBuf,
    vocab: PathBuf,
    ground_truth: PathBuf,
}

#[derive(Debug, Serialize)]
struct BatchReport {
    songs: Vec<EvaluationReport>,
    aggregate: AggregateReport,
}

fn eval_one(rec: &EvalRecord, tolerance_sec: f64) -> Result<EvaluationReport> {
    let t = Transcription::load(&rec.transcription)?;
    let bars = load_barlines(&rec.barlines)?;
    let vocab = Vocabulary::load(&rec.vocab)?;
    let truth = load_strums(&rec.ground_truth)?;
    let mut report = evaluate_transcription(&t, &bars, &vocab, &truth, tolerance_sec)?;
    report.song_id = rec.song_id.clone();
    Ok(report)
}

/// Parses newline-delimited JSON records, skipping blank lines. Relative
/// paths resolve against the manifest's directory.
fn read_manifest<T: serde::de::DeserializeOwned>(
    path: &Path,
    mut resolve: impl FnMut(&mut T, &Path),
) -> Result<Vec<T>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let text = read_text(path)?;
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: T = serde_json::from_str(line).map_err(|e| CliError::Manifest {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        resolve(&mut rec, base);
        records.push(rec);
    }
    Ok(records)
}

fn eval_batch(manifest: &Path, tolerance_sec: f64) -> Result<BatchReport> {
    let records: Vec<EvalRecord> = read_manifest(manifest, |r: &mut EvalRecord, base| {
        for p in [&mut r.transcription, &mut r.barlines, &mut r.vocab, &mut r.ground_truth] {
            *p = base.join(&*p);
        }
    })?;
    let songs = records
        .par_iter()
        .map(|r| eval_one(r, tolerance_sec))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&songs);
    Ok(BatchReport { songs, aggregate })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabeledRecord {
    audio: PathBuf,
    onsets: PathBuf,
}

fn load_labeled_set(manifest: &Path) -> Result<Vec<LabeledAudio>> {
    let records: Vec<LabeledRecord> = read_manifest(manifest, |r: &mut LabeledRecord, base| {
        r.audio = base.join(&r.audio);
        r.onsets = base.join(&r.onsets);
    })?;
    records
        .par_iter()
        .map(|r| {
            Ok(LabeledAudio {
                audio: read_wav(&r.audio)?,
                onsets: load_strums(&r.onsets)?.into_times(),
            })
        })
        .collect()
}
