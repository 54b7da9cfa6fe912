use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use strumscribe::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "strumscribe", version, about = "Transcribe guitar strums into rhythmic patterns")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// RNG seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for batch commands (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect strum onsets in a WAV file.
    Onsets {
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        onsets: OnsetArgs,
    },
    /// Clean a raw bar-line track.
    Barlines {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        postproc: PostprocArgs,
    },
    /// Decode strums on a bar-line grid into a pattern sequence.
    Decode {
        #[arg(long)]
        strums: PathBuf,
        #[arg(long)]
        barlines: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Score a transcription, or a manifest of songs with --manifest.
    Eval {
        #[arg(long, required_unless_present = "manifest")]
        transcription: Option<PathBuf>,
        #[arg(long, required_unless_present = "manifest")]
        barlines: Option<PathBuf>,
        #[arg(long, required_unless_present = "manifest")]
        vocab: Option<PathBuf>,
        /// Ground-truth strum file.
        #[arg(long, required_unless_present = "manifest")]
        ground_truth: Option<PathBuf>,
        /// Newline-delimited JSON records {song_id, transcription, barlines,
        /// vocab, ground_truth}; relative paths resolve against the manifest.
        #[arg(long, conflicts_with_all = ["transcription", "barlines", "vocab", "ground_truth"])]
        manifest: Option<PathBuf>,
        /// Matching tolerance in seconds.
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic song.
    Synth {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 32)]
        measures: usize,
        #[arg(long, default_value_t = 120.0)]
        tempo: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma_norm: f64,
        #[arg(long, default_value_t = 0.2)]
        switch_prob: f64,
        #[arg(long, default_value_t = 0.0)]
        timesig_change_prob: f64,
        #[arg(long, default_value_t = 0.0)]
        miss_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        spurious_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        start_sec: f64,
        /// Also render the nominal strums as a pluck-train WAV.
        #[arg(long)]
        wav: bool,
        #[arg(long, default_value_t = 44_100)]
        sample_rate: u32,
    },
    /// Render a transcription as slash-notation text.
    Render {
        #[arg(long)]
        transcription: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Audio and raw bar lines to transcription and rendered text.
    Pipeline {
        #[arg(long)]
        audio: PathBuf,
        /// Raw bar-line estimates.
        #[arg(long)]
        barlines: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Transcription JSON (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Rendered text (stderr when absent).
        #[arg(long)]
        render_out: Option<PathBuf>,
        /// Directory receiving every intermediate file.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
        #[command(flatten)]
        onsets: OnsetArgs,
        #[command(flatten)]
        postproc: PostprocArgs,
        #[command(flatten)]
        decoder: DecoderArgs,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Random search over onset peak-picking parameters.
    TuneOnsets {
        /// Newline-delimited JSON records {audio, onsets}; `onsets` is a
        /// strum file with reference times.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Tuned run configuration (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Default)]
pub struct DecoderArgs {
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct PostprocArgs {
    /// Pass raw bar lines through unchanged.
    #[arg(long)]
    pub no_barline_postproc: bool,
    #[arg(long)]
    pub deletion_penalty: Option<f64>,
    #[arg(long)]
    pub insertion_penalty: Option<f64>,
    #[arg(long)]
    pub tempo_change_penalty: Option<f64>,
    #[arg(long)]
    pub max_lookahead: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct OnsetArgs {
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub frame_size: Option<usize>,
    #[arg(long)]
    pub hop_size: Option<usize>,
    #[arg(long)]
    pub min_gap_sec: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct RenderArgs {
    #[arg(long)]
    pub grid_resolution: Option<usize>,
    /// Write repeated measures out instead of `%`.
    #[arg(long)]
    pub no_repeat: bool,
    #[arg(long)]
    pub show_ids: bool,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl DecoderArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.decoder.sigma, self.sigma);
        set(&mut cfg.decoder.c1, self.c1);
        set(&mut cfg.decoder.c2, self.c2);
    }
}

impl PostprocArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.postproc.deletion_penalty, self.deletion_penalty);
        set(&mut cfg.postproc.insertion_penalty, self.insertion_penalty);
        set(&mut cfg.postproc.tempo_change_penalty, self.tempo_change_penalty);
        set(&mut cfg.postproc.max_lookahead, self.max_lookahead);
    }
}

impl OnsetArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.onsets.delta, self.delta);
        set(&mut cfg.onsets.frame_size, self.frame_size);
        set(&mut cfg.onsets.hop_size, self.hop_size);
        set(&mut cfg.onsets.min_gap_sec, self.min_gap_sec);
    }
}

impl RenderArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.render.grid_resolution, self.grid_resolution);
        if self.no_repeat {
            cfg.render.use_repeat_symbol = false;
        }
        if self.show_ids {
            cfg.render.show_pattern_ids = true;
        }
    }
}
