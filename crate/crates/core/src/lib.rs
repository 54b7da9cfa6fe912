//! Guitar strum rhythm transcription.
//!
//! Detected strum onsets and bar lines go in; a readable sequence of
//! rhythmic patterns from a curated vocabulary comes out. The crate also
//! provides bar-line cleanup, evaluation metrics, a baseline onset detector
//! and a synthetic song generator.
//!
//! ```
//! use strumscribe::{bin_strums, decode, BarlineTrack, DecoderConfig, StrumSequence, Vocabulary};
//!
//! let vocab = Vocabulary::from_json_str(
//!     r#"{"patterns":[{"id":"quarters","time_signature":"4/4","measures":1,
//!                      "onsets":[[0.0,0.25,0.5,0.75]]}]}"#,
//! ).unwrap();
//! let bars = BarlineTrack::new(vec![0.0, 2.0, 4.0]).unwrap();
//! let strums = StrumSequence::new(vec![0.01, 0.5, 1.0, 1.49]).unwrap();
//! let (measures, _) = bin_strums(&strums, &bars);
//! let t = decode(&measures, &vocab, &DecoderConfig::default()).unwrap();
//! assert_eq!(t.entries[0].pattern_id, "quarters");
//! assert_eq!(t.entries[1].pattern_id, "EMPTY_4_4");
//! ```

pub mod barlines;
pub mod config;
pub mod decoder;
pub mod error;
pub mod likelihood;
pub mod metrics;
pub mod onsets;
pub mod render;
pub mod synth;
pub mod timeline;
pub mod vocabulary;

pub use barlines::{discontinuity_rate, postprocess_barlines, PostprocConfig};
pub use config::RunConfig;
pub use decoder::{decode, reconstruct_strums, Transcription, TranscriptionEntry};
pub use error::{Error, Result};
pub use likelihood::{emission_cost, raw_mismatch, transition_cost, DecoderConfig, EmissionCost};
pub use metrics::{evaluate_transcription, match_events, MatchResult};
pub use onsets::{detect_onsets, AudioBuffer, OnsetConfig};
pub use render::{render_text, RenderOptions};
pub use synth::{generate_song, SynthSpec, SyntheticSong};
pub use timeline::{bin_strums, BarlineTrack, MeasureStrums, StrumSequence};
pub use vocabulary::{load_vocabulary, RhythmicPattern, TimeSignature, Vocabulary};
