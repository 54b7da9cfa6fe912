//! Plain-text slash-notation rendering of a transcription.
//!
//! ```text
//! 4/4 | x...x... | % | 3/4 x.x.x. | x.x.x. |
//! ```
//!
//! Each cell is one measure with onsets drawn as `x` on a `.` grid. The
//! opening time signature precedes the first bar line; later changes are
//! written at the start of the cell where they take effect. A pattern that
//! immediately repeats is written `%`, or `%%` in a single cell covering both
//! measures of a two-measure pattern.

use serde::{Deserialize, Serialize};

use crate::decoder::Transcription;
use crate::error::{Error, Result};
use crate::vocabulary::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    pub use_repeat_symbol: bool,
    pub grid_resolution: usize,
    pub show_pattern_ids: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            use_repeat_symbol: true,
            grid_resolution: 16,
            show_pattern_ids: false,
        }
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grid_resolution == 0 {
            return Err(Error::Config("grid_resolution must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub text: String,
    /// Onsets that could not be placed exactly on the grid.
    pub warnings: Vec<String>,
}

fn grid_cell(positions: &[f64], resolution: usize, warn: &mut Vec<String>, ctx: &str) -> String {
    let mut cells = vec!['.'; resolution];
    for &pos in positions {
        let exact = pos * resolution as f64;
        let slot = (exact.round() as usize).min(resolution - 1);
        if (slot as f64 - exact).abs() > 1e-9 {
            warn.push(format!(
                "{ctx}: onset {pos} drawn at {slot}/{resolution} (grid too coarse)"
            ));
        }
        if cells[slot] == 'x' {
            warn.push(format!("{ctx}: onsets merged at slot {slot}/{resolution}"));
        }
        cells[slot] = 'x';
    }
    cells.into_iter().collect()
}

pub fn render_text(t: &Transcription, vocab: &Vocabulary, opts: &RenderOptions) -> Result<Rendered> {
    opts.validate()?;
    t.validate(vocab)?;
    let mut warnings = Vec::new();
    let mut cells: Vec<String> = Vec::new();
    let mut prefix = String::new();
    let mut prev_sig = None;
    let mut prev_start: Option<&str> = None;

    let mut m = 0;
    while m < t.entries.len() {
        let e = &t.entries[m];
        let pattern = vocab.by_id(&e.pattern_id).expect("validated");
        let span = pattern.measures();
        let marker = if prev_sig != Some(e.time_signature) {
            Some(e.time_signature.to_string())
        } else {
            None
        };
        prev_sig = Some(e.time_signature);

        let repeat = opts.use_repeat_symbol && prev_start == Some(e.pattern_id.as_str());
        prev_start = Some(e.pattern_id.as_str());

        if repeat {
            cells.push(if span == 2 { "%%".into() } else { "%".into() });
        } else {
            for phase in 0..span {
                let ctx = format!("measure {}", m + phase);
                let mut cell = grid_cell(pattern.measure_onsets(phase), opts.grid_resolution, &mut warnings, &ctx);
                if opts.show_pattern_ids && phase == 0 {
                    cell = format!("[{}] {cell}", pattern.id());
                }
                cells.push(cell);
            }
        }
        if let Some(marker) = marker {
            let first = cells.len() - if repeat { 1 } else { span };
            if first == 0 {
                prefix = format!("{marker} ");
            } else {
                cells[first] = format!("{marker} {}", cells[first]);
            }
        }
        m += span;
    }

    let mut text = prefix;
    for cell in &cells {
        text.push_str("| ");
        text.push_str(cell);
        text.push(' ');
    }
    text.push('|');
    Ok(Rendered { text, warnings })
}
