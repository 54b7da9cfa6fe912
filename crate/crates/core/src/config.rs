//! Combined run configuration, loaded from JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::barlines::PostprocConfig;
use crate::error::{Error, Result};
use crate::likelihood::DecoderConfig;
use crate::metrics::{BARLINE_TOLERANCE_SEC, STRUM_TOLERANCE_SEC};
use crate::onsets::OnsetConfig;
use crate::render::RenderOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub decoder: DecoderConfig,
    pub postproc: PostprocConfig,
    pub onsets: OnsetConfig,
    pub render: RenderOptions,
    pub strum_tolerance_sec: f64,
    pub barline_tolerance_sec: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            decoder: DecoderConfig::default(),
            postproc: PostprocConfig::default(),
            onsets: OnsetConfig::default(),
            render: RenderOptions::default(),
            strum_tolerance_sec: STRUM_TOLERANCE_SEC,
            barline_tolerance_sec: BARLINE_TOLERANCE_SEC,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(json: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.decoder.validate()?;
        self.postproc.validate()?;
        self.onsets.validate()?;
        self.render.validate()?;
        for (name, v) in [
            ("strum_tolerance_sec", self.strum_tolerance_sec),
            ("barline_tolerance_sec", self.barline_tolerance_sec),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = RunConfig::from_json_str(r#"{"decoder":{"c1":4.0},"seed":7}"#).unwrap();
        assert_eq!(cfg.decoder.c1, 4.0);
        assert_eq!(cfg.decoder.c2, DecoderConfig::default().c2);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.strum_tolerance_sec, 0.05);
        assert_eq!(cfg.barline_tolerance_sec, 0.07);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json_str(r#"{"decodr":{}}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"decoder":{"sigmaa":0.1}}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"onsets":{"hop":1}}"#).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_json_str(r#"{"decoder":{"sigma":-1}}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"strum_tolerance_sec":0}"#).is_err());
    }
}
