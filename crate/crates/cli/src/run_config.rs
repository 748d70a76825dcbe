use std::path::Path;

use fieldmap::backend::TrackerConfig;
use fieldmap::io::read_file;
use fieldmap::pipeline::{MatchingConfig, ReconstructConfig, SlamConfig};
use serde::{Deserialize, Serialize};

use crate::failure::{CliResult, Failure};
use crate::MatchFlags;

/// Parameters of every pipeline stage. Missing sections and keys take their
/// defaults; the effective value is echoed into each output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Matching used by `match`, `slam` and `eval`.
    pub matching: MatchingConfig,
    pub tracker: TrackerConfig,
    /// Registration settings, including the stereo matching that builds
    /// seed-centre clouds.
    pub reconstruct: ReconstructConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Failure::Config(format!("run config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always serializable")
    }

    fn validate(&self) -> CliResult<()> {
        self.matching.validate().map_err(Failure::config)?;
        self.reconstruct.validate().map_err(Failure::config)
    }

    /// Loads `flags.config` (or the defaults) and applies the command-line
    /// overrides to every matcher it holds.
    pub fn resolve(flags: &MatchFlags) -> CliResult<Self> {
        let mut c = match &flags.config {
            Some(path) => Self::from_toml(&read_file(path).map_err(Failure::config)?)?,
            None => Self::default(),
        };
        for m in [&mut c.matching, &mut c.reconstruct.matching] {
            if let Some(v) = flags.cost_variant {
                m.params.cost_variant = v;
            }
            if let Some(t) = flags.threshold {
                m.params.threshold = t;
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn slam(&self) -> SlamConfig {
        SlamConfig {
            matching: self.matching,
            tracker: self.tracker,
        }
    }
}

pub fn load_scene_config(path: Option<&Path>) -> CliResult<fieldmap::simulator::SceneConfig> {
    match path {
        Some(p) => fieldmap::simulator::SceneConfig::from_toml(&read_file(p).map_err(Failure::config)?).map_err(Failure::config),
        None => Ok(fieldmap::simulator::SceneConfig::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let text = c.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn partial_and_unknown_keys() {
        let c = RunConfig::from_toml("[matching.params]\nthreshold = 90.0\n").unwrap();
        assert_eq!(c.matching.params.threshold, 90.0);
        assert_eq!(c.matching.params.delta, 64.0);
        assert!(matches!(RunConfig::from_toml("[matching]\nbogus = 1\n"), Err(Failure::Config(_))));
        assert!(matches!(RunConfig::from_toml("[matching.params]\ndelta = -1.0\n"), Err(Failure::Config(_))));
    }

    #[test]
    fn flags_reach_both_matchers() {
        let flags = MatchFlags {
            config: None,
            cost_variant: Some(fieldmap::association::CostVariant::Deviation),
            threshold: Some(42.0),
        };
        let c = RunConfig::resolve(&flags).unwrap();
        assert_eq!(c.matching.params.threshold, 42.0);
        assert_eq!(c.reconstruct.matching.params.cost_variant, fieldmap::association::CostVariant::Deviation);
    }
}
