use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::global_consistency::GmmConfig;
use crate::global_content::TrajectorySpec;
use crate::local_content::ContentThresholds;
use crate::local_speaker::DecaySpec;
use crate::providers::ProviderConfig;

/// Which metric families run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Suites {
    pub local_speaker: bool,
    pub local_content: bool,
    pub local_consistency: bool,
    pub global_speaker: bool,
    pub global_content: bool,
    pub global_consistency: bool,
}

impl Default for Suites {
    fn default() -> Self {
        Suites {
            local_speaker: true,
            local_content: true,
            local_consistency: true,
            global_speaker: true,
            global_content: true,
            global_consistency: true,
        }
    }
}

impl Suites {
    pub const NAMES: [&'static str; 6] = [
        "local_speaker",
        "local_content",
        "local_consistency",
        "global_speaker",
        "global_content",
        "global_consistency",
    ];

    fn none() -> Self {
        Suites {
            local_speaker: false,
            local_content: false,
            local_consistency: false,
            global_speaker: false,
            global_content: false,
            global_consistency: false,
        }
    }

    /// Parses a comma-separated list of suite names; `local` and `global`
    /// select three suites each, `all` every suite.
    pub fn parse_list(list: &str) -> Result<Self> {
        let mut s = Suites::none();
        for name in list.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "all" => s = Suites::default(),
                "local" => {
                    s.local_speaker = true;
                    s.local_content = true;
                    s.local_consistency = true;
                }
                "global" => {
                    s.global_speaker = true;
                    s.global_content = true;
                    s.global_consistency = true;
                }
                "local_speaker" => s.local_speaker = true,
                "local_content" => s.local_content = true,
                "local_consistency" => s.local_consistency = true,
                "global_speaker" => s.global_speaker = true,
                "global_content" => s.global_content = true,
                "global_consistency" => s.global_consistency = true,
                other => return Err(Error::Config(format!("unknown suite `{other}`"))),
            }
        }
        Ok(s)
    }

    pub fn any_local(&self) -> bool {
        self.local_speaker || self.local_content || self.local_consistency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Where the report goes. Not part of the fingerprint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Everything that determines a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// JSONL dataset files; each file's stem is its label.
    pub datasets: Vec<PathBuf>,
    /// Optional JSONL speaker profiles shared by every dataset.
    pub profiles: Option<PathBuf>,
    pub providers: ProviderConfig,
    pub thresholds: ContentThresholds,
    /// Local context window length.
    pub k: usize,
    pub decay: DecaySpec,
    pub trajectory: TrajectorySpec,
    /// Turn count at which a speaker's own utterances fully outweigh the
    /// background text in global prototypes.
    pub k_global: usize,
    pub gmm: GmmConfig,
    pub suites: Suites,
    pub seed: u64,
    pub output: OutputSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            datasets: Vec::new(),
            profiles: None,
            providers: ProviderConfig::default(),
            thresholds: ContentThresholds::default(),
            k: 10,
            decay: DecaySpec::default(),
            trajectory: TrajectorySpec::default(),
            k_global: 10,
            gmm: GmmConfig::default(),
            suites: Suites::default(),
            seed: 0,
            output: OutputSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config; relative dataset and profile paths resolve
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut cfg.datasets {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        if let Some(p) = &mut cfg.profiles {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot write TOML: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        // TOML integers are signed
        if i64::try_from(self.seed).is_err() {
            return Err(Error::Config(format!("seed {} exceeds {}", self.seed, i64::MAX)));
        }
        if self.k_global == 0 {
            return Err(Error::Config("k_global must be at least 1".into()));
        }
        self.thresholds.validate()?;
        self.decay.validate()?;
        self.trajectory.validate()?;
        if self.gmm.max_iter == 0 || !(self.gmm.reg_covar > 0.0) {
            return Err(Error::Config("gmm needs max_iter >= 1 and reg_covar > 0".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the config without the
    /// output section.
    pub fn fingerprint(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output");
        }
        let canonical = serde_json::to_string(&v).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn fingerprint_ignores_output_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output.path = Some("elsewhere.json".into());
        b.output.format = OutputFormat::Csv;
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str("kk = 3").is_err());
        assert!(RunConfig::from_toml_str("k = 0").is_err());
        let c = RunConfig::from_toml_str("k = 4\n[thresholds]\ntau_cov = 0.5").unwrap();
        assert_eq!(c.k, 4);
        assert_eq!(c.thresholds.tau_cov, 0.5);
        assert_eq!(c.thresholds.tau_rel, 0.6);
    }

    #[test]
    fn suite_lists() {
        let s = Suites::parse_list("local,global_speaker").unwrap();
        assert!(s.local_content && s.global_speaker && !s.global_content);
        assert!(Suites::parse_list("bogus").is_err());
        assert_eq!(Suites::parse_list("all").unwrap(), Suites::default());
    }
}
