//! Service configuration, read from a TOML file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use corpusforge_core::langid::{self, Detector, LangProfile};
use corpusforge_core::{EngineConfig, Error, Result};

pub const CONFIG_ENV: &str = "CORPUSFORGE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LangidConfig {
    /// Profile files written by `langid-train`.
    pub profiles: Vec<PathBuf>,
    /// Directory of `<code>.txt` seed files to train from at startup.
    pub train_dir: Option<PathBuf>,
    pub margin: f64,
}

impl Default for LangidConfig {
    fn default() -> Self {
        LangidConfig { profiles: Vec::new(), train_dir: None, margin: langid::DEFAULT_MARGIN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequesterConfig {
    /// When false, requester endpoints need `Authorization: Bearer <token>`.
    pub open: bool,
    pub token: Option<String>,
}

impl Default for RequesterConfig {
    fn default() -> Self {
        RequesterConfig { open: true, token: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    /// Journal file; the store lives in memory when absent.
    pub store_path: Option<PathBuf>,
    /// fsync after every committed transaction.
    pub store_sync: bool,
    pub requester: RequesterConfig,
    pub langid: LangidConfig,
    #[serde(flatten)]
    pub engine: EngineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            store_path: None,
            store_sync: true,
            requester: RequesterConfig::default(),
            langid: LangidConfig::default(),
            engine: EngineConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`, or the file named by `CORPUSFORGE_CONFIG` when `path` is
    /// `None`. Relative paths inside the file are resolved against its directory.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let path: PathBuf = match path {
            Some(p) => p.to_path_buf(),
            None => std::env::var_os(CONFIG_ENV)
                .map(PathBuf::from)
                .ok_or_else(|| Error::Config(format!("no config given and {CONFIG_ENV} is unset")))?,
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.langid.profiles.iter_mut().for_each(fix);
        self.langid.train_dir.as_mut().map(fix);
        self.store_path.as_mut().map(fix);
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        self.listen
            .parse::<std::net::SocketAddr>()
            .map_err(|e| Error::Config(format!("listen address {:?}: {e}", self.listen)))?;
        if !self.requester.open && self.requester.token.as_deref().is_none_or(str::is_empty) {
            return Err(Error::Config("requester.open = false needs requester.token".into()));
        }
        for p in &self.langid.profiles {
            if !p.is_file() {
                return Err(Error::Config(format!("language profile {} does not exist", p.display())));
            }
        }
        if let Some(d) = &self.langid.train_dir {
            if !d.is_dir() {
                return Err(Error::Config(format!("langid.train_dir {} is not a directory", d.display())));
            }
        }
        if self.langid.profiles.is_empty() && self.langid.train_dir.is_none() {
            return Err(Error::Config("configure langid.profiles or langid.train_dir".into()));
        }
        Ok(())
    }

    /// Loads the configured profiles and trains any from `train_dir` whose
    /// language is not already covered by a profile file.
    pub fn build_detector(&self) -> Result<Arc<Detector>> {
        let mut profiles: Vec<LangProfile> =
            self.langid.profiles.iter().map(|p| LangProfile::load(p)).collect::<Result<_>>()?;
        if let Some(dir) = &self.langid.train_dir {
            for p in langid::train_from_dir(dir)? {
                if !profiles.iter().any(|q| q.lang() == p.lang()) {
                    profiles.push(p);
                }
            }
        }
        Ok(Arc::new(Detector::new(profiles, self.langid.margin)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use corpusforge_core::Money;

    #[test]
    fn full_file_parses() {
        let cfg = ServiceConfig::from_toml(
            r#"
            listen = "0.0.0.0:9000"
            store_path = "data/store.journal"
            session_ttl_ms = 3600000

            [prices]
            per_translation = "0.05"

            [qc]
            length_ratio_max = 2.5
            [qc.fast_ms]
            translate = 5000
            verify = 1000

            [deadlines]
            verify_ms = 60000

            [exam]
            pass_threshold = 9

            [langid]
            train_dir = "seeds"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.engine.prices.per_translation, Money::from_cents(5));
        assert_eq!(cfg.engine.prices.per_verdict_set, Money::from_cents(1));
        assert_eq!(cfg.engine.qc.fast_ms.verify, 1000);
        assert_eq!(cfg.engine.deadlines.translate_ms, 30 * 60_000);
        assert_eq!(cfg.engine.exam.pass_threshold, 9);
        assert!(cfg.requester.open);
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let mut cfg = ServiceConfig::from_toml("store_path = \"s.journal\"\n[langid]\nprofiles = [\"a.json\"]").unwrap();
        cfg.resolve_paths(Path::new("/etc/cf"));
        assert_eq!(cfg.store_path.unwrap(), Path::new("/etc/cf/s.journal"));
        assert_eq!(cfg.langid.profiles[0], Path::new("/etc/cf/a.json"));
    }

    #[test]
    fn validation_failures() {
        let missing = ServiceConfig::from_toml("[langid]\nprofiles = [\"/nonexistent/x.json\"]").unwrap();
        assert!(matches!(missing.validate(), Err(Error::Config(_))));
        assert!(matches!(ServiceConfig::default().validate(), Err(Error::Config(_))));
        let negative = ServiceConfig::from_toml("[prices]\nper_translation = \"-1\"").unwrap();
        assert!(matches!(negative.validate(), Err(Error::Config(_))));
        assert!(ServiceConfig::from_toml("[langid]\nbogus = 1").is_err());
    }
}
