//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::convo::BotFilter;
use crate::lexicon::{CategoryDictionary, LexiconError, SummaryScorer, SummaryTable};
use crate::metrics::{BugDetector, DEFAULT_BUG_KEYWORDS, DEFAULT_MIN_CORPUS_WORDS};
use crate::stats::DEFAULT_VIF_THRESHOLD;
use crate::status::WriteActionSet;
use crate::textprep::AcronymDict;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_min_words")]
    pub min_corpus_words: usize,
    #[serde(default = "default_vif")]
    pub vif: f64,
    #[serde(default = "default_keywords")]
    pub bug_keywords: Vec<String>,
    #[serde(default)]
    pub write_actions: WriteActionSet,
    #[serde(default)]
    pub bot_patterns: BotFilter,
}

fn default_min_words() -> usize {
    DEFAULT_MIN_CORPUS_WORDS
}

fn default_vif() -> f64 {
    DEFAULT_VIF_THRESHOLD
}

fn default_keywords() -> Vec<String> {
    DEFAULT_BUG_KEYWORDS.iter().map(|s| s.to_string()).collect()
}

fn default_workers() -> usize {
    4
}

fn default_summary() -> String {
    "approx".into()
}

fn default_token_env() -> String {
    "GITHUB_TOKEN".into()
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            min_corpus_words: default_min_words(),
            vif: default_vif(),
            bug_keywords: default_keywords(),
            write_actions: WriteActionSet::default(),
            bot_patterns: BotFilter::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectEntry {
    /// Path to the project's `meta.toml`; the directory holding it is the
    /// project bundle.
    pub meta: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Category dictionary; the bundled one when absent.
    #[serde(default)]
    pub dictionary: Option<PathBuf>,
    /// `approx`, or the path of a summary-score CSV to import.
    #[serde(default = "default_summary")]
    pub summary: String,
    /// Acronym table; the bundled one when absent.
    #[serde(default)]
    pub acronyms: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Also render SVG charts next to the plot CSVs.
    #[serde(default)]
    pub svg: bool,
    /// Name of the environment variable holding the API token.
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub projects: Vec<ProjectEntry>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Everything loaded from the configured files.
#[derive(Debug, Clone)]
pub struct Resources {
    pub dictionary: CategoryDictionary,
    pub scorer: SummaryScorer,
    pub acronyms: AcronymDict,
    pub write_actions: WriteActionSet,
    pub bots: BotFilter,
    pub bugs: BugDetector,
    pub min_words: usize,
}

impl Default for Resources {
    fn default() -> Self {
        let t = Thresholds::default();
        Resources {
            dictionary: CategoryDictionary::bundled(),
            scorer: SummaryScorer::Approx,
            acronyms: AcronymDict::seed(),
            write_actions: t.write_actions,
            bots: t.bot_patterns,
            bugs: BugDetector::new(&t.bug_keywords),
            min_words: t.min_corpus_words,
        }
    }
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            seed: 0,
            out_dir: out_dir.into(),
            dictionary: None,
            summary: default_summary(),
            acronyms: None,
            workers: default_workers(),
            svg: false,
            token_env: default_token_env(),
            thresholds: Thresholds::default(),
            projects: Vec::new(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    pub fn meta_paths(&self) -> Vec<PathBuf> {
        self.projects.iter().map(|p| self.resolve(&p.meta)).collect()
    }

    fn summary_path(&self) -> Option<PathBuf> {
        (self.summary != "approx").then(|| self.resolve(Path::new(&self.summary)))
    }

    /// Checks that every referenced file exists and thresholds are sane.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        let mut must_exist = |what: &str, p: PathBuf| {
            if !p.is_file() {
                problems.push(format!("{what} `{}` does not exist", p.display()));
            }
        };
        if let Some(d) = &self.dictionary {
            must_exist("dictionary", self.resolve(d));
        }
        if let Some(a) = &self.acronyms {
            must_exist("acronym table", self.resolve(a));
        }
        if let Some(s) = self.summary_path() {
            must_exist("summary table", s);
        }
        for m in self.meta_paths() {
            must_exist("project meta", m);
        }
        if self.workers == 0 {
            problems.push("workers must be at least 1".into());
        }
        if !(self.thresholds.vif > 1.0) {
            problems.push(format!("thresholds.vif must exceed 1, got {}", self.thresholds.vif));
        }
        if self.thresholds.bug_keywords.is_empty() {
            problems.push("thresholds.bug_keywords is empty".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    /// Loads dictionaries and tables. Parse errors are configuration errors.
    pub fn resources(&self) -> Result<Resources, ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(vec![e]);
        let dictionary = match &self.dictionary {
            Some(p) => CategoryDictionary::load(&self.resolve(p)).map_err(|e| invalid(e.to_string()))?,
            None => CategoryDictionary::bundled(),
        };
        let acronyms = match &self.acronyms {
            Some(p) => AcronymDict::load(&self.resolve(p)).map_err(|e| invalid(e.to_string()))?,
            None => AcronymDict::seed(),
        };
        let scorer = match self.summary_path() {
            None => SummaryScorer::Approx,
            Some(p) => SummaryScorer::Import(
                SummaryTable::load(&p).map_err(|e: LexiconError| invalid(e.to_string()))?,
            ),
        };
        Ok(Resources {
            dictionary,
            scorer,
            acronyms,
            write_actions: self.thresholds.write_actions.clone(),
            bots: self.thresholds.bot_patterns.clone(),
            bugs: BugDetector::new(&self.thresholds.bug_keywords),
            min_words: self.thresholds.min_corpus_words,
        })
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::parse("out_dir = \"out\"\n[[projects]]\nmeta = \"p/meta.toml\"\n", "t", Path::new("/base")).unwrap();
        assert_eq!(cfg.thresholds.min_corpus_words, 50);
        assert_eq!(cfg.thresholds.vif, 5.0);
        assert_eq!(cfg.summary, "approx");
        assert_eq!(cfg.meta_paths(), [PathBuf::from("/base/p/meta.toml")]);
        assert!(cfg.thresholds.write_actions.contains(&crate::ingest::EventKind::PRMerged));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            RunConfig::parse("out_dir = \"o\"\nbogus = 1\n", "t", Path::new(".")),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn missing_files_listed() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::parse(
            "out_dir = \"o\"\ndictionary = \"nope.dic\"\n[[projects]]\nmeta = \"x/meta.toml\"\n",
            "t",
            dir.path(),
        )
        .unwrap();
        match cfg.validate() {
            Err(ConfigError::Invalid(p)) => assert_eq!(p.len(), 2, "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_is_stable() {
        let a = RunConfig::new("o");
        let b = RunConfig::new("o");
        assert_eq!(a.hash(), b.hash());
        let mut c = RunConfig::new("o");
        c.seed = 1;
        assert_ne!(a.hash(), c.hash());
    }
}
