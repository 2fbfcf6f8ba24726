//! Pipeline configuration: one TOML file layered over profile defaults, with
//! command-line overrides applied last.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::DEFAULT_DELIMITERS;
use crate::dcn::TrainConfig;
use crate::error::{Error, Result};

/// Preset scale. `desk` fits a laptop; `paper` matches the full-size run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(Error::Config(format!("unknown profile {s:?}; expected desk or paper"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: Vec<PathBuf>,
    /// Language tag to vector file.
    pub embeddings: BTreeMap<String, PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// `"<source>-<target>"` to a two-column dictionary file.
    pub dictionaries: BTreeMap<String, PathBuf>,
    pub workdir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus: Vec::new(),
            embeddings: BTreeMap::new(),
            stopwords: None,
            dictionaries: BTreeMap::new(),
            workdir: PathBuf::from("work"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Sentence delimiters. A newline always ends a sentence as well.
    pub delimiters: String,
    pub min_len: usize,
    pub max_len: usize,
    pub vocab_cap: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { delimiters: DEFAULT_DELIMITERS.to_owned(), min_len: 2, max_len: 20, vocab_cap: 50_000 }
    }
}

impl CorpusConfig {
    pub fn delimiter_chars(&self) -> Vec<char> {
        let mut d: Vec<char> = self.delimiters.chars().collect();
        if !d.contains(&'\n') {
            d.push('\n');
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SidConfig {
    pub upper: usize,
    /// Defaults to two batches' worth of sentences.
    pub lower: usize,
}

impl Default for SidConfig {
    fn default() -> Self {
        SidConfig { upper: 5000, lower: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionConfig {
    pub expansion: f64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig { expansion: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Sentences sampled per query word.
    pub sample_cap: usize,
    pub top: usize,
    /// Describing words per sememe.
    pub words: usize,
    /// Description languages; empty means the training language only.
    pub languages: Vec<String>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { sample_cap: 5000, top: 6, words: 3, languages: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub profile: Profile,
    /// Language whose embeddings feed training; the shared space.
    pub training_language: String,
    pub paths: PathsConfig,
    pub corpus: CorpusConfig,
    pub sid: SidConfig,
    pub attention: AttentionConfig,
    pub dcn: TrainConfig,
    pub report: ReportConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::for_profile(Profile::Desk)
    }
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub workdir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let mut cfg = PipelineConfig {
            seed: 0,
            profile,
            training_language: "en".into(),
            paths: PathsConfig::default(),
            corpus: CorpusConfig::default(),
            sid: SidConfig::default(),
            attention: AttentionConfig::default(),
            dcn: TrainConfig::default(),
            report: ReportConfig::default(),
        };
        if profile == Profile::Paper {
            cfg.dcn.clusters = 2048;
            cfg.corpus.vocab_cap = 200_000;
        }
        cfg
    }

    /// Reads `path` (if any) over the defaults of the chosen profile.
    /// Relative paths in the file are taken relative to the file itself.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<toml::Table>().map_err(|e| Error::parse(p, 0, e.to_string()))?
            }
            None => toml::Table::new(),
        };
        let profile = match (overrides.profile, file.get("profile")) {
            (Some(p), _) => p,
            (None, Some(toml::Value::String(s))) => s.parse()?,
            (None, Some(_)) => return Err(Error::Config("profile must be a string".into())),
            (None, None) => Profile::Desk,
        };
        let mut merged = toml::Table::try_from(PipelineConfig::for_profile(profile))
            .map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, file);
        let mut cfg: PipelineConfig = merged.try_into().map_err(|e: toml::de::Error| {
            Error::Config(format!("{}{}", path.map(|p| format!("{}: ", p.display())).unwrap_or_default(), e.message()))
        })?;
        cfg.profile = profile;
        if let Some(base) = path.and_then(Path::parent) {
            cfg.paths.resolve_against(base);
        }
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(w) = &overrides.workdir {
            cfg.paths.workdir = w.clone();
        }
        cfg.dcn.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let c = &self.corpus;
        if c.min_len == 0 || c.min_len > c.max_len {
            return fail(format!("sentence length bounds {}..={} are invalid", c.min_len, c.max_len));
        }
        if c.vocab_cap == 0 {
            return fail("vocab_cap must be positive".into());
        }
        if self.sid.lower > self.sid.upper {
            return fail(format!("sid.lower {} exceeds sid.upper {}", self.sid.lower, self.sid.upper));
        }
        if !(self.attention.expansion > 0.0 && self.attention.expansion.is_finite()) {
            return fail("attention.expansion must be positive".into());
        }
        let r = &self.report;
        if r.sample_cap == 0 || r.top == 0 || r.words == 0 {
            return fail("report.sample_cap, report.top and report.words must be positive".into());
        }
        self.dcn.validate()
    }

    /// The effective configuration as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn embedding_path(&self, language: &str) -> Result<&Path> {
        self.paths
            .embeddings
            .get(language)
            .map(PathBuf::as_path)
            .ok_or_else(|| Error::Config(format!("no embeddings configured for language {language:?}")))
    }
}

impl PathsConfig {
    fn resolve_against(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.corpus.iter_mut().for_each(fix);
        self.embeddings.values_mut().for_each(fix);
        self.dictionaries.values_mut().for_each(fix);
        self.stopwords.iter_mut().for_each(fix);
        fix(&mut self.workdir);
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
