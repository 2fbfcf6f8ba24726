//! The pipeline commands, operating on artifacts inside the work directory.
//!
//! Every command reads its inputs, writes its outputs and a
//! `manifest.<command>.toml` holding the effective configuration and a few
//! counts. Outputs depend only on inputs, configuration and seed.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::attention::ContextSource;
use crate::config::PipelineConfig;
use crate::corpus::{build_vocab, load_sentences, read_sentences, write_sentences, SentenceRecord};
use crate::dcn::{self, Checkpoint};
use crate::embeddings::{identical_pairs, load_dictionary, load_embeddings, AlignmentMap, AlignmentMode, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::report::{word_sememe_distribution, SememeReport};
use crate::rng;
use crate::sid::{load_stopwords, SentenceIndexDictionary};

pub const SENTENCES: &str = "sentences.txt";
pub const VOCAB: &str = "vocab.txt";
pub const SID: &str = "sid.txt";
pub const PRETRAIN_DIR: &str = "pretrain";
pub const FINETUNE_DIR: &str = "finetune";
pub const PRETRAIN_LOG: &str = "pretrain_loss.csv";
pub const FINETUNE_LOG: &str = "finetune_loss.csv";

pub fn alignment_file(source: &str, target: &str) -> String {
    format!("align.{source}-{target}.txt")
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    counts: BTreeMap<&'a str, u64>,
    config: &'a PipelineConfig,
}

fn write_manifest(cfg: &PipelineConfig, name: &str, counts: BTreeMap<&str, u64>) -> Result<()> {
    let text = toml::to_string(&Manifest { command: name, counts, config: cfg })
        .map_err(|e| Error::Config(e.to_string()))?;
    let path = cfg.paths.workdir.join(format!("manifest.{name}.toml"));
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn workdir(cfg: &PipelineConfig) -> Result<&Path> {
    let dir = cfg.paths.workdir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir)
}

fn require(path: PathBuf, step: &'static str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path, step })
    }
}

fn require_input(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepareSummary {
    pub sentences: usize,
    pub vocab: usize,
    pub sid_words: usize,
    pub capped: usize,
    pub dropped: usize,
}

/// Corpus to sentence store, vocabulary and balanced SID.
pub fn prepare(cfg: &PipelineConfig) -> Result<PrepareSummary> {
    if cfg.paths.corpus.is_empty() {
        return Err(Error::Config("paths.corpus lists no files".into()));
    }
    cfg.paths.corpus.iter().try_for_each(|p| require_input(p))?;
    let stopwords = match &cfg.paths.stopwords {
        Some(p) => load_stopwords(p)?,
        None => HashSet::new(),
    };
    let dir = workdir(cfg)?;
    let c = &cfg.corpus;
    let sentences = load_sentences(&cfg.paths.corpus, &c.delimiter_chars(), c.min_len, c.max_len)?;
    if sentences.is_empty() {
        warn!("corpus yielded no sentences within {}..={} tokens", c.min_len, c.max_len);
    }
    let vocab = build_vocab(sentences.iter().map(|s| &s.tokens), c.vocab_cap)?;
    let sid = SentenceIndexDictionary::build(&sentences, &vocab).remove_stopwords(&stopwords);
    let (sid, stats) = sid.balance(cfg.sid.upper, cfg.sid.lower, cfg.seed)?;
    info!(
        "{} sentences, {} vocabulary words, {} SID words ({} capped, {} dropped)",
        sentences.len(),
        vocab.len(),
        sid.len(),
        stats.capped,
        stats.dropped
    );
    write_sentences(&dir.join(SENTENCES), &sentences)?;
    vocab.write(&dir.join(VOCAB))?;
    sid.write(&dir.join(SID))?;
    let summary = PrepareSummary {
        sentences: sentences.len(),
        vocab: vocab.len(),
        sid_words: sid.len(),
        capped: stats.capped,
        dropped: stats.dropped,
    };
    write_manifest(
        cfg,
        "prepare",
        BTreeMap::from([
            ("sentences", summary.sentences as u64),
            ("vocab", summary.vocab as u64),
            ("sid_words", summary.sid_words as u64),
            ("capped", summary.capped as u64),
            ("dropped", summary.dropped as u64),
        ]),
    )?;
    Ok(summary)
}

/// Fits the map from `source` embeddings into `target` space. With
/// `identical` the dictionary is every token spelled the same in both.
pub fn align(
    cfg: &PipelineConfig,
    source: &str,
    target: &str,
    mode: AlignmentMode,
    identical: bool,
) -> Result<AlignmentMap> {
    let src_path = cfg.embedding_path(source)?;
    let tgt_path = cfg.embedding_path(target)?;
    require_input(src_path)?;
    require_input(tgt_path)?;
    let key = format!("{source}-{target}");
    let dict_path = if identical {
        None
    } else {
        let p = cfg.paths.dictionaries.get(&key).ok_or_else(|| {
            Error::Config(format!("no dictionary configured for {key}; set paths.dictionaries.\"{key}\""))
        })?;
        require_input(p)?;
        Some(p)
    };
    let dir = workdir(cfg)?;
    let src = load_embeddings(src_path, None, source)?.matrix;
    let tgt = load_embeddings(tgt_path, None, target)?.matrix;
    let pairs = match dict_path {
        Some(p) => load_dictionary(p)?,
        None => identical_pairs(&src, &tgt),
    };
    let map = AlignmentMap::fit(&src, &tgt, &pairs, mode)?;
    map.write(&dir.join(alignment_file(source, target)))?;
    write_manifest(cfg, &format!("align.{key}"), BTreeMap::from([("pairs", pairs.len() as u64)]))?;
    Ok(map)
}

/// Sentence store and SID written by [`prepare`].
pub struct Prepared {
    pub sentences: Vec<SentenceRecord>,
    pub sid: SentenceIndexDictionary,
}

impl Prepared {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let dir = &cfg.paths.workdir;
        let sentences = read_sentences(&require(dir.join(SENTENCES), "prepare")?)?;
        let sid = SentenceIndexDictionary::read(&require(dir.join(SID), "prepare")?)?;
        if sid.sentence_count() as usize != sentences.len() {
            return Err(Error::Config(format!(
                "{} was built from {} sentences but {} holds {}",
                SID,
                sid.sentence_count(),
                SENTENCES,
                sentences.len()
            )));
        }
        Ok(Prepared { sentences, sid })
    }

    /// Training-language embeddings restricted to tokens of the sentence
    /// store.
    pub fn embeddings(&self, cfg: &PipelineConfig) -> Result<EmbeddingMatrix> {
        let path = cfg.embedding_path(&cfg.training_language)?;
        require_input(path)?;
        let tokens: HashSet<String> = self.sentences.iter().flat_map(|s| s.tokens.iter().cloned()).collect();
        Ok(load_embeddings(path, Some(&tokens), &cfg.training_language)?.matrix)
    }

    pub fn source<'a>(&'a self, emb: &EmbeddingMatrix, cfg: &PipelineConfig) -> Result<ContextSource<'a>> {
        let source = ContextSource::new(&self.sid, &self.sentences, emb, cfg.attention.expansion)?;
        if !source.skipped().is_empty() {
            warn!("{} SID words have no embedding and are skipped", source.skipped().len());
        }
        Ok(source)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub words: usize,
    pub batches: usize,
    pub final_reconstruction: Option<f64>,
}

pub fn pretrain(cfg: &PipelineConfig) -> Result<TrainSummary> {
    let prepared = Prepared::load(cfg)?;
    let emb = prepared.embeddings(cfg)?;
    let dir = workdir(cfg)?;
    let source = prepared.source(&emb, cfg)?;
    info!("pre-training on {} words", source.words().len());
    let out = dcn::pretrain(&source, &cfg.dcn)?;
    Checkpoint { autoencoder: out.autoencoder, space: out.space, config: cfg.dcn.clone() }.save(&dir.join(PRETRAIN_DIR))?;
    write_log(&dir.join(PRETRAIN_LOG), &out.history)?;
    finish(cfg, "pretrain", source.words().len(), &out.history)
}

pub fn finetune(cfg: &PipelineConfig) -> Result<TrainSummary> {
    let dir = workdir(cfg)?;
    let ckpt = Checkpoint::load(&require(dir.join(PRETRAIN_DIR), "pretrain")?)?;
    let prepared = Prepared::load(cfg)?;
    let emb = prepared.embeddings(cfg)?;
    let source = prepared.source(&emb, cfg)?;
    info!("fine-tuning on {} words with lambda {}", source.words().len(), cfg.dcn.lambda);
    let out = dcn::finetune(&source, ckpt.autoencoder, ckpt.space, &cfg.dcn)?;
    Checkpoint { autoencoder: out.autoencoder, space: out.space, config: cfg.dcn.clone() }.save(&dir.join(FINETUNE_DIR))?;
    write_log(&dir.join(FINETUNE_LOG), &out.history)?;
    finish(cfg, "finetune", source.words().len(), &out.history)
}

fn write_log(path: &Path, history: &dcn::History) -> Result<()> {
    fs::write(path, history.to_csv()).map_err(|e| Error::io(path, e))
}

fn finish(cfg: &PipelineConfig, name: &str, words: usize, history: &dcn::History) -> Result<TrainSummary> {
    let batches = history.records.len();
    write_manifest(cfg, name, BTreeMap::from([("words", words as u64), ("batches", batches as u64)]))?;
    Ok(TrainSummary { words, batches, final_reconstruction: history.records.last().map(|r| r.l_n) })
}

/// Sememe report for `word`, described in `languages` (the configured
/// report languages when empty). Languages other than the training
/// language need an alignment into it.
pub fn predict(cfg: &PipelineConfig, word: &str, languages: &[String]) -> Result<SememeReport> {
    let dir = &cfg.paths.workdir;
    let ckpt = Checkpoint::load(&require(dir.join(FINETUNE_DIR), "finetune")?)?;
    let prepared = Prepared::load(cfg)?;
    if !prepared.sid.contains(word) {
        return Err(Error::TokenNotInSid(word.to_owned()));
    }
    let pivot = cfg.training_language.as_str();
    let pivot_path = cfg.embedding_path(pivot)?;
    require_input(pivot_path)?;
    let pivot_emb = load_embeddings(pivot_path, None, pivot)?.matrix.into_pivot();
    let source = prepared.source(&pivot_emb, cfg)?;
    let seed = rng::derive(cfg.seed, &[rng::label("predict"), rng::label(word)]);
    let dist = word_sememe_distribution(word, &source, &ckpt.autoencoder, &ckpt.space, cfg.report.sample_cap, seed)?;

    let mut langs: Vec<String> = if languages.is_empty() { cfg.report.languages.clone() } else { languages.to_vec() };
    if langs.is_empty() {
        langs.push(pivot.to_owned());
    }
    let mut spaces = Vec::with_capacity(langs.len());
    for lang in &langs {
        if lang == pivot {
            spaces.push(pivot_emb.clone());
            continue;
        }
        let map = AlignmentMap::read(&require(dir.join(alignment_file(lang, pivot)), "align")?)?;
        if map.target != pivot {
            return Err(Error::Config(format!("alignment for {lang} maps into {}, not {pivot}", map.target)));
        }
        let path = cfg.embedding_path(lang)?;
        require_input(path)?;
        spaces.push(map.apply(&load_embeddings(path, None, lang)?.matrix)?);
    }
    let refs: Vec<&EmbeddingMatrix> = spaces.iter().collect();
    SememeReport::build(word, &dist, &ckpt.autoencoder, &ckpt.space, &refs, cfg.report.words)
}
