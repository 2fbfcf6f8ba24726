//! The sentence index dictionary: for every word, the ids of the sentences
//! that contain it.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};

use crate::corpus::{SentenceRecord, Vocabulary};
use crate::error::{Error, Result};
use crate::rng;

const HEADER_PREFIX: &str = "#sid v1 sentences=";

/// Token → ascending, duplicate-free sentence ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SentenceIndexDictionary {
    entries: BTreeMap<String, Vec<u32>>,
    sentence_count: u32,
}

/// Post-balance statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BalanceStats {
    pub capped: usize,
    pub dropped: usize,
    pub kept: usize,
}

impl SentenceIndexDictionary {
    /// Indexes every in-vocabulary token. A token repeated inside a sentence
    /// is recorded once.
    pub fn build<'a, I>(sentences: I, vocab: &Vocabulary) -> Self
    where
        I: IntoIterator<Item = &'a SentenceRecord>,
    {
        let mut entries: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        let mut count = 0u32;
        for s in sentences {
            count = count.max(s.id + 1);
            for t in &s.tokens {
                if !vocab.contains(t) {
                    continue;
                }
                let ids = entries.entry(t.clone()).or_default();
                if ids.last() != Some(&s.id) {
                    ids.push(s.id);
                }
            }
        }
        for ids in entries.values_mut() {
            ids.sort_unstable();
            ids.dedup();
        }
        SentenceIndexDictionary { entries, sentence_count: count }
    }

    pub fn from_entries(entries: BTreeMap<String, Vec<u32>>, sentence_count: u32) -> Result<Self> {
        let mut entries = entries;
        for (t, ids) in entries.iter_mut() {
            ids.sort_unstable();
            ids.dedup();
            if ids.last().is_some_and(|&id| id >= sentence_count) {
                return Err(Error::Config(format!("token {t:?} references a sentence beyond {sentence_count}")));
            }
        }
        Ok(SentenceIndexDictionary { entries, sentence_count })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sentence_count(&self) -> u32 {
        self.sentence_count
    }

    pub fn get(&self, token: &str) -> Option<&[u32]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    /// Tokens in byte order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[u32])> {
        self.entries.iter().map(|(t, ids)| (t.as_str(), ids.as_slice()))
    }

    pub fn remove_stopwords(mut self, stopwords: &HashSet<String>) -> Self {
        self.entries.retain(|t, _| !stopwords.contains(t));
        self
    }

    /// Caps every list at `upper` ids by uniform sampling and drops tokens with
    /// fewer than `lower` ids. Each token samples from its own stream, so the
    /// outcome does not depend on which other tokens are present.
    pub fn balance(mut self, upper: usize, lower: usize, seed: u64) -> Result<(Self, BalanceStats)> {
        if lower > upper {
            return Err(Error::Config(format!("lower bound {lower} exceeds upper bound {upper}")));
        }
        let mut stats = BalanceStats::default();
        self.entries.retain(|token, ids| {
            if ids.len() < lower {
                stats.dropped += 1;
                return false;
            }
            if ids.len() > upper {
                let mut r = rng::stream(seed, &[rng::label("balance"), rng::label(token)]);
                let mut kept: Vec<u32> = index::sample(&mut r, ids.len(), upper).into_iter().map(|i| ids[i]).collect();
                kept.sort_unstable();
                *ids = kept;
                stats.capped += 1;
            }
            stats.kept += 1;
            true
        });
        Ok((self, stats))
    }

    /// Draws `min(n, available)` distinct ids for `token`, in random order.
    pub fn sample_sentences(&self, token: &str, n: usize, seed: u64) -> Result<Vec<u32>> {
        let ids = self.get(token).ok_or_else(|| Error::TokenNotInSid(token.to_owned()))?;
        if n == 0 {
            return Err(Error::Config("sample size must be at least 1".into()));
        }
        let mut r = rng::stream(seed, &[rng::label("sample"), rng::label(token)]);
        if n >= ids.len() {
            let mut all = ids.to_vec();
            all.shuffle(&mut r);
            Ok(all)
        } else {
            Ok(index::sample(&mut r, ids.len(), n).into_iter().map(|i| ids[i]).collect())
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{HEADER_PREFIX}{}", self.sentence_count).map_err(io)?;
        for (token, ids) in &self.entries {
            let joined = ids.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
            writeln!(w, "{token}\t{joined}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let count = lines
            .next()
            .and_then(|h| h.strip_prefix(HEADER_PREFIX))
            .and_then(|n| n.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::parse(path, 1, "expected header `#sid v1 sentences=<N>`"))?;
        let mut entries = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            let lineno = n + 2;
            let (token, ids) =
                line.split_once('\t').ok_or_else(|| Error::parse(path, lineno, "expected token<TAB>ids"))?;
            let ids = ids
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(path, lineno, "bad sentence id"))?;
            if ids.windows(2).any(|w| w[0] >= w[1]) || ids.last().is_some_and(|&id| id >= count) {
                return Err(Error::parse(path, lineno, "ids must be ascending, unique and below the sentence count"));
            }
            entries.insert(token.to_owned(), ids);
        }
        Ok(SentenceIndexDictionary { entries, sentence_count: count })
    }
}

/// One token per line; blank lines and `#` comments are skipped.
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}
