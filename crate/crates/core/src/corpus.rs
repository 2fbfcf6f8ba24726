//! Sentence segmentation, word-level tokenization, length filtering and the
//! frequency-capped vocabulary.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Sentence delimiters used when the configuration does not override them.
/// Newline is always added on top of this set.
pub const DEFAULT_DELIMITERS: &str = ",.?!();:\"'[]{}<>—–…¡¿。，！？；：、「」『』（）·«»‹›※~|";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceRecord {
    pub id: u32,
    pub tokens: Vec<String>,
}

/// Splits `text` at every delimiter character. Segments that are empty are
/// dropped; whitespace-only segments are kept so that the concatenated output
/// equals the input with delimiters removed.
pub fn split_sentences(text: &str, delimiters: &[char]) -> Vec<String> {
    text.split(|c: char| delimiters.contains(&c))
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Lowercases, splits on whitespace and strips leading and trailing
/// non-alphanumeric characters from every token.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Keeps sentences with `min <= len <= max` and renumbers them densely.
pub fn filter_by_length<I>(sentences: I, min: usize, max: usize) -> Vec<SentenceRecord>
where
    I: IntoIterator<Item = SentenceRecord>,
{
    sentences
        .into_iter()
        .filter(|s| (min..=max).contains(&s.tokens.len()))
        .enumerate()
        .map(|(i, s)| SentenceRecord { id: i as u32, tokens: s.tokens })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    freqs: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn frequency(&self, token: &str) -> Option<u64> {
        self.index_of(token).map(|i| self.freqs[i])
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    /// `(token, frequency)` in index order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.tokens.iter().map(String::as_str).zip(self.freqs.iter().copied())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (t, f) in self.iter() {
            writeln!(w, "{t}\t{f}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Counts tokens and keeps the `cap` most frequent. Ties go to the token seen
/// first. Indices follow the frequency ranking.
pub fn build_vocab<I, S>(sentences: I, cap: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[String]>,
{
    if cap == 0 {
        return Err(Error::Config("vocabulary cap must be at least 1".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut owned_index: HashMap<String, usize> = HashMap::new();
    for s in sentences {
        for t in s.as_ref() {
            match owned_index.get(t) {
                Some(&i) => counts[i] += 1,
                None => {
                    owned_index.insert(t.clone(), order.len());
                    order.push(t.clone());
                    counts.push(1);
                }
            }
        }
    }

    let mut ranked: Vec<usize> = (0..order.len()).collect();
    ranked.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    ranked.truncate(cap);

    let mut vocab = Vocabulary::default();
    for i in ranked {
        vocab.index.insert(order[i].clone(), vocab.tokens.len());
        vocab.tokens.push(order[i].clone());
        vocab.freqs.push(counts[i]);
    }
    Ok(vocab)
}

/// Reads UTF-8 text files and runs split, tokenize and the length filter.
pub fn load_sentences(
    paths: &[impl AsRef<Path>],
    delimiters: &[char],
    min: usize,
    max: usize,
) -> Result<Vec<SentenceRecord>> {
    let mut raw = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        raw.extend(split_sentences(&text, delimiters).iter().map(|s| tokenize(s)));
    }
    let records = raw.into_iter().map(|tokens| SentenceRecord { id: 0, tokens });
    Ok(filter_by_length(records, min, max))
}

/// Writes `id<TAB>token token ...`, one record per line.
pub fn write_sentences(path: &Path, sentences: &[SentenceRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in sentences {
        writeln!(w, "{}\t{}", s.id, s.tokens.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_sentences(path: &Path) -> Result<Vec<SentenceRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, n + 1, "expected id<TAB>tokens"))?;
        let id: u32 = id.parse().map_err(|_| Error::parse(path, n + 1, "bad sentence id"))?;
        if id as usize != out.len() {
            return Err(Error::parse(path, n + 1, "sentence ids must be dense and ordered"));
        }
        let tokens = rest.split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect();
        out.push(SentenceRecord { id, tokens });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_sentences("a cat, a dog. end", &[',', '.']), vec!["a cat", " a dog", " end"]);
        assert!(split_sentences("...", &['.']).is_empty());
        assert_eq!(split_sentences("no delimiters here", &['.']), vec!["no delimiters here"]);
        assert!(split_sentences("", &['.']).is_empty());
    }

    #[test]
    fn default_delimiters_cover_table_examples() {
        let d: Vec<char> = DEFAULT_DELIMITERS.chars().collect();
        assert_eq!(d.len(), 42);
        for c in ",.?!()".chars() {
            assert!(d.contains(&c));
        }
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The Cat sat"), toks(&["the", "cat", "sat"]));
        assert!(tokenize("  ").is_empty());
        assert_eq!(tokenize("hello, (world)"), toks(&["hello", "world"]));
        assert_eq!(tokenize("audio/visual -- x"), toks(&["audio/visual", "x"]));
    }

    #[test]
    fn vocab_examples() {
        let v = build_vocab([toks(&["a", "b", "a"])], 10).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.frequency("a"), Some(2));
        assert_eq!(v.frequency("b"), Some(1));
        assert_eq!(v.index_of("a"), Some(0));

        let v = build_vocab([toks(&["a", "b", "a"])], 1).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.frequency("a"), Some(2));

        let v = build_vocab([toks(&["a", "b"])], 1).unwrap();
        assert_eq!(v.frequency("a"), Some(1));
        assert!(!v.contains("b"));

        let empty: Vec<Vec<String>> = vec![];
        assert!(build_vocab(empty, 5).unwrap().is_empty());
        assert!(build_vocab([toks(&["a"])], 0).is_err());
    }

    #[test]
    fn vocab_ties_use_first_occurrence_across_sentences() {
        let v = build_vocab([toks(&["z", "y"]), toks(&["y", "x", "z", "x"])], 3).unwrap();
        let order: Vec<&str> = v.iter().map(|(t, _)| t).collect();
        assert_eq!(order, vec!["z", "y", "x"]);
    }

    #[test]
    fn length_filter_bounds() {
        let recs = [1, 2, 20, 21]
            .iter()
            .map(|&n| SentenceRecord { id: 9, tokens: vec!["w".to_string(); n] })
            .collect::<Vec<_>>();
        let kept = filter_by_length(recs.clone(), 2, 20);
        assert_eq!(kept.iter().map(|s| s.tokens.len()).collect::<Vec<_>>(), vec![2, 20]);
        assert_eq!(kept.iter().map(|s| s.id).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(filter_by_length(recs, 1, usize::MAX).len(), 4);
        assert!(filter_by_length(Vec::new(), 2, 20).is_empty());
    }

    #[test]
    fn sentence_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sentences.txt");
        let recs = vec![
            SentenceRecord { id: 0, tokens: toks(&["a", "b"]) },
            SentenceRecord { id: 1, tokens: toks(&["c", "d", "e"]) },
        ];
        write_sentences(&path, &recs).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "0\ta b\n1\tc d e\n");
        assert_eq!(read_sentences(&path).unwrap(), recs);
    }

    proptest! {
        #[test]
        fn split_removes_only_delimiters(text in "[a-c ,.!]{0,60}") {
            let delims = [',', '.', '!'];
            let parts = split_sentences(&text, &delims);
            prop_assert!(parts.iter().all(|p| !p.is_empty() && !p.contains(&delims[..])));
            let expected: String = text.chars().filter(|c| !delims.contains(c)).collect();
            prop_assert_eq!(parts.concat(), expected);
        }

        #[test]
        fn tokens_are_clean(text in "\\PC{0,80}") {
            for t in tokenize(&text) {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
                prop_assert_eq!(t.to_lowercase(), t.clone());
            }
        }
    }
}
