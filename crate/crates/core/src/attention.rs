//! Contextual meaning vectors: the attention-weighted sum of a sentence's
//! unit-normalized word vectors, taken from the point of view of one target
//! word.
//!
//! For a sentence with unit vectors `x̂₁ … x̂ₙ` and target position `t`, the
//! weights are `a = softmax(e · [⟨x̂_t, x̂_j⟩]_j)` and the meaning is
//! `m = Σ_j a_j x̂_j`. The expansion coefficient `e` multiplies the scores
//! before normalization; the target takes part in its own sum.

use rand::seq::SliceRandom;

use crate::corpus::SentenceRecord;
use crate::dcn::MeaningSource;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng;
use crate::sid::SentenceIndexDictionary;
use crate::tensor::{axpy, dot, norm, normalize, softmax_scaled, DenseMatrix};

/// Attention weights of `target` over a sentence of unit vectors.
pub fn attention_weights(unit_vectors: &[&[f64]], target: usize, expansion: f64) -> Result<Vec<f64>> {
    if unit_vectors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let query = *unit_vectors.get(target).ok_or(Error::OutOfRange { index: target, len: unit_vectors.len() })?;
    let scores: Vec<f64> = unit_vectors.iter().map(|x| dot(query, x)).collect();
    softmax_scaled(&scores, expansion)
}

/// Meaning of the word at `target` in a sentence given by its embeddings.
/// The embeddings are unit-normalized here; a zero vector is an error.
pub fn contextual_meaning(sentence: &[&[f64]], target: usize, expansion: f64) -> Result<Vec<f64>> {
    if sentence.is_empty() {
        return Err(Error::EmptyInput);
    }
    if target >= sentence.len() {
        return Err(Error::OutOfRange { index: target, len: sentence.len() });
    }
    let units = sentence.iter().map(|v| normalize(v)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = units.iter().map(Vec::as_slice).collect();
    Ok(weighted_sum(&refs, &attention_weights(&refs, target, expansion)?))
}

fn weighted_sum(vectors: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; vectors[0].len()];
    for (v, &a) in vectors.iter().zip(weights) {
        axpy(a, v, &mut m);
    }
    m
}

/// One attention sample per sampled sentence of a single word.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualMeaningBatch {
    pub token: String,
    pub sentence_ids: Vec<u32>,
    /// `B × D`, one row per entry of `sentence_ids`.
    pub meanings: DenseMatrix,
    pub expansion: f64,
}

/// Emits `tokens` window by window, each window shuffled on its own.
pub fn shuffled_windows<T: Clone>(tokens: &[T], window: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    if window == 0 {
        return Err(Error::Config("shuffle window must be at least 1".into()));
    }
    Ok(tokens
        .chunks(window)
        .enumerate()
        .map(|(i, chunk)| {
            let mut w = chunk.to_vec();
            w.shuffle(&mut rng::stream(seed, &[rng::label("window"), i as u64]));
            w
        })
        .collect())
}

pub fn shuffled_word_stream<T: Clone>(tokens: &[T], window: usize, seed: u64) -> Result<Vec<T>> {
    Ok(shuffled_windows(tokens, window, seed)?.into_iter().flatten().collect())
}

/// Everything needed to compute meaning batches for SID words: the SID, the
/// sentence store and unit-normalized embeddings.
pub struct ContextSource<'a> {
    sid: &'a SentenceIndexDictionary,
    sentences: &'a [SentenceRecord],
    units: EmbeddingMatrix,
    expansion: f64,
    words: Vec<String>,
    skipped: Vec<String>,
}

impl<'a> ContextSource<'a> {
    pub fn new(
        sid: &'a SentenceIndexDictionary,
        sentences: &'a [SentenceRecord],
        emb: &EmbeddingMatrix,
        expansion: f64,
    ) -> Result<Self> {
        if !(expansion > 0.0 && expansion.is_finite()) {
            return Err(Error::Config(format!("expansion coefficient must be positive, got {expansion}")));
        }
        let units = if emb.is_normalized() { emb.clone() } else { emb.unit_normalized() };
        let (words, skipped) = sid.tokens().map(str::to_owned).partition(|t| units.index_of(t).is_some());
        Ok(ContextSource { sid, sentences, units, expansion, words, skipped })
    }

    /// SID words that have an embedding, in SID order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// SID words without an embedding.
    pub fn skipped(&self) -> &[String] {
        &self.skipped
    }

    pub fn expansion(&self) -> f64 {
        self.expansion
    }

    pub fn sid(&self) -> &SentenceIndexDictionary {
        self.sid
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.units
    }

    /// Unit vectors of a sentence's tokens that have embeddings, and the
    /// position of the first occurrence of `token` among them.
    fn sentence_context(&self, token: &str, id: u32) -> Result<(Vec<&[f64]>, usize)> {
        let sentence = self.sentences.get(id as usize).ok_or(Error::SentenceNotFound(id))?;
        let mut vectors = Vec::with_capacity(sentence.tokens.len());
        let mut target = None;
        for t in &sentence.tokens {
            if let Some(v) = self.units.vector(t) {
                if target.is_none() && t == token {
                    target = Some(vectors.len());
                }
                vectors.push(v);
            }
        }
        let target = target.ok_or_else(|| Error::OccurrenceNotFound { token: token.to_owned(), sentence: id })?;
        if norm(vectors[target]) == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok((vectors, target))
    }

    /// Attention weights for `token` in sentence `id`.
    pub fn weights(&self, token: &str, id: u32) -> Result<Vec<f64>> {
        let (vectors, target) = self.sentence_context(token, id)?;
        attention_weights(&vectors, target, self.expansion)
    }

    pub fn meaning(&self, token: &str, id: u32) -> Result<Vec<f64>> {
        let (vectors, target) = self.sentence_context(token, id)?;
        let w = attention_weights(&vectors, target, self.expansion)?;
        Ok(weighted_sum(&vectors, &w))
    }

    /// Samples up to `size` of the word's sentences and computes one meaning
    /// per sentence.
    pub fn batch_contextual_meanings(&self, token: &str, size: usize, seed: u64) -> Result<ContextualMeaningBatch> {
        if !self.sid.contains(token) {
            return Err(Error::TokenNotInSid(token.to_owned()));
        }
        if self.units.index_of(token).is_none() {
            return Err(Error::TokenNotInEmbeddings(token.to_owned()));
        }
        let ids = self.sid.sample_sentences(token, size, seed)?;
        let mut meanings = DenseMatrix::zeros(ids.len(), self.units.dim());
        for (row, &id) in ids.iter().enumerate() {
            let m = self.meaning(token, id)?;
            meanings.row_mut(row).copy_from_slice(&m);
        }
        Ok(ContextualMeaningBatch { token: token.to_owned(), sentence_ids: ids, meanings, expansion: self.expansion })
    }
}

impl MeaningSource for ContextSource<'_> {
    fn word_count(&self) -> usize {
        self.words.len()
    }

    fn dim(&self) -> usize {
        self.units.dim()
    }

    fn batch(&self, word: usize, size: usize, seed: u64) -> Result<DenseMatrix> {
        let token = self.words.get(word).ok_or(Error::OutOfRange { index: word, len: self.words.len() })?;
        Ok(self.batch_contextual_meanings(token, size, seed)?.meanings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;

    fn fixture() -> (SentenceIndexDictionary, Vec<SentenceRecord>, EmbeddingMatrix) {
        let sents: Vec<SentenceRecord> = ["a b", "b c a", "c c", "a"]
            .iter()
            .enumerate()
            .map(|(i, s)| SentenceRecord { id: i as u32, tokens: s.split(' ').map(str::to_owned).collect() })
            .collect();
        let vocab = build_vocab(sents.iter().map(|s| &s.tokens), 10).unwrap();
        let sid = SentenceIndexDictionary::build(&sents, &vocab);
        let v = DenseMatrix::from_rows(&[[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.6, 0.8, 0.0]]).unwrap();
        let emb = EmbeddingMatrix::new("en", vec!["a".into(), "b".into(), "c".into()], v).unwrap();
        (sid, sents, emb)
    }

    #[test]
    fn single_token_is_unit_embedding_exactly() {
        let x = [3.0, 4.0];
        assert_eq!(contextual_meaning(&[&x], 0, 4.0).unwrap(), vec![0.6, 0.8]);
    }

    #[test]
    fn identical_tokens_give_that_unit_vector() {
        let x = [0.0, 2.0, 0.0];
        let m = contextual_meaning(&[&x, &x, &x], 1, 4.0).unwrap();
        for (a, b) in m.iter().zip([0.0, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn orthonormal_pair_with_expansion_four() {
        // softmax(4·[1, 0]) = [e⁴/(e⁴+1), 1/(e⁴+1)]
        let hi = 0.982_013_790_037_908_5;
        let lo = 0.017_986_209_962_091_56;
        let m = contextual_meaning(&[&[1.0, 0.0], &[0.0, 1.0]], 0, 4.0).unwrap();
        assert!((m[0] - hi).abs() < 1e-12 && (m[1] - lo).abs() < 1e-12);
        assert!((m[0] - 0.98201).abs() < 1e-5 && (m[1] - 0.01799).abs() < 1e-5);
    }

    #[test]
    fn meaning_errors() {
        assert!(matches!(contextual_meaning(&[&[1.0, 0.0]], 1, 4.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(contextual_meaning(&[&[1.0], &[0.0]], 0, 4.0), Err(Error::ZeroVector)));
    }

    #[test]
    fn max_weight_grows_with_expansion() {
        let s: [&[f64]; 2] = [&[1.0, 0.0], &[0.6, 0.8]];
        let mut last = 0.0;
        for e in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let w = attention_weights(&s, 0, e).unwrap();
            let max = w.iter().copied().fold(0.0, f64::max);
            assert!(max >= last);
            last = max;
        }
    }

    #[test]
    fn batch_of_one_matches_direct_meaning() {
        let (sid, sents, emb) = fixture();
        let src = ContextSource::new(&sid, &sents, &emb, 4.0).unwrap();
        let b = src.batch_contextual_meanings("a", 1, 5).unwrap();
        assert_eq!(b.meanings.rows(), 1);
        let id = b.sentence_ids[0];
        let sentence: Vec<&[f64]> = sents[id as usize].tokens.iter().map(|t| emb.vector(t).unwrap()).collect();
        let pos = sents[id as usize].tokens.iter().position(|t| t == "a").unwrap();
        let direct = contextual_meaning(&sentence, pos, 4.0).unwrap();
        for (x, y) in b.meanings.row(0).iter().zip(&direct) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn batches_are_seed_reproducible_and_bounded() {
        let (sid, sents, emb) = fixture();
        let src = ContextSource::new(&sid, &sents, &emb, 4.0).unwrap();
        let a = src.batch_contextual_meanings("a", 64, 9).unwrap();
        assert_eq!(a, src.batch_contextual_meanings("a", 64, 9).unwrap());
        assert_eq!(a.meanings.rows(), 3);
        for row in a.meanings.row_iter() {
            assert!(norm(row) <= 1.0 + 1e-9);
        }
        for &id in &a.sentence_ids {
            let w = src.weights("a", id).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn repeated_target_uses_first_occurrence() {
        let (sid, sents, emb) = fixture();
        let src = ContextSource::new(&sid, &sents, &emb, 4.0).unwrap();
        // sentence 2 is "c c": the first c attends to both copies equally
        let w = src.weights("c", 2).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stale_sid_and_missing_stores() {
        let (_, sents, emb) = fixture();
        let mut entries = std::collections::BTreeMap::new();
        entries.insert("b".to_string(), vec![3]);
        entries.insert("q".to_string(), vec![0]);
        let stale = SentenceIndexDictionary::from_entries(entries, 4).unwrap();
        let src = ContextSource::new(&stale, &sents, &emb, 4.0).unwrap();
        let err = src.batch_contextual_meanings("b", 1, 0).unwrap_err();
        assert!(err.to_string().contains("occurrence not found"), "{err}");
        let err = src.batch_contextual_meanings("q", 1, 0).unwrap_err();
        assert!(matches!(err, Error::TokenNotInEmbeddings(_)), "{err}");
        let err = src.batch_contextual_meanings("zzz", 1, 0).unwrap_err();
        assert!(err.to_string().contains("token not in SID"), "{err}");
        assert_eq!(src.words(), &["b".to_string()]);
        assert_eq!(src.skipped(), &["q".to_string()]);
    }

    #[test]
    fn word_stream_windows() {
        let words: Vec<u32> = (0..10).collect();
        let mut full = shuffled_word_stream(&words, 100, 3).unwrap();
        assert_ne!(full, words);
        full.sort_unstable();
        assert_eq!(full, words);
        assert_eq!(shuffled_word_stream(&words, 1, 3).unwrap(), words);
        assert_eq!(shuffled_word_stream(&words, 4, 8).unwrap(), shuffled_word_stream(&words, 4, 8).unwrap());
        let w = shuffled_windows(&words, 4, 8).unwrap();
        assert_eq!(w.len(), 3);
        let mut first = w[0].clone();
        first.sort_unstable();
        assert_eq!(first, vec![0, 1, 2, 3]);
        assert!(shuffled_windows(&words, 0, 1).is_err());
    }
}
