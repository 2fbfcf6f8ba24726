//! Per-word sememe distributions and their human-readable rendering.
//!
//! A word's distribution is the share of its sampled contextual meanings
//! assigned to each sememe. Each sememe is described by decoding its centroid
//! back to embedding space and listing the closest words there.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attention::ContextSource;
use crate::dcn::{assign, Autoencoder, SememeSpace};
use crate::embeddings::{nearest_neighbors, EmbeddingMatrix};
use crate::error::{Error, Result};

/// Words listed per sememe unless configured otherwise.
pub const DESCRIPTION_WORDS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SememeDistribution {
    /// Cluster of every sample, in sampling order.
    pub assignments: Vec<usize>,
    /// Clusters with at least one sample, by probability descending then
    /// cluster ascending.
    pub probabilities: Vec<(usize, f64)>,
}

impl SememeDistribution {
    pub fn from_assignments(assignments: Vec<usize>) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &a in &assignments {
            *counts.entry(a).or_default() += 1;
        }
        let n = assignments.len() as f64;
        let mut probabilities: Vec<(usize, f64)> = counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect();
        // stable sort keeps ascending cluster order among equal probabilities
        probabilities.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(SememeDistribution { assignments, probabilities })
    }

    pub fn samples(&self) -> usize {
        self.assignments.len()
    }
}

/// Encodes up to `sample_cap` contextual meanings of `word` and counts their
/// nearest sememes.
pub fn word_sememe_distribution(
    word: &str,
    source: &ContextSource<'_>,
    ae: &Autoencoder,
    space: &SememeSpace,
    sample_cap: usize,
    seed: u64,
) -> Result<SememeDistribution> {
    let batch = source.batch_contextual_meanings(word, sample_cap, seed)?;
    let assignments = batch
        .meanings
        .row_iter()
        .map(|m| Ok(assign(&ae.encode(m)?, space)?.index))
        .collect::<Result<Vec<_>>>()?;
    SememeDistribution::from_assignments(assignments)
}

/// The decoder image of sememe `k`, in embedding space.
pub fn decode_sememe(space: &SememeSpace, k: usize, ae: &Autoencoder) -> Result<Vec<f64>> {
    if k >= space.k() {
        return Err(Error::OutOfRange { index: k, len: space.k() });
    }
    ae.decode(space.centroid(k))
}

pub fn describe_sememe(vector: &[f64], emb: &EmbeddingMatrix, k: usize) -> Result<Vec<(String, f64)>> {
    nearest_neighbors(vector, emb, k, None)
}

/// Like [`describe_sememe`], for a language whose vectors have been mapped
/// into the shared space.
pub fn cross_lingual_describe(vector: &[f64], emb: &EmbeddingMatrix, k: usize) -> Result<Vec<(String, f64)>> {
    if emb.aligned_to().is_none() {
        return Err(Error::NotAligned);
    }
    describe_sememe(vector, emb, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub token: String,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    /// 1-based.
    pub rank: usize,
    pub cluster: usize,
    pub probability: f64,
    /// Language tag to nearest words.
    pub descriptions: BTreeMap<String, Vec<Description>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SememeReport {
    pub word: String,
    pub samples: usize,
    pub entries: Vec<ReportEntry>,
}

impl SememeReport {
    /// Describes every sememe of `dist` in each of `languages`, which must
    /// all live in the shared space.
    pub fn build(
        word: &str,
        dist: &SememeDistribution,
        ae: &Autoencoder,
        space: &SememeSpace,
        languages: &[&EmbeddingMatrix],
        words_per_sememe: usize,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(dist.probabilities.len());
        for (i, &(cluster, probability)) in dist.probabilities.iter().enumerate() {
            let decoded = decode_sememe(space, cluster, ae)?;
            let mut descriptions = BTreeMap::new();
            for emb in languages {
                let words = cross_lingual_describe(&decoded, emb, words_per_sememe)?
                    .into_iter()
                    .map(|(token, cosine)| Description { token, cosine })
                    .collect();
                descriptions.insert(emb.language().to_owned(), words);
            }
            entries.push(ReportEntry { rank: i + 1, cluster, probability, descriptions });
        }
        Ok(SememeReport { word: word.to_owned(), samples: dist.samples(), entries })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Config(format!("unknown report format {s:?}"))),
        }
    }
}

/// `1st`, `2nd`, `3rd`, `4th`, …, `11th`, `21st`, …
pub fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// Renders the first `top_n` entries. The JSON form always keeps every
/// field; the text form is a grid with one column per rank, the describing
/// words stacked and the probability in parentheses underneath.
pub fn render_report(report: &SememeReport, top_n: usize, format: ReportFormat) -> Result<String> {
    if top_n == 0 {
        return Err(Error::Config("top n must be at least 1".into()));
    }
    let entries = &report.entries[..top_n.min(report.entries.len())];
    if format == ReportFormat::Json {
        let shown = SememeReport { entries: entries.to_vec(), ..report.clone() };
        return Ok(shown.to_json()? + "\n");
    }
    let mut out = format!("{} ({} samples)\n", report.word, report.samples);
    let languages: Vec<&String> =
        entries.first().map(|e| e.descriptions.keys().collect()).unwrap_or_default();
    for lang in languages {
        let cells: Vec<Vec<String>> = entries
            .iter()
            .map(|e| {
                let words = e.descriptions.get(lang).map(Vec::as_slice).unwrap_or_default();
                let mut cell = vec![ordinal(e.rank)];
                for (i, d) in words.iter().enumerate() {
                    let sep = if i + 1 < words.len() { ";" } else { "" };
                    cell.push(format!("{}{sep}", d.token));
                }
                cell.push(format!("({:.5})", e.probability));
                cell
            })
            .collect();
        let height = cells.iter().map(Vec::len).max().unwrap_or(0);
        let width = cells.iter().flatten().map(|s| s.chars().count()).max().unwrap_or(0) + 2;
        let _ = writeln!(out, "[{lang}]");
        for line in 0..height {
            let mut row = String::new();
            for cell in &cells {
                // probabilities share the bottom line even when a cell has fewer words
                let text = if line + 1 == height { cell.last() } else { cell.get(line).filter(|_| line + 1 < cell.len()) };
                let _ = write!(row, "{:<width$}", text.map(String::as_str).unwrap_or(""));
            }
            out.push_str(row.trim_end());
            out.push('\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcn::{Activation, Layer};
    use crate::tensor::DenseMatrix;

    /// Keeps the first two coordinates; decodes by padding with zero.
    fn slice_ae() -> Autoencoder {
        let enc = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let dec = enc.transpose();
        Autoencoder::from_layers(vec![
            Layer { weights: enc, bias: vec![0.0; 2], activation: Activation::Linear },
            Layer { weights: dec, bias: vec![0.0; 3], activation: Activation::Linear },
        ])
        .unwrap()
    }

    fn toy_space() -> EmbeddingMatrix {
        let v = DenseMatrix::from_rows(&[
            [1.0, 0.0, 0.0],
            [0.9, 0.1, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.5],
        ])
        .unwrap();
        let tokens = ["a", "b", "c", "d", "e"].map(String::from).to_vec();
        EmbeddingMatrix::new("en", tokens, v).unwrap()
    }

    #[test]
    fn distribution_counts() {
        let d = SememeDistribution::from_assignments(vec![2, 2, 2, 2]).unwrap();
        assert_eq!(d.probabilities, vec![(2, 1.0)]);
        let d = SememeDistribution::from_assignments(vec![5, 1, 5, 5]).unwrap();
        assert_eq!(d.probabilities, vec![(5, 0.75), (1, 0.25)]);
        let d = SememeDistribution::from_assignments(vec![3, 1, 1, 3]).unwrap();
        assert_eq!(d.probabilities, vec![(1, 0.5), (3, 0.5)]);
        assert!(SememeDistribution::from_assignments(vec![]).is_err());
    }

    #[test]
    fn decoding_examples() {
        let ae = Autoencoder::new(3, &[2], 1).unwrap();
        let space = SememeSpace::from_centroids(DenseMatrix::from_rows(&[[0.5, -1.0]]).unwrap()).unwrap();
        let layer = &ae.layers()[1];
        let manual: Vec<f64> = (0..3)
            .map(|i| layer.weights.get(i, 0) * 0.5 - layer.weights.get(i, 1) + layer.bias[i])
            .collect();
        assert_eq!(decode_sememe(&space, 0, &ae).unwrap(), manual);
        assert!(decode_sememe(&space, 1, &ae).is_err());

        let mut zero = ae.clone();
        zero.set_flat(&vec![0.0; zero.parameter_count()]).unwrap();
        assert_eq!(decode_sememe(&space, 0, &zero).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn describe_examples() {
        let emb = toy_space();
        let top = describe_sememe(emb.vector("c").unwrap(), &emb, 3).unwrap();
        assert_eq!(top[0].0, "c");
        assert_eq!(top.len(), 3);
        let two = EmbeddingMatrix::new("en", vec!["x".into(), "y".into()], DenseMatrix::identity(2)).unwrap();
        assert_eq!(describe_sememe(&[1.0, 1.0], &two, 3).unwrap().len(), 2);
        assert!(matches!(describe_sememe(&[0.0; 3], &emb, 3), Err(Error::ZeroVector)));
    }

    #[test]
    fn cross_lingual_requires_alignment() {
        let emb = toy_space();
        assert!(matches!(cross_lingual_describe(&[1.0, 0.0, 0.0], &emb, 3), Err(Error::NotAligned)));
        let pivot = emb.clone().into_pivot();
        assert_eq!(
            cross_lingual_describe(&[1.0, 0.2, 0.0], &pivot, 3).unwrap(),
            describe_sememe(&[1.0, 0.2, 0.0], &emb, 3).unwrap()
        );
        let empty = EmbeddingMatrix::new("zz", vec![], DenseMatrix::zeros(0, 3)).unwrap().into_pivot();
        assert!(cross_lingual_describe(&[1.0, 0.0, 0.0], &empty, 3).is_err());
    }

    #[test]
    fn ordinals() {
        let got: Vec<String> = [1, 2, 3, 4, 6, 11, 12, 13, 21, 22, 101, 111].iter().map(|&n| ordinal(n)).collect();
        assert_eq!(got, ["1st", "2nd", "3rd", "4th", "6th", "11th", "12th", "13th", "21st", "22nd", "101st", "111th"]);
    }

    fn table_report() -> SememeReport {
        let probs = [0.03854, 0.03712, 0.03018, 0.02954, 0.02807, 0.02660, 0.01];
        let entries = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let words = (0..3).map(|j| Description { token: format!("w{i}{j}"), cosine: 0.9 - j as f64 / 10.0 }).collect();
                ReportEntry { rank: i + 1, cluster: i * 3, probability: p, descriptions: BTreeMap::from([("en".to_string(), words)]) }
            })
            .collect();
        SememeReport { word: "bank".into(), samples: 5000, entries }
    }

    #[test]
    fn text_rendering_has_table_shape() {
        let text = render_report(&table_report(), 6, ReportFormat::Text).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bank (5000 samples)");
        assert_eq!(lines[1], "[en]");
        for r in ["1st", "2nd", "3rd", "4th", "5th", "6th"] {
            assert!(lines[2].contains(r));
        }
        assert!(!lines[2].contains("7th"));
        assert!(lines[3].starts_with("w00;"));
        assert!(lines[5].starts_with("w02 "));
        assert!(lines[6].starts_with("(0.03854)"));
        assert_eq!(lines.len(), 7);
    }

    #[test]
    fn rendering_bounds() {
        let r = table_report();
        let all = render_report(&r, 100, ReportFormat::Json).unwrap();
        assert_eq!(SememeReport::from_json(&all).unwrap(), r);
        let six = SememeReport::from_json(&render_report(&r, 6, ReportFormat::Json).unwrap()).unwrap();
        assert_eq!(six.entries.len(), 6);
        assert!(render_report(&r, 0, ReportFormat::Text).is_err());
    }

    #[test]
    fn report_from_identity_model() {
        let emb = toy_space().into_pivot();
        let ae = slice_ae();
        let space = SememeSpace::from_centroids(DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()).unwrap();
        let dist = SememeDistribution::from_assignments(vec![1, 0, 1]).unwrap();
        let rep = SememeReport::build("a", &dist, &ae, &space, &[&emb], 3).unwrap();
        assert_eq!(rep.entries[0].cluster, 1);
        assert_eq!(rep.entries[0].descriptions["en"][0].token, "a");
        assert_eq!(rep.entries[1].descriptions["en"][0].token, "c");
        let total: f64 = rep.entries.iter().map(|e| e.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
