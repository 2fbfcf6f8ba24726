//! Word-vector files, linear alignment between two embedding spaces, and
//! cosine nearest-neighbour search.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, norm, svd, DenseMatrix};

/// Rows are word vectors in vocabulary order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: DenseMatrix,
    language: String,
    normalized: bool,
    aligned_to: Option<String>,
}

/// Result of [`load_embeddings`]: the matrix plus filter tokens the file lacked.
#[derive(Debug, Clone)]
pub struct LoadedEmbeddings {
    pub matrix: EmbeddingMatrix,
    pub missing: Vec<String>,
}

impl EmbeddingMatrix {
    pub fn new(language: impl Into<String>, tokens: Vec<String>, vectors: DenseMatrix) -> Result<Self> {
        if tokens.len() != vectors.rows() {
            return Err(Error::DimensionMismatch { expected: vectors.rows(), actual: tokens.len() });
        }
        if !vectors.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate token {t:?} in embeddings")));
            }
        }
        Ok(EmbeddingMatrix { tokens, index, vectors, language: language.into(), normalized: false, aligned_to: None })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vectors(&self) -> &DenseMatrix {
        &self.vectors
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.vectors.row(i))
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Name of the shared space this matrix lives in, if any.
    pub fn aligned_to(&self) -> Option<&str> {
        self.aligned_to.as_deref()
    }

    /// Declares this matrix to already be the shared space (the pivot language).
    pub fn into_pivot(mut self) -> Self {
        self.aligned_to = Some(self.language.clone());
        self
    }

    /// Copy with every nonzero row scaled to unit length.
    pub fn unit_normalized(&self) -> Self {
        let mut out = self.clone();
        for r in 0..out.vectors.rows() {
            let row = out.vectors.row_mut(r);
            let n = norm(row);
            if n > 0.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        out.normalized = true;
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dim()).map_err(io)?;
        for (t, row) in self.tokens.iter().zip(self.vectors.row_iter()) {
            write!(w, "{t}").map_err(io)?;
            for x in row {
                write!(w, " {x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Reads the `<count> <dim>` header format. With a filter, only filtered
/// tokens are kept and the ones the file does not contain are reported.
pub fn load_embeddings(path: &Path, filter: Option<&HashSet<String>>, language: &str) -> Result<LoadedEmbeddings> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header"))?
        .map_err(|e| Error::io(path, e))?;
    let mut parts = header.split_whitespace();
    let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(c), Some(d), None) => (
            c.parse::<usize>().map_err(|_| Error::parse(path, 1, "bad word count"))?,
            d.parse::<usize>().map_err(|_| Error::parse(path, 1, "bad dimension"))?,
        ),
        _ => return Err(Error::parse(path, 1, "expected `<count> <dim>`")),
    };

    let mut tokens = Vec::new();
    let mut data = Vec::new();
    let mut seen = 0usize;
    for (n, line) in lines.enumerate() {
        let lineno = n + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        let mut fields = line.split(' ').filter(|s| !s.is_empty());
        let token = fields.next().expect("non-empty line");
        let values = fields
            .map(f64::from_str)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, lineno, format!("bad float: {e}")))?;
        if values.len() != dim {
            return Err(Error::parse(path, lineno, format!("expected {dim} values, found {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, lineno, "non-finite value"));
        }
        if filter.is_some_and(|f| !f.contains(token)) {
            continue;
        }
        tokens.push(token.to_owned());
        data.extend(values);
    }
    if seen != count {
        return Err(Error::parse(path, 1, format!("header announces {count} words, file has {seen}")));
    }
    let rows = tokens.len();
    let matrix = EmbeddingMatrix::new(language, tokens, DenseMatrix::from_vec(rows, dim, data)?)?;
    let mut missing: Vec<String> = filter
        .map(|f| f.iter().filter(|t| matrix.index_of(t).is_none()).cloned().collect())
        .unwrap_or_default();
    missing.sort();
    Ok(LoadedEmbeddings { matrix, missing })
}

/// Up to `k` tokens ranked by cosine similarity to `query`, highest first.
/// Ties keep vocabulary order. Zero rows score 0.
pub fn nearest_neighbors(
    query: &[f64],
    emb: &EmbeddingMatrix,
    k: usize,
    exclude: Option<&HashSet<String>>,
) -> Result<Vec<(String, f64)>> {
    if query.len() != emb.dim() {
        return Err(Error::DimensionMismatch { expected: emb.dim(), actual: query.len() });
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if emb.is_empty() {
        return Err(Error::EmptyInput);
    }
    let qn = norm(query);
    if !qn.is_finite() {
        return Err(Error::NonFinite);
    }
    if qn == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut scored: Vec<(usize, f64)> = emb
        .vectors
        .row_iter()
        .enumerate()
        .filter(|(i, _)| exclude.is_none_or(|ex| !ex.contains(&emb.tokens[*i])))
        .map(|(i, row)| {
            let rn = norm(row);
            let c = if rn == 0.0 { 0.0 } else { (dot(query, row) / (qn * rn)).clamp(-1.0, 1.0) };
            (i, c)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored.into_iter().map(|(i, c)| (emb.tokens[i].clone(), c)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentMode {
    /// `W = U Vᵀ` from the SVD of `Y Xᵀ`.
    #[default]
    Orthogonal,
    /// Unconstrained `W = Y X⁺`.
    LeastSquares,
}

impl fmt::Display for AlignmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlignmentMode::Orthogonal => "orthogonal",
            AlignmentMode::LeastSquares => "least-squares",
        })
    }
}

impl FromStr for AlignmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(AlignmentMode::Orthogonal),
            "least-squares" | "lstsq" => Ok(AlignmentMode::LeastSquares),
            other => Err(Error::Config(format!("unknown alignment mode {other:?}"))),
        }
    }
}

/// A `D × D` map taking source-language vectors into the target space.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap {
    pub w: DenseMatrix,
    pub mode: AlignmentMode,
    pub source: String,
    pub target: String,
    /// `‖W X − Y‖_F` on the fitting pairs.
    pub residual: f64,
}

/// Fits `W` minimising `‖W X − Y‖_F`, where the `i`-th rows of `x` and `y`
/// are a translation pair (so `X = xᵀ`, `Y = yᵀ`).
pub fn align(x: &DenseMatrix, y: &DenseMatrix, mode: AlignmentMode) -> Result<DenseMatrix> {
    if x.shape() != y.shape() {
        return Err(Error::Shape(format!("source pairs {:?} vs target pairs {:?}", x.shape(), y.shape())));
    }
    let (pairs, dim) = x.shape();
    if pairs < dim || dim == 0 {
        return Err(Error::DegenerateDictionary(format!("{pairs} pairs for dimension {dim}")));
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::NonFinite);
    }
    match mode {
        AlignmentMode::Orthogonal => {
            // Y Xᵀ = yᵀ x
            let cross = y.transpose().matmul(x)?;
            let d = svd(&cross)?;
            d.u.matmul(&d.v.transpose())
        }
        AlignmentMode::LeastSquares => {
            // X = U S Vᵀ, X⁺ = V S⁻¹ Uᵀ, W = Y V S⁻¹ Uᵀ
            let xt = x.transpose();
            let d = svd(&xt)?;
            let smax = d.s[0];
            let smin = *d.s.last().expect("dim > 0");
            if smax == 0.0 || smin <= smax * 1e-10 {
                return Err(Error::DegenerateDictionary(format!(
                    "source pairs are rank deficient (condition {:.3e})",
                    if smin == 0.0 { f64::INFINITY } else { smax / smin }
                )));
            }
            let mut yv = y.transpose().matmul(&d.v)?;
            for r in 0..yv.rows() {
                for (v, s) in yv.row_mut(r).iter_mut().zip(&d.s) {
                    *v /= s;
                }
            }
            yv.matmul(&d.u.transpose())
        }
    }
}

/// `‖W X − Y‖_F` with pairs as rows.
pub fn alignment_residual(w: &DenseMatrix, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    let mapped = x.matmul(&w.transpose())?;
    Ok(mapped.sub(y)?.frobenius_norm())
}

impl AlignmentMap {
    /// Fits a map from `source` to `target` using the dictionary `pairs`.
    /// Pairs with a side missing from its embeddings are skipped.
    pub fn fit(
        source: &EmbeddingMatrix,
        target: &EmbeddingMatrix,
        pairs: &[(String, String)],
        mode: AlignmentMode,
    ) -> Result<Self> {
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch { expected: target.dim(), actual: source.dim() });
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (s, t) in pairs {
            if let (Some(a), Some(b)) = (source.vector(s), target.vector(t)) {
                xs.push(a);
                ys.push(b);
            }
        }
        if xs.len() < source.dim() {
            return Err(Error::DegenerateDictionary(format!(
                "dictionary covers {} pairs, need at least {}",
                xs.len(),
                source.dim()
            )));
        }
        let x = DenseMatrix::from_rows(&xs)?;
        let y = DenseMatrix::from_rows(&ys)?;
        let w = align(&x, &y, mode)?;
        let residual = alignment_residual(&w, &x, &y)?;
        Ok(AlignmentMap {
            w,
            mode,
            source: source.language().to_owned(),
            target: target.language().to_owned(),
            residual,
        })
    }

    /// Maps every row of `emb` through `W` and marks it as living in the
    /// target space.
    pub fn apply(&self, emb: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if emb.dim() != self.w.cols() {
            return Err(Error::DimensionMismatch { expected: self.w.cols(), actual: emb.dim() });
        }
        let mapped = emb.vectors.matmul(&self.w.transpose())?;
        let mut out = EmbeddingMatrix::new(emb.language.clone(), emb.tokens.clone(), mapped)?;
        out.aligned_to = Some(self.target.clone());
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(
            w,
            "#align v1 mode={} source={} target={} dim={} residual={}",
            self.mode,
            self.source,
            self.target,
            self.w.rows(),
            self.residual
        )
        .map_err(io)?;
        for row in self.w.row_iter() {
            let line = row.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
            writeln!(w, "{line}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix("#align v1 "))
            .ok_or_else(|| Error::parse(path, 1, "expected `#align v1 ...` header"))?;
        let fields: HashMap<&str, &str> = meta.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
        let field = |k: &str| fields.get(k).copied().ok_or_else(|| Error::parse(path, 1, format!("missing {k}")));
        let mode: AlignmentMode = field("mode")?.parse()?;
        let dim: usize = field("dim")?.parse().map_err(|_| Error::parse(path, 1, "bad dim"))?;
        let residual: f64 = field("residual")?.parse().map_err(|_| Error::parse(path, 1, "bad residual"))?;
        let mut data = Vec::with_capacity(dim * dim);
        for (n, line) in lines.enumerate() {
            let row = line
                .split_whitespace()
                .map(f64::from_str)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(path, n + 2, "bad float"))?;
            if row.len() != dim {
                return Err(Error::parse(path, n + 2, format!("expected {dim} values")));
            }
            data.extend(row);
        }
        Ok(AlignmentMap {
            w: DenseMatrix::from_vec(dim, dim, data).map_err(|_| Error::parse(path, 1, "matrix is not D×D"))?,
            mode,
            source: field("source")?.to_owned(),
            target: field("target")?.to_owned(),
            residual,
        })
    }
}

/// Two-column `source<TAB>target` dictionary.
pub fn load_dictionary(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let mut it = l.split(['\t', ' ']).filter(|s| !s.is_empty());
            match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => Ok((a.to_owned(), b.to_owned())),
                _ => Err(Error::parse(path, n + 1, "expected source<TAB>target")),
            }
        })
        .collect()
}

/// Fallback dictionary pairing tokens spelled identically in both vocabularies.
pub fn identical_pairs(source: &EmbeddingMatrix, target: &EmbeddingMatrix) -> Vec<(String, String)> {
    source
        .tokens()
        .iter()
        .filter(|t| target.index_of(t).is_some())
        .map(|t| (t.clone(), t.clone()))
        .collect()
}
