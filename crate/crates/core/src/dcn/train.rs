//! Two-phase training of the deep clustering network.
//!
//! Pre-training fits the autoencoder on reconstruction alone, then builds the
//! initial sememe space by clustering sampled latent codes several times and
//! clustering the pooled centroids once more. Fine-tuning minimises
//! `‖g(f(x)) − x‖² + λ‖f(x) − M s‖²` per sample, with `s` refreshed every
//! batch and the assigned centroid pulled toward each code as it is seen.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::autoencoder::{Autoencoder, Trace};
use super::kmeans::{assign, kmeans, update_centroids, SememeSpace};
use crate::attention::shuffled_windows;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::DenseMatrix;

/// Anything that can produce batches of meaning vectors for a fixed list of
/// words.
pub trait MeaningSource {
    fn word_count(&self) -> usize;

    fn dim(&self) -> usize;

    /// Up to `size` samples for `word`, one per row. Must be a pure function
    /// of its arguments.
    fn batch(&self, word: usize, size: usize, seed: u64) -> Result<DenseMatrix>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Hidden widths between input and output, bottleneck included.
    pub layers: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Number of sememes `K`.
    pub clusters: usize,
    /// Weight of the clustering term during fine-tuning.
    pub lambda: f64,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    /// Stop fine-tuning after this many epochs without a lower mean
    /// clustering loss. Zero disables early stopping.
    pub patience: usize,
    /// Sampling rounds used to initialise the sememe space.
    pub loops: usize,
    /// Batches sampled per word in each round.
    pub sample_batches: usize,
    /// Words whose samples are pooled and shuffled together.
    pub shuffle_window: usize,
    pub kmeans_iters: usize,
    /// Pseudo-count every centroid starts fine-tuning with.
    pub centroid_count_init: u64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            layers: vec![200, 200, 800, 10, 800, 200, 200],
            learning_rate: 0.003,
            batch_size: 64,
            clusters: 16,
            lambda: 0.5,
            pretrain_epochs: 20,
            finetune_epochs: 5,
            patience: 2,
            loops: 10,
            sample_batches: 2,
            shuffle_window: 500,
            kmeans_iters: 100,
            centroid_count_init: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail("lambda must be non-negative");
        }
        if self.clusters < 2 {
            return fail("clusters must be at least 2");
        }
        if self.batch_size == 0 || self.loops == 0 || self.sample_batches == 0 || self.shuffle_window == 0 {
            return fail("batch_size, loops, sample_batches and shuffle_window must be positive");
        }
        if self.layers.is_empty() {
            return fail("layers must list at least the bottleneck width");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    /// 1-based batch counter within the phase.
    pub batch: usize,
    pub l_n: f64,
    /// Absent during pre-training.
    pub l_c: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<LossRecord>,
}

impl History {
    fn push(&mut self, l_n: f64, l_c: Option<f64>) {
        let batch = self.records.len() + 1;
        self.records.push(LossRecord { batch, l_n, l_c });
    }

    pub fn reconstruction(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.l_n).collect()
    }

    /// CSV with header `batch,l_n,l_c`; `l_c` is empty when absent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("batch,l_n,l_c\n");
        for r in &self.records {
            let lc = r.l_c.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", r.batch, r.l_n, lc));
        }
        out
    }
}

/// Stream labels separating the random choices of each phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Pretrain,
    Init,
    Finetune,
}

impl Stage {
    fn label(self) -> u64 {
        rng::label(match self {
            Stage::Pretrain => "pretrain",
            Stage::Init => "init",
            Stage::Finetune => "finetune",
        })
    }
}

/// Calls `f` on every batch of one epoch. Words are visited in shuffled
/// windows; the samples of a whole window are pooled, shuffled and cut into
/// batches so that one batch mixes many words.
pub fn for_each_batch<S, F>(source: &S, cfg: &TrainConfig, stage: Stage, epoch: usize, mut f: F) -> Result<()>
where
    S: MeaningSource + ?Sized,
    F: FnMut(&DenseMatrix) -> Result<()>,
{
    let dim = source.dim();
    let words: Vec<usize> = (0..source.word_count()).collect();
    let seed = rng::derive(cfg.seed, &[stage.label(), epoch as u64]);
    for (wi, window) in shuffled_windows(&words, cfg.shuffle_window, seed)?.iter().enumerate() {
        let mut pool = Vec::new();
        for &w in window {
            let b = source.batch(w, cfg.batch_size, rng::derive(seed, &[w as u64]))?;
            if b.cols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: b.cols() });
            }
            pool.extend_from_slice(b.as_slice());
        }
        let n = pool.len() / dim.max(1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(seed, &[rng::label("pool"), wi as u64]));
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = DenseMatrix::zeros(chunk.len(), dim);
            for (r, &i) in chunk.iter().enumerate() {
                batch.row_mut(r).copy_from_slice(&pool[i * dim..(i + 1) * dim]);
            }
            f(&batch)?;
        }
    }
    Ok(())
}

/// Reconstruction-only SGD, one step per sample, logging the mean
/// pre-step loss of every batch.
pub fn train_autoencoder<S: MeaningSource + ?Sized>(
    ae: &mut Autoencoder,
    source: &S,
    cfg: &TrainConfig,
    stage: Stage,
    epochs: usize,
) -> Result<History> {
    let mut history = History::default();
    let mut trace = Trace::default();
    for epoch in 0..epochs {
        for_each_batch(source, cfg, stage, epoch, |batch| {
            let mut total = 0.0;
            for x in batch.row_iter() {
                total += ae.train_step(x, None, cfg.learning_rate, &mut trace)?.reconstruction;
            }
            history.push(total / batch.rows() as f64, None);
            Ok(())
        })?;
    }
    Ok(history)
}

/// Samples `sample_batches` batches per word, encodes them and clusters the
/// codes, `loops` times over; the pooled `loops × K` centroids are clustered
/// once more into the initial space.
pub fn initial_sememe_space<S: MeaningSource + ?Sized>(
    ae: &Autoencoder,
    source: &S,
    cfg: &TrainConfig,
) -> Result<SememeSpace> {
    let r = ae.latent_dim();
    let mut pooled: Vec<f64> = Vec::with_capacity(cfg.loops * cfg.clusters * r);
    for lp in 0..cfg.loops {
        let seed = rng::derive(cfg.seed, &[Stage::Init.label(), lp as u64]);
        let mut codes = Vec::new();
        for w in 0..source.word_count() {
            let b = source.batch(w, cfg.batch_size * cfg.sample_batches, rng::derive(seed, &[w as u64]))?;
            codes.extend(ae.encode_rows(&b)?.into_vec());
        }
        let data = DenseMatrix::from_vec(codes.len() / r, r, codes)?;
        let res = kmeans(&data, cfg.clusters, cfg.kmeans_iters, rng::derive(seed, &[rng::label("kmeans")]))?;
        pooled.extend_from_slice(res.space.centroids().as_slice());
    }
    let data = DenseMatrix::from_vec(pooled.len() / r, r, pooled)?;
    let seed = rng::derive(cfg.seed, &[Stage::Init.label(), rng::label("final")]);
    Ok(kmeans(&data, cfg.clusters, cfg.kmeans_iters, seed)?.space)
}

#[derive(Debug, Clone)]
pub struct Pretrained {
    pub autoencoder: Autoencoder,
    pub space: SememeSpace,
    pub history: History,
}

pub fn pretrain<S: MeaningSource + ?Sized>(source: &S, cfg: &TrainConfig) -> Result<Pretrained> {
    cfg.validate()?;
    if source.word_count() == 0 {
        return Err(Error::EmptyStream("no words to train on".into()));
    }
    let mut ae = Autoencoder::new(source.dim(), &cfg.layers, rng::derive(cfg.seed, &[rng::label("init-weights")]))?;
    let history = train_autoencoder(&mut ae, source, cfg, Stage::Pretrain, cfg.pretrain_epochs)?;
    let space = initial_sememe_space(&ae, source, cfg)?;
    Ok(Pretrained { autoencoder: ae, space, history })
}

#[derive(Debug, Clone)]
pub struct Finetuned {
    pub autoencoder: Autoencoder,
    pub space: SememeSpace,
    pub history: History,
    pub epochs_run: usize,
}

pub fn finetune<S: MeaningSource + ?Sized>(
    source: &S,
    mut ae: Autoencoder,
    mut space: SememeSpace,
    cfg: &TrainConfig,
) -> Result<Finetuned> {
    cfg.validate()?;
    if space.r() != ae.latent_dim() {
        return Err(Error::DimensionMismatch { expected: ae.latent_dim(), actual: space.r() });
    }
    let mut counts = vec![cfg.centroid_count_init; space.k()];
    let mut history = History::default();
    let mut trace = Trace::default();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut epochs_run = 0;
    for epoch in 0..cfg.finetune_epochs {
        epochs_run += 1;
        let (mut epoch_lc, mut batches) = (0.0, 0usize);
        for_each_batch(source, cfg, Stage::Finetune, epoch, |batch| {
            let assignments =
                batch.row_iter().map(|x| assign(&ae.encode(x)?, &space)).collect::<Result<Vec<_>>>()?;
            let (mut ln, mut lc) = (0.0, 0.0);
            for (x, a) in batch.row_iter().zip(&assignments) {
                let centroid = space.centroid(a.index).to_vec();
                let loss = ae.train_step(x, Some((&centroid, cfg.lambda)), cfg.learning_rate, &mut trace)?;
                let code = ae.traced_latent(&trace).to_vec();
                update_centroids(&mut space, &mut counts, &code, a)?;
                ln += loss.reconstruction;
                lc += loss.clustering;
            }
            let n = batch.rows() as f64;
            history.push(ln / n, Some(lc / n));
            epoch_lc += lc / n;
            batches += 1;
            Ok(())
        })?;
        if cfg.patience > 0 && batches > 0 {
            let mean = epoch_lc / batches as f64;
            if mean < best {
                best = mean;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
    }
    Ok(Finetuned { autoencoder: ae, space, history, epochs_run })
}
