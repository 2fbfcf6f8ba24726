//! On-disk model state: a directory with a textual `meta` file and a raw
//! little-endian `weights` file.
//!
//! `weights` holds, for every layer in order, the weight matrix row-major
//! followed by the bias, then the sememe matrix `M` (`R × K`, row-major).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::autoencoder::{Activation, Autoencoder, Layer};
use super::kmeans::SememeSpace;
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub autoencoder: Autoencoder,
    pub space: SememeSpace,
    pub config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    version: u32,
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    k: usize,
    r: usize,
    seed: u64,
    values: usize,
    config: TrainConfig,
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ae = &self.autoencoder;
        let m = self.space.matrix();
        let mut values = ae.to_flat();
        values.extend_from_slice(m.as_slice());
        let meta = Meta {
            version: VERSION,
            sizes: ae.sizes(),
            activations: ae.layers().iter().map(|l| l.activation).collect(),
            k: self.space.k(),
            r: self.space.r(),
            seed: self.config.seed,
            values: values.len(),
            config: self.config.clone(),
        };
        let text = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
        let meta_path = dir.join("meta");
        fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let weights_path = dir.join("weights");
        fs::write(&weights_path, bytes).map_err(|e| Error::io(&weights_path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta");
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: Meta = toml::from_str(&text).map_err(|e| Error::parse(&meta_path, 0, e.to_string()))?;
        let bad = |msg: String| Error::parse(&meta_path, 0, msg);
        if meta.version != VERSION {
            return Err(bad(format!("unsupported checkpoint version {}", meta.version)));
        }
        if meta.sizes.len() < 3 || meta.activations.len() != meta.sizes.len() - 1 {
            return Err(bad("layer sizes and activations disagree".into()));
        }
        let expected: usize =
            meta.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>() + meta.k * meta.r;
        if expected != meta.values {
            return Err(bad(format!("expected {expected} values, meta says {}", meta.values)));
        }
        let weights_path = dir.join("weights");
        let bytes = fs::read(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
        if bytes.len() != 8 * expected {
            return Err(Error::parse(&weights_path, 0, format!("expected {} bytes, found {}", 8 * expected, bytes.len())));
        }
        let values: Vec<f64> =
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();

        let mut at = 0;
        let mut take = |n: usize| {
            let s = &values[at..at + n];
            at += n;
            s.to_vec()
        };
        let mut layers = Vec::with_capacity(meta.activations.len());
        for (w, &activation) in meta.sizes.windows(2).zip(&meta.activations) {
            let weights = DenseMatrix::from_vec(w[1], w[0], take(w[0] * w[1]))?;
            layers.push(Layer { weights, bias: take(w[1]), activation });
        }
        let autoencoder = Autoencoder::from_layers(layers)?;
        let space = SememeSpace::from_matrix(&DenseMatrix::from_vec(meta.r, meta.k, take(meta.r * meta.k))?)?;
        if space.r() != autoencoder.latent_dim() {
            return Err(bad("sememe space does not match the bottleneck".into()));
        }
        let mut config = meta.config;
        config.seed = meta.seed;
        Ok(Checkpoint { autoencoder, space, config })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let ae = Autoencoder::new(6, &[4, 2, 4], 3).unwrap();
        let m = DenseMatrix::from_vec(2, 3, vec![0.1, -0.2, 0.3, 1e-300, f64::MAX, -0.0]).unwrap();
        let config = TrainConfig { layers: vec![4, 2, 4], clusters: 3, seed: 99, ..Default::default() };
        Checkpoint { autoencoder: ae, space: SememeSpace::from_matrix(&m).unwrap(), config }
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let c = sample();
        c.save(dir.path()).unwrap();
        let back = Checkpoint::load(dir.path()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.autoencoder.to_flat(), c.autoencoder.to_flat());
    }

    #[test]
    fn truncated_weights_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        sample().save(dir.path()).unwrap();
        let p = dir.path().join("weights");
        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, bytes).unwrap();
        assert!(matches!(Checkpoint::load(dir.path()), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_directory_is_io_error() {
        assert!(matches!(Checkpoint::load(Path::new("/nonexistent/ckpt")), Err(Error::Io { .. })));
    }
}
