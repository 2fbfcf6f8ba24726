//! Deep clustering network: autoencoder, K-means machinery, training and
//! checkpoints.

mod autoencoder;
mod checkpoint;
mod kmeans;
mod train;

pub use autoencoder::{reconstruction_loss, Activation, Autoencoder, Gradients, Layer, SampleLoss, Trace};
pub use checkpoint::Checkpoint;
pub use kmeans::{assign, clustering_loss, kmeans, update_centroids, Assignment, KMeansResult, SememeSpace};
pub use train::{
    finetune, for_each_batch, initial_sememe_space, pretrain, train_autoencoder, Finetuned, History, LossRecord,
    MeaningSource, Pretrained, Stage, TrainConfig,
};
