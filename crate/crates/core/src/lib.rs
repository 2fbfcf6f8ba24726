//! Unsupervised sememe discovery.
//!
//! Contextual meanings of words, computed by attention over their sentences,
//! are compressed by an autoencoder and clustered; each cluster centre is a
//! sememe. The modules follow the pipeline: [`corpus`] and [`sid`] prepare
//! the text, [`attention`] produces meanings, [`dcn`] trains the model,
//! [`embeddings`] handles vectors and cross-lingual alignment, [`report`]
//! describes results and [`pipeline`] drives it all from a [`config`].

pub mod attention;
pub mod config;
pub mod corpus;
pub mod dcn;
pub mod embeddings;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod sid;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::DenseMatrix;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus-and-sid.md")]
    mod corpus_and_sid {}
    #[doc = include_str!("../../../book/src/attention.md")]
    mod attention {}
    #[doc = include_str!("../../../book/src/autoencoder.md")]
    mod autoencoder {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/alignment.md")]
    mod alignment {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
