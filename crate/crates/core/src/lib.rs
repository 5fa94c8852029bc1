//! Word spotting with attribute embeddings.
//!
//! Word images and transcriptions are mapped into a shared attribute space:
//! strings through deterministic embeddings ([`embeddings`]), images through
//! a convolutional network trained to predict those embeddings ([`nn`],
//! [`losses`], [`optim`], [`augment`]). Retrieval ranks items by cosine
//! distance and is scored with mean average precision under the standard
//! word spotting protocols, with a permutation test for comparing methods
//! ([`retrieval`]). [`datasets`] reads corpus manifests and renders synthetic
//! word images for experiments that fit on a laptop.

pub mod augment;
pub mod config;
pub mod datasets;
pub mod embeddings;
mod error;
pub mod io;
pub mod losses;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod retrieval;
pub mod rng;

pub use error::{Error, ErrorCategory, Result};

/// Guide chapters, compiled so their snippets run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    pub mod embeddings {}
    #[doc = include_str!("../../../book/src/network.md")]
    pub mod network {}
    #[doc = include_str!("../../../book/src/losses.md")]
    pub mod losses {}
    #[doc = include_str!("../../../book/src/training.md")]
    pub mod training {}
    #[doc = include_str!("../../../book/src/data.md")]
    pub mod data {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    pub mod retrieval {}
    #[doc = include_str!("../../../book/src/significance.md")]
    pub mod significance {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
