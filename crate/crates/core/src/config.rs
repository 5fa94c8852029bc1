//! Run configuration, stored as TOML and embedded in every checkpoint.
//!
//! ```
//! use wordspot::config::RunConfig;
//!
//! let cfg: RunConfig = toml::from_str(
//!     r#"
//!     arch = "phocnet-mini"
//!     loss = "cosine"
//!     iterations = 500
//!
//!     [embedding]
//!     kind = "spoc"
//!     levels = [1, 2, 3]
//!
//!     [optimizer]
//!     kind = "sgd_momentum"
//!     learning_rate = 0.01
//!     "#,
//! )
//! .unwrap();
//! cfg.validate().unwrap();
//! assert_eq!(cfg.embedding.levels.levels(), &[1, 2, 3]);
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingConfig, EmbeddingKind};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::nn::{NetworkSpec, OutputActivation, Pooling};
use crate::optim::{OptimizerConfig, TrainOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `phocnet-full`, `phocnet-mini` or `custom`.
    pub arch: String,
    /// Layer stack used when `arch = "custom"`.
    pub network: Option<NetworkSpec>,
    pub pooling: Pooling,
    pub embedding: EmbeddingConfig,
    pub loss: LossKind,
    pub optimizer: OptimizerConfig,
    pub augmentation: bool,
    pub seed: u64,
    pub iterations: u64,
    pub batch_size: usize,
    pub log_every: u64,
    /// Evaluate on the test partition every this many iterations.
    pub eval_every: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            arch: "phocnet-mini".into(),
            network: None,
            pooling: Pooling::Tpp,
            embedding: EmbeddingConfig::new(EmbeddingKind::Phoc),
            loss: LossKind::Bce,
            optimizer: OptimizerConfig::adam(1e-4),
            augmentation: false,
            seed: 0,
            iterations: 2000,
            batch_size: 10,
            log_every: 10,
            eval_every: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.loss == LossKind::Bce && self.embedding.kind != EmbeddingKind::Phoc {
            return Err(Error::Config(format!(
                "binary cross entropy needs binary PHOC labels, not {}",
                self.embedding.kind
            )));
        }
        if self.batch_size == 0 || self.log_every == 0 {
            return Err(Error::Config("batch_size and log_every must be >= 1".into()));
        }
        if self.eval_every == Some(0) {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        if self.embedding.dct_coefficients == 0 {
            return Err(Error::Config("dct_coefficients must be >= 1".into()));
        }
        match (self.arch.as_str(), &self.network) {
            ("custom", None) => return Err(Error::Config("arch = \"custom\" needs a [network] table".into())),
            ("custom", Some(_)) => {}
            (_, Some(_)) => return Err(Error::Config("[network] is only used with arch = \"custom\"".into())),
            ("phocnet-full" | "phocnet-mini", None) => {}
            (other, None) => return Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
        self.optimizer.validate()
    }

    /// Output activation matching the loss: sigmoid for binary cross
    /// entropy, L2 normalization for the cosine loss.
    pub fn output_activation(&self) -> OutputActivation {
        match self.loss {
            LossKind::Bce => OutputActivation::Sigmoid,
            LossKind::Cosine => OutputActivation::Normalize,
            LossKind::Euclidean => OutputActivation::Identity,
        }
    }

    /// Network for attribute dimension `d`.
    pub fn network_spec(&self, d: usize) -> Result<NetworkSpec> {
        self.validate()?;
        let spec = match &self.network {
            Some(custom) => custom.clone(),
            None => NetworkSpec::preset(&self.arch, d, self.pooling, self.output_activation())?,
        };
        let got = spec.attribute_dim()?;
        if got != d {
            return Err(Error::Config(format!("network outputs {got} attributes, embedding has {d}")));
        }
        Ok(spec)
    }

    pub fn train_options(&self) -> TrainOptions {
        let mut o = TrainOptions::new(self.loss, self.optimizer.clone(), self.iterations, self.seed);
        o.batch_size = self.batch_size;
        o.log_every = self.log_every;
        o.eval_every = self.eval_every;
        o
    }
}
