//! End-to-end glue: label word images, train a model, embed and evaluate.
//!
//! A [`Model`] bundles the network with the alphabet and run configuration
//! needed to embed query strings into the same attribute space, and
//! round-trips through a checkpoint.

use serde_json::json;

use crate::augment::{augment_tensor, WordImage};
use crate::config::RunConfig;
use crate::datasets::{load_word_image, CorpusManifest, Partition};
use crate::embeddings::{fold_case, Alphabet};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Network};
use crate::optim::{EvalFn, TrainState, TrainTrace, Trainer, TrainingSample};
use crate::retrieval::{run_qbe_almazan, run_qbs_almazan, APReport, Gallery};
use crate::rng::{stream_rng, Stream};

/// A word image with its id and transcription.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledImage {
    pub id: String,
    pub image: WordImage,
    pub transcription: String,
}

/// Loads every image of one partition.
pub fn load_partition(manifest: &CorpusManifest, partition: Partition) -> Result<Vec<LabelledImage>> {
    manifest
        .partition(partition)
        .map(|r| {
            Ok(LabelledImage {
                id: r.image.display().to_string(),
                image: load_word_image(&manifest.resolve(r))?,
                transcription: r.transcription.clone(),
            })
        })
        .collect()
}

/// A network together with the string side of the attribute space.
#[derive(Debug, Clone)]
pub struct Model {
    pub network: Network,
    pub alphabet: Alphabet,
    pub config: RunConfig,
}

impl Model {
    /// Freshly initialized model whose alphabet covers `transcriptions`.
    pub fn new<'a, I>(config: RunConfig, transcriptions: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        config.validate()?;
        let alphabet = Alphabet::from_words(transcriptions)?;
        let spec = config.network_spec(config.embedding.dim(alphabet.len()))?;
        let network = Network::new(spec, &mut stream_rng(config.seed, Stream::Init, 0))?;
        Ok(Self {
            network,
            alphabet,
            config,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.embedding.dim(self.alphabet.len())
    }

    /// String embedding of a transcription.
    pub fn embed_string(&self, word: &str) -> Result<Vec<f64>> {
        Ok(self.config.embedding.embed_str(word, &self.alphabet)?.values)
    }

    /// Predicted attribute vector of a word image.
    pub fn embed_image(&self, image: &WordImage) -> Result<Vec<f64>> {
        Ok(self.network.predict(&image.to_tensor())?.into_data())
    }

    /// Training samples labelled with their string embeddings.
    pub fn training_samples(&self, items: &[LabelledImage]) -> Result<Vec<TrainingSample>> {
        items
            .iter()
            .map(|it| {
                Ok(TrainingSample {
                    image: it.image.to_tensor(),
                    label: self.embed_string(&it.transcription)?,
                })
            })
            .collect()
    }

    /// Trains until `state.iteration` reaches the configured budget.
    pub fn train(
        &mut self,
        items: &[LabelledImage],
        state: &mut TrainState,
        eval: Option<EvalFn<'_>>,
    ) -> Result<TrainTrace> {
        let samples = self.training_samples(items)?;
        let mut trainer = Trainer::new(self.config.train_options());
        if self.config.augmentation {
            trainer = trainer.with_augmentation(Box::new(augment_tensor));
        }
        if let Some(f) = eval {
            trainer = trainer.with_eval(f);
        }
        trainer.run(&mut self.network, &samples, state)
    }

    /// Gallery of predicted vectors for `items`.
    pub fn gallery(&self, items: &[LabelledImage]) -> Result<Gallery> {
        let mut g = Gallery::new();
        for it in items {
            g.push(it.id.clone(), &it.transcription, self.embed_image(&it.image)?)?;
        }
        Ok(g)
    }

    /// Query-by-example and query-by-string mAP on a test set.
    pub fn evaluate(&self, test: &[LabelledImage], stop_words: &[String]) -> Result<Evaluation> {
        let gallery = self.gallery(test)?;
        Ok(Evaluation {
            qbe: run_qbe_almazan(&gallery)?,
            qbs: run_qbs_almazan(&gallery, |w| self.embed_string(w), stop_words)?,
        })
    }

    /// Checkpoint with the configuration, alphabet and optional optimizer state.
    pub fn to_checkpoint(&self, state: Option<&TrainState>) -> Checkpoint {
        let mut ck = Checkpoint::new(self.network.clone(), self.config.seed);
        ck.metadata = json!({
            "config": self.config,
            "alphabet": String::from(self.alphabet.clone()),
        });
        if let Some(s) = state {
            ck.extra = s.to_blocks(&self.network);
        }
        ck
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<(Self, Option<TrainState>)> {
        let meta = |key: &str| {
            ck.metadata
                .get(key)
                .cloned()
                .ok_or_else(|| Error::Checkpoint(format!("metadata lacks {key:?}")))
        };
        let config: RunConfig = serde_json::from_value(meta("config")?)
            .map_err(|e| Error::Checkpoint(format!("bad config metadata: {e}")))?;
        let alphabet: Alphabet = serde_json::from_value(meta("alphabet")?)
            .map_err(|e| Error::Checkpoint(format!("bad alphabet metadata: {e}")))?;
        let d = config.embedding.dim(alphabet.len());
        if ck.network.spec().attribute_dim()? != d {
            return Err(Error::Checkpoint("network output does not match the embedding".into()));
        }
        let state = TrainState::from_blocks(&ck.network, &ck.extra)?;
        Ok((
            Self {
                network: ck.network,
                alphabet,
                config,
            },
            state,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub qbe: APReport,
    pub qbs: APReport,
}

/// Distinct case-folded transcriptions, sorted.
pub fn vocabulary(items: &[LabelledImage]) -> Vec<String> {
    let set: std::collections::BTreeSet<String> = items.iter().map(|i| fold_case(&i.transcription)).collect();
    set.into_iter().collect()
}
