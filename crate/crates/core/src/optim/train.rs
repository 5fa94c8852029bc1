use std::fmt::Write as _;

use rand::Rng as _;

use super::{OptimizerConfig, TrainState};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::nn::{Mode, Network, Tensor};
use crate::rng::{stream_rng, Rng, Stream};

/// One word image (`1 x 1 x H x W`) with its attribute label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub image: Tensor,
    pub label: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub loss: LossKind,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    /// Train until the state's iteration counter reaches this value.
    pub max_iterations: u64,
    /// Record the loss every `log_every` iterations (and at the last one).
    pub log_every: u64,
    /// Invoke the evaluation hook every `eval_every` iterations.
    pub eval_every: Option<u64>,
    pub seed: u64,
}

impl TrainOptions {
    pub fn new(loss: LossKind, optimizer: OptimizerConfig, max_iterations: u64, seed: u64) -> Self {
        Self {
            loss,
            optimizer,
            batch_size: 10,
            max_iterations,
            log_every: 10,
            eval_every: None,
            seed,
        }
    }
}

/// One line of a training trace. `loss` is the mean per-sample loss of the
/// mini-batch processed at `iteration` (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: u64,
    pub loss: f64,
    pub map: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn last_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn first_loss(&self) -> Option<f64> {
        self.records.first().map(|r| r.loss)
    }

    pub fn last_map(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.map)
    }
}

/// Tab-separated trace: a header line, then `iteration  loss  map` with
/// `-` where no evaluation ran.
pub fn format_trace(trace: &TrainTrace) -> String {
    let mut out = String::from("iteration\tloss\tmap\n");
    for r in &trace.records {
        let map = r.map.map_or_else(|| "-".to_string(), |m| m.to_string());
        let _ = writeln!(out, "{}\t{}\t{}", r.iteration, r.loss, map);
    }
    out
}

pub fn parse_trace(text: &str) -> Result<TrainTrace> {
    let bad = |line: usize, msg: &str| Error::Parse {
        path: "<trace>".into(),
        line,
        msg: msg.into(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "iteration\tloss\tmap")) => {}
        _ => return Err(bad(1, "missing trace header")),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(bad(i + 1, "expected 3 fields"));
        }
        records.push(TraceRecord {
            iteration: f[0].parse().map_err(|_| bad(i + 1, "bad iteration"))?,
            loss: f[1].parse().map_err(|_| bad(i + 1, "bad loss"))?,
            map: match f[2] {
                "-" => None,
                m => Some(m.parse().map_err(|_| bad(i + 1, "bad map"))?),
            },
        });
    }
    Ok(TrainTrace { records })
}

pub type AugmentFn<'a> = Box<dyn FnMut(&Tensor, &mut Rng) -> Result<Tensor> + 'a>;
pub type EvalFn<'a> = Box<dyn FnMut(&Network) -> Result<f64> + 'a>;

/// Mini-batch training driver.
///
/// Batches are drawn uniformly with replacement. Every random draw of
/// iteration `t` (batch indices, augmentation, dropout) comes from streams
/// keyed by `(seed, t)`, so a run resumed from a checkpoint continues exactly
/// as an uninterrupted one would.
pub struct Trainer<'a> {
    pub options: TrainOptions,
    augment: Option<AugmentFn<'a>>,
    eval: Option<EvalFn<'a>>,
}

impl<'a> Trainer<'a> {
    pub fn new(options: TrainOptions) -> Self {
        Self {
            options,
            augment: None,
            eval: None,
        }
    }

    pub fn with_augmentation(mut self, f: AugmentFn<'a>) -> Self {
        self.augment = Some(f);
        self
    }

    pub fn with_eval(mut self, f: EvalFn<'a>) -> Self {
        self.eval = Some(f);
        self
    }

    /// Mean per-sample loss and accumulated (mean) gradients for one mini-batch.
    fn batch_step(&mut self, net: &mut Network, samples: &[TrainingSample], t: u64) -> Result<f64> {
        let o = &self.options;
        let b = o.batch_size;
        let mut batch_rng = stream_rng(o.seed, Stream::Batch, t);
        let picks: Vec<usize> = (0..b).map(|_| batch_rng.random_range(0..samples.len())).collect();
        net.zero_grad();
        let mut total = 0.0;
        for (j, &idx) in picks.iter().enumerate() {
            let sample = &samples[idx];
            let key = t * b as u64 + j as u64;
            let augmented;
            let image = match self.augment.as_mut() {
                Some(f) => {
                    augmented = f(&sample.image, &mut stream_rng(o.seed, Stream::Augment, key))?;
                    &augmented
                }
                None => &sample.image,
            };
            let mut dropout = stream_rng(o.seed, Stream::Dropout, key);
            let (out, cache) = net.forward_logits(image, Mode::Train, Some(&mut dropout))?;
            let lv = o.loss.compute(out.data(), &sample.label, 1)?;
            total += lv.loss;
            let scale = 1.0 / b as f64;
            let grad = Tensor::from_vec(out.shape(), lv.grad.into_iter().map(|g| g * scale).collect())?;
            net.backward(&cache, &grad)?;
        }
        Ok(total / b as f64)
    }

    pub fn run(
        &mut self,
        net: &mut Network,
        samples: &[TrainingSample],
        state: &mut TrainState,
    ) -> Result<TrainTrace> {
        if samples.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if self.options.batch_size == 0 || self.options.log_every == 0 {
            return Err(Error::Config("batch size and log interval must be >= 1".into()));
        }
        self.options.optimizer.validate()?;
        let mut trace = TrainTrace::default();
        while state.iteration < self.options.max_iterations {
            let t = state.iteration;
            let loss = match self.batch_step(net, samples, t) {
                Ok(l) if l.is_finite() => l,
                Ok(l) => return Err(Error::Divergence { iteration: t, loss: l }),
                Err(Error::DegenerateOutput(_)) => {
                    return Err(Error::Divergence { iteration: t, loss: f64::NAN })
                }
                Err(e) => return Err(e),
            };
            if net.params().iter().any(|p| p.grad.iter().any(|g| !g.is_finite())) {
                return Err(Error::Divergence { iteration: t, loss });
            }
            state.step(net, &self.options.optimizer)?;
            let done = state.iteration;
            let map = match (self.eval.as_mut(), self.options.eval_every) {
                (Some(f), Some(k)) if k > 0 && done.is_multiple_of(k) => Some(f(net)?),
                _ => None,
            };
            if t.is_multiple_of(self.options.log_every) || done == self.options.max_iterations || map.is_some() {
                trace.records.push(TraceRecord { iteration: t, loss, map });
            }
        }
        Ok(trace)
    }
}
