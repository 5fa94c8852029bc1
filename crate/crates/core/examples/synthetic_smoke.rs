//! Trains the mini network on a synthetic corpus and reports mAP.
//!
//! `cargo run --release --example synthetic_smoke -- [bce|cosine] [iterations] [seed]`

use std::time::Instant;

use wordspot::config::RunConfig;
use wordspot::datasets::{Partition, SynthSpec};
use wordspot::embeddings::{EmbeddingConfig, EmbeddingKind};
use wordspot::losses::LossKind;
use wordspot::optim::{OptimizerConfig, TrainState};
use wordspot::pipeline::{LabelledImage, Model};

fn main() -> wordspot::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let loss: LossKind = args.get(1).map_or(Ok(LossKind::Bce), |s| s.parse())?;
    let iterations: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(7);

    let spec = SynthSpec::new(SynthSpec::default_words(), seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, (image, rec)) in spec.render_all()?.into_iter().enumerate() {
        let item = LabelledImage { id: format!("{i}"), image, transcription: rec.transcription };
        match rec.partition {
            Partition::Train => train.push(item),
            _ => test.push(item),
        }
    }
    let mut cfg = RunConfig {
        embedding: EmbeddingConfig::new(EmbeddingKind::Phoc),
        loss,
        iterations,
        seed,
        eval_every: Some(500),
        ..RunConfig::default()
    };
    if loss == LossKind::Cosine {
        cfg.optimizer = OptimizerConfig::sgd(1e-2);
    }
    let mut model = Model::new(cfg, train.iter().map(|t| t.transcription.as_str()))?;
    let mut state = TrainState::new(&model.network);
    let start = Instant::now();
    let snapshot = model.clone();
    let test_ref = &test;
    let eval = Box::new(move |net: &wordspot::nn::Network| {
        let m = Model { network: net.clone(), ..snapshot.clone() };
        let e = m.evaluate(test_ref, &[])?;
        eprintln!("  qbe {:.4} qbs {:.4} ({:.1?})", e.qbe.map, e.qbs.map, start.elapsed());
        Ok(e.qbs.map)
    });
    let trace = model.train(&train, &mut state, Some(eval))?;
    let e = model.evaluate(&test, &[])?;
    println!(
        "d={} loss {:.4} -> {:.4}; QbE {:.4}; QbS {:.4}; {:.1?}",
        model.dim(),
        trace.first_loss().unwrap_or(f64::NAN),
        trace.last_loss().unwrap_or(f64::NAN),
        e.qbe.map,
        e.qbs.map,
        start.elapsed()
    );
    Ok(())
}
