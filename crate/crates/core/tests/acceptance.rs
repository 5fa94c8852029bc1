//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! with a failure status if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use wordspot::augment::WordImage;
use wordspot::config::RunConfig;
use wordspot::datasets::SynthSpec;
use wordspot::embeddings::{build_phoc, Alphabet, LevelSet, WordString};
use wordspot::losses::{cosine_loss, euclidean_loss, LossKind};
use wordspot::nn::layers::{spp_forward, tpp_forward};
use wordspot::nn::{Checkpoint, NetworkSpec, OutputActivation, Pooling, Shape, Tensor};
use wordspot::optim::{OptimizerConfig, TrainState, TrainTrace};
use wordspot::pipeline::{Evaluation, Model};
use wordspot::retrieval::{
    average_precision, permutation_test, permutations_needed, standard_error, PermutationOptions,
};
use wordspot::rng::{seeded, stream_rng, Stream};

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(id: u32, name: &str, elapsed: Duration, o: &Outcome) -> bool {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {id:>2} {name}: {} ({:.1} s)", o.detail, elapsed.as_secs_f64());
    o.pass
}

// 1 ------------------------------------------------------------------------

/// Presence bits from the floating point overlap rule, scanning every
/// (level, split, character) triple.
fn phoc_oracle(word: &[usize], alphabet_len: usize, levels: &[usize]) -> Vec<f64> {
    let n = word.len() as f64;
    let mut out = Vec::new();
    for &l in levels {
        for s in 0..l {
            let (a, b) = (s as f64 / l as f64, (s + 1) as f64 / l as f64);
            for c in 0..alphabet_len {
                let present = word.iter().enumerate().any(|(k, &ch)| {
                    let (lo, hi) = (k as f64 / n, (k + 1) as f64 / n);
                    let overlap = (hi.min(b) - lo.max(a)).max(0.0);
                    ch == c && overlap / (hi - lo) >= 0.5 - 1e-9
                });
                out.push(f64::from(u8::from(present)));
            }
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let symbols = ['a', 'b', 'c'];
    let alphabet = Alphabet::new(symbols.to_vec()).unwrap();
    let levels = LevelSet::new(vec![1, 2, 3]).unwrap();
    let (mut words, mut mismatches) = (0, 0);
    for len in 1..=6u32 {
        for code in 0..3usize.pow(len) {
            let idx: Vec<usize> = (0..len).map(|i| code / 3usize.pow(i) % 3).collect();
            let text: String = idx.iter().map(|&i| symbols[i]).collect();
            let phoc = build_phoc(&WordString::new(&text).unwrap(), &alphabet, &levels).unwrap();
            words += 1;
            if phoc.values != phoc_oracle(&idx, 3, levels.levels()) {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{words} words, {mismatches} mismatches"))
}

// 2 ------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let tpp = tpp_forward(&Tensor::zeros(Shape::new(1, 512, 6, 9)), &[1, 2, 3, 4, 5]).unwrap().0.len();
    let spp = spp_forward(&Tensor::zeros(Shape::new(1, 512, 6, 9)), &[1, 2, 4]).unwrap().0.len();
    let spec_tpp = NetworkSpec::phocnet_full(604, Pooling::Tpp, OutputActivation::Sigmoid).pooled_dim().unwrap();
    let spec_spp = NetworkSpec::phocnet_full(604, Pooling::Spp, OutputActivation::Sigmoid).pooled_dim().unwrap();
    let reduction = 100.0 * (spp - tpp) as f64 / spp as f64;
    let pass = tpp == 7680 && spp == 10752 && spec_tpp == tpp && spec_spp == spp && format!("{reduction:.1}") == "28.6";
    outcome(pass, format!("TPP {tpp}, SPP {spp}, reduction {reduction:.1}%"))
}

// 3 ------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let layers = common::layer_gradient_errors(31);
    let losses = common::loss_gradient_errors(32);
    let worst_layer = layers.iter().map(|l| l.1).fold(0.0, f64::max);
    let worst_loss = losses.iter().map(|l| l.1).fold(0.0, f64::max);
    let failing: Vec<&str> = layers
        .iter()
        .filter(|l| l.1 > 1e-4)
        .chain(losses.iter().filter(|l| l.1 > 1e-6))
        .map(|l| l.0)
        .collect();
    outcome(
        failing.is_empty(),
        format!(
            "{} layers x {n}, max rel err {worst_layer:.1e}; {} losses x {n}, max rel err {worst_loss:.1e}{}",
            layers.len(),
            losses.len(),
            if failing.is_empty() { String::new() } else { format!("; failing {failing:?}") },
            n = common::INSTANCES,
        ),
    )
}

// 4 ------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let mut rng = seeded(SEED);
    let unit = |rng: &mut wordspot::rng::Rng| {
        let v: Vec<f64> = (0..504).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (y, y_hat) = (unit(&mut rng), unit(&mut rng));
        let e = euclidean_loss(&y_hat, &y, 1).unwrap().loss;
        let c = cosine_loss(&y_hat, &y, 1).unwrap().loss;
        worst = worst.max((e - c).abs());
    }
    outcome(worst <= 1e-12, format!("1000 pairs, d = 504, max |difference| {worst:.1e}"))
}

// 5 ------------------------------------------------------------------------

/// Sums `r(i) * P(i)` over a common denominator of 2520 = lcm(1..=10).
fn ap_oracle(rel: &[bool], total_relevant: usize) -> f64 {
    let mut sum = 0u64;
    for i in 1..=rel.len() {
        if rel[i - 1] {
            let retrieved = rel[..i].iter().filter(|&&r| r).count() as u64;
            sum += retrieved * (2520 / i as u64);
        }
    }
    sum as f64 / (2520 * total_relevant as u64) as f64
}

fn criterion_5() -> Outcome {
    let mut cases = 0;
    let mut mismatches = 0;
    for len in 1..=10usize {
        for bits in 0..(1u32 << len) {
            let rel: Vec<bool> = (0..len).map(|i| bits >> i & 1 == 1).collect();
            let ones = rel.iter().filter(|&&r| r).count();
            for total in ones.max(1)..=ones + 2 {
                cases += 1;
                if average_precision(&rel, total).unwrap() != ap_oracle(&rel, total) {
                    mismatches += 1;
                }
            }
        }
    }
    let hand = average_precision(&[true, false, true], 2).unwrap();
    outcome(
        mismatches == 0 && hand == 5.0 / 6.0,
        format!("{cases} sequences, {mismatches} mismatches; [1,0,1] -> {hand}"),
    )
}

// 6 ------------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let k = permutations_needed(0.001).unwrap();
    let s = standard_error(0.5, 250_000);
    let trials = 200;
    let mut false_positives = 0;
    for t in 0..trials {
        let mut data = stream_rng(SEED, Stream::Synth, t);
        let mut sample = |n: usize| (0..n).map(|_| data.random::<f64>().powi(2)).collect::<Vec<f64>>();
        let (a, b) = (sample(30), sample(30));
        let r = permutation_test(&a, &b, PermutationOptions::new(5000), &mut stream_rng(SEED, Stream::Permutation, t))
            .unwrap();
        if r.p_value < 0.05 {
            false_positives += 1;
        }
    }
    let rate = false_positives as f64 / trials as f64;
    let pass = k == 250_000 && (s - 0.001).abs() < 1e-15 && (0.01..=0.10).contains(&rate);
    outcome(pass, format!("k(0.001) = {k}, s(0.5, 250000) = {s}, null false-positive rate {rate:.3}"))
}

// 7-10 ---------------------------------------------------------------------

struct Run {
    model: Model,
    trace: TrainTrace,
    eval: Evaluation,
    elapsed: Duration,
}

fn train_smoke(loss: LossKind, optimizer: OptimizerConfig) -> Run {
    let start = Instant::now();
    let (train, test) = common::synthetic_split(&SynthSpec::new(SynthSpec::default_words(), SEED));
    let config = RunConfig {
        loss,
        optimizer,
        iterations: 2000,
        seed: SEED,
        ..RunConfig::default()
    };
    let mut model = Model::new(config, train.iter().map(|t| t.transcription.as_str())).unwrap();
    let mut state = TrainState::new(&model.network);
    let trace = model.train(&train, &mut state, None).unwrap();
    let eval = model.evaluate(&test, &[]).unwrap();
    Run {
        model,
        trace,
        eval,
        elapsed: start.elapsed(),
    }
}

fn criterion_10(run: &Run) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    run.model.to_checkpoint(None).save(&path).unwrap();
    let (model, _) = Model::from_checkpoint(Checkpoint::load(&path).unwrap()).unwrap();
    let d = model.dim();
    let mut dims = Vec::new();
    for w in [26, 60, 120] {
        let pixels = (0..32 * w).map(|i| if (i % w) % 7 < 2 && (i / w) % 32 > 8 { 1.0 } else { 0.0 }).collect();
        let image = WordImage::new(32, w, pixels).unwrap();
        dims.push(model.embed_image(&image).map(|v| v.len()));
    }
    let pass = dims.iter().all(|r| matches!(r, Ok(n) if *n == d));
    let shown: Vec<String> = dims.iter().map(|r| r.as_ref().map_or_else(|e| e.to_string(), |n| n.to_string())).collect();
    outcome(pass, format!("widths 26/60/120 -> dims {} (d = {d})", shown.join("/")))
}

type Criterion = (u32, &'static str, fn() -> Outcome, Duration);

fn main() {
    let mut all = true;
    let quick: [Criterion; 6] = [
        (1, "PHOC oracle equivalence", criterion_1, Duration::from_secs(10)),
        (2, "TPP/SPP output dimensions", criterion_2, Duration::MAX),
        (3, "gradient suite", criterion_3, Duration::from_secs(60)),
        (4, "cosine/Euclidean identity", criterion_4, Duration::MAX),
        (5, "AP oracle", criterion_5, Duration::MAX),
        (6, "permutation test identities", criterion_6, Duration::from_secs(120)),
    ];
    for (id, name, f, budget) in quick {
        let start = Instant::now();
        let mut o = f();
        let elapsed = start.elapsed();
        if elapsed > budget {
            o.pass = false;
            o.detail += &format!("; over the {budget:?} budget");
        }
        all &= report(id, name, elapsed, &o);
    }

    let bpa = train_smoke(LossKind::Bce, OptimizerConfig::adam(1e-4));
    let (qbs, qbe) = (bpa.eval.qbs.map, bpa.eval.qbe.map);
    let o = outcome(
        qbs >= 0.90 && qbe >= 0.90 && bpa.elapsed < Duration::from_secs(600),
        format!(
            "BCE+PHOC+Adam, 2000 iterations: QbS mAP {qbs:.4}, QbE mAP {qbe:.4}, loss {:.2} -> {:.2}",
            bpa.trace.first_loss().unwrap(),
            bpa.trace.last_loss().unwrap()
        ),
    );
    all &= report(7, "end-to-end smoke training", bpa.elapsed, &o);

    let cps = train_smoke(LossKind::Cosine, OptimizerConfig::sgd(1e-2));
    let (qbs, qbe) = (cps.eval.qbs.map, cps.eval.qbe.map);
    let o = outcome(
        qbs >= 0.85 && qbe >= 0.85,
        format!("Cosine+PHOC+SGD: QbS mAP {qbs:.4}, QbE mAP {qbe:.4}"),
    );
    all &= report(8, "configuration grid parity", cps.elapsed, &o);

    let again = train_smoke(LossKind::Bce, OptimizerConfig::adam(1e-4));
    let same_trace = again.trace == bpa.trace;
    let same_map = again.eval.qbs.map.to_bits() == bpa.eval.qbs.map.to_bits()
        && again.eval.qbe.map.to_bits() == bpa.eval.qbe.map.to_bits();
    let same_params = again.model.network.flat_values() == bpa.model.network.flat_values();
    let o = outcome(
        same_trace && same_map && same_params,
        format!(
            "{} trace records identical: {same_trace}; mAP bit-identical: {same_map}; parameters identical: {same_params}",
            bpa.trace.records.len()
        ),
    );
    all &= report(9, "determinism", again.elapsed, &o);

    let start = Instant::now();
    let o = criterion_10(&bpa);
    all &= report(10, "variable-size contract", start.elapsed(), &o);

    if !all {
        std::process::exit(1);
    }
}
