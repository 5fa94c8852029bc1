//! Shared helpers for integration tests: finite-difference gradient checks
//! and small corpus builders.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use wordspot::datasets::{Partition, SynthSpec};
use wordspot::losses::{bce_loss, cosine_loss, euclidean_loss, LossValue};
use wordspot::nn::layers::*;
use wordspot::nn::{Shape, Tensor};
use wordspot::pipeline::LabelledImage;
use wordspot::rng::{seeded, Rng as ChaRng};

pub const INSTANCES: usize = 20;

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Largest relative error between `analytic` and central differences of `f` at `x`.
pub fn check(x: &[f64], analytic: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut p = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let up = f(&p);
        p[i] = x[i] - h;
        let down = f(&p);
        p[i] = x[i];
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * h)));
    }
    worst
}

fn uniform(rng: &mut ChaRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Values at least 0.01 apart, so max pooling has no near-ties and ReLU
/// no inputs near the kink at 0.
fn separated(rng: &mut ChaRng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0 + 0.5) * 0.02).collect();
    v.shuffle(rng);
    v.iter().map(|x| x + rng.random_range(-0.004..0.004)).collect()
}

fn tensor(shape: Shape, data: Vec<f64>) -> Tensor {
    Tensor::from_vec(shape, data).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const H: f64 = 1e-6;

fn conv(rng: &mut ChaRng) -> f64 {
    let s = Shape::new(2, 2, rng.random_range(3..6), rng.random_range(3..7));
    let c_out = 3;
    let x = uniform(rng, s.len());
    let w = uniform(rng, c_out * s.c * 9);
    let b = uniform(rng, c_out);
    let out_shape = Shape::new(s.n, c_out, s.h, s.w);
    let r = uniform(rng, out_shape.len());
    let (_, cache) = conv3x3_forward(&tensor(s, x.clone()), &w, &b).unwrap();
    let (mut gw, mut gb) = (vec![0.0; w.len()], vec![0.0; c_out]);
    let gx = conv3x3_backward(&cache, &w, &tensor(out_shape, r.clone()), &mut gw, &mut gb).unwrap();
    let obj = |x: &[f64], w: &[f64], b: &[f64]| dot(conv3x3_forward(&tensor(s, x.to_vec()), w, b).unwrap().0.data(), &r);
    check(&x, gx.data(), H, |p| obj(p, &w, &b))
        .max(check(&w, &gw, H, |p| obj(&x, p, &b)))
        .max(check(&b, &gb, H, |p| obj(&x, &w, p)))
}

fn relu(rng: &mut ChaRng) -> f64 {
    let s = Shape::new(2, 3, 4, 5);
    let x = separated(rng, s.len());
    let r = uniform(rng, s.len());
    let g = relu_backward(&tensor(s, x.clone()), &tensor(s, r.clone()));
    check(&x, g.data(), H, |p| dot(relu_forward(&tensor(s, p.to_vec())).data(), &r))
}

fn maxpool(rng: &mut ChaRng) -> f64 {
    let s = Shape::new(2, 2, rng.random_range(2..8), rng.random_range(2..8));
    let x = separated(rng, s.len());
    let (y, cache) = maxpool2x2_forward(&tensor(s, x.clone())).unwrap();
    let r = uniform(rng, y.len());
    let g = maxpool2x2_backward(&cache, &tensor(y.shape(), r.clone())).unwrap();
    check(&x, g.data(), H, |p| dot(maxpool2x2_forward(&tensor(s, p.to_vec())).unwrap().0.data(), &r))
}

fn pyramid(rng: &mut ChaRng, spatial: bool) -> f64 {
    let s = Shape::new(2, 2, rng.random_range(4..9), rng.random_range(5..12));
    let x = separated(rng, s.len());
    let fwd = |p: &[f64]| {
        let t = tensor(s, p.to_vec());
        if spatial {
            spp_forward(&t, &[1, 2, 4]).unwrap()
        } else {
            tpp_forward(&t, &[1, 2, 3, 4, 5]).unwrap()
        }
    };
    let (y, cache) = fwd(&x);
    let r = uniform(rng, y.len());
    let g = pyramid_pool_backward(&cache, &tensor(y.shape(), r.clone())).unwrap();
    check(&x, g.data(), H, |p| dot(fwd(p).0.data(), &r))
}

fn fully_connected(rng: &mut ChaRng) -> f64 {
    let s = Shape::new(3, 2, 2, 3);
    let (inputs, outputs) = (s.sample_len(), 5);
    let x = uniform(rng, s.len());
    let w = uniform(rng, inputs * outputs);
    let b = uniform(rng, outputs);
    let r = uniform(rng, s.n * outputs);
    let out_shape = Shape::new(s.n, outputs, 1, 1);
    let (mut gw, mut gb) = (vec![0.0; w.len()], vec![0.0; outputs]);
    let gx = fully_connected_backward(&tensor(s, x.clone()), &w, &tensor(out_shape, r.clone()), &mut gw, &mut gb).unwrap();
    let obj = |x: &[f64], w: &[f64], b: &[f64]| dot(fully_connected_forward(&tensor(s, x.to_vec()), w, b).unwrap().data(), &r);
    check(&x, gx.data(), H, |p| obj(p, &w, &b))
        .max(check(&w, &gw, H, |p| obj(&x, p, &b)))
        .max(check(&b, &gb, H, |p| obj(&x, &w, p)))
}

fn sigmoid(rng: &mut ChaRng) -> f64 {
    let s = Shape::new(2, 7, 1, 1);
    let x: Vec<f64> = uniform(rng, s.len()).iter().map(|v| 4.0 * v).collect();
    let r = uniform(rng, s.len());
    let y = sigmoid_forward(&tensor(s, x.clone()));
    let g = sigmoid_backward(&y, &tensor(s, r.clone()));
    check(&x, g.data(), H, |p| dot(sigmoid_forward(&tensor(s, p.to_vec())).data(), &r))
}

fn normalize(rng: &mut ChaRng) -> f64 {
    let s = Shape::new(2, 9, 1, 1);
    let x = uniform(rng, s.len());
    let r = uniform(rng, s.len());
    let (y, norms) = normalize_forward(&tensor(s, x.clone())).unwrap();
    let g = normalize_layer_backward(&y, &norms, &tensor(s, r.clone()));
    check(&x, g.data(), H, |p| dot(normalize_forward(&tensor(s, p.to_vec())).unwrap().0.data(), &r))
}

fn softmax(rng: &mut ChaRng) -> f64 {
    let s = Shape::new(2, 6, 1, 1);
    let x = uniform(rng, s.len());
    let r = uniform(rng, s.len());
    let y = softmax_forward(&tensor(s, x.clone())).unwrap();
    let g = softmax_layer_backward(&y, &tensor(s, r.clone()));
    check(&x, g.data(), H, |p| dot(softmax_forward(&tensor(s, p.to_vec())).unwrap().data(), &r))
}

/// Worst relative error per layer over [`INSTANCES`] random instances.
pub fn layer_gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = seeded(seed);
    let checks: [(&'static str, LayerCheck); 9] = [
        ("conv3x3", conv),
        ("relu", relu),
        ("maxpool", maxpool),
        ("spp", |r| pyramid(r, true)),
        ("tpp", |r| pyramid(r, false)),
        ("fully_connected", fully_connected),
        ("sigmoid", sigmoid),
        ("normalize", normalize),
        ("softmax", softmax),
    ];
    checks
        .iter()
        .map(|(name, f)| (*name, (0..INSTANCES).map(|_| f(&mut rng)).fold(0.0, f64::max)))
        .collect()
}

type LossFn = fn(&[f64], &[f64], usize) -> wordspot::Result<LossValue>;
type LayerCheck = fn(&mut ChaRng) -> f64;

/// Worst relative error per loss over [`INSTANCES`] random instances.
pub fn loss_gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = seeded(seed);
    let losses: [(&'static str, LossFn, bool); 3] = [
        ("bce", bce_loss, true),
        ("cosine", cosine_loss, false),
        ("euclidean", euclidean_loss, false),
    ];
    losses
        .iter()
        .map(|&(name, f, binary)| {
            let worst = (0..INSTANCES)
                .map(|_| {
                    let (batch, d) = (2, 12);
                    let o: Vec<f64> = uniform(&mut rng, batch * d).iter().map(|v| 3.0 * v).collect();
                    let y: Vec<f64> = if binary {
                        (0..batch * d).map(|_| f64::from(rng.random::<bool>())).collect()
                    } else {
                        uniform(&mut rng, batch * d)
                    };
                    let g = f(&o, &y, batch).unwrap().grad;
                    check(&o, &g, 1e-5, |p| f(p, &y, batch).unwrap().loss)
                })
                .fold(0.0, f64::max);
            (name, worst)
        })
        .collect()
}

/// Synthetic corpus split into train and test items.
pub fn synthetic_split(spec: &SynthSpec) -> (Vec<LabelledImage>, Vec<LabelledImage>) {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (image, rec) in spec.render_all().unwrap() {
        let item = LabelledImage {
            id: rec.image.display().to_string(),
            image,
            transcription: rec.transcription,
        };
        match rec.partition {
            Partition::Train => train.push(item),
            _ => test.push(item),
        }
    }
    (train, test)
}
