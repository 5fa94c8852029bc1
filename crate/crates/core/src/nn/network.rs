use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::layers::{self, ArgmaxCache, ConvCache};
use super::spec::{LayerSpec, NetworkSpec, ParamRole, ParamSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Training mode enables dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A parameter block with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub spec: ParamSpec,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Parameter {
    pub fn zeros(spec: ParamSpec) -> Self {
        let n = spec.len();
        Self {
            spec,
            value: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn role(&self) -> ParamRole {
        self.spec.role
    }
}

/// Draws `len` samples from `N(0, 2 / fan_in)`.
pub fn he_init<R: Rng + ?Sized>(len: usize, fan_in: usize, rng: &mut R) -> Result<Vec<f64>> {
    if fan_in == 0 {
        return Err(Error::InvalidParameter("fan-in must be >= 1".into()));
    }
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((0..len).map(|_| normal.sample(rng)).collect())
}

#[derive(Debug, Clone)]
enum LayerCache {
    Conv(ConvCache),
    Relu(Tensor),
    Pool(ArgmaxCache),
    Fc(Tensor),
    Dropout(Vec<f64>),
    Identity,
    Sigmoid(Tensor),
    Softmax(Tensor),
    Normalize(Tensor, Vec<f64>),
}

/// Activations kept by [`Network::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
}

/// A network description together with its parameters.
///
/// Inference (`&self`) is safe to share between threads; training mutates
/// the gradient buffers and needs exclusive access.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    params: Vec<Parameter>,
    /// Index of each layer's first parameter block, if it has any.
    slots: Vec<Option<usize>>,
}

impl Network {
    /// Network with all parameters set to zero.
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        let specs = spec.param_specs()?;
        let mut slots = Vec::with_capacity(spec.layers.len());
        let mut next = 0;
        for layer in &spec.layers {
            match layer {
                LayerSpec::Conv3x3 { .. } | LayerSpec::FullyConnected { .. } => {
                    slots.push(Some(next));
                    next += 2;
                }
                _ => slots.push(None),
            }
        }
        let params = specs.into_iter().map(Parameter::zeros).collect();
        Ok(Self { spec, params, slots })
    }

    /// He-initialized weights, zero biases.
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for p in &mut net.params {
            if p.spec.role == ParamRole::Weight {
                p.value = he_init(p.spec.len(), p.spec.fan_in, rng)?;
            }
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    fn layer_params(&self, i: usize) -> (&[f64], &[f64]) {
        let s = self.slots[i].expect("parameterized layer");
        (&self.params[s].value, &self.params[s + 1].value)
    }

    fn param_pair(&mut self, i: usize) -> (&mut Parameter, &mut Parameter) {
        let s = self.slots[i].expect("parameterized layer");
        let (left, right) = self.params.split_at_mut(s + 1);
        (&mut left[s], &mut right[0])
    }

    fn run<R: Rng + ?Sized>(
        &self,
        x: &Tensor,
        end: usize,
        mode: Mode,
        mut rng: Option<&mut R>,
        keep_cache: bool,
    ) -> Result<(Tensor, ForwardCache)> {
        if x.shape().c != self.spec.input_channels {
            return Err(Error::shape(format!(
                "network expects {} input channels, got {}",
                self.spec.input_channels,
                x.shape().c
            )));
        }
        let mut caches = Vec::with_capacity(if keep_cache { end } else { 0 });
        let mut cur = x.clone();
        for (i, layer) in self.spec.layers[..end].iter().enumerate() {
            let (next, cache) = match layer {
                LayerSpec::Conv3x3 { .. } => {
                    let (w, b) = self.layer_params(i);
                    let (y, c) = layers::conv3x3_forward(&cur, w, b)?;
                    (y, LayerCache::Conv(c))
                }
                LayerSpec::Relu => (layers::relu_forward(&cur), LayerCache::Relu(cur)),
                LayerSpec::Maxpool2x2 => {
                    let (y, c) = layers::maxpool2x2_forward(&cur)?;
                    (y, LayerCache::Pool(c))
                }
                LayerSpec::Spp { levels } => {
                    let (y, c) = layers::spp_forward(&cur, levels)?;
                    (y, LayerCache::Pool(c))
                }
                LayerSpec::Tpp { levels } => {
                    let (y, c) = layers::tpp_forward(&cur, levels)?;
                    (y, LayerCache::Pool(c))
                }
                LayerSpec::FullyConnected { .. } => {
                    let (w, b) = self.layer_params(i);
                    let y = layers::fully_connected_forward(&cur, w, b)?;
                    (y, LayerCache::Fc(cur))
                }
                LayerSpec::Dropout { p } => match (mode, rng.as_deref_mut()) {
                    (Mode::Train, Some(r)) => {
                        let (y, mask) = layers::dropout_forward(&cur, *p, r)?;
                        (y, LayerCache::Dropout(mask))
                    }
                    (Mode::Train, None) => {
                        return Err(Error::InvalidParameter(
                            "training-mode forward pass needs a random source".into(),
                        ))
                    }
                    (Mode::Eval, _) => (cur, LayerCache::Identity),
                },
                LayerSpec::Sigmoid => {
                    let y = layers::sigmoid_forward(&cur);
                    (y.clone(), LayerCache::Sigmoid(y))
                }
                LayerSpec::Softmax => {
                    let y = layers::softmax_forward(&cur)?;
                    (y.clone(), LayerCache::Softmax(y))
                }
                LayerSpec::Normalize => {
                    let (y, norms) = layers::normalize_forward(&cur)?;
                    (y.clone(), LayerCache::Normalize(y, norms))
                }
            };
            if keep_cache {
                caches.push(cache);
            }
            cur = next;
        }
        Ok((cur, ForwardCache { layers: caches }))
    }

    /// Full forward pass including any output activation.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Tensor,
        mode: Mode,
        rng: Option<&mut R>,
    ) -> Result<(Tensor, ForwardCache)> {
        self.run(x, self.spec.layers.len(), mode, rng, true)
    }

    /// Forward pass stopping before a trailing output activation; the
    /// returned values are what the training losses consume.
    pub fn forward_logits<R: Rng + ?Sized>(
        &self,
        x: &Tensor,
        mode: Mode,
        rng: Option<&mut R>,
    ) -> Result<(Tensor, ForwardCache)> {
        self.run(x, self.spec.logits_len(), mode, rng, true)
    }

    /// Evaluation-mode forward pass without caching; output is `(N, d)` flattened.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let (y, _) = self.run::<rand::rngs::ThreadRng>(x, self.spec.layers.len(), Mode::Eval, None, false)?;
        Ok(y)
    }

    /// Backpropagates `grad_out` through the layers recorded in `cache`,
    /// accumulating parameter gradients. Returns the gradient w.r.t. the input.
    pub fn backward(&mut self, cache: &ForwardCache, grad_out: &Tensor) -> Result<Tensor> {
        let mut g = grad_out.clone();
        for (i, c) in cache.layers.iter().enumerate().rev() {
            g = match c {
                LayerCache::Conv(cc) => {
                    let (wp, bp) = self.param_pair(i);
                    layers::conv3x3_backward(cc, &wp.value, &g, &mut wp.grad, &mut bp.grad)?
                }
                LayerCache::Relu(x) => layers::relu_backward(x, &g),
                LayerCache::Pool(pc) => layers::pyramid_pool_backward(pc, &g)?,
                LayerCache::Fc(x) => {
                    let (wp, bp) = self.param_pair(i);
                    layers::fully_connected_backward(x, &wp.value, &g, &mut wp.grad, &mut bp.grad)?
                }
                LayerCache::Dropout(mask) => layers::dropout_backward(mask, &g),
                LayerCache::Identity => g,
                LayerCache::Sigmoid(y) => layers::sigmoid_backward(y, &g),
                LayerCache::Softmax(y) => layers::softmax_layer_backward(y, &g),
                LayerCache::Normalize(y, norms) => layers::normalize_layer_backward(y, norms, &g),
            };
        }
        Ok(g)
    }

    /// Flat copy of every parameter value in declaration order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    /// Flat copy of every gradient in declaration order.
    pub fn flat_grads(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.grad.iter().copied()).collect()
    }

    pub(crate) fn from_parts(spec: NetworkSpec, values: Vec<Vec<f64>>) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        if values.len() != net.params.len() {
            return Err(Error::Checkpoint(format!(
                "{} parameter blocks for {} slots",
                values.len(),
                net.params.len()
            )));
        }
        for (p, v) in net.params.iter_mut().zip(values) {
            if v.len() != p.value.len() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} has {} values, expected {}",
                    p.spec.name,
                    v.len(),
                    p.value.len()
                )));
            }
            p.value = v;
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::{OutputActivation, Pooling};
    use crate::nn::Shape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn biases_start_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Network::new(
            NetworkSpec::phocnet_mini(12, Pooling::Tpp, OutputActivation::Sigmoid),
            &mut rng,
        )
        .unwrap();
        for p in net.params() {
            match p.role() {
                ParamRole::Bias => assert!(p.value.iter().all(|&v| v == 0.0)),
                ParamRole::Weight => assert!(p.value.iter().any(|&v| v != 0.0)),
            }
        }
    }

    #[test]
    fn he_init_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = he_init(100_000, 512, &mut rng).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        assert!((std / (2.0f64 / 512.0).sqrt() - 1.0).abs() < 0.05, "std {std}");
        assert!(he_init(3, 0, &mut rng).is_err());
        let a = he_init(8, 9, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = he_init(8, 9, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn variable_width_gives_fixed_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Network::new(
            NetworkSpec::phocnet_mini(20, Pooling::Tpp, OutputActivation::Sigmoid),
            &mut rng,
        )
        .unwrap();
        for w in [20, 37] {
            let x = Tensor::filled(Shape::new(1, 1, 16, w), 0.3);
            let y = net.predict(&x).unwrap();
            assert_eq!(y.shape(), Shape::new(1, 20, 1, 1));
        }
    }

    #[test]
    fn equal_images_equal_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Network::new(
            NetworkSpec::phocnet_mini(6, Pooling::Spp, OutputActivation::Sigmoid),
            &mut rng,
        )
        .unwrap();
        let img: Vec<f64> = (0..16 * 24).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let one = Tensor::from_image(16, 24, img).unwrap();
        let batch = Tensor::stack(&[one.clone(), one.clone(), one]).unwrap();
        let y = net.predict(&batch).unwrap();
        assert_eq!(y.sample(0), y.sample(1));
        assert_eq!(y.sample(1), y.sample(2));
    }

    #[test]
    fn train_mode_requires_rng() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Network::new(
            NetworkSpec::phocnet_mini(6, Pooling::Tpp, OutputActivation::Sigmoid),
            &mut rng,
        )
        .unwrap();
        let x = Tensor::zeros(Shape::new(1, 1, 8, 24));
        assert!(net.forward::<ChaCha8Rng>(&x, Mode::Train, None).is_err());
        assert!(net.forward(&x, Mode::Train, Some(&mut rng)).is_ok());
    }
}
