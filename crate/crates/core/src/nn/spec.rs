use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One layer of a network description.
///
/// Convolutions are always 3x3 with stride 1 and padding 1; max pooling is
/// always 2x2 with stride 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv3x3 { filters: usize },
    Relu,
    Maxpool2x2,
    Spp { levels: Vec<usize> },
    Tpp { levels: Vec<usize> },
    FullyConnected { outputs: usize },
    Dropout { p: f64 },
    Sigmoid,
    Softmax,
    Normalize,
}

impl LayerSpec {
    fn is_pyramid(&self) -> bool {
        matches!(self, LayerSpec::Spp { .. } | LayerSpec::Tpp { .. })
    }

    fn is_output_activation(&self) -> bool {
        matches!(self, LayerSpec::Sigmoid | LayerSpec::Softmax | LayerSpec::Normalize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Spp,
    Tpp,
}

impl Pooling {
    /// `{1, 2, 4}` grids for SPP, `{1, ..., 5}` horizontal bins for TPP.
    pub fn default_levels(self) -> Vec<usize> {
        match self {
            Pooling::Spp => vec![1, 2, 4],
            Pooling::Tpp => vec![1, 2, 3, 4, 5],
        }
    }

    pub fn layer(self) -> LayerSpec {
        let levels = self.default_levels();
        match self {
            Pooling::Spp => LayerSpec::Spp { levels },
            Pooling::Tpp => LayerSpec::Tpp { levels },
        }
    }

    /// Pooled values per feature map.
    pub fn cells(self) -> usize {
        pyramid_cells(&self.layer()).expect("pyramid layer")
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Spp => "spp",
            Pooling::Tpp => "tpp",
        })
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spp" => Ok(Pooling::Spp),
            "tpp" => Ok(Pooling::Tpp),
            _ => Err(Error::Config(format!("unknown pooling {s:?}"))),
        }
    }
}

/// Activation applied to the attribute layer at inference time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Sigmoid,
    Normalize,
    Identity,
}

impl OutputActivation {
    fn layer(self) -> Option<LayerSpec> {
        match self {
            OutputActivation::Sigmoid => Some(LayerSpec::Sigmoid),
            OutputActivation::Normalize => Some(LayerSpec::Normalize),
            OutputActivation::Identity => None,
        }
    }
}

fn pyramid_cells(layer: &LayerSpec) -> Option<usize> {
    match layer {
        LayerSpec::Spp { levels } => Some(levels.iter().map(|l| l * l).sum()),
        LayerSpec::Tpp { levels } => Some(levels.iter().sum()),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamRole {
    Weight,
    Bias,
}

/// Name, shape and initialization fan-in of one parameter block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: ParamRole,
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Declarative layer stack.
///
/// A valid spec has a convolutional part (convolutions, ReLUs, max pooling),
/// exactly one pyramid pooling layer, and a fully connected part ending in a
/// layer of width `d`, optionally followed by one output activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    #[serde(default = "one")]
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

fn one() -> usize {
    1
}

fn vgg_stack(blocks: &[&[usize]], pooling: Pooling) -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        for &filters in *block {
            layers.push(LayerSpec::Conv3x3 { filters });
            layers.push(LayerSpec::Relu);
        }
        if i + 1 < blocks.len() {
            layers.push(LayerSpec::Maxpool2x2);
        }
    }
    layers.push(pooling.layer());
    layers
}

fn head(layers: &mut Vec<LayerSpec>, hidden: usize, d: usize, output: OutputActivation) {
    for _ in 0..2 {
        layers.push(LayerSpec::FullyConnected { outputs: hidden });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::Dropout { p: 0.5 });
    }
    layers.push(LayerSpec::FullyConnected { outputs: d });
    layers.extend(output.layer());
}

impl NetworkSpec {
    /// Full-size architecture: 2x64, pool, 2x128, pool, 6x256, 3x512 filters,
    /// pyramid pooling, then FC 4096 / 4096 (50% dropout) / `d`.
    ///
    /// Per-layer filter counts are a reconstruction that follows the VGG-style
    /// progression with two pooling layers and 512 filters in the last block.
    pub fn phocnet_full(d: usize, pooling: Pooling, output: OutputActivation) -> Self {
        let mut layers = vgg_stack(
            &[&[64, 64], &[128, 128], &[256, 256, 256, 256, 256, 256, 512, 512, 512]],
            pooling,
        );
        head(&mut layers, 4096, d, output);
        Self {
            name: format!("phocnet-full-{pooling}"),
            input_channels: 1,
            layers,
        }
    }

    /// Desk-scale variant with the same topology: 2x8, pool, 2x16, pool,
    /// 2x32 filters, pyramid pooling, FC 256 / 256 (50% dropout) / `d`.
    pub fn phocnet_mini(d: usize, pooling: Pooling, output: OutputActivation) -> Self {
        let mut layers = vgg_stack(&[&[8, 8], &[16, 16], &[32, 32]], pooling);
        head(&mut layers, 256, d, output);
        Self {
            name: format!("phocnet-mini-{pooling}"),
            input_channels: 1,
            layers,
        }
    }

    pub fn preset(name: &str, d: usize, pooling: Pooling, output: OutputActivation) -> Result<Self> {
        match name {
            "phocnet-full" => Ok(Self::phocnet_full(d, pooling, output)),
            "phocnet-mini" => Ok(Self::phocnet_mini(d, pooling, output)),
            _ => Err(Error::Config(format!("unknown architecture preset {name:?}"))),
        }
    }

    /// Index of the pyramid layer.
    pub fn pyramid_index(&self) -> Result<usize> {
        let mut found = self.layers.iter().enumerate().filter(|(_, l)| l.is_pyramid());
        match (found.next(), found.next()) {
            (Some((i, _)), None) => Ok(i),
            (None, _) => Err(Error::Config("network has no pyramid pooling layer".into())),
            _ => Err(Error::Config("network has more than one pyramid pooling layer".into())),
        }
    }

    /// Number of layers that produce the pre-activation attribute output
    /// (everything except a trailing output activation).
    pub fn logits_len(&self) -> usize {
        match self.layers.last() {
            Some(l) if l.is_output_activation() => self.layers.len() - 1,
            _ => self.layers.len(),
        }
    }

    pub fn output_activation(&self) -> OutputActivation {
        match self.layers.last() {
            Some(LayerSpec::Sigmoid) => OutputActivation::Sigmoid,
            Some(LayerSpec::Normalize) => OutputActivation::Normalize,
            _ => OutputActivation::Identity,
        }
    }

    /// Checks the structural rules and returns the parameter blocks in declaration order.
    pub fn param_specs(&self) -> Result<Vec<ParamSpec>> {
        let pyramid = self.pyramid_index()?;
        let mut params = Vec::new();
        let mut channels = self.input_channels;
        let mut features = 0;
        let mut d = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let conv_part = i < pyramid;
            match layer {
                LayerSpec::Conv3x3 { filters } => {
                    if !conv_part {
                        return Err(Error::Config(format!("layer {i}: convolution after pyramid pooling")));
                    }
                    if *filters == 0 {
                        return Err(Error::Config(format!("layer {i}: zero filters")));
                    }
                    let fan_in = channels * 9;
                    params.push(ParamSpec {
                        name: format!("conv{i}.weight"),
                        shape: vec![*filters, channels, 3, 3],
                        role: ParamRole::Weight,
                        fan_in,
                    });
                    params.push(ParamSpec {
                        name: format!("conv{i}.bias"),
                        shape: vec![*filters],
                        role: ParamRole::Bias,
                        fan_in,
                    });
                    channels = *filters;
                }
                LayerSpec::Maxpool2x2 if !conv_part => {
                    return Err(Error::Config(format!("layer {i}: max pooling after pyramid pooling")));
                }
                LayerSpec::Spp { levels } | LayerSpec::Tpp { levels } => {
                    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::InvalidLevels(format!("pyramid levels {levels:?}")));
                    }
                    features = channels * pyramid_cells(layer).expect("pyramid");
                }
                LayerSpec::FullyConnected { outputs } => {
                    if conv_part {
                        return Err(Error::Config(format!("layer {i}: fully connected layer before pyramid pooling")));
                    }
                    params.push(ParamSpec {
                        name: format!("fc{i}.weight"),
                        shape: vec![*outputs, features],
                        role: ParamRole::Weight,
                        fan_in: features,
                    });
                    params.push(ParamSpec {
                        name: format!("fc{i}.bias"),
                        shape: vec![*outputs],
                        role: ParamRole::Bias,
                        fan_in: features,
                    });
                    features = *outputs;
                    d = Some(*outputs);
                }
                LayerSpec::Dropout { p } if !(0.0..1.0).contains(p) => {
                    return Err(Error::Config(format!("layer {i}: dropout probability {p}")));
                }
                LayerSpec::Sigmoid | LayerSpec::Softmax | LayerSpec::Normalize
                    if i + 1 != self.layers.len() =>
                {
                    return Err(Error::Config(format!("layer {i}: output activation must be last")));
                }
                _ => {}
            }
        }
        if d.is_none() {
            return Err(Error::Config("network has no fully connected layer".into()));
        }
        Ok(params)
    }

    /// Width of the final fully connected layer.
    pub fn attribute_dim(&self) -> Result<usize> {
        self.param_specs()?;
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                LayerSpec::FullyConnected { outputs } => Some(*outputs),
                _ => None,
            })
            .ok_or_else(|| Error::Config("no fully connected layer".into()))
    }

    /// Length of the pyramid pooling output, independent of the input size.
    pub fn pooled_dim(&self) -> Result<usize> {
        let pyramid = self.pyramid_index()?;
        let channels = self.layers[..pyramid]
            .iter()
            .rev()
            .find_map(|l| match l {
                LayerSpec::Conv3x3 { filters } => Some(*filters),
                _ => None,
            })
            .unwrap_or(self.input_channels);
        Ok(channels * pyramid_cells(&self.layers[pyramid]).expect("pyramid"))
    }

    /// Number of 2x2 max pooling layers, i.e. the input is downsampled by `2^k`.
    pub fn pool_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Maxpool2x2))
            .count()
    }

    /// Smallest input `(height, width)` accepted by the network.
    pub fn min_input_size(&self) -> Result<(usize, usize)> {
        let pyramid = self.pyramid_index()?;
        let scale = 1usize << self.pool_count();
        let (rows, cols) = match &self.layers[pyramid] {
            LayerSpec::Spp { levels } => {
                let m = *levels.last().unwrap_or(&1);
                (m, m)
            }
            LayerSpec::Tpp { levels } => (1, *levels.last().unwrap_or(&1)),
            _ => unreachable!(),
        };
        Ok((rows * scale, cols * scale))
    }
}
