//! A small deterministic CNN engine with exactly the layers PHOCNet-style
//! attribute networks need: 3x3 convolutions, ReLU, 2x2 max pooling,
//! spatial and temporal pyramid pooling, fully connected layers, dropout and
//! output activations.
//!
//! All arithmetic is `f64`. Pyramid pooling turns a feature map of any
//! admissible size into a fixed-length vector, so one network handles word
//! images of varying width:
//!
//! ```
//! use rand::SeedableRng;
//! use wordspot::nn::{Network, NetworkSpec, OutputActivation, Pooling, Tensor};
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let spec = NetworkSpec::phocnet_mini(30, Pooling::Tpp, OutputActivation::Sigmoid);
//! let net = Network::new(spec, &mut rng).unwrap();
//! for width in [26, 60] {
//!     let image = Tensor::from_image(32, width, vec![0.0; 32 * width]).unwrap();
//!     assert_eq!(net.predict(&image).unwrap().len(), 30);
//! }
//! ```

pub mod activation;
mod checkpoint;
pub mod layers;
mod network;
mod spec;
mod tensor;

pub use checkpoint::{Checkpoint, ExtraBlock, CHECKPOINT_VERSION};
pub use network::{he_init, ForwardCache, Mode, Network, Parameter};
pub use spec::{LayerSpec, NetworkSpec, OutputActivation, ParamRole, ParamSpec, Pooling};
pub use tensor::{Shape, Tensor};
