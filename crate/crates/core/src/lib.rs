//! Few-shot embedding inversion toolkit.
//!
//! * [`tensor`], [`svd`]: dense linear algebra, mean pooling, normalization,
//!   SVD and the Moore-Penrose pseudoinverse.
//! * [`alignment`]: closed-form least-squares map from a victim embedding
//!   space into an attack space.
//! * [`defense`]: embedding defenses (WET, shuffling, Gaussian noise, metric-LDP).
//! * [`metrics`]: ROUGE-L/1, BLEU-1/2, cosine similarity, entity-overlap F1.
//! * [`generator`]: embedding-to-text decoders (nearest neighbor and a small
//!   trainable autoregressive model).
//! * [`utility`]: downstream classifier used to measure what a defense costs.
//!
//! The linear-algebra and alignment code is generic over [`Real`]; the type
//! aliases below fix it to `f64`, which is what the pipeline uses.

pub mod alignment;
pub mod defense;
pub mod error;
pub mod generator;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod svd;
pub mod synthetic;
pub mod tensor;
pub mod utility;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix = tensor::DenseMatrix<f64>;
pub type Vector = tensor::DenseVector<f64>;
pub type MatrixF32 = tensor::DenseMatrix<f32>;
pub type VectorF32 = tensor::DenseVector<f32>;
pub type Svd = svd::SvdFactors<f64>;
pub type AlignmentMap = alignment::AlignmentMap<f64>;
pub type WetTransform = defense::WetTransform<f64>;
