//! Adversarial latent autoencoders.
//!
//! The crate trains an encoder/generator pair whose reciprocity is enforced
//! in a learned latent space while the data distribution is matched
//! adversarially. Two architectures are provided: a fully connected one for
//! flat vectors (MNIST) and a style-based, progressively grown one for
//! square images.

pub mod datasets;
pub mod evaluation;
pub mod experiment;
pub mod model_zoo;
pub mod objectives;
pub mod params;
pub mod rng;
pub mod trainer;
