//! Latent trajectory autoencoder.

pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod nn;
pub mod ortho;
pub mod plot;
pub mod signal;
pub mod trainer;
pub mod trajectory;

pub use error::{Error, Result};
