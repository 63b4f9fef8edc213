//! KMS-detailed-balance Lindbladians with prescribed stationary states `f(H)` for
//! small spin chains, in exact energy-domain and Fourier-truncated form.

pub mod cli;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod filter;
pub mod fourier;
pub mod generator;
pub mod linalg;
pub mod spectral;
pub mod statefn;
pub mod verify;

pub use error::{Error, Result};
