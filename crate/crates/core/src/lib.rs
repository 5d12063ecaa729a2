pub mod error;
pub mod estimators;
pub mod experiment;
pub mod metrics;
pub mod noise;
pub mod numerics;
pub mod operator;
pub mod phantom;
pub mod probes;
pub mod recon;
pub mod rng;

pub use error::{Error, Result};
