pub mod data;
pub mod error;
pub mod harness;
pub mod masking;
pub mod metrics;
pub mod objective;
pub mod preprocess;
pub mod rng;
pub mod stafn;

pub use error::{Error, Result};
