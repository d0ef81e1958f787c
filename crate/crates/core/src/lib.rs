pub mod cdf_model;
pub mod data;
pub mod effects;
pub mod inference;
pub mod mc;
pub mod error;
pub mod numerics;
pub mod oracle;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
