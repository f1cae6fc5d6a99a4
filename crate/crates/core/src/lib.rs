pub mod certify;
pub mod config;
pub mod datasets;
pub mod dimension;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod renyi;
pub mod sigma;
pub mod smoothing;
pub mod special;
pub mod worst_case;

pub use error::{Error, Result};
