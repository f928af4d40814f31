pub mod backbone;
pub mod baselines;
pub mod dynamics;
pub mod error;
pub mod iodata;
pub mod linalg;
pub mod pipeline;
pub mod response;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod susceptibility;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
