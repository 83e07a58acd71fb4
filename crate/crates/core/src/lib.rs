pub mod baselines;
pub mod chebyshev;
pub mod error;
pub mod expansion;
pub mod experiments;
pub mod harmonics;
pub mod hdf;
pub mod kernels;
pub mod krr;
pub mod linalg;
pub mod radial;
pub mod special;

pub use error::{Error, Result};
