pub mod convergence;
pub mod error;
pub mod freefermion;
pub mod model;
pub mod pauli;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex64;
