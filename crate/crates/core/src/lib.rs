pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod kernel;
pub mod lindblad;
pub mod linalg;
pub mod measurement;
pub mod quantum;
pub mod tomography;
pub mod trajectory;
pub mod zz;

pub use error::{Error, Result};
