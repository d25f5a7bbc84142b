pub mod dispersion;
mod error;
pub mod friction2;
pub mod friction4;
pub mod numerics;
pub mod oracle;

pub use error::{Error, Result};
