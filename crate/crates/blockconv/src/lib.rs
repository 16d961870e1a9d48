pub mod conv;
pub mod dense;
pub mod error;
pub mod lista;
pub mod scene;
pub mod solver;

pub use error::{Error, Result};
