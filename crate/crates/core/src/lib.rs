pub mod adaptive;
pub mod contraction;
pub mod error;
pub mod espf;
pub mod gaussian;
pub mod integration;
pub mod linalg;
pub mod possibility;
pub mod scenario;
pub mod width;

pub use error::{Error, Result};
