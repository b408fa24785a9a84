pub mod entry;
pub mod error;
pub mod geometry;
pub mod market;
pub mod pricing;
pub mod scenario;
pub mod welfare;

pub use error::{Error, Result};
