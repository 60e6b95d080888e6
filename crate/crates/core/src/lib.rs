pub mod cdbn;
pub mod corpus;
pub mod dbn;
pub mod error;
pub mod eval;
pub mod features;
pub mod inference;
pub mod retrieval;
pub mod smooth;
pub mod statmath;
pub mod vq;

pub use error::{Error, Result};
