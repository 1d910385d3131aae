pub mod error;
pub mod exponents;
pub mod fraclap;
pub mod fracops;
pub mod harness;
pub mod identities;
pub mod solver;
pub mod testfn;

pub use error::{Error, Result};
