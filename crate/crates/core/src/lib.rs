pub mod dump;
pub mod error;
pub mod hermite;
pub mod hessenberg;
pub mod operators;
pub mod schmidt;
pub mod spectral;
pub mod tonks;
pub mod workflow;

pub use error::{CsmError, Result};
