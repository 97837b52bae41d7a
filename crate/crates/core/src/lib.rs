pub mod bony;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod littlewood_paley;
pub mod random;
pub mod snapshot;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
