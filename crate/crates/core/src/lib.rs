pub mod chain;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod instrument;
pub mod io;
pub mod lindblad;
pub mod linalg;
pub mod nondemolition;
pub mod parallel;
pub mod report;
pub mod sde;

pub use error::{Error, Result};
