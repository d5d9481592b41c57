pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod numerics;
pub mod psi;
pub mod spectral;
pub mod theta;
pub mod verify;

pub use error::{Error, Result};
