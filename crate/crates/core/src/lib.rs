pub mod ansatz;
pub mod error;
pub mod qcore;
pub mod rng;
pub mod runner;
pub mod sim;
pub mod thermo;
pub mod transpile;
pub mod verify;
pub mod vqa;

pub use error::{Error, Result};
