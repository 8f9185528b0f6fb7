pub mod bench;
pub mod config;
pub mod correctors;
pub mod error;
pub mod fft;
pub mod field;
pub mod io;
pub mod lattice;
pub mod multipole;
pub mod optimality;
pub mod solver;

pub use error::{Error, Result};
