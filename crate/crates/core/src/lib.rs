pub mod error;
pub mod exec;
pub mod fock;
pub mod hom;
pub mod memory;
pub mod macro_size;
pub mod noise;
pub mod polarization;
pub mod quadrature;
pub mod spdc;

pub use error::{Error, Result};
pub use fock::C64;
