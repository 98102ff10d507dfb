//! Energy-preserving moving-mesh finite elements for the periodic BBM equation.

pub mod assembly;
pub mod basis;
pub mod bbm;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod steppers;
pub mod transfer;

pub use error::{Error, Result};
