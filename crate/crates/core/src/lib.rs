pub mod coefficient;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod lod;
pub mod mesh;
pub mod polyspaces;
pub mod qoi;
pub mod quadrature;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
