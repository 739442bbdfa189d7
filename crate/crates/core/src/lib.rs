pub mod assembly;
pub mod bernstein;
pub mod dofs;
pub mod element;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod rational;
pub mod report;
pub mod simplex;
pub mod tensor;

pub use error::{Error, Result};
pub use rational::{Vector, Q};
