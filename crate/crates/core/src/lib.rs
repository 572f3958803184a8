pub mod data;
pub mod error;
pub mod gainlayer;
pub mod gradcheck;
pub mod nn;
pub mod npy;
pub mod rng;
pub mod tensor;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::{ComplexTensor, Real, Tensor};
