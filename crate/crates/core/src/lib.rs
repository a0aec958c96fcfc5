pub mod benchmark;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod label;
pub mod layers;
pub mod model;
pub mod train;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use label::{Domain, Speaker};
pub use rng::RngState;
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type ModelBundle64 = model::ModelBundle<f64>;
pub type ModelBundle32 = model::ModelBundle<f32>;
pub type Trainer64 = train::Trainer<f64>;
pub type Trainer32 = train::Trainer<f32>;
