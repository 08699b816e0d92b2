//! On-disk tensor container and codecs for the pipeline's data types.

mod codec;
mod container;

pub use codec::*;
pub use container::{Tensor, TensorContainer, TensorData, FORMAT_VERSION, MAGIC};
