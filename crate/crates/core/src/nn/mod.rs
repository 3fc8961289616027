//! Small CPU neural-network toolkit: strided GEMM, 1-D convolution, batch
//! norm, pooling, dense layers, softmax cross-entropy and Adam.
//!
//! Layers are generic over `f32` (training) and `f64` (gradient checks).

pub mod block;
pub mod gradcheck;
pub mod layers;
pub mod param;
pub mod scalar;
pub mod tensor;

pub use block::{BlockCache, ConvBlock, PoolKind};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use layers::{global_avg_pool, max_pool, relu, softmax, softmax_xent, BatchNorm1d, Conv1d, Dense, Mode};
pub use param::{Adam, Param, Parameterized};
pub use scalar::{gemm, Scalar, Strides};
pub use tensor::Tensor;
