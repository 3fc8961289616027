use crate::error::{Error, Result};

use super::Scalar;

/// A `len × ch` activation, row-major (one row per time step).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub len: usize,
    pub ch: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(len: usize, ch: usize) -> Self {
        Tensor {
            len,
            ch,
            data: vec![T::zero(); len * ch],
        }
    }

    pub fn from_vec(len: usize, ch: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != len * ch {
            return Err(Error::shape(format!(
                "{} values cannot form a {len}×{ch} tensor",
                data.len()
            )));
        }
        Ok(Tensor { len, ch, data })
    }

    pub fn at(&self, t: usize, c: usize) -> T {
        self.data[t * self.ch + c]
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.data[t * self.ch..(t + 1) * self.ch]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            len: self.len,
            ch: self.ch,
            data: self.data.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect(),
        }
    }
}
