//! Dense rank-3/4 tensors, row-major, `f64` storage.

use crate::error::{Error, Result};

/// A dense real tensor of shape `(channels, height, width)` or
/// `(batch, channels, height, width)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.len() != 3 && shape.len() != 4 {
            return Err(Error::shape(format!(
                "tensor rank must be 3 or 4, got {}",
                shape.len()
            )));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite tensor value {bad}")));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, vec![0.0; len])
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Read a rank-3 element.
    #[inline]
    pub fn at3(&self, c: usize, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.rank(), 3);
        self.data[(c * self.shape[1] + i) * self.shape[2] + j]
    }

    #[inline]
    pub fn set3(&mut self, c: usize, i: usize, j: usize, value: f64) {
        debug_assert_eq!(self.rank(), 3);
        self.data[(c * self.shape[1] + i) * self.shape[2] + j] = value;
    }

    /// Read a rank-4 element.
    #[inline]
    pub fn at4(&self, b: usize, c: usize, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.rank(), 4);
        self.data[((b * self.shape[1] + c) * self.shape[2] + i) * self.shape[3] + j]
    }

    /// One channel plane of a rank-3 tensor as a contiguous slice.
    pub fn channel(&self, c: usize) -> &[f64] {
        debug_assert_eq!(self.rank(), 3);
        let plane = self.shape[1] * self.shape[2];
        &self.data[c * plane..(c + 1) * plane]
    }
}
