use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(batch, channels, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements per batch entry.
    pub fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Dense row-major rank-4 array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::shape(format!(
                "{} values for shape {shape}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    /// Single-sample, single-channel tensor from an `h x w` row-major grid.
    pub fn from_image(h: usize, w: usize, pixels: Vec<f64>) -> Result<Self> {
        Self::from_vec(Shape::new(1, 1, h, w), pixels)
    }

    /// Stacks equally-shaped single-sample tensors along the batch axis.
    pub fn stack(samples: &[Tensor]) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyInput("tensor batch"))?;
        let s = first.shape;
        let mut data = Vec::with_capacity(s.len() * samples.len());
        let mut n = 0;
        for t in samples {
            if (Shape { n: 1, ..t.shape }) != (Shape { n: 1, ..s }) {
                return Err(Error::shape(format!("cannot stack {} with {}", t.shape, s)));
            }
            n += t.shape.n;
            data.extend_from_slice(&t.data);
        }
        Self::from_vec(Shape { n, ..s }, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, n: usize) -> &[f64] {
        let s = self.shape.sample_len();
        &self.data[n * s..(n + 1) * s]
    }

    pub fn sample_mut(&mut self, n: usize) -> &mut [f64] {
        let s = self.shape.sample_len();
        &mut self.data[n * s..(n + 1) * s]
    }

    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        let s = self.shape;
        self.data[((n * s.c + c) * s.h + h) * s.w + w]
    }

    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: f64) {
        let s = self.shape;
        self.data[((n * s.c + c) * s.h + h) * s.w + w] = v;
    }

    /// Same data viewed as `(n, c*h*w, 1, 1)`.
    pub fn flatten(self) -> Self {
        let s = self.shape;
        Self {
            shape: Shape::new(s.n, s.sample_len(), 1, 1),
            data: self.data,
        }
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
