use crate::error::{Error, Result};

/// Dense tensors are at most rank 2; that covers every network in this crate
/// (weight matrices, activation vectors, scalars as length-1 vectors).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Shape {
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn numel(&self) -> usize {
        match *self {
            Shape::Vector(n) => n,
            Shape::Matrix(r, c) => r * c,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match *self {
            Shape::Vector(n) => vec![n],
            Shape::Matrix(r, c) => vec![r, c],
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Shape::Vector(n) => write!(f, "[{n}]"),
            Shape::Matrix(r, c) => write!(f, "[{r}, {c}]"),
        }
    }
}

/// Row-major f64 tensor. Construction rejects non-finite values and
/// shape/length disagreements, so a `Tensor` always holds finite data.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let shape = match *dims {
            [n] => Shape::Vector(n),
            [r, c] => Shape::Matrix(r, c),
            _ => {
                return Err(Error::BadOperand {
                    op: "tensor",
                    message: format!("rank {} unsupported (only 1-D and 2-D)", dims.len()),
                })
            }
        };
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::BadOperand {
                op: "tensor",
                message: format!("zero dimension in shape {shape}"),
            });
        }
        Self::from_shape(shape, data)
    }

    pub fn from_shape(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if shape.numel() != data.len() {
            return Err(Error::BadOperand {
                op: "tensor",
                message: format!("shape {shape} needs {} values, got {}", shape.numel(), data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("tensor construction with shape {shape}"),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Self::from_shape(Shape::Vector(data.len()), data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_shape(Shape::Matrix(rows, cols), data)
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::from_shape(Shape::Vector(1), vec![value])
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.numel()],
        }
    }

    /// For op outputs whose finiteness was already checked on the raw buffer.
    pub(crate) fn from_parts(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.numel(), data.len());
        Tensor { shape, data }
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a length-1 tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }
}
