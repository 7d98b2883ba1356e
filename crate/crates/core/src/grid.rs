//! Flat `f64` tensors with shape metadata.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense real tensor stored as a flat row-major buffer.
///
/// Images use `[C, H, W]` (or `[H, W]`), points and latent vectors use `[d]`.
/// Binary operations require exactly matching shapes; there is no broadcasting.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    data: Vec<f64>,
    shape: Vec<usize>,
}

impl Grid {
    pub fn new(data: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Invalid(format!("grid extents must be positive, got {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Invalid(format!("shape {shape:?} holds {len} values but {} were given", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("grid entries must be finite".into()));
        }
        Ok(Grid { data, shape })
    }

    /// A 1-D grid of shape `[data.len()]`.
    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Grid::new(data, vec![n])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Grid { data: vec![value; len], shape: shape.to_vec() }
    }

    /// Builds a grid without validating finiteness. Shape must match.
    pub(crate) fn from_parts(data: Vec<f64>, shape: Vec<usize>) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Grid { data, shape }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(Error::shape(&self.shape, &shape));
        }
        Ok(Grid { data: self.data, shape })
    }

    pub fn same_shape(&self, other: &Grid) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::shape(&self.shape, &other.shape))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid::from_parts(self.data.iter().map(|&v| f(v)).collect(), self.shape.clone())
    }

    pub fn zip_map(&self, other: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Grid> {
        self.same_shape(other)?;
        Ok(Grid::from_parts(self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(), self.shape.clone()))
    }

    pub fn add(&self, other: &Grid) -> Result<Grid> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Grid) -> Result<Grid> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Grid {
        self.map(|v| c * v)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Grid) -> Result<()> {
        self.same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Grid) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Interprets the grid as an image `(channels, height, width)`.
    pub fn image_dims(&self) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            &[h, w] => Ok((1, h, w)),
            &[c, h, w] => Ok((c, h, w)),
            other => Err(Error::Invalid(format!("expected an image shape [H, W] or [C, H, W], got {other:?}"))),
        }
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Grid{:?}[", self.shape)?;
        for (i, v) in self.data.iter().take(SHOWN).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        if self.data.len() > SHOWN {
            write!(f, ", ...")?;
        }
        write!(f, "]")
    }
}

/// Straight-line interpolant `(1 - t) x0 + t x1`.
pub fn interp_et(x0: &Grid, x1: &Grid, t: f64) -> Result<Grid> {
    crate::error::check_unit_interval("t", t)?;
    x0.zip_map(x1, |a, b| (1.0 - t) * a + t * b)
}
