use std::fmt;

use serde::{Deserialize, Serialize};

use super::KernelError;
use crate::Scalar;

/// Dense row-major tensor of rank 1 or 2.
///
/// A rank-1 tensor of length `n` behaves as a `1 × n` row wherever a matrix
/// is expected. Construction rejects non-finite elements.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Result<Self, KernelError> {
        check_shape(&shape)?;
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(KernelError::InvalidShape(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite { op: "from_vec" });
        }
        Ok(Self { shape, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, KernelError> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(KernelError::InvalidShape("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_vec(vec![rows.len(), cols], data)
    }

    pub fn vector(data: Vec<T>) -> Result<Self, KernelError> {
        Self::from_vec(vec![data.len()], data)
    }

    pub fn scalar(value: T) -> Result<Self, KernelError> {
        Self::from_vec(vec![1], vec![value])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        check_shape(shape).expect("valid shape");
        assert!(value.is_finite(), "fill value must be finite");
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    /// Internal constructor for results already known to be finite-checked
    /// by the caller.
    pub(crate) fn from_parts_unchecked(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn rows(&self) -> usize {
        match self.shape.as_slice() {
            [_] => 1,
            [r, _] => *r,
            _ => unreachable!("rank checked on construction"),
        }
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().expect("rank >= 1")
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        let c = self.cols();
        &self.data[row * c..(row + 1) * c]
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self, KernelError> {
        Self::from_vec(shape, self.data)
    }

    /// Copies the selected rows into a new `len(indices) × cols` matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let c = self.cols();
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::from_parts_unchecked(vec![indices.len(), c], data)
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = (self.rows(), self.cols());
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..c {
            for i in 0..r {
                data.push(self.data[i * c + j]);
            }
        }
        Self::from_parts_unchecked(vec![c, r], data)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, KernelError> {
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(KernelError::Shape {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        finite_or(vec![m, n], out, "matmul")
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self, KernelError> {
        finite_or(
            self.shape.clone(),
            self.data.iter().map(|&v| f(v)).collect(),
            "map",
        )
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self, KernelError> {
        if self.shape != other.shape {
            return Err(KernelError::Shape {
                op: "zip_with",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        finite_or(self.shape.clone(), data, "zip_with")
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}{:?}", self.shape, self.data)
    }
}

fn check_shape(shape: &[usize]) -> Result<(), KernelError> {
    if shape.is_empty() || shape.len() > 2 {
        return Err(KernelError::InvalidShape(format!(
            "rank {} unsupported (1 or 2 only)",
            shape.len()
        )));
    }
    if shape.contains(&0) {
        return Err(KernelError::InvalidShape(format!(
            "zero dimension in {shape:?}"
        )));
    }
    Ok(())
}

pub(crate) fn finite_or<T: Scalar>(
    shape: Vec<usize>,
    data: Vec<T>,
    op: &'static str,
) -> Result<Tensor<T>, KernelError> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(KernelError::NonFinite { op });
    }
    Ok(Tensor::from_parts_unchecked(shape, data))
}

/// Temperature-scaled softmax of a vector, with max subtraction.
pub fn softmax<T: Scalar>(z: &[T], temperature: T) -> Result<Vec<T>, KernelError> {
    if !(temperature > T::zero()) {
        return Err(KernelError::Parameter(format!(
            "softmax temperature must be > 0, got {temperature}"
        )));
    }
    if z.is_empty() {
        return Err(KernelError::InvalidShape("softmax of empty vector".into()));
    }
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = z.iter().map(|&v| ((v - max) / temperature).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let out: Vec<T> = exps.into_iter().map(|e| e / total).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(KernelError::NonFinite { op: "softmax" });
    }
    Ok(out)
}

/// Row-wise temperature softmax of a matrix.
pub fn softmax_rows<T: Scalar>(z: &Tensor<T>, temperature: T) -> Result<Tensor<T>, KernelError> {
    let mut data = Vec::with_capacity(z.len());
    for i in 0..z.rows() {
        data.extend(softmax(z.row(i), temperature)?);
    }
    Ok(Tensor::from_parts_unchecked(vec![z.rows(), z.cols()], data))
}
