//! Dense row-major tensors and split-plane complex tensors.
//!
//! Everything in the crate is generic over [`Real`], implemented for `f64`
//! (all verification paths) and `f32` (training hot loops only).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};

/// Floating-point element type.
pub trait Real:
    Float
    + FromPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + npyz::Serialize
    + npyz::Deserialize
    + npyz::AutoSerialize
    + 'static
{
    /// Name used in manifests and CLI flags.
    const NAME: &'static str;

    fn cst(x: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Real for f64 {
    const NAME: &'static str = "f64";

    #[inline(always)]
    fn cst(x: f64) -> Self {
        x
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";

    #[inline(always)]
    fn cst(x: f64) -> Self {
        x as f32
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// A dense N-dimensional array in row-major order.
#[derive(Clone, PartialEq)]
pub struct Tensor<T = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T> Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} holds {n} values but {} were given",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// Builds a tensor by evaluating `f` at each flat index.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> T) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(f).collect(),
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| {
            debug_assert!(i < n);
            acc * n + i
        })
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: T) {
        let k = self.offset(index);
        self.data[k] = value;
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::dim(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Number of values in one slice along the leading axis.
    pub fn outer_stride(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    /// The `i`-th slice along the leading axis.
    pub fn outer(&self, i: usize) -> &[T] {
        let s = self.outer_stride();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn outer_mut(&mut self, i: usize) -> &mut [T] {
        let s = self.outer_stride();
        &mut self.data[i * s..(i + 1) * s]
    }

    /// Copies the `i`-th leading slice into its own tensor.
    pub fn outer_tensor(&self, i: usize) -> Self {
        Self {
            shape: self.shape[1..].to_vec(),
            data: self.outer(i).to_vec(),
        }
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(parts: &[Tensor<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::dim("cannot stack an empty list"))?;
        let mut shape = vec![parts.len()];
        shape.extend_from_slice(first.shape());
        let mut data = Vec::with_capacity(first.len() * parts.len());
        for p in parts {
            if p.shape() != first.shape() {
                return Err(Error::dim(format!(
                    "stack: shape {:?} differs from {:?}",
                    p.shape(),
                    first.shape()
                )));
            }
            data.extend_from_slice(p.data());
        }
        Ok(Self { shape, data })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, alpha: T) -> Self {
        self.map(|v| v * alpha)
    }

    fn check_same(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "add")?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "sub")?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.check_same(other, "axpy")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.axpy(T::one(), other)
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Largest elementwise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.check_same(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.as_f64() * v.as_f64())
            .sum::<f64>()
            .sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Fails with [`Error::NonFinite`] naming `op` if any value is NaN or infinite.
    pub fn ensure_finite(self, op: &'static str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(op))
        }
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::cst(v.as_f64())).collect(),
        }
    }
}

/// Complex tensor stored as separate real and imaginary planes.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor<T = f64> {
    pub re: Tensor<T>,
    pub im: Tensor<T>,
}

impl<T: Real> ComplexTensor<T> {
    pub fn new(re: Tensor<T>, im: Tensor<T>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::dim(format!(
                "real plane {:?} and imaginary plane {:?} differ",
                re.shape(),
                im.shape()
            )));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            re: Tensor::zeros(shape),
            im: Tensor::zeros(shape),
        }
    }

    pub fn shape(&self) -> &[usize] {
        self.re.shape()
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self {
            re: self.re.scale(alpha),
            im: self.im.scale(alpha),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.map(|v| -v),
        }
    }

    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.re.axpy(alpha, &other.re)?;
        self.im.axpy(alpha, &other.im)
    }

    pub fn max_abs(&self) -> T {
        self.re.max_abs().max(self.im.max_abs())
    }

    /// Squared magnitude, elementwise.
    pub fn energy(&self) -> Tensor<T> {
        Tensor {
            shape: self.re.shape.clone(),
            data: self
                .re
                .data
                .iter()
                .zip(&self.im.data)
                .map(|(&r, &i)| r * r + i * i)
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Elementwise complex product.
///
/// Shapes must match, except that either operand may hold a single value,
/// which is applied to every element of the other.
pub fn complex_mul<T: Real>(
    a: &ComplexTensor<T>,
    b: &ComplexTensor<T>,
) -> Result<ComplexTensor<T>> {
    let (big, small, swapped) = if a.len() >= b.len() {
        (a, b, false)
    } else {
        (b, a, true)
    };
    if big.shape() != small.shape() && small.len() != 1 {
        return Err(Error::dim(format!(
            "complex_mul: shapes {:?} and {:?} are not compatible",
            a.shape(),
            b.shape()
        )));
    }
    let n = big.len();
    let pick = |t: &Tensor<T>, k: usize| if t.len() == 1 { t.data[0] } else { t.data[k] };
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for k in 0..n {
        let (ar, ai, br, bi) = if swapped {
            (
                pick(&small.re, k),
                pick(&small.im, k),
                big.re.data[k],
                big.im.data[k],
            )
        } else {
            (
                big.re.data[k],
                big.im.data[k],
                pick(&small.re, k),
                pick(&small.im, k),
            )
        };
        re.push(ar * br - ai * bi);
        im.push(ar * bi + ai * br);
    }
    let shape = big.shape();
    Ok(ComplexTensor {
        re: Tensor::new(shape, re)?,
        im: Tensor::new(shape, im)?,
    })
}

/// Real inner product `Σ aᵢ bᵢ`.
///
/// Products are accumulated in `f64` strictly in flat index order, so the
/// result is deterministic and symmetric in its arguments bit for bit.
pub fn inner_product<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "inner_product: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(dot(a.data(), b.data()))
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        acc += x.as_f64() * y.as_f64();
    }
    acc
}
