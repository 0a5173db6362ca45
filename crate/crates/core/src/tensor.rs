//! Dense N-way tensors.
//!
//! Entries are stored with the first index varying fastest: element
//! `(i_1, ..., i_N)` (0-based here) lives at `sum_k i_k * prod_{m<k} D_m`.
//!
//! The mode-n unfolding is the `D_n x P_n` matrix whose column `j` holds the
//! mode-n fiber with, in 1-based notation,
//! `j = 1 + sum_{m != n} (i_m - 1) J_m` and `J_m = prod_{k < m, k != n} D_k`.
//! The public API is 0-based, so the same map reads `j = sum_{m != n} i_m J_m`.
//! With this layout the mode-1 unfolding is a plain reshape of the data.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// A tensor flattened along one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedMatrix {
    pub mode: usize,
    pub matrix: Matrix,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::arg("tensor must have at least one mode"));
        }
        if let Some(m) = shape.iter().position(|&d| d == 0) {
            return Err(Error::arg(format!("mode {m} has zero length")));
        }
        let p: usize = shape.iter().product();
        if data.len() != p {
            return Err(Error::arg(format!(
                "shape {shape:?} needs {p} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let p = shape.iter().product();
        Self::new(shape.to_vec(), vec![0.0; p]).expect("zeros: invalid shape")
    }

    /// Builds a tensor by evaluating `f` at every 0-based multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let p: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(p);
        for _ in 0..p {
            data.push(f(&idx));
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < shape[k] {
                    break;
                }
                *i = 0;
            }
        }
        Self::new(shape.to_vec(), data).expect("from_fn: invalid shape")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    /// Total number of entries `P`.
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

    /// Linear offset of a 0-based multi-index.
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() {
            return Err(Error::arg(format!(
                "index has {} entries for an order-{} tensor",
                index.len(),
                self.shape.len()
            )));
        }
        let mut off = 0;
        let mut stride = 1;
        for (k, (&i, &d)) in index.iter().zip(&self.shape).enumerate() {
            if i >= d {
                return Err(Error::arg(format!("index {i} out of range for mode {k} (length {d})")));
            }
            off += i * stride;
            stride *= d;
        }
        Ok(off)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let off = self.offset(index)?;
        self.data[off] = value;
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::arg(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `P_n`, the product of all dimensions except mode `n`.
    pub fn complement_len(&self, n: usize) -> usize {
        self.len() / self.shape[n]
    }

    fn check_mode(&self, n: usize) -> Result<()> {
        if n >= self.shape.len() {
            return Err(Error::arg(format!(
                "mode {n} out of range for an order-{} tensor",
                self.shape.len()
            )));
        }
        Ok(())
    }
}

/// Splits a shape around mode `n` into (prod of leading dims, D_n, prod of trailing dims).
fn split(shape: &[usize], n: usize) -> (usize, usize, usize) {
    let lead = shape[..n].iter().product();
    let trail = shape[n + 1..].iter().product();
    (lead, shape[n], trail)
}

/// Mode-`n` unfolding (0-based mode).
pub fn unfold(x: &DenseTensor, n: usize) -> Result<UnfoldedMatrix> {
    x.check_mode(n)?;
    let (lead, dn, trail) = split(&x.shape, n);
    let cols = lead * trail;
    let matrix = if n == 0 {
        Matrix::from_column_slice(dn, cols, &x.data)
    } else {
        // column j = l + lead * r holds data[l + i * lead + r * lead * dn]
        let mut m = Matrix::zeros(dn, cols);
        let out = m.as_mut_slice();
        for r in 0..trail {
            let block = &x.data[r * lead * dn..(r + 1) * lead * dn];
            for i in 0..dn {
                let src = &block[i * lead..(i + 1) * lead];
                for (l, &v) in src.iter().enumerate() {
                    out[(l + lead * r) * dn + i] = v;
                }
            }
        }
        m
    };
    Ok(UnfoldedMatrix { mode: n, matrix })
}

/// Inverse of [`unfold`]: rebuilds a tensor of `shape` from its mode-`n` unfolding.
pub fn fold(m: &Matrix, n: usize, shape: &[usize]) -> Result<DenseTensor> {
    if n >= shape.len() {
        return Err(Error::arg(format!(
            "mode {n} out of range for an order-{} shape",
            shape.len()
        )));
    }
    if shape.contains(&0) {
        return Err(Error::arg("shape contains a zero dimension"));
    }
    let (lead, dn, trail) = split(shape, n);
    if m.nrows() != dn || m.ncols() != lead * trail {
        return Err(Error::arg(format!(
            "matrix is {}x{}, mode-{n} unfolding of {shape:?} is {dn}x{}",
            m.nrows(),
            m.ncols(),
            lead * trail
        )));
    }
    if n == 0 {
        return DenseTensor::new(shape.to_vec(), m.as_slice().to_vec());
    }
    let src = m.as_slice();
    let mut data = vec![0.0; lead * dn * trail];
    for r in 0..trail {
        let block = &mut data[r * lead * dn..(r + 1) * lead * dn];
        for i in 0..dn {
            for l in 0..lead {
                block[i * lead + l] = src[(l + lead * r) * dn + i];
            }
        }
    }
    DenseTensor::new(shape.to_vec(), data)
}

/// Mode-`n` product `X x_n U` with `U` of size `d x D_n`.
pub fn mode_product(x: &DenseTensor, u: &Matrix, n: usize) -> Result<DenseTensor> {
    x.check_mode(n)?;
    if u.ncols() != x.shape[n] {
        return Err(Error::arg(format!(
            "mode-{n} product needs a matrix with {} columns, got {}x{}",
            x.shape[n],
            u.nrows(),
            u.ncols()
        )));
    }
    if u.nrows() == 0 {
        return Err(Error::arg("mode product with an empty matrix"));
    }
    let (lead, dn, trail) = split(&x.shape, n);
    let d = u.nrows();
    let mut shape = x.shape.clone();
    shape[n] = d;
    if n == 0 {
        let xm = nalgebra::DMatrixView::from_slice(&x.data, dn, lead * trail);
        let y = u * xm;
        return DenseTensor::new(shape, y.as_slice().to_vec());
    }
    // Work slab by slab over the trailing index: each slab is a lead x dn
    // column-major matrix, and the product acts on its columns.
    let mut data = vec![0.0; lead * d * trail];
    let ut = u.transpose();
    for r in 0..trail {
        let slab = nalgebra::DMatrixView::from_slice(&x.data[r * lead * dn..(r + 1) * lead * dn], lead, dn);
        let out = slab * &ut;
        data[r * lead * d..(r + 1) * lead * d].copy_from_slice(out.as_slice());
    }
    DenseTensor::new(shape, data)
}

/// Applies one matrix per distinct mode.
///
/// Products on distinct modes commute; they are evaluated in the order that
/// shrinks the tensor fastest, so the first (dominant-cost) product is as
/// cheap as the set allows.
pub fn multi_mode_product(x: &DenseTensor, factors: &[(usize, &Matrix)]) -> Result<DenseTensor> {
    let mut seen = vec![false; x.order()];
    for &(n, _) in factors {
        x.check_mode(n)?;
        if seen[n] {
            return Err(Error::arg(format!("mode {n} appears more than once")));
        }
        seen[n] = true;
    }
    let mut order: Vec<usize> = (0..factors.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = factors[a].1.nrows() as f64 / factors[a].1.ncols().max(1) as f64;
        let rb = factors[b].1.nrows() as f64 / factors[b].1.ncols().max(1) as f64;
        ra.total_cmp(&rb).then(factors[a].0.cmp(&factors[b].0))
    });
    let mut iter = order.into_iter();
    let Some(first) = iter.next() else {
        return Ok(x.clone());
    };
    let mut y = mode_product(x, factors[first].1, factors[first].0)?;
    for k in iter {
        y = mode_product(&y, factors[k].1, factors[k].0)?;
    }
    Ok(y)
}

/// Applies the given matrices in exactly the listed order.
pub fn sequential_mode_product(x: &DenseTensor, factors: &[(usize, &Matrix)]) -> Result<DenseTensor> {
    let mut y = x.clone();
    for &(n, u) in factors {
        y = mode_product(&y, u, n)?;
    }
    Ok(y)
}

pub fn frobenius_norm(x: &DenseTensor) -> f64 {
    x.frobenius_norm()
}

pub fn l1_norm(x: &DenseTensor) -> f64 {
    x.l1_norm()
}
