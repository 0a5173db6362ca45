#![allow(dead_code)]

use l1tucker::harness::recon::gaussian_tensor;
use l1tucker::harness::rng::{stream_rng, Stream};
use l1tucker::{DenseTensor, Matrix, StiefelBasis};

pub fn tensor(shape: &[usize], seed: u64) -> DenseTensor {
    gaussian_tensor(shape, seed)
}

pub fn matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let x = gaussian_tensor(&[rows, cols], seed);
    Matrix::from_column_slice(rows, cols, x.data())
}

pub fn basis(dim: usize, d: usize, seed: u64) -> StiefelBasis {
    StiefelBasis::random(dim, d, &mut stream_rng(seed, 0, Stream::Init)).unwrap()
}

pub fn random_bases(shape: &[usize], ranks: &[usize], seed: u64) -> Vec<StiefelBasis> {
    shape
        .iter()
        .zip(ranks)
        .enumerate()
        .map(|(n, (&dn, &d))| basis(dn, d, seed.wrapping_mul(31).wrapping_add(n as u64)))
        .collect()
}

pub fn max_abs_diff(a: &DenseTensor, b: &DenseTensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
