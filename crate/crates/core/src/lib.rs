//! Outlier-resistant Tucker decomposition.
//!
//! The crate provides dense N-way tensors with a fixed unfolding convention,
//! the matrix kernels the solvers need, L1-norm principal component analysis
//! (an alternating-optimization solver and an exhaustive exact solver for small
//! problems), four Tucker decomposers (HOSVD, HOOI, L1-HOSVD, L1-HOOI) and an
//! experiment harness for corrupted-data reconstruction and classification
//! studies.
//!
//! ```
//! use l1tucker::{tensor::DenseTensor, tucker};
//!
//! let x = DenseTensor::from_fn(&[4, 3, 2], |idx| (idx[0] + 2 * idx[1] + 3 * idx[2]) as f64);
//! let model = tucker::l1_hosvd(&x, &[2, 2, 1], &Default::default()).unwrap();
//! let x_hat = tucker::reconstruct(&x, &model).unwrap();
//! assert_eq!(x_hat.shape(), x.shape());
//! ```

pub mod error;
pub mod harness;
pub mod io;
pub mod l1pca;
pub mod linalg;
pub mod tensor;
pub mod tucker;

pub use error::{Error, Result};
pub use linalg::{Matrix, StiefelBasis};
pub use tensor::DenseTensor;
pub use tucker::{DecompTrace, HooiConfig, HooiInit, Solver, TuckerModel};
