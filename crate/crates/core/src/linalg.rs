//! Matrix kernels: thin SVD with a fixed sign convention, dominant left
//! subspaces, the Procrustes map, entrywise signs and the nuclear norm.
//!
//! SVD output is made deterministic: singular values are sorted descending,
//! directions belonging to singular values below `RANK_TOL * sigma_max` are
//! replaced by a canonical orthonormal completion, and each left singular
//! vector is flipped so its largest-magnitude entry (lowest row on ties) is
//! nonnegative, with the paired right vector flipped to compensate.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Relative threshold under which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Tolerance on `max |U^T U - I|` for a matrix to count as orthonormal.
pub const ORTHO_TOL: f64 = 1e-10;

/// A `D x d` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelBasis(Matrix);

impl StiefelBasis {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.ncols() > m.nrows() {
            return Err(Error::arg(format!(
                "a {}x{} matrix cannot have orthonormal columns",
                m.nrows(),
                m.ncols()
            )));
        }
        let dev = orthonormality_error(&m);
        if dev.is_nan() || dev > ORTHO_TOL {
            return Err(Error::arg(format!("columns are not orthonormal (max deviation {dev:.3e})")));
        }
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: Matrix) -> Self {
        debug_assert!(orthonormality_error(&m) <= 1e-8);
        Self(m)
    }

    /// The first `d` canonical basis vectors of `R^D`.
    pub fn identity(dim: usize, d: usize) -> Result<Self> {
        if d > dim {
            return Err(Error::arg(format!("rank {d} exceeds dimension {dim}")));
        }
        Ok(Self(Matrix::identity(dim, d)))
    }

    /// Orthonormalized i.i.d. Gaussian matrix (Haar distributed).
    pub fn random<R: Rng + ?Sized>(dim: usize, d: usize, rng: &mut R) -> Result<Self> {
        if d > dim || d == 0 {
            return Err(Error::arg(format!("cannot draw a {dim}x{d} orthonormal basis")));
        }
        let g = Matrix::from_fn(dim, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q();
        for k in 0..d {
            if r[(k, k)] < 0.0 {
                q.column_mut(k).neg_mut();
            }
        }
        Ok(Self::new_unchecked(complete_columns(q, d)))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `(D, d)`
    pub fn dims(&self) -> (usize, usize) {
        self.0.shape()
    }
}

/// `max |U^T U - I|`.
pub fn orthonormality_error(u: &Matrix) -> f64 {
    let g = u.tr_mul(u);
    let mut dev: f64 = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - target).abs());
        }
    }
    dev
}

/// Thin SVD `A = W diag(S) Q^T` with `r = min(rows, cols)` components.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub w: Matrix,
    pub s: Vec<f64>,
    pub q: Matrix,
    /// Number of singular values above `RANK_TOL * sigma_max`.
    pub rank: usize,
}

impl ThinSvd {
    pub fn reconstruct(&self) -> Matrix {
        let mut ws = self.w.clone();
        for (k, s) in self.s.iter().enumerate() {
            ws.column_mut(k).scale_mut(*s);
        }
        ws * self.q.transpose()
    }
}

fn check_finite(a: &Matrix) -> Result<()> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::arg("matrix has non-finite entries"));
    }
    Ok(())
}

pub fn thin_svd(a: &Matrix) -> Result<ThinSvd> {
    check_finite(a)?;
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::arg("SVD of an empty matrix"));
    }
    let r = rows.min(cols);
    let fa = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let svd = fa
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (fu, fs, fv) = (svd.U(), svd.S(), svd.V());
    let sv: Vec<f64> = (0..r).map(|k| fs[k]).collect();

    let mut perm: Vec<usize> = (0..r).collect();
    perm.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));
    let s: Vec<f64> = perm.iter().map(|&k| sv[k].max(0.0)).collect();
    let smax = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().take_while(|&&x| x > RANK_TOL * smax && x > 0.0).count();

    let mut w = Matrix::zeros(rows, r);
    let mut q = Matrix::zeros(cols, r);
    for (dst, &src) in perm.iter().take(rank).enumerate() {
        for i in 0..rows {
            w[(i, dst)] = fu[(i, src)];
        }
        for j in 0..cols {
            q[(j, dst)] = fv[(j, src)];
        }
    }
    let mut w = complete_columns(w, rank);
    let mut q = complete_columns(q, rank);
    let mut s = s;
    for x in s.iter_mut().skip(rank) {
        *x = 0.0;
    }
    apply_sign_convention(&mut w, &mut q);
    Ok(ThinSvd { w, s, q, rank })
}

/// Flips column pairs so the largest-magnitude entry of each `w` column is nonnegative.
fn apply_sign_convention(w: &mut Matrix, q: &mut Matrix) {
    for k in 0..w.ncols() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, v) in w.column(k).iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if w[(best, k)] < 0.0 {
            w.column_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
    }
}

/// Keeps the first `keep` (orthonormal) columns of `m` and fills the rest with
/// canonical basis vectors orthogonalized against everything before them.
fn complete_columns(mut m: Matrix, keep: usize) -> Matrix {
    let (rows, cols) = m.shape();
    let mut filled = keep;
    let mut e = 0;
    while filled < cols && e < rows {
        let mut v = nalgebra::DVector::<f64>::zeros(rows);
        v[e] = 1.0;
        e += 1;
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for k in 0..filled {
                let c = m.column(k);
                let proj = c.dot(&v);
                v.axpy(-proj, &c, 1.0);
            }
        }
        let nrm = v.norm();
        if nrm > 1e-6 {
            m.set_column(filled, &(v / nrm));
            filled += 1;
        }
    }
    m
}

/// The `d` dominant left singular vectors of `a`, padded with a canonical
/// orthonormal completion when `rank(a) < d`.
pub fn top_d_left_basis(a: &Matrix, d: usize) -> Result<StiefelBasis> {
    if d == 0 {
        return Err(Error::arg("rank must be at least 1"));
    }
    if d > a.nrows() {
        return Err(Error::arg(format!("rank {d} exceeds the {} rows", a.nrows())));
    }
    let left = dominant_left_vectors(a)?;
    let mut u = Matrix::zeros(a.nrows(), d);
    let take = left.rank.min(d);
    for k in 0..take {
        u.set_column(k, &left.w.column(k));
    }
    Ok(StiefelBasis::new_unchecked(complete_columns(u, take)))
}

/// Left singular structure of `a`. Very wide inputs are first reduced with a
/// QR factorization of `a^T` (`a = R^T Q^T`), which leaves the left singular
/// vectors unchanged.
fn dominant_left_vectors(a: &Matrix) -> Result<ThinSvd> {
    if a.ncols() > 2 * a.nrows() {
        check_finite(a)?;
        let r = a.transpose().qr().r();
        thin_svd(&r.transpose())
    } else {
        thin_svd(a)
    }
}

/// Procrustes map `Phi(A) = W Q^T`, the maximizer of `Tr(U^T A)` over
/// orthonormal `U`.
pub fn procrustes_phi(a: &Matrix) -> Result<StiefelBasis> {
    procrustes_phi_flagged(a).map(|(u, _)| u)
}

/// [`procrustes_phi`] plus a flag telling whether `A` was rank deficient, in
/// which case the null directions come from the fixed completion.
pub fn procrustes_phi_flagged(a: &Matrix) -> Result<(StiefelBasis, bool)> {
    if a.ncols() > a.nrows() {
        return Err(Error::arg(format!(
            "Procrustes map needs a tall matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let svd = thin_svd(a)?;
    let deficient = svd.rank < a.ncols();
    Ok((StiefelBasis::new_unchecked(&svd.w * svd.q.transpose()), deficient))
}

/// Entrywise sign with `sgn(0) = +1`.
pub fn sign_matrix(a: &Matrix) -> Matrix {
    a.map(sgn)
}

#[inline]
pub fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn nuclear_norm(a: &Matrix) -> Result<f64> {
    check_finite(a)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let fa = faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let s = fa
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    Ok(s.iter().sum())
}

/// Sum of absolute entries.
pub fn l1_norm(a: &Matrix) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// `||U^T A||_1`
pub fn projected_l1(u: &Matrix, a: &Matrix) -> f64 {
    l1_norm(&u.tr_mul(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn identity_singular_values() {
        let svd = thin_svd(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(svd.s, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_svd_follows_sign_convention() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0]));
        let svd = thin_svd(&a).unwrap();
        assert_eq!(svd.s, vec![3.0, 2.0]);
        assert!((svd.w.clone() - Matrix::identity(2, 2)).abs().max() < 1e-15);
        assert!((svd.q.clone() - Matrix::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn sign_convention_holds_on_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_matrix(6, 4, &mut rng);
        let svd = thin_svd(&a).unwrap();
        for k in 0..svd.w.ncols() {
            let col = svd.w.column(k);
            let imax = col.iamax();
            let first = col.iter().position(|v| v.abs() == col[imax].abs()).unwrap();
            assert!(col[first] >= 0.0);
        }
        assert!(svd.s.windows(2).all(|p| p[0] >= p[1]));
        let ss: f64 = svd.s.iter().map(|s| s * s).sum();
        assert!((ss - a.norm_squared()).abs() < 1e-9 * a.norm_squared());
    }

    #[test]
    fn wide_and_tall_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (r, c) in [(5, 3), (3, 5), (1, 7), (7, 1), (4, 4)] {
            let a = rand_matrix(r, c, &mut rng);
            let svd = thin_svd(&a).unwrap();
            assert!((svd.reconstruct() - &a).norm() <= 1e-9 * a.norm());
            assert!(orthonormality_error(&svd.w) < 1e-10);
            assert!(orthonormality_error(&svd.q) < 1e-10);
        }
    }

    #[test]
    fn exactly_rank_one_columns() {
        let a = [-1.1135046962371593, -0.7457703777268585, -2.0486549263608254, -0.7425784994708489];
        let m = Matrix::from_fn(4, 2, |i, _| a[i]);
        let svd = thin_svd(&m).unwrap();
        assert_eq!(svd.rank, 1);
        assert!((svd.reconstruct() - &m).norm() < 1e-12);
        let col = nalgebra::DVector::from_column_slice(&a);
        assert!((svd.s[0] - 2f64.sqrt() * col.norm()).abs() < 1e-12);
        let u = procrustes_phi(&m).unwrap();
        assert!((u.matrix().tr_mul(&m).trace() - svd.s[0]).abs() < 1e-12);
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut a = Matrix::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(thin_svd(&a), Err(Error::Argument(_))));
    }

    #[test]
    fn top_left_basis_diagonal() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let u = top_d_left_basis(&a, 2).unwrap();
        assert!((u.matrix() - Matrix::identity(3, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn top_left_basis_single_row() {
        let mut a = Matrix::zeros(3, 4);
        a.row_mut(1).copy_from_slice(&[1.0, -2.0, 0.5, 3.0]);
        let u = top_d_left_basis(&a, 1).unwrap();
        assert!((u.matrix()[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn top_left_basis_pads_rank_deficient_input() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let u = top_d_left_basis(&a, 3).unwrap();
        assert!(orthonormality_error(u.matrix()) < 1e-12);
        assert!(top_d_left_basis(&a, 4).is_err());
    }

    #[test]
    fn top_left_basis_captures_top_energy_on_wide_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = rand_matrix(5, 40, &mut rng);
        let full = thin_svd(&a).unwrap();
        for d in 1..=5 {
            let u = top_d_left_basis(&a, d).unwrap();
            let captured = u.matrix().tr_mul(&a).norm_squared();
            let expected: f64 = full.s[..d].iter().map(|s| s * s).sum();
            assert!((captured - expected).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn phi_of_orthonormal_is_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = StiefelBasis::random(5, 3, &mut rng).unwrap();
        let phi = procrustes_phi(u.matrix()).unwrap();
        assert!((phi.matrix() - u.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn phi_of_positive_diagonal_is_identity() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        let phi = procrustes_phi(&a).unwrap();
        assert!((phi.matrix() - Matrix::identity(2, 2)).abs().max() < 1e-14);
    }

    #[test]
    fn phi_maximizes_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = rand_matrix(6, 3, &mut rng);
        let phi = procrustes_phi(&a).unwrap();
        let best = phi.matrix().tr_mul(&a).trace();
        for _ in 0..100 {
            let u = StiefelBasis::random(6, 3, &mut rng).unwrap();
            assert!(u.matrix().tr_mul(&a).trace() <= best + 1e-12);
        }
    }

    #[test]
    fn phi_rank_deficient_is_flagged_and_orthonormal() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let (u, flag) = procrustes_phi_flagged(&a).unwrap();
        assert!(flag);
        assert!(orthonormality_error(u.matrix()) < 1e-12);
        let (u0, flag0) = procrustes_phi_flagged(&Matrix::zeros(4, 2)).unwrap();
        assert!(flag0);
        assert!(orthonormality_error(u0.matrix()) < 1e-12);
    }

    #[test]
    fn signs() {
        assert_eq!(sign_matrix(&Matrix::zeros(1, 1))[(0, 0)], 1.0);
        let s = sign_matrix(&Matrix::from_row_slice(1, 2, &[-2.0, 5.0]));
        assert_eq!(s.as_slice(), &[-1.0, 1.0]);
        assert_eq!(sign_matrix(&s), s);
    }

    #[test]
    fn nuclear_norms() {
        assert!((nuclear_norm(&Matrix::identity(4, 4)).unwrap() - 4.0).abs() < 1e-12);
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0]));
        assert!((nuclear_norm(&a).unwrap() - 5.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = rand_matrix(4, 6, &mut rng);
        assert!(nuclear_norm(&b).unwrap() >= b.norm());
    }

    #[test]
    fn stiefel_rejects_non_orthonormal() {
        assert!(StiefelBasis::new(Matrix::from_element(2, 1, 1.0)).is_err());
        assert!(StiefelBasis::new(Matrix::identity(2, 3)).is_err());
        assert!(StiefelBasis::new(Matrix::identity(3, 2)).is_ok());
    }
}
