//! L1-norm principal component analysis: maximize `||U^T X||_1` over
//! orthonormal `U`.
//!
//! [`l1pca_ao`] is the alternating fixed-point iteration
//! `U_t = Phi(X sgn(X^T U_{t-1}))`, whose metric never decreases.
//! [`l1pca_exact`] solves small instances exactly by exhausting all sign
//! matrices `B` and keeping the one with the largest nuclear norm `||X B||_*`;
//! `Phi(X B)` is then an optimal basis and `||X^T U||_1 = ||X B||_*`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, StiefelBasis};

/// Largest `D_2 * d` the exhaustive solver accepts.
pub const EXACT_BUDGET: usize = 24;

/// Hard cap on the default iteration budget.
pub const MAX_ITERS_CAP: usize = 1000;

/// Absolute improvement threshold used while the metric is still zero.
pub const ZERO_METRIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum L1PcaInit {
    /// Start from the dominant left singular vectors.
    #[default]
    SvdInit,
    GivenBasis(StiefelBasis),
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1PcaConfig {
    /// Stop once the relative metric increase falls below this.
    pub tol: f64,
    /// `None` uses `min(100 * D_1, 1000)`.
    pub max_iters: Option<usize>,
    pub init: L1PcaInit,
}

impl Default for L1PcaConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: None,
            init: L1PcaInit::SvdInit,
        }
    }
}

impl L1PcaConfig {
    pub fn iteration_cap(&self, rows: usize) -> usize {
        self.max_iters.unwrap_or_else(|| (100 * rows).clamp(1, MAX_ITERS_CAP))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::arg(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iters == Some(0) {
            return Err(Error::arg("iteration cap must be at least 1"));
        }
        Ok(())
    }
}

/// One alternating step, recorded so the monotonicity chain can be audited:
/// `start = Tr(U_{t-1}^T X B_t) <= Tr(U_t^T X B_t) <= end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoStep {
    /// `||U_{t-1}^T X||_1`
    pub start: f64,
    /// `Tr(U_{t-1}^T X B_t)`
    pub bridge_prev: f64,
    /// `Tr(U_t^T X B_t)`
    pub bridge_new: f64,
    /// `||U_t^T X||_1`
    pub end: f64,
}

#[derive(Debug, Clone)]
pub struct L1PcaResult {
    pub basis: StiefelBasis,
    /// `||U^T X||_1` of the returned basis.
    pub metric: f64,
    /// Metric of the initial basis followed by the metric after every step.
    pub trace: Vec<f64>,
    pub steps: Vec<AoStep>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when some `Phi(X B)` call met a rank-deficient argument.
    pub rank_deficient: bool,
}

fn check_dims(x: &Matrix, d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::arg("rank must be at least 1"));
    }
    if d > x.nrows() {
        return Err(Error::arg(format!("rank {d} exceeds the {} rows of the data", x.nrows())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("data has non-finite entries"));
    }
    Ok(())
}

/// Alternating-optimization L1-PCA started from `u0`.
pub fn l1pca_ao(x: &Matrix, u0: &StiefelBasis, cfg: &L1PcaConfig) -> Result<L1PcaResult> {
    cfg.validate()?;
    let (rows, d) = u0.dims();
    if rows != x.nrows() {
        return Err(Error::arg(format!(
            "initial basis has {rows} rows, data has {}",
            x.nrows()
        )));
    }
    check_dims(x, d)?;
    let dev = linalg::orthonormality_error(u0.matrix());
    if dev > linalg::ORTHO_TOL {
        return Err(Error::arg(format!("initial basis is not orthonormal ({dev:.3e})")));
    }

    let mut u = u0.clone();
    let mut metric = linalg::projected_l1(u.matrix(), x);
    let mut trace = vec![metric];
    let mut steps = Vec::new();
    if x.iter().all(|&v| v == 0.0) {
        return Ok(L1PcaResult {
            basis: u,
            metric: 0.0,
            trace,
            steps,
            iterations: 0,
            converged: true,
            rank_deficient: false,
        });
    }

    let cap = cfg.iteration_cap(rows);
    let mut converged = false;
    let mut rank_deficient = false;
    let mut iterations = 0;
    while iterations < cap {
        iterations += 1;
        let b = linalg::sign_matrix(&x.tr_mul(u.matrix()));
        let xb = x * &b;
        let bridge_prev = u.matrix().tr_mul(&xb).trace();
        let (next, deficient) = linalg::procrustes_phi_flagged(&xb)?;
        rank_deficient |= deficient;
        let bridge_new = next.matrix().tr_mul(&xb).trace();
        let next_metric = linalg::projected_l1(next.matrix(), x);
        steps.push(AoStep {
            start: metric,
            bridge_prev,
            bridge_new,
            end: next_metric,
        });
        trace.push(next_metric);
        let gain = next_metric - metric;
        let done = if metric > 0.0 {
            gain / metric < cfg.tol
        } else {
            gain < ZERO_METRIC_TOL
        };
        u = next;
        metric = next_metric;
        if done {
            converged = true;
            break;
        }
    }

    Ok(L1PcaResult {
        basis: u,
        metric,
        trace,
        steps,
        iterations,
        converged,
        rank_deficient,
    })
}

/// L1-PCA with the initialization named in `cfg.init`.
pub fn l1pca(x: &Matrix, d: usize, cfg: &L1PcaConfig) -> Result<L1PcaResult> {
    check_dims(x, d)?;
    match &cfg.init {
        L1PcaInit::SvdInit => {
            let u0 = linalg::top_d_left_basis(x, d)?;
            l1pca_ao(x, &u0, cfg)
        }
        L1PcaInit::GivenBasis(u0) => {
            if u0.dims() != (x.nrows(), d) {
                return Err(Error::arg(format!(
                    "given basis is {:?}, expected ({}, {d})",
                    u0.dims(),
                    x.nrows()
                )));
            }
            l1pca_ao(x, u0, cfg)
        }
    }
}

/// Runs the alternating solver from the SVD initialization and from
/// `restarts` Haar-random bases drawn from `seed`, returning the best run
/// (earliest run on ties).
pub fn l1pca_ao_multistart(
    x: &Matrix,
    d: usize,
    restarts: usize,
    seed: u64,
    cfg: &L1PcaConfig,
) -> Result<L1PcaResult> {
    check_dims(x, d)?;
    let mut best = l1pca_ao(x, &linalg::top_d_left_basis(x, d)?, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        let u0 = StiefelBasis::random(x.nrows(), d, &mut rng)?;
        let run = l1pca_ao(x, &u0, cfg)?;
        if run.metric > best.metric {
            best = run;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct ExactL1Pca {
    pub result: L1PcaResult,
    /// The maximizing sign matrix `B_nuc` (`D_2 x d`).
    pub signs: Matrix,
    /// `||X B_nuc||_*`
    pub nuclear: f64,
}

/// Nuclear norm with closed forms for one and two columns.
fn nuclear_small(a: &Matrix) -> Result<f64> {
    match a.ncols() {
        1 => Ok(a.norm()),
        2 => {
            let c0 = a.column(0);
            let c1 = a.column(1);
            let g00 = c0.norm_squared();
            let g11 = c1.norm_squared();
            let g01 = c0.dot(&c1);
            let det = (g00 * g11 - g01 * g01).max(0.0);
            Ok((g00 + g11 + 2.0 * det.sqrt()).max(0.0).sqrt())
        }
        _ => linalg::nuclear_norm(a),
    }
}

/// Exact L1-PCA by exhaustive search over `B in {+1,-1}^{D_2 x d}`.
///
/// Sign patterns are visited in lexicographic order of their column-major
/// entry sequence with `+1` ordered before `-1`; among patterns whose nuclear
/// norms agree to a relative `1e-12`, the first one visited wins.
pub fn l1pca_exact(x: &Matrix, d: usize) -> Result<ExactL1Pca> {
    check_dims(x, d)?;
    let cols = x.ncols();
    let len = cols * d;
    if len > EXACT_BUDGET {
        return Err(Error::arg(format!(
            "exhaustive search over 2^{len} sign matrices exceeds the 2^{EXACT_BUDGET} budget"
        )));
    }
    let mut b = Matrix::zeros(cols, d);
    let mut best_b = Matrix::from_element(cols, d, 1.0);
    let mut best = f64::NEG_INFINITY;
    for k in 0u64..(1u64 << len) {
        for p in 0..len {
            let bit = (k >> (len - 1 - p)) & 1;
            b[(p % cols, p / cols)] = if bit == 1 { -1.0 } else { 1.0 };
        }
        let val = nuclear_small(&(x * &b))?;
        if k == 0 || val > best + 1e-12 * best.abs().max(1.0) {
            best = val;
            best_b.copy_from(&b);
        }
    }
    let xb = x * &best_b;
    let (basis, rank_deficient) = linalg::procrustes_phi_flagged(&xb)?;
    let metric = linalg::projected_l1(basis.matrix(), x);
    Ok(ExactL1Pca {
        result: L1PcaResult {
            basis,
            metric,
            trace: vec![metric],
            steps: Vec::new(),
            iterations: 1usize << len,
            converged: true,
            rank_deficient,
        },
        signs: best_b,
        nuclear: best,
    })
}
