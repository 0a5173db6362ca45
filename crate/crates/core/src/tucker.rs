//! Tucker decomposers.
//!
//! All four solvers return one orthonormal basis `U_n` (`D_n x d_n`) per mode.
//! HOSVD and L1-HOSVD treat modes independently; HOOI and L1-HOOI sweep the
//! modes in increasing order, re-fitting each basis to the tensor projected
//! onto the current bases of every other mode.
//!
//! The L2 metric is `||X x_n U_n^T||_F^2` and the L1 metric is
//! `||X x_n U_n^T||_1` (both products over all modes).

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::l1pca::{self, L1PcaConfig, L1PcaResult};
use crate::linalg::{self, Matrix, StiefelBasis};
use crate::tensor::{self, DenseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Solver {
    #[serde(rename = "hosvd")]
    Hosvd,
    #[serde(rename = "hooi")]
    Hooi,
    #[serde(rename = "l1-hosvd")]
    L1Hosvd,
    #[serde(rename = "l1-hooi")]
    L1Hooi,
}

impl Solver {
    pub const ALL: [Solver; 4] = [Solver::Hosvd, Solver::Hooi, Solver::L1Hosvd, Solver::L1Hooi];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Hosvd => "hosvd",
            Solver::Hooi => "hooi",
            Solver::L1Hosvd => "l1-hosvd",
            Solver::L1Hooi => "l1-hooi",
        }
    }

    /// Runs the solver. Non-iterative solvers report a one-entry trace holding
    /// their final metric (L2 for HOSVD, L1 for L1-HOSVD).
    pub fn decompose(self, x: &DenseTensor, ranks: &[usize], cfg: &HooiConfig) -> Result<(TuckerModel, DecompTrace)> {
        match self {
            Solver::Hosvd => {
                let m = hosvd(x, ranks)?;
                let metric = tucker_metric_l2(x, &m.bases)?;
                Ok((m, DecompTrace::single(metric)))
            }
            Solver::Hooi => hooi(x, ranks, cfg),
            Solver::L1Hosvd => {
                let m = l1_hosvd(x, ranks, cfg)?;
                let metric = tucker_metric_l1(x, &m.bases)?;
                Ok((m, DecompTrace::single(metric)))
            }
            Solver::L1Hooi => l1_hooi(x, ranks, cfg),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown solver '{s}' (expected hosvd, hooi, l1-hosvd or l1-hooi)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HooiInit {
    /// HOSVD for HOOI, L1-HOSVD for L1-HOOI.
    #[default]
    Auto,
    L1Hosvd,
    Hosvd,
    /// Haar-random bases from the given seed.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HooiConfig {
    /// Outer stop threshold on the relative metric increase.
    pub tol: f64,
    pub max_outer_iters: usize,
    /// Settings of every inner L1-PCA solve. Its `init` field is ignored: the
    /// inner solver always warm-starts from the current basis.
    pub inner: L1PcaConfig,
    pub init: HooiInit,
    /// Keep the metric trace of every inner L1-PCA solve.
    pub record_inner: bool,
}

impl Default for HooiConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_outer_iters: 100,
            inner: L1PcaConfig::default(),
            init: HooiInit::Auto,
            record_inner: false,
        }
    }
}

impl HooiConfig {
    /// Same tolerance for the outer loop and the inner solver.
    pub fn with_tol(tol: f64) -> Self {
        let mut cfg = Self {
            tol,
            ..Self::default()
        };
        cfg.inner.tol = tol;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::arg(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::arg("outer iteration cap must be at least 1"));
        }
        self.inner.validate()
    }
}

/// Per-iteration record of an iterative decomposition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecompTrace {
    /// Metric of the initial bases, then the metric after every outer sweep.
    pub metric_per_outer_iter: Vec<f64>,
    /// For every sweep, the per-mode metric `||U_n^T A_n||` right after mode `n` was updated.
    pub mode_metrics: Vec<Vec<f64>>,
    /// Metric traces of the inner L1-PCA solves (only with `record_inner`).
    pub inner_traces: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl DecompTrace {
    fn single(metric: f64) -> Self {
        Self {
            metric_per_outer_iter: vec![metric],
            converged: true,
            ..Self::default()
        }
    }

    pub fn final_metric(&self) -> Option<f64> {
        self.metric_per_outer_iter.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuckerModel {
    pub bases: Vec<StiefelBasis>,
    pub ranks: Vec<usize>,
    /// `X x_n U_n^T`, present once [`TuckerModel::with_core`] has run.
    pub core: Option<DenseTensor>,
}

impl TuckerModel {
    pub fn new(bases: Vec<StiefelBasis>) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::arg("a Tucker model needs at least one basis"));
        }
        let ranks = bases.iter().map(|b| b.dims().1).collect();
        Ok(Self {
            bases,
            ranks,
            core: None,
        })
    }

    /// The `(D_1, ..., D_N)` the bases act on.
    pub fn shape(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.dims().0).collect()
    }

    /// Materializes the core of `x`.
    pub fn with_core(mut self, x: &DenseTensor) -> Result<Self> {
        self.core = Some(core_tensor(x, &self.bases)?);
        Ok(self)
    }

    /// `G x_n U_n`, which requires a materialized core.
    pub fn expand_core(&self) -> Result<DenseTensor> {
        let core = self
            .core
            .as_ref()
            .ok_or_else(|| Error::arg("model has no core tensor"))?;
        let factors: Vec<(usize, &Matrix)> = self.bases.iter().enumerate().map(|(n, b)| (n, b.matrix())).collect();
        tensor::multi_mode_product(core, &factors)
    }
}

fn check_bases(x: &DenseTensor, bases: &[StiefelBasis]) -> Result<()> {
    if bases.len() != x.order() {
        return Err(Error::arg(format!(
            "{} bases for an order-{} tensor",
            bases.len(),
            x.order()
        )));
    }
    for (n, (b, &dn)) in bases.iter().zip(x.shape()).enumerate() {
        if b.dims().0 != dn {
            return Err(Error::arg(format!(
                "mode-{n} basis has {} rows, tensor mode has length {dn}",
                b.dims().0
            )));
        }
    }
    Ok(())
}

pub fn validate_ranks(x: &DenseTensor, ranks: &[usize]) -> Result<()> {
    if ranks.len() != x.order() {
        return Err(Error::arg(format!(
            "{} ranks given for an order-{} tensor",
            ranks.len(),
            x.order()
        )));
    }
    for (n, (&d, &dn)) in ranks.iter().zip(x.shape()).enumerate() {
        if d == 0 || d > dn {
            return Err(Error::arg(format!("rank {d} for mode {n} must lie in 1..={dn}")));
        }
    }
    Ok(())
}

/// `X x_n U_n^T` over all modes.
pub fn core_tensor(x: &DenseTensor, bases: &[StiefelBasis]) -> Result<DenseTensor> {
    check_bases(x, bases)?;
    let ts: Vec<Matrix> = bases.iter().map(|b| b.matrix().transpose()).collect();
    let factors: Vec<(usize, &Matrix)> = ts.iter().enumerate().collect();
    tensor::multi_mode_product(x, &factors)
}

/// `[X x_{m != n} U_m^T]_(n)`.
pub fn partial_projection(x: &DenseTensor, bases: &[StiefelBasis], n: usize) -> Result<Matrix> {
    check_bases(x, bases)?;
    let ts: Vec<(usize, Matrix)> = bases
        .iter()
        .enumerate()
        .filter(|(m, _)| *m != n)
        .map(|(m, b)| (m, b.matrix().transpose()))
        .collect();
    let factors: Vec<(usize, &Matrix)> = ts.iter().map(|(m, t)| (*m, t)).collect();
    let y = tensor::multi_mode_product(x, &factors)?;
    Ok(tensor::unfold(&y, n)?.matrix)
}

pub fn tucker_metric_l2(x: &DenseTensor, bases: &[StiefelBasis]) -> Result<f64> {
    Ok(core_tensor(x, bases)?.frobenius_norm().powi(2))
}

pub fn tucker_metric_l1(x: &DenseTensor, bases: &[StiefelBasis]) -> Result<f64> {
    Ok(core_tensor(x, bases)?.l1_norm())
}

#[cfg(feature = "parallel")]
fn per_mode<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn per_mode<T>(n: usize, f: impl Fn(usize) -> Result<T>) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

pub fn hosvd(x: &DenseTensor, ranks: &[usize]) -> Result<TuckerModel> {
    validate_ranks(x, ranks)?;
    let bases = per_mode(x.order(), |n| {
        let a = tensor::unfold(x, n)?.matrix;
        linalg::top_d_left_basis(&a, ranks[n])
    })?;
    TuckerModel::new(bases)
}

/// Per-mode L1-PCA runs of L1-HOSVD, each warm-started from the HOSVD basis.
pub fn l1_hosvd_modes(x: &DenseTensor, ranks: &[usize], cfg: &HooiConfig) -> Result<Vec<L1PcaResult>> {
    validate_ranks(x, ranks)?;
    cfg.validate()?;
    per_mode(x.order(), |n| {
        let a = tensor::unfold(x, n)?.matrix;
        let u0 = linalg::top_d_left_basis(&a, ranks[n])?;
        l1pca::l1pca_ao(&a, &u0, &cfg.inner)
    })
}

pub fn l1_hosvd(x: &DenseTensor, ranks: &[usize], cfg: &HooiConfig) -> Result<TuckerModel> {
    let runs = l1_hosvd_modes(x, ranks, cfg)?;
    TuckerModel::new(runs.into_iter().map(|r| r.basis).collect())
}

fn initial_bases(x: &DenseTensor, ranks: &[usize], cfg: &HooiConfig, l1: bool) -> Result<Vec<StiefelBasis>> {
    let model = match cfg.init {
        HooiInit::Auto if l1 => l1_hosvd(x, ranks, cfg)?,
        HooiInit::Auto | HooiInit::Hosvd => hosvd(x, ranks)?,
        HooiInit::L1Hosvd => l1_hosvd(x, ranks, cfg)?,
        HooiInit::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bases = x
                .shape()
                .iter()
                .zip(ranks)
                .map(|(&dn, &d)| StiefelBasis::random(dn, d, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            TuckerModel::new(bases)?
        }
    };
    Ok(model.bases)
}

/// Relative increase test shared by both iterative solvers. A zero previous
/// metric means there is nothing left to improve.
fn has_converged(prev: f64, next: f64, tol: f64) -> bool {
    if prev <= 0.0 {
        return true;
    }
    (next - prev) / prev < tol
}

/// Classical HOOI: each mode basis becomes the dominant left subspace of the
/// tensor projected onto the other modes' current bases.
pub fn hooi(x: &DenseTensor, ranks: &[usize], cfg: &HooiConfig) -> Result<(TuckerModel, DecompTrace)> {
    validate_ranks(x, ranks)?;
    cfg.validate()?;
    let mut bases = initial_bases(x, ranks, cfg, false)?;
    let mut metric = tucker_metric_l2(x, &bases)?;
    let mut trace = DecompTrace {
        metric_per_outer_iter: vec![metric],
        ..DecompTrace::default()
    };
    if metric <= 0.0 {
        trace.converged = true;
        return Ok((TuckerModel::new(bases)?, trace));
    }
    for _ in 0..cfg.max_outer_iters {
        trace.iterations += 1;
        let mut sweep = Vec::with_capacity(x.order());
        for n in 0..x.order() {
            let a = partial_projection(x, &bases, n)?;
            bases[n] = linalg::top_d_left_basis(&a, ranks[n])?;
            sweep.push(bases[n].matrix().tr_mul(&a).norm_squared());
        }
        let next = *sweep.last().expect("at least one mode");
        trace.mode_metrics.push(sweep);
        trace.metric_per_outer_iter.push(next);
        let done = has_converged(metric, next, cfg.tol);
        metric = next;
        if done {
            trace.converged = true;
            break;
        }
    }
    Ok((TuckerModel::new(bases)?, trace))
}

/// L1-HOOI: sweeps the modes in increasing order, replacing each basis by the
/// L1-PCA (warm-started at the current basis) of the partially projected
/// unfolding built from the freshest bases of all other modes.
pub fn l1_hooi(x: &DenseTensor, ranks: &[usize], cfg: &HooiConfig) -> Result<(TuckerModel, DecompTrace)> {
    validate_ranks(x, ranks)?;
    cfg.validate()?;
    let mut bases = initial_bases(x, ranks, cfg, true)?;
    let mut metric = tucker_metric_l1(x, &bases)?;
    let mut trace = DecompTrace {
        metric_per_outer_iter: vec![metric],
        ..DecompTrace::default()
    };
    if metric <= 0.0 {
        trace.converged = true;
        return Ok((TuckerModel::new(bases)?, trace));
    }
    for _ in 0..cfg.max_outer_iters {
        trace.iterations += 1;
        let mut sweep = Vec::with_capacity(x.order());
        for n in 0..x.order() {
            let a = partial_projection(x, &bases, n)?;
            let run = l1pca::l1pca_ao(&a, &bases[n], &cfg.inner)?;
            sweep.push(run.metric);
            if cfg.record_inner {
                trace.inner_traces.push(run.trace);
            }
            bases[n] = run.basis;
        }
        let next = *sweep.last().expect("at least one mode");
        trace.mode_metrics.push(sweep);
        trace.metric_per_outer_iter.push(next);
        let done = has_converged(metric, next, cfg.tol);
        metric = next;
        if done {
            trace.converged = true;
            break;
        }
    }
    Ok((TuckerModel::new(bases)?, trace))
}

/// `X x_n U_n U_n^T`, evaluated as the core followed by its expansion.
pub fn reconstruct(x: &DenseTensor, model: &TuckerModel) -> Result<DenseTensor> {
    let core = core_tensor(x, &model.bases)?;
    let factors: Vec<(usize, &Matrix)> = model.bases.iter().enumerate().map(|(n, b)| (n, b.matrix())).collect();
    tensor::multi_mode_product(&core, &factors)
}

/// `X x_n (U_n U_n^T)` with the projectors applied directly.
pub fn reconstruct_with_projectors(x: &DenseTensor, model: &TuckerModel) -> Result<DenseTensor> {
    check_bases(x, &model.bases)?;
    let projectors: Vec<Matrix> = model
        .bases
        .iter()
        .map(|b| b.matrix() * b.matrix().transpose())
        .collect();
    let factors: Vec<(usize, &Matrix)> = projectors.iter().enumerate().collect();
    tensor::sequential_mode_product(x, &factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape, |_| rng.sample(StandardNormal))
    }

    #[test]
    fn identity_bases_give_plain_norms() {
        let x = random_tensor(&[3, 4, 2], 1);
        let bases: Vec<StiefelBasis> = x.shape().iter().map(|&d| StiefelBasis::identity(d, d).unwrap()).collect();
        let l2 = tucker_metric_l2(&x, &bases).unwrap();
        let l1 = tucker_metric_l1(&x, &bases).unwrap();
        assert!((l2 - x.frobenius_norm().powi(2)).abs() < 1e-12);
        assert!((l1 - x.l1_norm()).abs() < 1e-12);
    }

    #[test]
    fn matrix_case_hosvd_gives_singular_vectors() {
        let x = random_tensor(&[5, 4], 2);
        let m = hosvd(&x, &[2, 2]).unwrap();
        let xm = tensor::unfold(&x, 0).unwrap().matrix;
        let svd = linalg::thin_svd(&xm).unwrap();
        for k in 0..2 {
            let left = m.bases[0].matrix().column(k).dot(&svd.w.column(k)).abs();
            let right = m.bases[1].matrix().column(k).dot(&svd.q.column(k)).abs();
            assert!((left - 1.0).abs() < 1e-10);
            assert!((right - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn superdiagonal_hosvd_spans_leading_axes() {
        let x = DenseTensor::from_fn(&[3, 3, 3], |i| {
            if i[0] == i[1] && i[1] == i[2] {
                3.0 - i[0] as f64
            } else {
                0.0
            }
        });
        let m = hosvd(&x, &[2, 2, 2]).unwrap();
        for b in &m.bases {
            let u = b.matrix();
            assert!(u.row(2).norm() < 1e-12);
            assert!((u.rows(0, 2).into_owned().determinant().abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let x = random_tensor(&[3, 4, 2], 3);
        let m = hosvd(&x, &[3, 4, 2]).unwrap();
        let xh = reconstruct(&x, &m).unwrap();
        assert!(x.sub(&xh).unwrap().frobenius_norm() < 1e-12 * x.frobenius_norm());
    }

    #[test]
    fn rank_validation() {
        let x = random_tensor(&[3, 4], 4);
        assert!(hosvd(&x, &[4, 1]).is_err());
        assert!(hosvd(&x, &[0, 1]).is_err());
        assert!(hosvd(&x, &[1]).is_err());
        assert!(l1_hooi(&x, &[3, 5], &HooiConfig::default()).is_err());
    }

    #[test]
    fn zero_tensor_converges_immediately() {
        let x = DenseTensor::zeros(&[3, 3, 3]);
        let (_, t) = l1_hooi(&x, &[2, 2, 2], &HooiConfig::default()).unwrap();
        assert!(t.converged);
        assert_eq!(t.iterations, 0);
        let (_, t) = hooi(&x, &[2, 2, 2], &HooiConfig::default()).unwrap();
        assert!(t.converged);
    }

    #[test]
    fn degenerate_trailing_modes_reduce_to_pca() {
        let x = random_tensor(&[6, 1, 1], 5);
        let (m, _) = hooi(&x, &[1, 1, 1], &HooiConfig::default()).unwrap();
        let v = nalgebra::DVector::from_column_slice(x.data());
        let u = m.bases[0].matrix().column(0);
        assert!((u.dot(&v).abs() - v.norm()).abs() < 1e-12);
    }

    #[test]
    fn solver_names_round_trip() {
        for s in Solver::ALL {
            assert_eq!(s.name().parse::<Solver>().unwrap(), s);
        }
        assert!("svd".parse::<Solver>().is_err());
    }

    #[test]
    fn random_init_is_seeded() {
        let x = random_tensor(&[4, 4, 4], 6);
        let cfg = HooiConfig {
            init: HooiInit::Random(9),
            ..HooiConfig::default()
        };
        let (a, ta) = l1_hooi(&x, &[2, 2, 2], &cfg).unwrap();
        let (b, tb) = l1_hooi(&x, &[2, 2, 2], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }
}
