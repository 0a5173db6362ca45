//! Reconstruction of a Tucker-structured tensor from a copy corrupted by
//! dense Gaussian noise plus sparse high-variance outliers.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::map_trials;
use super::results::{mean_and_stderr, ResultRow, ResultTable};
use super::rng::{gaussian, stream_rng, Stream};
use crate::error::{Error, Result};
use crate::linalg::StiefelBasis;
use crate::tensor::DenseTensor;
use crate::tucker::{self, HooiConfig, Solver, TuckerModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconExperimentSpec {
    pub shape: Vec<usize>,
    pub ranks: Vec<usize>,
    /// Standard deviation of the i.i.d. Gaussian core entries.
    #[serde(default = "default_core_std")]
    pub core_std: f64,
    /// Standard deviation of the dense additive noise.
    #[serde(default = "default_awgn_std")]
    pub awgn_std: f64,
    /// Number of entries hit by an outlier.
    pub outlier_count: usize,
    pub outlier_std: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<Solver>,
}

fn default_core_std() -> f64 {
    3.0
}

fn default_awgn_std() -> f64 {
    1.0
}

fn default_solvers() -> Vec<Solver> {
    Solver::ALL.to_vec()
}

/// Outlier fraction of the large-scale configuration: 300 of 225,000 entries.
pub const LARGE_OUTLIER_RATIO: f64 = 300.0 / 225_000.0;

impl ReconExperimentSpec {
    /// Five-way 10x15x10x15x10 tensor, ranks (6,6,4,4,4), 300 outliers.
    pub fn large_scale() -> Self {
        Self {
            shape: vec![10, 15, 10, 15, 10],
            ranks: vec![6, 6, 4, 4, 4],
            core_std: 3.0,
            awgn_std: 1.0,
            outlier_count: 300,
            outlier_std: 28.0,
            trials: 1000,
            seed: 0,
            solvers: default_solvers(),
        }
    }

    /// Five-way 8x10x8x10x8 tensor, ranks (4,4,3,3,3), 50 trials, with the
    /// outlier count chosen to keep the large-scale outlier fraction.
    pub fn desk_scale() -> Self {
        let shape = vec![8, 10, 8, 10, 8];
        let p: usize = shape.iter().product();
        Self {
            outlier_count: (LARGE_OUTLIER_RATIO * p as f64).round() as usize,
            shape,
            ranks: vec![4, 4, 3, 3, 3],
            trials: 50,
            ..Self::large_scale()
        }
    }

    pub fn entries(&self) -> usize {
        self.shape.iter().product()
    }

    /// `N_o / P`
    pub fn corruption_ratio(&self) -> f64 {
        self.outlier_count as f64 / self.entries() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.is_empty() || self.shape.contains(&0) {
            return Err(Error::arg(format!("invalid shape {:?}", self.shape)));
        }
        if self.ranks.len() != self.shape.len() {
            return Err(Error::arg("ranks and shape differ in length"));
        }
        if self.ranks.iter().zip(&self.shape).any(|(&d, &dn)| d == 0 || d > dn) {
            return Err(Error::arg(format!("ranks {:?} do not fit shape {:?}", self.ranks, self.shape)));
        }
        if self.outlier_count > self.entries() {
            return Err(Error::arg(format!(
                "{} outliers exceed the {} entries",
                self.outlier_count,
                self.entries()
            )));
        }
        for (name, v) in [
            ("core_std", self.core_std),
            ("awgn_std", self.awgn_std),
            ("outlier_std", self.outlier_std),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::arg(format!("{name} must be a finite nonnegative number")));
            }
        }
        if self.trials == 0 {
            return Err(Error::arg("at least one trial is required"));
        }
        if self.solvers.is_empty() {
            return Err(Error::arg("no solvers selected"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    OutlierStd,
    OutlierCount,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::OutlierStd => "outlier_std",
            SweepParam::OutlierCount => "outlier_count",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepGrid {
    /// `sigma_o = 4, 8, ..., 28`
    pub fn outlier_std_default() -> Self {
        Self {
            param: SweepParam::OutlierStd,
            values: (1..=7).map(|k| 4.0 * k as f64).collect(),
        }
    }

    /// `N_o = 0, 40, ..., 400`
    pub fn outlier_count_default() -> Self {
        Self {
            param: SweepParam::OutlierCount,
            values: (0..=10).map(|k| 40.0 * k as f64).collect(),
        }
    }

    fn apply(&self, spec: &ReconExperimentSpec, value: f64) -> Result<ReconExperimentSpec> {
        let mut s = spec.clone();
        match self.param {
            SweepParam::OutlierStd => s.outlier_std = value,
            SweepParam::OutlierCount => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::arg(format!("outlier count {value} is not a nonnegative integer")));
                }
                s.outlier_count = value as usize;
            }
        }
        s.validate()?;
        Ok(s)
    }
}

/// Draws `X = G x_n U_n` with i.i.d. `N(0, core_std^2)` core entries and
/// Haar-random orthonormal bases. The returned model carries the core.
pub fn gen_tucker_tensor(spec: &ReconExperimentSpec, rng: &mut ChaCha8Rng) -> Result<(DenseTensor, TuckerModel)> {
    spec.validate()?;
    let core = DenseTensor::from_fn(&spec.ranks, |_| gaussian(rng, spec.core_std));
    let bases = spec
        .shape
        .iter()
        .zip(&spec.ranks)
        .map(|(&dn, &d)| StiefelBasis::random(dn, d, rng))
        .collect::<Result<Vec<_>>>()?;
    let mut model = TuckerModel::new(bases)?;
    model.core = Some(core);
    let x = model.expand_core()?;
    Ok((x, model))
}

/// Generators used by [`corrupt`].
pub struct CorruptionRngs {
    pub noise: ChaCha8Rng,
    pub positions: ChaCha8Rng,
    pub values: ChaCha8Rng,
}

impl CorruptionRngs {
    pub fn for_trial(seed: u64, trial: u64) -> Self {
        Self {
            noise: stream_rng(seed, trial, Stream::Noise),
            positions: stream_rng(seed, trial, Stream::OutlierPositions),
            values: stream_rng(seed, trial, Stream::OutlierValues),
        }
    }
}

/// Adds `N(0, awgn_std^2)` to every entry and `N(0, outlier_std^2)` to
/// `outlier_count` entries chosen uniformly without replacement.
pub fn corrupt(x: &DenseTensor, spec: &ReconExperimentSpec, rngs: &mut CorruptionRngs) -> Result<DenseTensor> {
    if spec.outlier_count > x.len() {
        return Err(Error::arg(format!(
            "{} outliers exceed the {} entries",
            spec.outlier_count,
            x.len()
        )));
    }
    let mut y = x.clone();
    if spec.awgn_std > 0.0 {
        for v in y.data_mut() {
            *v += gaussian(&mut rngs.noise, spec.awgn_std);
        }
    }
    let positions = rand::seq::index::sample(&mut rngs.positions, x.len(), spec.outlier_count);
    let data = y.data_mut();
    for pos in positions.iter() {
        data[pos] += gaussian(&mut rngs.values, spec.outlier_std);
    }
    Ok(y)
}

/// Normalized squared error `||X - X_hat||_F^2 / ||X||_F^2`.
pub fn nse(x_true: &DenseTensor, x_hat: &DenseTensor) -> Result<f64> {
    let denom = x_true.frobenius_norm().powi(2);
    if denom == 0.0 {
        return Err(Error::arg("NSE is undefined for an all-zero reference tensor"));
    }
    Ok(x_true.sub(x_hat)?.frobenius_norm().powi(2) / denom)
}

/// NSE of every solver on one trial at one grid point.
pub fn reconstruction_trial(
    spec: &ReconExperimentSpec,
    trial: u64,
    cfg: &HooiConfig,
) -> Result<Vec<(Solver, Result<f64>)>> {
    let (x, _) = gen_tucker_tensor(spec, &mut stream_rng(spec.seed, trial, Stream::Data))?;
    let mut rngs = CorruptionRngs::for_trial(spec.seed, trial);
    let x_corr = corrupt(&x, spec, &mut rngs)?;
    Ok(spec
        .solvers
        .iter()
        .map(|&s| {
            let err = s
                .decompose(&x_corr, &spec.ranks, cfg)
                .and_then(|(model, _)| tucker::reconstruct(&x_corr, &model))
                .and_then(|x_hat| nse(&x, &x_hat));
            (s, err)
        })
        .collect())
}

/// Mean NSE for every (solver, grid value).
///
/// Trial `t` draws its clean tensor and all corruption from streams keyed by
/// `(seed, t)`, so every solver and every grid point of that trial sees the
/// same ground truth, the same dense noise and the same standardized outlier
/// draws.
pub fn run_reconstruction_sweep(spec: &ReconExperimentSpec, sweep: &SweepGrid, cfg: &HooiConfig) -> Result<ResultTable> {
    spec.validate()?;
    cfg.validate()?;
    let points = sweep
        .values
        .iter()
        .map(|&v| sweep.apply(spec, v))
        .collect::<Result<Vec<_>>>()?;

    // per trial: per grid point: per solver
    let per_trial: Vec<Result<Vec<Vec<Result<f64>>>>> = map_trials(spec.trials, |t| {
        points
            .iter()
            .map(|p| Ok(reconstruction_trial(p, t, cfg)?.into_iter().map(|(_, r)| r).collect()))
            .collect()
    });
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;

    let mut table = ResultTable::default();
    for (g, &value) in sweep.values.iter().enumerate() {
        for (k, solver) in spec.solvers.iter().enumerate() {
            let mut ok = Vec::with_capacity(spec.trials);
            let mut failures = 0;
            for trial in &per_trial {
                match &trial[g][k] {
                    Ok(v) => ok.push(*v),
                    Err(_) => failures += 1,
                }
            }
            let (metric, stderr) = mean_and_stderr(&ok);
            table.rows.push(ResultRow {
                solver: solver.name().to_string(),
                param_name: sweep.param.name().to_string(),
                param_value: value,
                metric,
                stderr,
                trials: ok.len(),
                failures,
            });
        }
    }
    Ok(table)
}

/// Per-iteration metrics of `solver` on `x`, for convergence plots.
pub fn convergence_trace(x: &DenseTensor, ranks: &[usize], solver: Solver, cfg: &HooiConfig) -> Result<tucker::DecompTrace> {
    Ok(solver.decompose(x, ranks, cfg)?.1)
}

/// Tensor of i.i.d. standard normal entries.
pub fn gaussian_tensor(shape: &[usize], seed: u64) -> DenseTensor {
    let mut rng = stream_rng(seed, 0, Stream::Data);
    DenseTensor::from_fn(shape, |_| gaussian(&mut rng, 1.0))
}
