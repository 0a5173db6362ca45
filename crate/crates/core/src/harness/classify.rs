//! Tucker-compressed nearest-neighbour classification of images whose
//! training copies are hit by sparse heavy-tail pixel noise.
//!
//! Per trial: `M_c` training and `test_per_class` testing images are drawn
//! from each class; each training image is corrupted with probability
//! `alpha`, and every pixel of a corrupted image receives additive
//! `unif(0, v)` noise with probability `beta`. The training images form a
//! `D x D x M` tensor that is decomposed with ranks `(d, d, M)`; images are
//! compressed to `vec(U_1^T Y U_2)` and classified by 1-NN.

use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::digits::synthetic_digits;
use super::idx::{load_mnist_dir, LabeledImages};
use super::map_trials;
use super::results::{mean_and_stderr, ResultRow, ResultTable};
use super::rng::{stream_rng, Stream};
use crate::error::{Error, Result};
use crate::l1pca::{self, L1PcaConfig};
use crate::linalg::{self, Matrix};
use crate::tensor::DenseTensor;
use crate::tucker::{HooiConfig, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "hosvd")]
    Hosvd,
    #[serde(rename = "hooi")]
    Hooi,
    #[serde(rename = "l1-hosvd")]
    L1Hosvd,
    #[serde(rename = "l1-hooi")]
    L1Hooi,
    #[serde(rename = "pca")]
    Pca,
    #[serde(rename = "l1-pca")]
    L1Pca,
    /// Nearest neighbour on raw pixels.
    #[serde(rename = "nn")]
    Nn,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Hosvd,
        Method::Hooi,
        Method::L1Hosvd,
        Method::L1Hooi,
        Method::Pca,
        Method::L1Pca,
        Method::Nn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::L1Pca => "l1-pca",
            Method::Nn => "nn",
            m => m.solver().map(Solver::name).unwrap_or_default(),
        }
    }

    pub fn solver(self) -> Option<Solver> {
        match self {
            Method::Hosvd => Some(Solver::Hosvd),
            Method::Hooi => Some(Solver::Hooi),
            Method::L1Hosvd => Some(Solver::L1Hosvd),
            Method::L1Hooi => Some(Solver::L1Hooi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyExperimentSpec {
    /// Number of classes `C`; class `c` is digit `c`.
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// Training samples per class, `M_c`.
    #[serde(default = "default_samples_per_class")]
    pub samples_per_class: usize,
    /// Image side `D`.
    #[serde(default = "default_image_dim")]
    pub image_dim: usize,
    /// `d = d_1 = d_2`.
    #[serde(default = "default_rank")]
    pub rank: usize,
    /// Probability that a training image is corrupted.
    pub alpha: f64,
    /// Probability that a pixel of a corrupted image is hit.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// `w / sqrt(E{n^2})`, with `w^2` the mean clean pixel energy.
    #[serde(default = "default_noise_ratio")]
    pub noise_ratio: f64,
    #[serde(default = "default_test_per_class")]
    pub test_per_class: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
}

fn default_classes() -> usize {
    5
}

fn default_samples_per_class() -> usize {
    10
}

fn default_image_dim() -> usize {
    28
}

fn default_rank() -> usize {
    5
}

fn default_beta() -> f64 {
    0.8
}

fn default_noise_ratio() -> f64 {
    10.0
}

fn default_test_per_class() -> usize {
    100
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

impl ClassifyExperimentSpec {
    /// Digits 0-4, 10 training images each, `d = 5`, `beta = 0.8`.
    pub fn desk_scale(alpha: f64) -> Self {
        Self {
            classes: 5,
            samples_per_class: 10,
            image_dim: 28,
            rank: 5,
            alpha,
            beta: 0.8,
            noise_ratio: 10.0,
            test_per_class: 100,
            trials: 50,
            seed: 0,
            methods: Method::ALL.to_vec(),
        }
    }

    /// Total number of training images `M`.
    pub fn training_count(&self) -> usize {
        self.classes * self.samples_per_class
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.classes > 10 {
            return Err(Error::arg(format!("classes must be in 1..=10, got {}", self.classes)));
        }
        if self.samples_per_class == 0 || self.test_per_class == 0 {
            return Err(Error::arg("samples_per_class and test_per_class must be positive"));
        }
        if self.rank == 0 || self.rank > self.image_dim {
            return Err(Error::arg(format!("rank {} must be in 1..={}", self.rank, self.image_dim)));
        }
        for (name, p) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::arg(format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.noise_ratio.is_finite() && self.noise_ratio > 0.0) {
            return Err(Error::arg("noise_ratio must be positive and finite"));
        }
        if self.trials == 0 {
            return Err(Error::arg("trials must be positive"));
        }
        if self.methods.is_empty() {
            return Err(Error::arg("no methods selected"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyParam {
    Alpha,
    Beta,
    Rank,
}

impl ClassifyParam {
    pub fn name(self) -> &'static str {
        match self {
            ClassifyParam::Alpha => "alpha",
            ClassifyParam::Beta => "beta",
            ClassifyParam::Rank => "rank",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySweep {
    pub param: ClassifyParam,
    pub values: Vec<f64>,
}

impl ClassifySweep {
    /// `alpha = 0, 0.1, 0.2, 0.3`
    pub fn alpha_default() -> Self {
        Self {
            param: ClassifyParam::Alpha,
            values: vec![0.0, 0.1, 0.2, 0.3],
        }
    }

    /// `d = 2, ..., 10`
    pub fn rank_default() -> Self {
        Self {
            param: ClassifyParam::Rank,
            values: (2..=10).map(f64::from).collect(),
        }
    }

    fn apply(&self, spec: &ClassifyExperimentSpec, value: f64) -> Result<ClassifyExperimentSpec> {
        let mut s = spec.clone();
        match self.param {
            ClassifyParam::Alpha => s.alpha = value,
            ClassifyParam::Beta => s.beta = value,
            ClassifyParam::Rank => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::arg(format!("rank {value} is not a positive integer")));
                }
                s.rank = value as usize;
            }
        }
        s.validate()?;
        Ok(s)
    }
}

/// Pools the trials sample their training and testing images from.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationData {
    pub train: LabeledImages,
    pub test: LabeledImages,
}

impl ClassificationData {
    pub fn new(train: LabeledImages, test: LabeledImages) -> Result<Self> {
        if train.dim != test.dim {
            return Err(Error::arg(format!(
                "training images are {0}x{0} but testing images are {1}x{1}",
                train.dim, test.dim
            )));
        }
        Ok(Self { train, test })
    }

    pub fn from_mnist_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let (train, test) = load_mnist_dir(dir)?;
        Self::new(train, test)
    }

    /// Synthetic digits with 20 training and 5 testing candidates per
    /// requested sample, so trials see different draws.
    pub fn synthetic(spec: &ClassifyExperimentSpec) -> Result<Self> {
        let classes: Vec<u8> = (0..spec.classes.min(10) as u8).collect();
        let train = synthetic_digits(&classes, 20 * spec.samples_per_class, spec.image_dim, spec.seed)?;
        let test = synthetic_digits(
            &classes,
            5 * spec.test_per_class,
            spec.image_dim,
            spec.seed ^ 0x7465_7374_7365_7473,
        )?;
        Self::new(train, test)
    }
}

/// Images of one trial, grouped by class (class 0 first).
#[derive(Debug, Clone)]
pub struct TrialImages {
    pub train: Vec<Matrix>,
    pub train_labels: Vec<u8>,
    pub test: Vec<Matrix>,
    pub test_labels: Vec<u8>,
}

fn draw(pool: &LabeledImages, class: u8, k: usize, rng: &mut impl Rng, what: &str) -> Result<Vec<usize>> {
    let idx = pool.indices_of(class);
    if idx.len() < k {
        return Err(Error::arg(format!(
            "class {class} has {} {what} images, {k} needed",
            idx.len()
        )));
    }
    let mut picked: Vec<usize> = index::sample(rng, idx.len(), k).into_iter().map(|i| idx[i]).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Draws the clean training and testing images of `trial`.
pub fn sample_trial(spec: &ClassifyExperimentSpec, data: &ClassificationData, trial: u64) -> Result<TrialImages> {
    if data.train.dim != spec.image_dim {
        return Err(Error::arg(format!(
            "dataset images are {0}x{0}, config says {1}x{1}",
            data.train.dim, spec.image_dim
        )));
    }
    let mut rng = stream_rng(spec.seed, trial, Stream::Sampling);
    let mut out = TrialImages {
        train: Vec::new(),
        train_labels: Vec::new(),
        test: Vec::new(),
        test_labels: Vec::new(),
    };
    for c in 0..spec.classes as u8 {
        for i in draw(&data.train, c, spec.samples_per_class, &mut rng, "training")? {
            out.train.push(data.train.images[i].clone());
            out.train_labels.push(c);
        }
        for i in draw(&data.test, c, spec.test_per_class, &mut rng, "testing")? {
            out.test.push(data.test.images[i].clone());
            out.test_labels.push(c);
        }
    }
    Ok(out)
}

/// Uniform noise amplitude `v` meeting `w / sqrt(v^2 / 3) = ratio`.
pub fn noise_amplitude(clean: &[Matrix], ratio: f64) -> f64 {
    let px: usize = clean.iter().map(|m| m.len()).sum();
    let energy: f64 = clean.iter().map(|m| m.norm_squared()).sum();
    let w = (energy / px as f64).sqrt();
    w * 3f64.sqrt() / ratio
}

/// Corrupts training images in place.
///
/// Every image consumes one image-level uniform, and every pixel one mask
/// uniform and one noise value, whether or not they are used, so a larger
/// `alpha` or `beta` corrupts a superset of what a smaller one does.
pub fn corrupt_training(images: &mut [Matrix], alpha: f64, beta: f64, ratio: f64, seed: u64, trial: u64) {
    let v = noise_amplitude(images, ratio);
    let mut masks = stream_rng(seed, trial, Stream::CorruptionMasks);
    let mut noise = stream_rng(seed, trial, Stream::Noise);
    for img in images.iter_mut() {
        let hit = masks.random::<f64>() < alpha;
        for p in img.iter_mut() {
            let pix = masks.random::<f64>() < beta;
            let n = v * noise.random::<f64>();
            if hit && pix {
                *p += n;
            }
        }
    }
}

/// `D x D x M` tensor whose frontal slices are the images.
pub fn stack_images(images: &[Matrix]) -> Result<DenseTensor> {
    let first = images.first().ok_or_else(|| Error::arg("no images to stack"))?;
    let (r, c) = first.shape();
    let mut data = Vec::with_capacity(r * c * images.len());
    for img in images {
        if img.shape() != (r, c) {
            return Err(Error::arg("images differ in size"));
        }
        data.extend_from_slice(img.as_slice());
    }
    DenseTensor::new(vec![r, c, images.len()], data)
}

/// 1-NN label; ties go to the earliest training column, i.e. the lowest
/// class and then the lowest sample index.
pub fn nearest_neighbor(train: &Matrix, labels: &[u8], z: &[f64]) -> u8 {
    let mut best = f64::INFINITY;
    let mut label = labels[0];
    for (j, col) in train.column_iter().enumerate() {
        let d: f64 = col.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best {
            best = d;
            label = labels[j];
        }
    }
    label
}

fn vectorize(images: &[Matrix]) -> Matrix {
    let p = images[0].len();
    Matrix::from_fn(p, images.len(), |i, j| images[j].as_slice()[i])
}

fn accuracy(train_feats: &Matrix, train_labels: &[u8], test_feats: &Matrix, test_labels: &[u8]) -> f64 {
    let correct = test_feats
        .column_iter()
        .zip(test_labels)
        .filter(|(z, &l)| nearest_neighbor(train_feats, train_labels, z.as_slice()) == l)
        .count();
    correct as f64 / test_labels.len() as f64
}

/// Accuracy of `method` on already corrupted training images.
pub fn classify_trial(
    method: Method,
    imgs: &TrialImages,
    rank: usize,
    cfg: &HooiConfig,
) -> Result<f64> {
    let train_vec = vectorize(&imgs.train);
    let test_vec = vectorize(&imgs.test);
    let (train_feats, test_feats) = match method {
        Method::Nn => (train_vec, test_vec),
        Method::Pca | Method::L1Pca => {
            let k = (rank * rank).min(imgs.train.len());
            let u = if method == Method::Pca {
                linalg::top_d_left_basis(&train_vec, k)?
            } else {
                let inner = L1PcaConfig {
                    init: Default::default(),
                    ..cfg.inner.clone()
                };
                l1pca::l1pca(&train_vec, k, &inner)?.basis
            };
            let ut = u.matrix().transpose();
            (&ut * &train_vec, &ut * &test_vec)
        }
        _ => {
            let solver = method.solver().expect("tucker method");
            let x = stack_images(&imgs.train)?;
            let m = imgs.train.len();
            let (model, _) = solver.decompose(&x, &[rank, rank, m], cfg)?;
            let (u1, u2) = (model.bases[0].matrix(), model.bases[1].matrix());
            let compress = |images: &[Matrix]| {
                let feats: Vec<Matrix> = images.iter().map(|y| u1.transpose() * y * u2).collect();
                vectorize(&feats)
            };
            (compress(&imgs.train), compress(&imgs.test))
        }
    };
    Ok(accuracy(&train_feats, &imgs.train_labels, &test_feats, &imgs.test_labels))
}

/// Accuracy of every method for one trial of one configuration.
pub fn classification_trial(
    spec: &ClassifyExperimentSpec,
    data: &ClassificationData,
    trial: u64,
    cfg: &HooiConfig,
) -> Result<Vec<(Method, Result<f64>)>> {
    let mut imgs = sample_trial(spec, data, trial)?;
    corrupt_training(&mut imgs.train, spec.alpha, spec.beta, spec.noise_ratio, spec.seed, trial);
    Ok(spec
        .methods
        .iter()
        .map(|&m| (m, classify_trial(m, &imgs, spec.rank, cfg)))
        .collect())
}

/// Mean accuracy for every (method, grid value). Trial `t` uses the same
/// images, corruption masks and noise values at every grid point.
pub fn run_classification(
    spec: &ClassifyExperimentSpec,
    data: &ClassificationData,
    sweep: &ClassifySweep,
    cfg: &HooiConfig,
) -> Result<ResultTable> {
    spec.validate()?;
    cfg.validate()?;
    let points = sweep
        .values
        .iter()
        .map(|&v| sweep.apply(spec, v))
        .collect::<Result<Vec<_>>>()?;
    for c in 0..spec.classes as u8 {
        if data.train.indices_of(c).len() < spec.samples_per_class || data.test.indices_of(c).len() < spec.test_per_class {
            return Err(Error::arg(format!("dataset lacks enough images of class {c}")));
        }
    }

    let per_trial: Vec<Result<Vec<Vec<Result<f64>>>>> = map_trials(spec.trials, |t| {
        points
            .iter()
            .map(|p| Ok(classification_trial(p, data, t, cfg)?.into_iter().map(|(_, r)| r).collect()))
            .collect()
    });
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;

    let mut table = ResultTable::default();
    for (g, &value) in sweep.values.iter().enumerate() {
        for (k, method) in spec.methods.iter().enumerate() {
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
                solver: method.name().to_string(),
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

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ClassifyExperimentSpec {
        ClassifyExperimentSpec {
            classes: 3,
            samples_per_class: 4,
            image_dim: 12,
            rank: 3,
            alpha: 0.0,
            beta: 0.5,
            noise_ratio: 10.0,
            test_per_class: 5,
            trials: 3,
            seed: 9,
            methods: Method::ALL.to_vec(),
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
            assert_eq!(serde_json::from_str::<Method>(&json).unwrap(), m);
        }
    }

    #[test]
    fn config_json_defaults() {
        let spec: ClassifyExperimentSpec = serde_json::from_str(r#"{"alpha":0.2,"trials":50,"seed":1}"#).unwrap();
        assert_eq!(spec, ClassifyExperimentSpec { seed: 1, ..ClassifyExperimentSpec::desk_scale(0.2) });
        assert!(serde_json::from_str::<ClassifyExperimentSpec>(r#"{"alpha":0.2,"trials":1,"seed":1,"x":1}"#).is_err());
        let mut bad = tiny_spec();
        bad.beta = 1.5;
        assert!(bad.validate().is_err());
        bad = tiny_spec();
        bad.rank = 13;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn noise_amplitude_matches_ratio() {
        let imgs = vec![Matrix::from_element(2, 2, 3.0), Matrix::from_element(2, 2, 4.0)];
        // w^2 = (4*9 + 4*16) / 8 = 12.5
        let v = noise_amplitude(&imgs, 10.0);
        assert!((12.5f64.sqrt() / (v * v / 3.0).sqrt() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn corruption_is_nested_and_nonnegative() {
        let base: Vec<Matrix> = (0..20).map(|k| Matrix::from_element(6, 6, 10.0 + k as f64)).collect();
        let run = |alpha: f64, beta: f64| {
            let mut imgs = base.clone();
            corrupt_training(&mut imgs, alpha, beta, 10.0, 4, 2);
            imgs
        };
        assert_eq!(run(0.0, 1.0), base);
        let lo = run(0.3, 0.5);
        let hi = run(0.7, 0.5);
        for ((b, l), h) in base.iter().zip(&lo).zip(&hi) {
            for ((&b, &l), &h) in b.iter().zip(l.iter()).zip(h.iter()) {
                assert!(l >= b && h >= b);
                if l != b {
                    assert_eq!(l, h);
                }
            }
        }
        assert_ne!(lo, hi);
    }

    #[test]
    fn nn_ties_prefer_first_column() {
        // duplicate training points with different labels
        let train = Matrix::from_columns(&[
            nalgebra::DVector::from_vec(vec![1.0, 0.0]),
            nalgebra::DVector::from_vec(vec![0.0, 1.0]),
            nalgebra::DVector::from_vec(vec![0.0, 1.0]),
        ]);
        assert_eq!(nearest_neighbor(&train, &[0, 1, 2], &[0.0, 1.0]), 1);
        // equidistant from the first two columns
        assert_eq!(nearest_neighbor(&train, &[0, 1, 2], &[0.5, 0.5]), 0);
    }

    #[test]
    fn full_rank_tucker_matches_plain_nn() {
        let mut spec = tiny_spec();
        spec.rank = spec.image_dim;
        let data = ClassificationData::synthetic(&spec).unwrap();
        let cfg = HooiConfig::default();
        for t in 0..2 {
            let res = classification_trial(&spec, &data, t, &cfg).unwrap();
            let nn = res.iter().find(|(m, _)| *m == Method::Nn).unwrap().1.as_ref().unwrap();
            for (m, acc) in &res {
                if m.solver().is_some() {
                    assert_eq!(acc.as_ref().unwrap(), nn, "{m:?}");
                }
            }
        }
    }

    #[test]
    fn sweep_is_deterministic_and_shaped() {
        let spec = tiny_spec();
        let data = ClassificationData::synthetic(&spec).unwrap();
        let sweep = ClassifySweep {
            param: ClassifyParam::Alpha,
            values: vec![0.0, 0.5],
        };
        let cfg = HooiConfig::default();
        let a = run_classification(&spec, &data, &sweep, &cfg).unwrap();
        let b = run_classification(&spec, &data, &sweep, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 14);
        for r in &a.rows {
            assert_eq!(r.trials, 3);
            assert!((0.0..=1.0).contains(&r.metric));
        }
        // clean synthetic digits are easy
        assert!(a.get("nn", 0.0).unwrap().metric > 0.8);
    }

    #[test]
    fn missing_class_is_an_argument_error() {
        let mut spec = tiny_spec();
        let data = ClassificationData::synthetic(&spec).unwrap();
        spec.classes = 4;
        let err = run_classification(&spec, &data, &ClassifySweep::alpha_default(), &HooiConfig::default());
        assert!(matches!(err, Err(Error::Argument(_))));
    }
}
