//! Browser demo: PCA versus L1-PCA on a 2-D cloud, an L1-HOOI convergence
//! trace and a small reconstruction-error sweep.

use l1tucker::harness::recon::{run_reconstruction_sweep, ReconExperimentSpec, SweepGrid, SweepParam};
use l1tucker::harness::rng::{gaussian, stream_rng, Stream};
use l1tucker::l1pca::{l1pca, L1PcaConfig};
use l1tucker::linalg::{top_d_left_basis, Matrix};
use l1tucker::tensor::DenseTensor;
use l1tucker::{HooiConfig, Solver};
use rand::Rng;
use wasm_bindgen::prelude::*;

fn js_err(e: l1tucker::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Elongated Gaussian cloud along 30 degrees plus `outliers` points far off
/// axis. Returns `[pca_x, pca_y, l1_x, l1_y, x_0, y_0, x_1, y_1, ...]`.
#[wasm_bindgen]
pub fn pca_vs_l1pca(inliers: usize, outliers: usize, outlier_distance: f64, seed: u64) -> Result<Vec<f64>, JsError> {
    let n = inliers + outliers;
    if n == 0 {
        return Err(JsError::new("need at least one point"));
    }
    let mut rng = stream_rng(seed, 0, Stream::Data);
    let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
    let mut pts = Matrix::zeros(2, n);
    for j in 0..inliers {
        let (a, b) = (gaussian(&mut rng, 3.0), gaussian(&mut rng, 0.5));
        pts[(0, j)] = c * a - s * b;
        pts[(1, j)] = s * a + c * b;
    }
    let mut orng = stream_rng(seed, 0, Stream::OutlierValues);
    for j in inliers..n {
        let angle = 120f64.to_radians() + orng.random_range(-0.25..0.25);
        let r = outlier_distance * orng.random_range(0.8..1.2);
        pts[(0, j)] = r * angle.cos();
        pts[(1, j)] = r * angle.sin();
    }
    let pca = top_d_left_basis(&pts, 1).map_err(js_err)?;
    let l1 = l1pca(&pts, 1, &L1PcaConfig::default()).map_err(js_err)?;
    let mut out = vec![pca.matrix()[(0, 0)], pca.matrix()[(1, 0)], l1.basis.matrix()[(0, 0)], l1.basis.matrix()[(1, 0)]];
    out.extend(pts.iter().copied());
    Ok(out)
}

fn corrupted_cube(dim: usize, rank: usize, outliers: usize, seed: u64) -> Result<(DenseTensor, Vec<usize>), JsError> {
    let spec = ReconExperimentSpec {
        shape: vec![dim; 3],
        ranks: vec![rank; 3],
        outlier_count: outliers,
        outlier_std: 20.0,
        trials: 1,
        seed,
        ..ReconExperimentSpec::desk_scale()
    };
    spec.validate().map_err(js_err)?;
    let (x, _) = l1tucker::harness::recon::gen_tucker_tensor(&spec, &mut stream_rng(seed, 0, Stream::Data)).map_err(js_err)?;
    let mut rngs = l1tucker::harness::recon::CorruptionRngs::for_trial(seed, 0);
    let x = l1tucker::harness::recon::corrupt(&x, &spec, &mut rngs).map_err(js_err)?;
    Ok((x, spec.ranks))
}

/// L1 metric after every L1-HOOI sweep on a corrupted `dim^3` Tucker tensor.
#[wasm_bindgen]
pub fn l1_hooi_trace(dim: usize, rank: usize, outliers: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let (x, ranks) = corrupted_cube(dim, rank, outliers, seed)?;
    let cfg = HooiConfig {
        init: l1tucker::HooiInit::Random(seed),
        ..HooiConfig::with_tol(1e-9)
    };
    let (_, trace) = Solver::L1Hooi.decompose(&x, &ranks, &cfg).map_err(js_err)?;
    Ok(trace.metric_per_outer_iter)
}

/// Mean NSE of HOSVD, HOOI, L1-HOSVD and L1-HOOI over `trials` corrupted
/// `8x8x8` rank-3 tensors at outlier deviations `0, 4, ..., 28`. Rows are
/// `[sigma, hosvd, hooi, l1-hosvd, l1-hooi]`, flattened.
#[wasm_bindgen]
pub fn mnse_curve(trials: usize, outliers: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let spec = ReconExperimentSpec {
        shape: vec![8, 8, 8],
        ranks: vec![3, 3, 3],
        outlier_count: outliers,
        trials: trials.max(1),
        seed,
        ..ReconExperimentSpec::desk_scale()
    };
    let grid = SweepGrid {
        param: SweepParam::OutlierStd,
        values: (0..=7).map(|k| 4.0 * k as f64).collect(),
    };
    let table = run_reconstruction_sweep(&spec, &grid, &HooiConfig::default()).map_err(js_err)?;
    let mut out = Vec::with_capacity(grid.values.len() * 5);
    for &v in &grid.values {
        out.push(v);
        for s in Solver::ALL {
            out.push(table.get(s.name(), v).map_or(f64::NAN, |r| r.metric));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_direction_resists_outliers() {
        let axis = (30f64.to_radians().cos(), 30f64.to_radians().sin());
        let align = |x: f64, y: f64| (x * axis.0 + y * axis.1).abs();
        for seed in 0..4 {
            let out = pca_vs_l1pca(200, 10, 20.0, seed).unwrap_or_else(|_| panic!("demo failed"));
            assert_eq!(out.len(), 4 + 2 * 210);
            assert!(align(out[2], out[3]) > 0.9);
            assert!(align(out[0], out[1]) < 0.5);
        }
    }

    #[test]
    fn trace_is_monotone() {
        let t = l1_hooi_trace(8, 2, 10, 1).unwrap_or_else(|_| panic!("demo failed"));
        assert!(t.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0]));
    }

    #[test]
    fn curve_has_one_row_per_sigma() {
        let c = mnse_curve(2, 10, 0).unwrap_or_else(|_| panic!("demo failed"));
        assert_eq!(c.len(), 8 * 5);
        assert!(c.iter().all(|v| v.is_finite()));
    }
}
