mod common;

use common::{basis, matrix, max_abs_diff, random_bases, tensor};
use l1tucker::harness::results::mean_and_stderr;
use l1tucker::l1pca::{l1pca_ao, l1pca_exact, L1PcaConfig};
use l1tucker::linalg::{self, orthonormality_error, ORTHO_TOL};
use l1tucker::tensor::{fold, mode_product, sequential_mode_product, unfold};
use l1tucker::tucker::{self, HooiConfig};
use proptest::prelude::*;

fn shape_strategy(max_order: usize, max_dim: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_dim, 1..=max_order)
}

/// Shape plus a rank vector with `1 <= d_n <= D_n`.
fn shape_and_ranks(max_order: usize, max_dim: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    shape_strategy(max_order, max_dim).prop_flat_map(|shape| {
        let ranks: Vec<_> = shape.iter().map(|&d| 1..=d).collect();
        (Just(shape), ranks)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn unfold_fold_bijection(shape in shape_strategy(5, 6), seed in any::<u64>()) {
        let x = tensor(&shape, seed);
        for n in 0..shape.len() {
            let m = unfold(&x, n).unwrap().matrix;
            prop_assert_eq!(m.nrows(), shape[n]);
            prop_assert_eq!(fold(&m, n, &shape).unwrap(), x.clone());
        }
    }

    #[test]
    fn distinct_mode_products_commute(
        (shape, ranks) in shape_and_ranks(4, 6),
        seed in any::<u64>(),
        a in 0usize..4,
        b in 0usize..4,
    ) {
        let n = shape.len();
        let (a, b) = (a % n, b % n);
        prop_assume!(a != b);
        let x = tensor(&shape, seed);
        let ua = matrix(ranks[a], shape[a], seed ^ 1);
        let ub = matrix(ranks[b], shape[b], seed ^ 2);
        let ab = mode_product(&mode_product(&x, &ua, a).unwrap(), &ub, b).unwrap();
        let ba = mode_product(&mode_product(&x, &ub, b).unwrap(), &ua, a).unwrap();
        let scale = ab.frobenius_norm().max(1e-300);
        prop_assert!(max_abs_diff(&ab, &ba) <= 1e-12 * scale);
    }

    #[test]
    fn projection_is_non_expansive((shape, ranks) in shape_and_ranks(5, 6), seed in any::<u64>(), n in 0usize..5) {
        let n = n % shape.len();
        let x = tensor(&shape, seed);
        let u = basis(shape[n], ranks[n], seed ^ 7);
        let y = mode_product(&x, &u.matrix().transpose(), n).unwrap();
        prop_assert!(y.frobenius_norm() <= x.frobenius_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn l1_norm_is_cauchy_schwarz_bounded(shape in shape_strategy(4, 6), seed in any::<u64>()) {
        let x = tensor(&shape, seed);
        prop_assert!(x.l1_norm() <= (x.len() as f64).sqrt() * x.frobenius_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn thin_svd_reconstructs(rows in 2usize..=20, cols in 2usize..=20, seed in any::<u64>()) {
        let a = matrix(rows, cols, seed);
        let svd = linalg::thin_svd(&a).unwrap();
        prop_assert!((svd.reconstruct() - &a).norm() <= 1e-9 * a.norm());
        prop_assert!(svd.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn phi_output_is_orthonormal(rows in 1usize..=12, d in 1usize..=12, cols in 1usize..=12, seed in any::<u64>()) {
        let d = d.min(rows);
        let a = matrix(rows, cols.min(d), seed);
        let mut padded = linalg::Matrix::zeros(rows, d);
        padded.columns_mut(0, a.ncols()).copy_from(&a);
        let u = linalg::procrustes_phi(&padded).unwrap();
        prop_assert!(orthonormality_error(u.matrix()) <= ORTHO_TOL);
    }

    #[test]
    fn top_basis_captures_leading_energy(rows in 2usize..=12, cols in 2usize..=12, d in 1usize..=12, seed in any::<u64>()) {
        let d = d.min(rows);
        let a = matrix(rows, cols, seed);
        let u = linalg::top_d_left_basis(&a, d).unwrap();
        let s = linalg::thin_svd(&a).unwrap().s;
        let leading: f64 = s.iter().take(d).map(|v| v * v).sum();
        let captured = u.matrix().tr_mul(&a).norm_squared();
        prop_assert!((captured - leading).abs() <= 1e-9 * a.norm_squared().max(1.0));
    }

    #[test]
    fn ao_chain_holds_at_every_step(rows in 1usize..=8, cols in 1usize..=10, d in 1usize..=4, seed in any::<u64>()) {
        let d = d.min(rows);
        let x = matrix(rows, cols, seed);
        let u0 = basis(rows, d, seed ^ 3);
        let run = l1pca_ao(&x, &u0, &L1PcaConfig::default()).unwrap();
        for s in &run.steps {
            let slack = 1e-9 * s.end.abs().max(1.0);
            prop_assert!((s.start - s.bridge_prev).abs() <= slack);
            prop_assert!(s.bridge_prev <= s.bridge_new + slack);
            prop_assert!(s.bridge_new <= s.end + slack);
        }
        prop_assert!(run.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].max(1.0)));
        // same inputs, same answer
        let again = l1pca_ao(&x, &u0, &L1PcaConfig::default()).unwrap();
        prop_assert_eq!(again.basis, run.basis);
    }

    #[test]
    fn ao_never_exceeds_exact(rows in 1usize..=4, cols in 1usize..=6, d in 1usize..=2, seed in any::<u64>()) {
        let d = d.min(rows);
        let x = matrix(rows, cols, seed);
        let exact = l1pca_exact(&x, d).unwrap();
        let u0 = basis(rows, d, seed ^ 5);
        let ao = l1pca_ao(&x, &u0, &L1PcaConfig::default()).unwrap();
        prop_assert!(ao.metric <= exact.result.metric + 1e-9 * exact.result.metric.max(1.0));
    }

    #[test]
    fn mean_is_order_free(samples in prop::collection::vec(-1e3f64..1e3, 1..40), rot in 0usize..40) {
        let mut shuffled = samples.clone();
        let k = rot % samples.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(mean_and_stderr(&samples), mean_and_stderr(&shuffled));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn l1_hooi_sweep_chain((shape, ranks) in shape_and_ranks(4, 5), seed in any::<u64>()) {
        let x = tensor(&shape, seed);
        let (model, trace) = tucker::l1_hooi(&x, &ranks, &HooiConfig::default()).unwrap();
        let p: usize = ranks.iter().product();
        let bound = (p as f64).sqrt() * x.frobenius_norm() + 1e-9;
        let slack = |v: f64| 1e-9 * v.abs().max(1.0);
        let m = &trace.metric_per_outer_iter;
        prop_assert!(m.windows(2).all(|w| w[1] >= w[0] - slack(w[0])), "outer trace {:?}", m);
        prop_assert!(m.iter().all(|&v| v <= bound));
        for (q, sweep) in trace.mode_metrics.iter().enumerate() {
            prop_assert!(sweep.windows(2).all(|w| w[1] >= w[0] - slack(w[0])), "within-sweep chain {:?}", sweep);
            prop_assert!(sweep.iter().all(|&v| v <= bound));
            if q > 0 {
                let prev_last = *trace.mode_metrics[q - 1].last().unwrap();
                prop_assert!(sweep[0] >= prev_last - slack(prev_last));
            }
        }
        // the per-mode metric after the final sweep is the L1 metric of the model
        let direct = tucker::tucker_metric_l1(&x, &model.bases).unwrap();
        prop_assert!((direct - trace.final_metric().unwrap()).abs() <= 1e-9 * direct.max(1.0));
    }

    #[test]
    fn hooi_l2_is_monotone_and_deterministic((shape, ranks) in shape_and_ranks(4, 5), seed in any::<u64>()) {
        let x = tensor(&shape, seed);
        let cfg = HooiConfig::default();
        let (a, trace) = tucker::hooi(&x, &ranks, &cfg).unwrap();
        let m = &trace.metric_per_outer_iter;
        prop_assert!(m.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].max(1.0)));
        let (b, _) = tucker::hooi(&x, &ranks, &cfg).unwrap();
        prop_assert_eq!(a, b);
        let (c, _) = tucker::l1_hooi(&x, &ranks, &cfg).unwrap();
        let (d, _) = tucker::l1_hooi(&x, &ranks, &cfg).unwrap();
        prop_assert_eq!(c, d);
    }

    #[test]
    fn per_mode_metric_identity((shape, ranks) in shape_and_ranks(4, 5), seed in any::<u64>()) {
        let x = tensor(&shape, seed);
        let bases = random_bases(&shape, &ranks, seed);
        let whole = tucker::tucker_metric_l1(&x, &bases).unwrap();
        for (n, b) in bases.iter().enumerate() {
            let a = tucker::partial_projection(&x, &bases, n).unwrap();
            let per_mode = linalg::projected_l1(b.matrix(), &a);
            prop_assert!((whole - per_mode).abs() <= 1e-10 * whole.max(1.0));
        }
    }

    #[test]
    fn two_reconstruction_paths_agree((shape, ranks) in shape_and_ranks(5, 5), seed in any::<u64>()) {
        let x = tensor(&shape, seed);
        let model = l1tucker::TuckerModel::new(random_bases(&shape, &ranks, seed)).unwrap();
        let a = tucker::reconstruct(&x, &model).unwrap();
        let b = tucker::reconstruct_with_projectors(&x, &model).unwrap();
        prop_assert!(max_abs_diff(&a, &b) <= 1e-10 * x.frobenius_norm().max(1.0));
        prop_assert!(a.frobenius_norm() <= x.frobenius_norm() * (1.0 + 1e-12));
        let factors: Vec<_> = model.bases.iter().map(|b| b.matrix().clone()).collect();
        let refs: Vec<(usize, &linalg::Matrix)> = factors.iter().enumerate().collect();
        let core = model.clone().with_core(&x).unwrap().core.unwrap();
        let expanded = sequential_mode_product(&core, &refs).unwrap();
        prop_assert!(max_abs_diff(&a, &expanded) <= 1e-10 * x.frobenius_norm().max(1.0));
    }
}
