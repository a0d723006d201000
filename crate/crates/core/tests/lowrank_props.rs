use gsr_core::lowrank::{
    compute_weights, nnm_shrink, numerical_rank, svd_thin, wnnm_shrink, GroupMatrix, WeightVector,
};
use gsr_core::verify::GroupSampler;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn orthogonal(s: &mut GroupSampler, n: usize) -> DMatrix<f64> {
    s.matrix(n, n).qr().q()
}

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(64)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn factors_are_orthonormal_and_reconstruct(seed in any::<u64>(), m in 1usize..12, k in 1usize..12) {
        let mut s = GroupSampler::new(seed);
        let y = s.group(m, k);
        let f = svd_thin(&y).unwrap();
        let n0 = m.min(k);
        prop_assert_eq!(f.values.len(), n0);
        let eye = DMatrix::<f64>::identity(n0, n0);
        prop_assert!((f.left.transpose() * &f.left - &eye).amax() < 1e-10);
        prop_assert!((f.right.transpose() * &f.right - &eye).amax() < 1e-10);
        prop_assert!(f.values.windows(2).all(|p| p[0] >= p[1]) && f.values.iter().all(|&d| d >= 0.0));
        let rel = (f.recompose().matrix() - y.matrix()).norm() / y.matrix().norm().max(1e-300);
        prop_assert!(rel < 1e-10);
        for j in 0..n0 {
            let col = f.left.column(j);
            let pivot = (0..m).fold(0, |p, i| if col[i].abs() > col[p].abs() { i } else { p });
            prop_assert!(col[pivot] >= 0.0);
        }
    }

    #[test]
    fn orthogonal_invariance(seed in any::<u64>(), m in 2usize..10, k in 2usize..10, frac in 0.0f64..1.0) {
        let mut s = GroupSampler::new(seed);
        let y = s.group(m, k);
        let p = orthogonal(&mut s, m);
        let q = orthogonal(&mut s, k);
        let rotated = GroupMatrix::from(&p * y.matrix() * q.transpose());
        let a = svd_thin(&y).unwrap().values;
        let b = svd_thin(&rotated).unwrap().values;
        for (x, z) in a.iter().zip(&b) {
            prop_assert!((x - z).abs() < 1e-10 * (1.0 + a[0]));
        }
        let lambda = frac * a[0];
        let lhs = nnm_shrink(&rotated, lambda).unwrap();
        let rhs = &p * nnm_shrink(&y, lambda).unwrap().matrix() * q.transpose();
        prop_assert!((lhs.matrix() - rhs).amax() < 1e-8);
    }

    #[test]
    fn svt_is_non_expansive(seed in any::<u64>(), m in 1usize..10, k in 1usize..10, lambda in 0.0f64..20.0) {
        let mut s = GroupSampler::new(seed);
        let y1 = s.group(m, k);
        let y2 = s.group(m, k);
        let d_out = (nnm_shrink(&y1, lambda).unwrap().matrix() - nnm_shrink(&y2, lambda).unwrap().matrix()).norm();
        let d_in = (y1.matrix() - y2.matrix()).norm();
        prop_assert!(d_out <= d_in * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn rank_is_monotone_in_lambda(seed in any::<u64>(), m in 1usize..10, k in 1usize..10, l1 in 0.0f64..15.0, dl in 0.0f64..15.0) {
        let mut s = GroupSampler::new(seed);
        let y = s.group(m, k);
        let rank = |l: f64| {
            let out = nnm_shrink(&y, l).unwrap();
            svd_thin(&out).unwrap().values.iter().filter(|&&d| d > 1e-10).count()
        };
        prop_assert!(rank(l1 + dl) <= rank(l1));
    }

    #[test]
    fn constant_weights_reduce_to_svt(seed in any::<u64>(), m in 1usize..10, k in 1usize..10, lambda in 0.0f64..20.0) {
        let mut s = GroupSampler::new(seed);
        let y = s.group(m, k);
        let w = WeightVector::constant(lambda, m.min(k)).unwrap();
        let a = wnnm_shrink(&y, &w).unwrap();
        let b = nnm_shrink(&y, lambda).unwrap();
        prop_assert!((a.matrix() - b.matrix()).norm() < 1e-10);
    }

    #[test]
    fn weights_are_non_descending(
        mut values in prop::collection::vec(0.0f64..1e4, 1..40),
        sigma in 0.1f64..100.0,
        c in 0.01f64..3.0,
        k in 1usize..120,
    ) {
        values.sort_by(|a, b| b.total_cmp(a));
        let w = compute_weights(&values, sigma, c, 1e-16, k).unwrap();
        prop_assert!(w.as_slice().windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(w.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}

#[test]
fn weight_example_matches_hand_evaluation() {
    // sqrt(10000 − 6000) = 63.245553203367586; 2√2·100 / that = 4.47213595499958
    let w = compute_weights(&[100.0], 10.0, 1.0, 1e-16, 60).unwrap();
    assert!((w.as_slice()[0] - 4.47213595499958).abs() < 1e-12);
}

#[test]
fn degenerate_single_column_group() {
    let y = GroupMatrix::from(DMatrix::from_column_slice(3, 1, &[3.0, 0.0, -4.0]));
    let f = svd_thin(&y).unwrap();
    assert!((f.values[0] - 5.0).abs() < 1e-12);
    let shrunk = nnm_shrink(&y, 1.0).unwrap();
    assert!((shrunk.matrix() - y.matrix() * 0.8).amax() < 1e-12);
    assert_eq!(numerical_rank(&f.values), 1);
}

#[test]
fn nnm_example_is_optimal_against_perturbations() {
    let y = DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 5.0, 0.0]);
    let x = nnm_shrink(&GroupMatrix::from(y.clone()), 2.0).unwrap();
    let obj = |x: &DMatrix<f64>| 0.5 * (&y - x).norm_squared() + 2.0 * x.clone().singular_values().sum();
    let best = obj(x.matrix());
    let mut s = GroupSampler::new(11);
    for _ in 0..10_000 {
        let d = s.matrix(2, 2) * (0.1 * s.uniform(0.0, 1.0));
        assert!(obj(&(x.matrix() + d)) >= best - 1e-12);
    }
}
