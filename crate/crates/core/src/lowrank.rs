//! Thin SVD and the singular-value shrinkage operators solving the nuclear-norm
//! (NNM) and weighted-nuclear-norm (WNNM) proximal problems for a single group.
//!
//! Both problems decouple in the singular basis of the input `Y`:
//!
//! ```text
//! NNM:   argmin_X ½‖Y − X‖²_F + λ‖X‖_*          → U·diag(max(δ − λ, 0))·Vᵀ
//! WNNM:  argmin_X ½‖Y − X‖²_F + Σ w_j σ_j(X)    → U·diag(max(δ − w, 0))·Vᵀ
//! ```
//!
//! The WNNM closed form is the global minimizer only when the weights are
//! non-descending, so [`WeightVector`] refuses anything else.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative cutoff below which a singular value counts as zero for rank purposes.
pub const RANK_RTOL: f64 = 1e-12;

const SVD_EPS: f64 = f64::EPSILON;
const SVD_MAX_ITERS: usize = 0; // 0 = no limit inside nalgebra

/// An `m × k` matrix whose columns are vectorized patches.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMatrix(DMatrix<f64>);

impl GroupMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::invalid_input("group matrix must be at least 1x1"));
        }
        Ok(GroupMatrix(matrix))
    }

    /// Builds a group from column-major data (one patch per column).
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::invalid_input(format!(
                "expected {rows}x{cols} = {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Self::new(DMatrix::from_vec(rows, cols, data))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        GroupMatrix(DMatrix::zeros(rows.max(1), cols.max(1)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    /// `min(rows, cols)`, the number of singular values.
    pub fn rank_bound(&self) -> usize {
        self.rows().min(self.cols())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let m = self.rows();
        &self.0.as_slice()[j * m..(j + 1) * m]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

impl From<DMatrix<f64>> for GroupMatrix {
    fn from(m: DMatrix<f64>) -> Self {
        GroupMatrix(m)
    }
}

/// Thin SVD `Y = U·diag(values)·Vᵀ` with descending singular values.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `m × n0`, orthonormal columns.
    pub left: DMatrix<f64>,
    /// `n0` singular values, descending.
    pub values: Vec<f64>,
    /// `k × n0`, orthonormal columns.
    pub right: DMatrix<f64>,
}

impl SvdFactors {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `U·diag(s)·Vᵀ` for an arbitrary diagonal `s` of length `n0`.
    pub fn recompose_with(&self, diag: &[f64]) -> GroupMatrix {
        debug_assert_eq!(diag.len(), self.len());
        let (m, k) = (self.left.nrows(), self.right.nrows());
        let mut out = DMatrix::zeros(m, k);
        for (j, &s) in diag.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let u = self.left.column(j);
            let v = self.right.column(j);
            out.ger(s, &u, &v, 1.0);
        }
        GroupMatrix(out)
    }

    pub fn recompose(&self) -> GroupMatrix {
        self.recompose_with(&self.values)
    }
}

/// Non-descending, non-negative per-singular-value weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid_param(format!(
                "weights must be finite and non-negative, found {bad}"
            )));
        }
        if let Some(j) = w.windows(2).position(|p| p[0] > p[1]) {
            return Err(Error::invalid_param(format!(
                "weights must be non-descending: w[{j}] = {} > w[{}] = {}",
                w[j],
                j + 1,
                w[j + 1]
            )));
        }
        Ok(WeightVector(w))
    }

    pub fn constant(value: f64, len: usize) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Thin SVD with the deterministic sign convention: in every column of `U` the
/// entry of largest magnitude (first on ties) is non-negative, and the matching
/// column of `V` is flipped with it.
pub fn svd_thin(y: &GroupMatrix) -> Result<SvdFactors> {
    if !y.is_finite() {
        return Err(Error::invalid_input("group matrix contains non-finite entries"));
    }
    let svd = nalgebra::SVD::try_new(y.0.clone(), true, true, SVD_EPS, SVD_MAX_ITERS)
        .ok_or_else(|| Error::Numerical {
            message: "SVD did not converge".into(),
            at: None,
        })?;
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => {
            return Err(Error::Numerical {
                message: "SVD did not produce singular vectors".into(),
                at: None,
            })
        }
    };
    let sv: &DVector<f64> = &svd.singular_values;
    let n0 = sv.len();

    let mut order: Vec<usize> = (0..n0).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let (m, k) = (y.rows(), y.cols());
    let mut left = DMatrix::zeros(m, n0);
    let mut right = DMatrix::zeros(k, n0);
    let mut values = Vec::with_capacity(n0);
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol = u.column(src).clone_owned();
        let mut vcol = vt.row(src).transpose();
        let mut pivot = 0;
        for i in 1..m {
            if ucol[i].abs() > ucol[pivot].abs() {
                pivot = i;
            }
        }
        if ucol[pivot] < 0.0 {
            ucol.neg_mut();
            vcol.neg_mut();
        }
        left.set_column(dst, &ucol);
        right.set_column(dst, &vcol);
        values.push(sv[src].max(0.0));
    }
    Ok(SvdFactors {
        left,
        values,
        right,
    })
}

/// Number of singular values above `RANK_RTOL · δ_1`.
pub fn numerical_rank(values: &[f64]) -> usize {
    let top = values.iter().copied().fold(0.0_f64, f64::max);
    if top <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&d| d > RANK_RTOL * top).count()
}

/// Singular value thresholding: the global minimizer of `½‖Y − X‖²_F + λ‖X‖_*`.
pub fn nnm_shrink(y: &GroupMatrix, lambda: f64) -> Result<GroupMatrix> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid_param(format!(
            "shrinkage threshold must be finite and >= 0, got {lambda}"
        )));
    }
    let f = svd_thin(y)?;
    let shrunk: Vec<f64> = f.values.iter().map(|&d| (d - lambda).max(0.0)).collect();
    Ok(f.recompose_with(&shrunk))
}

/// Weighted singular value shrinkage `max(δ_j − w_j, 0)` on precomputed factors.
pub fn wnnm_shrink_factors(f: &SvdFactors, w: &WeightVector) -> Result<GroupMatrix> {
    if w.len() != f.len() {
        return Err(Error::invalid_param(format!(
            "weight vector has length {}, expected {}",
            w.len(),
            f.len()
        )));
    }
    let shrunk: Vec<f64> = f
        .values
        .iter()
        .zip(w.as_slice())
        .map(|(&d, &wj)| (d - wj).max(0.0))
        .collect();
    Ok(f.recompose_with(&shrunk))
}

/// Global minimizer of `½‖Y − X‖²_F + Σ w_j σ_j(X)` for non-descending `w`.
pub fn wnnm_shrink(y: &GroupMatrix, w: &WeightVector) -> Result<GroupMatrix> {
    if w.len() != y.rank_bound() {
        return Err(Error::invalid_param(format!(
            "weight vector has length {}, expected min(m, k) = {}",
            w.len(),
            y.rank_bound()
        )));
    }
    let f = svd_thin(y)?;
    wnnm_shrink_factors(&f, w)
}

/// Adaptive weights `w_j = c·2√2·σ_n² / (γ_j + ε)` with
/// `γ_j = sqrt(max(δ_j² − k·σ_n², 0))`, the noise-debiased estimate of the
/// clean singular value from `k` noisy columns.
pub fn compute_weights(
    values: &[f64],
    sigma_n: f64,
    c: f64,
    eps: f64,
    group_size: usize,
) -> Result<WeightVector> {
    for (name, v) in [("sigma_n", sigma_n), ("c", c), ("eps", eps)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid_param(format!("{name} must be finite and > 0, got {v}")));
        }
    }
    if group_size == 0 {
        return Err(Error::invalid_param("group size must be >= 1"));
    }
    if values.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::invalid_param("singular values must be finite and >= 0"));
    }
    if let Some(j) = values.windows(2).position(|p| p[0] < p[1]) {
        return Err(Error::invalid_param(format!(
            "singular values must be sorted descending (index {j})"
        )));
    }
    let noise_energy = group_size as f64 * sigma_n * sigma_n;
    let numerator = c * 2.0 * std::f64::consts::SQRT_2 * sigma_n * sigma_n;
    let w = values
        .iter()
        .map(|&d| {
            let gamma = (d * d - noise_energy).max(0.0).sqrt();
            numerator / (gamma + eps)
        })
        .collect();
    WeightVector::new(w)
}

/// Scale of the NNM baseline threshold, in units of `√k·σ`.
pub const NNM_SCALE: f64 = 0.3;

/// Uniform threshold used by the NNM baseline for a group of `group_size` columns.
///
/// The singular values of an `m×k` noise block sit near `σ(√m + √k)`; a
/// threshold proportional to `√k·σ` tracks that scale without the `σ²`
/// growth of the weight numerator, which wipes out whole groups.
pub fn nnm_lambda(sigma_n: f64, group_size: usize) -> f64 {
    NNM_SCALE * (group_size as f64).sqrt() * sigma_n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, row_major: &[f64]) -> GroupMatrix {
        GroupMatrix::from(DMatrix::from_row_slice(rows, cols, row_major))
    }

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn identity_svd() {
        let f = svd_thin(&mat(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(f.values.len(), 2);
        assert!((f.values[0] - 1.0).abs() < 1e-14 && (f.values[1] - 1.0).abs() < 1e-14);
        assert!(max_abs_diff(&f.left, &DMatrix::identity(2, 2)) < 1e-14);
        assert!(max_abs_diff(&f.right, &DMatrix::identity(2, 2)) < 1e-14);
    }

    #[test]
    fn diagonal_svd() {
        let f = svd_thin(&mat(2, 2, &[5.0, 0.0, 0.0, 3.0])).unwrap();
        assert!((f.values[0] - 5.0).abs() < 1e-14);
        assert!((f.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn antidiagonal_svd_reconstructs() {
        let y = mat(2, 2, &[0.0, 5.0, 5.0, 0.0]);
        let f = svd_thin(&y).unwrap();
        assert!((f.values[0] - 5.0).abs() < 1e-12 && (f.values[1] - 5.0).abs() < 1e-12);
        let r = f.recompose();
        assert!(max_abs_diff(r.matrix(), y.matrix()) < 1e-12);
        let utu = f.left.transpose() * &f.left;
        let vtv = f.right.transpose() * &f.right;
        assert!(max_abs_diff(&utu, &DMatrix::identity(2, 2)) < 1e-12);
        assert!(max_abs_diff(&vtv, &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn sign_convention_holds() {
        let y = mat(3, 2, &[-1.0, 2.0, -3.0, 0.5, -0.2, -4.0]);
        let f = svd_thin(&y).unwrap();
        for j in 0..f.len() {
            let col = f.left.column(j);
            let mut pivot = 0;
            for i in 1..col.len() {
                if col[i].abs() > col[pivot].abs() {
                    pivot = i;
                }
            }
            assert!(col[pivot] >= 0.0);
        }
        assert!(max_abs_diff(f.recompose().matrix(), y.matrix()) < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let y = mat(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert!(matches!(svd_thin(&y), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn single_column_group() {
        let y = mat(3, 1, &[3.0, 0.0, -4.0]);
        let f = svd_thin(&y).unwrap();
        assert_eq!(f.values.len(), 1);
        assert!((f.values[0] - 5.0).abs() < 1e-14);
        assert!((f.right[(0, 0)].abs() - 1.0).abs() < 1e-14);
        let x = nnm_shrink(&y, 1.0).unwrap();
        assert!(max_abs_diff(x.matrix(), &(y.matrix() * 0.8)) < 1e-12);
    }

    #[test]
    fn nnm_diagonal() {
        let x = nnm_shrink(&mat(2, 2, &[3.0, 0.0, 0.0, 1.0]), 2.0).unwrap();
        assert!(max_abs_diff(x.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])) < 1e-12);
    }

    #[test]
    fn nnm_zero_lambda_is_identity() {
        let y = mat(3, 4, &[1.0, -2.0, 0.3, 4.0, 0.0, 2.2, -1.0, 0.7, 5.0, 1.0, 1.0, -3.0]);
        let x = nnm_shrink(&y, 0.0).unwrap();
        assert!((x.matrix() - y.matrix()).norm() < 1e-10);
    }

    #[test]
    fn nnm_antidiagonal() {
        let x = nnm_shrink(&mat(2, 2, &[0.0, 5.0, 5.0, 0.0]), 2.0).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 0.0]);
        assert!(max_abs_diff(x.matrix(), &want) < 1e-12);
    }

    #[test]
    fn nnm_negative_lambda_rejected() {
        let y = mat(1, 1, &[1.0]);
        assert!(matches!(nnm_shrink(&y, -0.1), Err(Error::InvalidParameter(_))));
        assert!(matches!(nnm_shrink(&y, f64::NAN), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn wnnm_diagonal() {
        let w = WeightVector::new(vec![1.0, 2.0]).unwrap();
        let x = wnnm_shrink(&mat(2, 2, &[5.0, 0.0, 0.0, 3.0]), &w).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        assert!(max_abs_diff(x.matrix(), &want) < 1e-12);
    }

    #[test]
    fn wnnm_zero_weights_identity() {
        let y = mat(2, 3, &[1.0, 2.0, 3.0, -4.0, 0.5, 6.0]);
        let x = wnnm_shrink(&y, &WeightVector::constant(0.0, 2).unwrap()).unwrap();
        assert!((x.matrix() - y.matrix()).norm() < 1e-10);
    }

    #[test]
    fn weight_vector_rejects_descending_and_negative() {
        assert!(matches!(WeightVector::new(vec![2.0, 1.0]), Err(Error::InvalidParameter(_))));
        assert!(matches!(WeightVector::new(vec![-1.0, 1.0]), Err(Error::InvalidParameter(_))));
        assert!(matches!(WeightVector::new(vec![0.0, f64::INFINITY]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn wnnm_length_mismatch_rejected() {
        let y = mat(2, 3, &[1.0, 2.0, 3.0, -4.0, 0.5, 6.0]);
        let w = WeightVector::constant(0.5, 3).unwrap();
        assert!(matches!(wnnm_shrink(&y, &w), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn weights_single_value() {
        // Independent evaluation: sqrt(10000 - 6000) = 63.245553203367585,
        // 2*sqrt(2)*100 / 63.2455... = 4.47213595499958 (= sqrt(20)).
        let w = compute_weights(&[100.0], 10.0, 1.0, 1e-16, 60).unwrap();
        assert!((w.as_slice()[0] - 20f64.sqrt()).abs() < 1e-12, "{:?}", w);
    }

    #[test]
    fn weights_clamped_component_is_huge() {
        let w = compute_weights(&[10.0], 10.0, 1.0, 1e-16, 60).unwrap();
        let expect = 2.0 * std::f64::consts::SQRT_2 * 100.0 / 1e-16;
        assert!((w.as_slice()[0] / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_vanish_with_noise() {
        let w = compute_weights(&[50.0, 20.0], 1e-9, 1.0, 1e-16, 60).unwrap();
        assert!(w.as_slice().iter().all(|&v| v < 1e-15));
    }

    #[test]
    fn weights_reject_unsorted() {
        assert!(matches!(
            compute_weights(&[1.0, 2.0], 1.0, 1.0, 1e-16, 4),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            compute_weights(&[2.0, 1.0], 0.0, 1.0, 1e-16, 4),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn rank_counts_relative_to_top() {
        assert_eq!(numerical_rank(&[1.0, 1e-11, 1e-13]), 2);
        assert_eq!(numerical_rank(&[0.0, 0.0]), 0);
        assert_eq!(numerical_rank(&[]), 0);
    }
}
