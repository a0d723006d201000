//! Adaptive rank-one dictionary built from a group's own SVD, and the
//! group-sparse coding operators expressed in that basis.
//!
//! With atoms `d_j = u_j·v_jᵀ` the coefficients of `Y` are exactly its singular
//! values, so ℓ1 coding reproduces singular value thresholding and weighted-ℓ1
//! coding reproduces weighted nuclear-norm shrinkage. Both routes are kept
//! separate here so each can check the other.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lowrank::{svd_thin, GroupMatrix, SvdFactors, WeightVector};
use crate::sparse::{soft_threshold, weighted_soft_threshold, SparseVector};

#[derive(Debug, Clone)]
pub struct AdaptiveDictionary {
    factors: SvdFactors,
}

impl AdaptiveDictionary {
    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn source_factors(&self) -> &SvdFactors {
        &self.factors
    }

    /// Atom `d_j = u_j·v_jᵀ` as a dense `m × k` matrix.
    pub fn atom(&self, j: usize) -> DMatrix<f64> {
        self.factors.left.column(j) * self.factors.right.column(j).transpose()
    }
}

/// Diagonal coefficients of a group and of its estimate in the adaptive basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCode {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Atoms from the thin SVD of `Y`, plus `Y`'s coefficients (its singular values).
pub fn build_adaptive_dictionary(y: &GroupMatrix) -> Result<(AdaptiveDictionary, Vec<f64>)> {
    let factors = svd_thin(y)?;
    let beta = factors.values.clone();
    Ok((AdaptiveDictionary { factors }, beta))
}

/// ℓ1 coding: `alpha = soft(beta, λ)`.
pub fn code_l1(y: &GroupMatrix, lambda: f64) -> Result<(AdaptiveDictionary, GroupCode)> {
    let (dict, beta) = build_adaptive_dictionary(y)?;
    let alpha = soft_threshold(&SparseVector::new(beta.clone())?, lambda)?.into_vec();
    Ok((dict, GroupCode { beta, alpha }))
}

/// Weighted ℓ1 coding: `alpha_j = max(beta_j − w_j, 0)`.
pub fn code_weighted_l1(y: &GroupMatrix, w: &WeightVector) -> Result<(AdaptiveDictionary, GroupCode)> {
    let (dict, beta) = build_adaptive_dictionary(y)?;
    if w.len() != beta.len() {
        return Err(Error::invalid_param(format!(
            "weight vector has length {}, dictionary has {} atoms",
            w.len(),
            beta.len()
        )));
    }
    let alpha = weighted_soft_threshold(&SparseVector::new(beta.clone())?, w.as_slice())?.into_vec();
    Ok((dict, GroupCode { beta, alpha }))
}

/// `Σ_j alpha_j·d_j`.
pub fn reconstruct_from_code(dict: &AdaptiveDictionary, alpha: &[f64]) -> Result<GroupMatrix> {
    if alpha.len() != dict.len() {
        return Err(Error::invalid_param(format!(
            "{} coefficients for {} atoms",
            alpha.len(),
            dict.len()
        )));
    }
    let f = &dict.factors;
    let mut out = DMatrix::zeros(f.left.nrows(), f.right.nrows());
    for (j, &a) in alpha.iter().enumerate() {
        if a != 0.0 {
            out += self::scaled_atom(f, j, a);
        }
    }
    GroupMatrix::new(out)
}

fn scaled_atom(f: &SvdFactors, j: usize, scale: f64) -> DMatrix<f64> {
    (f.left.column(j) * scale) * f.right.column(j).transpose()
}
