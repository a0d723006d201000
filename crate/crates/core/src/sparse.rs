//! Vector proximal operators: soft thresholding, ordered weighted shrinkage and
//! the iterative-reweighted-ℓ1 (IRL1) solver for the log penalty
//! `½‖y − x‖² + λ Σ log(|x_i| + ε)`.

use crate::error::{Error, Result};

/// Relative change between successive IRL1 iterates that counts as converged.
pub const IRL1_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector(Vec<f64>);

impl SparseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("vector contains non-finite entries"));
        }
        Ok(SparseVector(entries))
    }

    pub fn zeros(n: usize) -> Self {
        SparseVector(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of entries with `|x| > tol`.
    pub fn support(&self, tol: f64) -> usize {
        self.0.iter().filter(|v| v.abs() > tol).count()
    }
}

/// Iterates and objective values of one IRL1 run. `iterates[0]` is the
/// starting point `y`; `objectives[t]` is the log-penalty objective at `iterates[t]`.
#[derive(Debug, Clone)]
pub struct Irl1Trace {
    pub iterates: Vec<SparseVector>,
    pub objectives: Vec<f64>,
    pub converged: bool,
    pub lambda: f64,
    pub eps: f64,
}

impl Irl1Trace {
    pub fn solution(&self) -> &SparseVector {
        self.iterates.last().expect("trace always holds the start point")
    }

    /// Number of reweighting steps taken.
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    /// Weights `1 / (|x^t| + ε)` used to produce iterate `t + 1`.
    pub fn weights(&self, t: usize) -> Vec<f64> {
        self.iterates[t]
            .as_slice()
            .iter()
            .map(|x| 1.0 / (x.abs() + self.eps))
            .collect()
    }
}

#[inline]
fn soft(a: f64, tau: f64) -> f64 {
    a.signum() * (a.abs() - tau).max(0.0)
}

/// `sgn(a)·max(|a| − τ, 0)`, the minimizer of `½‖x − a‖² + τ‖x‖₁`.
pub fn soft_threshold(a: &SparseVector, tau: f64) -> Result<SparseVector> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::invalid_param(format!("tau must be finite and >= 0, got {tau}")));
    }
    Ok(SparseVector(a.0.iter().map(|&v| soft(v, tau)).collect()))
}

/// `max(a_j − w_j, 0)` for descending non-negative `a` and ascending
/// non-negative `w`, the global optimum of `½‖x − a‖² + Σ w_j |x_j|` under
/// those ordering hypotheses.
pub fn weighted_soft_threshold(a: &SparseVector, w: &[f64]) -> Result<SparseVector> {
    if a.len() != w.len() {
        return Err(Error::invalid_param(format!(
            "length mismatch: {} coefficients, {} weights",
            a.len(),
            w.len()
        )));
    }
    if a.0.iter().any(|&v| v < 0.0) || a.0.windows(2).any(|p| p[0] < p[1]) {
        return Err(Error::invalid_param(
            "coefficients must be non-negative and sorted descending",
        ));
    }
    if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || w.windows(2).any(|p| p[0] > p[1]) {
        return Err(Error::invalid_param(
            "weights must be finite, non-negative and sorted ascending",
        ));
    }
    Ok(SparseVector(
        a.0.iter().zip(w).map(|(&v, &wj)| (v - wj).max(0.0)).collect(),
    ))
}

/// `½‖y − x‖² + λ Σ log(|x_i| + ε)`.
pub fn log_penalty_objective(y: &[f64], x: &[f64], lambda: f64, eps: f64) -> f64 {
    y.iter()
        .zip(x)
        .map(|(&yi, &xi)| 0.5 * (yi - xi) * (yi - xi) + lambda * (xi.abs() + eps).ln())
        .sum()
}

/// IRL1 for the log penalty with identity measurement operator. Starts from
/// `x⁰ = y`; step `t + 1` soft-thresholds `y` with per-coordinate threshold
/// `λ / (|x^t| + ε)`.
pub fn log_penalty_solve(
    y: &SparseVector,
    lambda: f64,
    eps: f64,
    max_iters: usize,
) -> Result<Irl1Trace> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid_param(format!("lambda must be > 0, got {lambda}")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid_param(format!("eps must be > 0, got {eps}")));
    }
    if max_iters == 0 {
        return Err(Error::invalid_param("max_iters must be >= 1"));
    }
    let ys = y.as_slice();
    let mut iterates = vec![y.clone()];
    let mut objectives = vec![log_penalty_objective(ys, ys, lambda, eps)];
    let mut converged = false;

    for _ in 0..max_iters {
        let prev = iterates.last().unwrap().as_slice();
        let next: Vec<f64> = ys
            .iter()
            .zip(prev)
            .map(|(&yi, &xi)| soft(yi, lambda / (xi.abs() + eps)))
            .collect();
        let diff = next
            .iter()
            .zip(prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = prev.iter().map(|v| v * v).sum::<f64>().sqrt();
        objectives.push(log_penalty_objective(ys, &next, lambda, eps));
        iterates.push(SparseVector(next));
        if diff <= IRL1_TOL * scale {
            converged = true;
            break;
        }
    }
    Ok(Irl1Trace {
        iterates,
        objectives,
        converged,
        lambda,
        eps,
    })
}

/// One row of the scalar penalty comparison: `(x, ‖x‖₀, |x|, log(|x| + ε))`.
/// The values are illustrative; nothing downstream depends on the scaling.
pub fn penalty_profile(xs: &[f64], eps: f64) -> Vec<(f64, f64, f64, f64)> {
    xs.iter()
        .map(|&x| {
            let l0 = if x != 0.0 { 1.0 } else { 0.0 };
            (x, l0, x.abs(), (x.abs() + eps).ln())
        })
        .collect()
}
