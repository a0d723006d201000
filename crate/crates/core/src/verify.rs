//! Seeded oracle suites for the shrinkage operators.
//!
//! Each suite draws its own instances from a PCG32 stream, checks one identity
//! or optimality property against an independent computation, and reports the
//! worst deviation it saw. `gsr verify` and the acceptance tests both run these.

use nalgebra::DMatrix;
use rand_pcg::Pcg32;

use crate::dictionary::{build_adaptive_dictionary, code_l1, code_weighted_l1, reconstruct_from_code};
use crate::error::{Error, Result};
use crate::lowrank::{nnm_shrink, svd_thin, wnnm_shrink, GroupMatrix, WeightVector};
use crate::random::{Gaussian, STREAM_VERIFY};
use crate::sparse::{log_penalty_solve, SparseVector};

pub const EQUIVALENCE_TOL: f64 = 1e-8;
pub const ISOMETRY_TOL: f64 = 1e-10;
pub const IRL1_ORACLE_TOL: f64 = 1e-8;

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    /// Largest observed deviation (suite-specific units).
    pub worst: f64,
    pub tolerance: f64,
    pub failures: usize,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {} cases, worst {:.3e} (tol {:.0e}), {} failures",
            self.name, self.cases, self.worst, self.tolerance, self.failures
        )
    }
}

/// Instance generator: `N(0,1)` entries plus a planted rank-2 component.
pub struct GroupSampler {
    gauss: Gaussian,
}

impl GroupSampler {
    pub fn new(seed: u64) -> Self {
        GroupSampler {
            gauss: Gaussian::new(seed, STREAM_VERIFY),
        }
    }

    pub fn rng(&mut self) -> &mut Pcg32 {
        self.gauss.rng()
    }

    pub fn normal(&mut self) -> f64 {
        self.gauss.sample()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.gauss.uniform()
    }

    pub fn matrix(&mut self, m: usize, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, k, |_, _| self.gauss.sample())
    }

    pub fn group(&mut self, m: usize, k: usize) -> GroupMatrix {
        let mut y = self.matrix(m, k);
        for _ in 0..2 {
            let a = self.matrix(m, 1);
            let b = self.matrix(1, k);
            y += (a * b) * 3.0;
        }
        GroupMatrix::from(y)
    }

    /// Non-negative, non-descending weights in `[0, hi)`.
    pub fn sorted_weights(&mut self, n: usize, hi: f64) -> WeightVector {
        let mut w: Vec<f64> = (0..n).map(|_| hi * self.gauss.uniform()).collect();
        w.sort_by(f64::total_cmp);
        WeightVector::new(w).expect("sorted non-negative weights")
    }

    /// Group of size ranging from 8×6 (i = 0) to 81×100 (i = n − 1).
    pub fn sized_group(&mut self, i: usize, n: usize) -> GroupMatrix {
        let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let m = 8 + (73.0 * t).round() as usize;
        let k = 6 + (94.0 * t).round() as usize;
        self.group(m, k)
    }
}

fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

/// ℓ1 coding in the adaptive basis reproduces singular value thresholding.
pub fn l1_equivalence(seed: u64, instances: usize) -> Result<SuiteOutcome> {
    let mut s = GroupSampler::new(seed);
    let mut out = outcome("l1 coding = NNM shrinkage", instances, EQUIVALENCE_TOL);
    for i in 0..instances {
        let y = s.sized_group(i, instances);
        let top = svd_thin(&y)?.values[0];
        let lambda = s.uniform(0.0, top);
        let (dict, code) = code_l1(&y, lambda)?;
        let via_code = reconstruct_from_code(&dict, &code.alpha)?;
        let direct = nnm_shrink(&y, lambda)?;
        record(&mut out, frob(via_code.matrix(), direct.matrix()));
    }
    Ok(out)
}

/// Weighted ℓ1 coding reproduces weighted nuclear-norm shrinkage.
pub fn weighted_l1_equivalence(seed: u64, instances: usize) -> Result<SuiteOutcome> {
    let mut s = GroupSampler::new(seed);
    let mut out = outcome("weighted l1 coding = WNNM shrinkage", instances, EQUIVALENCE_TOL);
    for i in 0..instances {
        let y = s.sized_group(i, instances);
        let top = svd_thin(&y)?.values[0];
        let w = s.sorted_weights(y.rank_bound(), top);
        let (dict, code) = code_weighted_l1(&y, &w)?;
        let via_code = reconstruct_from_code(&dict, &code.alpha)?;
        let direct = wnnm_shrink(&y, &w)?;
        record(&mut out, frob(via_code.matrix(), direct.matrix()));
    }
    Ok(out)
}

/// `‖Y − Dα‖_F = ‖β − α‖₂` for arbitrary coefficient vectors.
pub fn isometry(seed: u64, instances: usize) -> Result<SuiteOutcome> {
    let mut s = GroupSampler::new(seed);
    let mut out = outcome("adaptive dictionary isometry", instances, ISOMETRY_TOL);
    for i in 0..instances {
        let y = s.sized_group(i, instances);
        let (dict, beta) = build_adaptive_dictionary(&y)?;
        let alpha: Vec<f64> = beta.iter().map(|b| b + s.normal() * (1.0 + b.abs())).collect();
        let lhs = frob(y.matrix(), reconstruct_from_code(&dict, &alpha)?.matrix());
        let rhs = beta
            .iter()
            .zip(&alpha)
            .map(|(b, a)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        record(&mut out, (lhs - rhs).abs());
    }
    Ok(out)
}

/// `½‖Y − X‖²_F + Σ w_j σ_j(X)`.
pub fn wnnm_objective(y: &DMatrix<f64>, x: &DMatrix<f64>, w: &[f64]) -> f64 {
    let sv = x.clone().singular_values();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    0.5 * (y - x).norm_squared() + sv.iter().zip(w).map(|(s, wj)| s * wj).sum::<f64>()
}

/// Random-perturbation optimality check of WNNM on 8×6 groups: no perturbation
/// of Frobenius size up to 0.1 may lower the objective. `worst` is the largest
/// objective decrease found (negative when none was).
pub fn wnnm_optimality(seed: u64, instances: usize, perturbations: usize) -> Result<SuiteOutcome> {
    let mut s = GroupSampler::new(seed);
    let mut out = outcome("WNNM perturbation optimality", instances * perturbations, 0.0);
    out.worst = f64::NEG_INFINITY;
    for _ in 0..instances {
        let y = s.group(8, 6);
        let top = svd_thin(&y)?.values[0];
        let w = s.sorted_weights(6, top);
        let x = wnnm_shrink(&y, &w)?;
        let best = wnnm_objective(y.matrix(), x.matrix(), w.as_slice());
        let slack = 1e-12 * (1.0 + best.abs());
        for _ in 0..perturbations {
            let mut d = s.matrix(8, 6);
            let size = 0.1 * (1.0 - s.uniform(0.0, 1.0));
            d *= size / d.norm();
            let h = wnnm_objective(y.matrix(), &(x.matrix() + d), w.as_slice());
            let decrease = best - h;
            out.worst = out.worst.max(decrease);
            if decrease > slack {
                out.failures += 1;
            }
        }
    }
    Ok(out)
}

/// Minimizer of `½(x − y)² + τ|x|` by grid search with successive
/// refinement. The grid minimizes the optimality violation `dist(0, ∂f(x))`
/// rather than `f` itself: `f` is flat near its minimum, so comparing its
/// values cannot resolve `x` much below `1e-8`, while the violation is
/// piecewise linear and can be refined to rounding level.
pub fn grid_argmin_l1(y: f64, tau: f64) -> f64 {
    let violation = |x: f64| {
        if x == 0.0 {
            (y.abs() - tau).max(0.0)
        } else {
            (x - y + tau * x.signum()).abs()
        }
    };
    const POINTS: usize = 2001;
    let (mut lo, mut hi) = (-y.abs() - 1.0, y.abs() + 1.0);
    let mut best = (0.0, violation(0.0));
    loop {
        let step = (hi - lo) / (POINTS - 1) as f64;
        for i in 0..POINTS {
            let x = lo + step * i as f64;
            let v = violation(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        if best.1 == 0.0 || step <= 1e-15 * (1.0 + y.abs()) {
            return best.0;
        }
        lo = best.0 - 2.0 * step;
        hi = best.0 + 2.0 * step;
    }
}

/// Every IRL1 step must solve its weighted-ℓ1 surrogate (checked by grid
/// search) and the log-penalty objective must never increase.
pub fn irl1_surrogate(seed: u64, problems: usize) -> Result<SuiteOutcome> {
    let mut s = GroupSampler::new(seed);
    let mut out = outcome("IRL1 surrogate exactness", problems, IRL1_ORACLE_TOL);
    for _ in 0..problems {
        let y = s.uniform(-10.0, 10.0);
        let lambda = s.uniform(0.05, 3.0);
        let eps = s.uniform(0.01, 1.0);
        let trace = log_penalty_solve(&SparseVector::new(vec![y])?, lambda, eps, 50)?;
        let mut bad = false;
        for t in 0..trace.steps() {
            let tau = lambda * trace.weights(t)[0];
            let oracle = grid_argmin_l1(y, tau);
            let got = trace.iterates[t + 1].as_slice()[0];
            let err = (got - oracle).abs();
            out.worst = out.worst.max(err);
            bad |= err > IRL1_ORACLE_TOL;
        }
        let slack = 1e-12 * (1.0 + trace.objectives[0].abs());
        bad |= trace.objectives.windows(2).any(|p| p[1] > p[0] + slack);
        out.failures += bad as usize;
    }
    Ok(out)
}

/// Support sizes of IRL1 and of ℓ1 tuned to the same residual, summed over a
/// sparse-plus-noise ensemble. Reported, not asserted per entry.
pub fn irl1_vs_l1_support(seed: u64, problems: usize) -> Result<(usize, usize)> {
    let mut s = GroupSampler::new(seed);
    let (mut irl1_total, mut l1_total) = (0, 0);
    for _ in 0..problems {
        let y: Vec<f64> = (0..64)
            .map(|i| s.normal() + if i % 8 == 0 { 10.0 } else { 0.0 })
            .collect();
        let trace = log_penalty_solve(&SparseVector::new(y.clone())?, 1.5, 0.1, 200)?;
        let x = trace.solution().as_slice();
        let residual = norm_diff(&y, x);
        // bisect the ℓ1 threshold whose residual matches IRL1's
        let (mut lo, mut hi) = (0.0, y.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let z = crate::sparse::soft_threshold(&SparseVector::new(y.clone())?, mid)?;
            if norm_diff(&y, z.as_slice()) < residual {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z = crate::sparse::soft_threshold(&SparseVector::new(y.clone())?, lo)?;
        irl1_total += SparseVector::new(x.to_vec())?.support(1e-12);
        l1_total += z.support(1e-12);
    }
    Ok((irl1_total, l1_total))
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn outcome(name: &'static str, cases: usize, tolerance: f64) -> SuiteOutcome {
    SuiteOutcome {
        name,
        cases,
        worst: 0.0,
        tolerance,
        failures: 0,
    }
}

fn record(out: &mut SuiteOutcome, err: f64) {
    out.worst = out.worst.max(err);
    if !(err <= out.tolerance) {
        out.failures += 1;
    }
}

/// The suites run by `gsr verify`.
pub fn run_all(seed: u64) -> Result<Vec<SuiteOutcome>> {
    Ok(vec![
        l1_equivalence(seed, 100)?,
        weighted_l1_equivalence(seed, 100)?,
        isometry(seed, 100)?,
        wnnm_optimality(seed, 100, 1000)?,
        irl1_surrogate(seed, 1000)?,
    ])
}

/// `Err(Error::Verify)` naming every failed suite.
pub fn require_all(outcomes: &[SuiteOutcome]) -> Result<()> {
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.summary()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verify(failed.join("; ")))
    }
}
