//! Outer restoration loop: iterative regularization, per-exemplar group
//! shrinkage and aggregation, for denoising (identity degradation) and
//! inpainting (pixel mask).

use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grouping::{block_match, exemplar_positions, form_group, Accumulator, GroupIndexSet, PatchSpec, Position};
use crate::image::{ImageBuffer, MaskBuffer};
use crate::lowrank::{compute_weights, nnm_lambda, svd_thin, wnnm_shrink_factors, GroupMatrix, WeightVector};

/// Exemplars processed per batch in deterministic mode; bounds peak memory.
const DETERMINISTIC_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// Adaptive per-singular-value weights.
    #[default]
    Wnnm,
    /// One uniform threshold for every singular value.
    Nnm,
}

impl Solver {
    pub fn as_str(&self) -> &'static str {
        match self {
            Solver::Wnnm => "wnnm",
            Solver::Nnm => "nnm",
        }
    }
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wnnm" => Ok(Solver::Wnnm),
            "nnm" => Ok(Solver::Nnm),
            other => Err(Error::invalid_param(format!("unknown solver '{other}'"))),
        }
    }
}

/// How the outer loop measures the change between successive estimates
/// before comparing it with `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopRule {
    /// `‖x_t − x_prev‖ / ‖x_prev‖`.
    #[default]
    NormRatio,
    /// `‖x_t − x_prev‖² / ‖x_prev‖²`.
    SquaredRatio,
}

impl StopRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopRule::NormRatio => "norm",
            StopRule::SquaredRatio => "squared",
        }
    }

    /// Convert a squared ratio into this rule's measure.
    pub fn measure(&self, squared_ratio: f64) -> f64 {
        match self {
            StopRule::NormRatio => squared_ratio.sqrt(),
            StopRule::SquaredRatio => squared_ratio,
        }
    }
}

impl std::str::FromStr for StopRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "norm" => Ok(StopRule::NormRatio),
            "squared" => Ok(StopRule::SquaredRatio),
            other => Err(Error::invalid_param(format!("unknown stop rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestoreParams {
    /// Noise standard deviation in intensity units.
    pub sigma_n: f64,
    pub side: usize,
    pub stride: usize,
    pub window: usize,
    pub group_size: usize,
    /// Relative-change stopping threshold.
    pub tau: f64,
    /// Weight scale.
    pub c: f64,
    /// Iterative-regularization step, in (0, 1].
    pub mu: f64,
    pub max_iter: usize,
    pub eps: f64,
    pub stop_rule: StopRule,
    pub solver: Solver,
    /// Fixed-order aggregation; results are bitwise independent of thread count.
    pub deterministic: bool,
    /// Scale applied to the per-iteration noise re-estimate.
    pub sigma_scale: f64,
    /// Lower bound on the per-iteration effective sigma.
    pub sigma_floor: f64,
}

impl RestoreParams {
    pub fn patch_spec(&self) -> PatchSpec {
        PatchSpec {
            side: self.side,
            stride: self.stride,
            window: self.window,
            group_size: self.group_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_n", self.sigma_n),
            ("tau", self.tau),
            ("c", self.c),
            ("eps", self.eps),
            ("sigma_scale", self.sigma_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid_param(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::invalid_param(format!("mu must lie in (0, 1], got {}", self.mu)));
        }
        if !(self.sigma_floor >= 0.0) || !self.sigma_floor.is_finite() {
            return Err(Error::invalid_param("sigma_floor must be finite and >= 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid_param("max_iter must be >= 1"));
        }
        if self.side == 0 || self.stride == 0 || self.window == 0 || self.group_size == 0 {
            return Err(Error::invalid_param("side, stride, window and group size must be positive"));
        }
        if self.window < self.side {
            return Err(Error::invalid_param("search window must be at least the patch side"));
        }
        Ok(())
    }
}

/// A parameter set chosen from the published bands, plus a warning when the
/// request fell outside them.
#[derive(Debug, Clone)]
pub struct Defaults {
    pub params: RestoreParams,
    pub warning: Option<String>,
}

/// Denoising defaults by noise band.
pub fn default_denoise_params(sigma_n: f64) -> Defaults {
    let mut warning = None;
    let s = if !(sigma_n > 0.0) || sigma_n > 100.0 {
        let clamped = if sigma_n > 100.0 { 100.0 } else { f64::MIN_POSITIVE };
        let msg = format!("sigma {sigma_n} outside (0, 100]; using the nearest parameter band");
        warn!("{msg}");
        warning = Some(msg);
        clamped
    } else {
        sigma_n
    };
    let side = match s {
        s if s <= 20.0 => 6,
        s if s <= 40.0 => 7,
        s if s <= 75.0 => 8,
        _ => 9,
    };
    let group_size = match s {
        s if s <= 40.0 => 60,
        s if s <= 50.0 => 70,
        s if s <= 75.0 => 80,
        _ => 100,
    };
    let (tau, c) = match s {
        s if s <= 20.0 => (0.0013, 0.65),
        s if s <= 30.0 => (0.001, 0.75),
        s if s <= 40.0 => (0.0012, 0.65),
        s if s <= 50.0 => (0.0013, 0.65),
        s if s <= 75.0 => (0.0017, 0.55),
        _ => (0.0019, 0.60),
    };
    let max_iter = match s {
        s if s <= 40.0 => 8,
        s if s <= 75.0 => 10,
        _ => 14,
    };
    Defaults {
        params: RestoreParams {
            sigma_n,
            side,
            stride: 4,
            window: 30,
            group_size,
            tau,
            c,
            mu: 0.1,
            max_iter,
            eps: 1e-16,
            stop_rule: StopRule::NormRatio,
            solver: Solver::Wnnm,
            deterministic: false,
            sigma_scale: DENOISE_SIGMA_SCALE,
            sigma_floor: 0.0,
        },
        warning,
    }
}

/// Scale of the per-iteration noise re-estimate in denoising.
pub const DENOISE_SIGMA_SCALE: f64 = 1.0;
/// Scale and floor of the residual-driven effective sigma in inpainting.
pub const INPAINT_SIGMA_SCALE: f64 = 1.0;
pub const INPAINT_SIGMA_FLOOR: f64 = 0.5;
/// Per-iteration decay of the annealed noise level in inpainting.
pub const INPAINT_SIGMA_DECAY: f64 = 0.9;

const INPAINT_BANDS: [(u32, f64, f64); 4] = [
    (80, 7.0e-5, 1.41),
    (70, 5.8e-5, 1.10),
    (60, 3.8e-5, 1.06),
    (50, 2.6e-5, 0.99),
];

/// Inpainting defaults by missing ratio; other ratios map to the nearest band
/// (ties go to the lower ratio) with a warning.
pub fn default_inpaint_params(missing_ratio: f64) -> Defaults {
    let percent = (missing_ratio * 100.0).round();
    let (band, tau, c) = INPAINT_BANDS
        .iter()
        .copied()
        .min_by(|a, b| {
            let da = (percent - a.0 as f64).abs();
            let db = (percent - b.0 as f64).abs();
            da.total_cmp(&db).then(a.0.cmp(&b.0))
        })
        .unwrap();
    let mut warning = None;
    if (missing_ratio - band as f64 / 100.0).abs() > 1e-9 {
        let msg = format!(
            "missing ratio {missing_ratio} is not one of 0.5/0.6/0.7/0.8; using the {band}% band"
        );
        warn!("{msg}");
        warning = Some(msg);
    }
    Defaults {
        params: RestoreParams {
            sigma_n: INPAINT_SIGMA_FLOOR,
            side: 7,
            stride: 2,
            window: 20,
            group_size: 60,
            tau,
            c,
            mu: 1.0,
            max_iter: 200,
            eps: 1e-16,
            stop_rule: StopRule::SquaredRatio,
            solver: Solver::Wnnm,
            deterministic: false,
            sigma_scale: INPAINT_SIGMA_SCALE,
            sigma_floor: INPAINT_SIGMA_FLOOR,
        },
        warning,
    }
}

/// Relative-change stopping rule `‖x_t − x_prev‖² / ‖x_prev‖² < τ`. A zero
/// previous iterate cannot be normalized and never stops the loop.
pub fn should_stop(x_t: &ImageBuffer, x_prev: &ImageBuffer, tau: f64) -> Result<bool> {
    match relative_change(x_t, x_prev)? {
        Some(r) => Ok(r < tau),
        None => {
            warn!("previous iterate is identically zero; relative change undefined");
            Ok(false)
        }
    }
}

/// `‖x_t − x_prev‖² / ‖x_prev‖²`, or `None` when `x_prev` is zero.
pub fn relative_change(x_t: &ImageBuffer, x_prev: &ImageBuffer) -> Result<Option<f64>> {
    if x_t.shape() != x_prev.shape() {
        return Err(Error::invalid_input("iterates differ in shape"));
    }
    let denom = x_prev.squared_norm();
    if denom == 0.0 {
        return Ok(None);
    }
    let num: f64 = x_t
        .pixels()
        .iter()
        .zip(x_prev.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(Some(num / denom))
}

#[derive(Debug, Clone, Default)]
pub struct RestoreReport {
    pub iterations_run: usize,
    /// Relative change of each iteration's output against the previous one.
    pub relative_changes: Vec<f64>,
    /// Noise level fed to the weights in each iteration.
    pub effective_sigmas: Vec<f64>,
    pub groups_processed: usize,
    /// Groups that had to be shrunk because the window held fewer than `k` candidates.
    pub truncated_groups: usize,
    pub converged: bool,
    pub wall_seconds: f64,
    pub warnings: Vec<String>,
}

/// Shrink one group with the configured solver; returns the estimate.
pub fn estimate_group(y: &GroupMatrix, sigma: f64, p: &RestoreParams) -> Result<GroupMatrix> {
    let f = svd_thin(y)?;
    let w = match p.solver {
        Solver::Wnnm => compute_weights(&f.values, sigma, p.c, p.eps, y.cols())?,
        Solver::Nnm => WeightVector::constant(nnm_lambda(sigma, y.cols()), f.len())?,
    };
    wnnm_shrink_factors(&f, &w)
}

fn process_exemplar(
    img: &ImageBuffer,
    pos: Position,
    spec: &PatchSpec,
    sigma: f64,
    p: &RestoreParams,
) -> Result<(GroupMatrix, GroupIndexSet)> {
    let idx = block_match(img, pos, spec)?;
    let group = form_group(img, &idx, spec.side)?;
    let est = estimate_group(&group, sigma, p).map_err(|e| e.at_exemplar(pos))?;
    Ok((est, idx))
}

/// One pass of group estimation over every exemplar of `img`, aggregated.
/// Returns the unclamped estimate and the number of truncated groups.
pub fn group_pass(img: &ImageBuffer, sigma: f64, p: &RestoreParams) -> Result<(ImageBuffer, usize, usize)> {
    let spec = p.patch_spec();
    let positions = exemplar_positions(img, &spec)?;
    let shape = img.shape();

    let (acc, truncated) = if p.deterministic {
        let mut acc = Accumulator::new(shape);
        let mut truncated = 0;
        for batch in positions.chunks(DETERMINISTIC_BATCH) {
            let done: Vec<(GroupMatrix, GroupIndexSet)> = batch
                .par_iter()
                .map(|&pos| process_exemplar(img, pos, &spec, sigma, p))
                .collect::<Result<_>>()?;
            for (g, idx) in &done {
                truncated += idx.truncated as usize;
                acc.add_group(g, idx, spec.side)?;
            }
        }
        (acc, truncated)
    } else {
        positions
            .par_iter()
            .try_fold(
                || (Accumulator::new(shape), 0usize),
                |(mut acc, t), &pos| {
                    let (g, idx) = process_exemplar(img, pos, &spec, sigma, p)?;
                    acc.add_group(&g, &idx, spec.side)?;
                    Ok::<_, Error>((acc, t + idx.truncated as usize))
                },
            )
            .try_reduce(
                || (Accumulator::new(shape), 0usize),
                |(a, ta), (b, tb)| Ok((a.merge(&b), ta + tb)),
            )?
    };
    Ok((acc.finish()?, positions.len(), truncated))
}

fn check_image(img: &ImageBuffer, p: &RestoreParams) -> Result<()> {
    p.validate()?;
    p.patch_spec().validate(img.shape())
}

/// Denoise `y` observed under additive Gaussian noise of level `p.sigma_n`.
///
/// The first pass uses `sigma_n`; later passes use the re-estimated level
/// `sigma_scale · sqrt(|σ_n² − mean((y − y_t)²)|)` of the regularized input `y_t`.
pub fn denoise(y: &ImageBuffer, p: &RestoreParams) -> Result<(ImageBuffer, RestoreReport)> {
    check_image(y, p)?;
    let start = Instant::now();
    let mut report = RestoreReport::default();
    let n = y.len() as f64;
    let mut x_hat = y.clone();

    for t in 1..=p.max_iter {
        let mut y_t = x_hat.clone();
        for (v, (&obs, &est)) in y_t.pixels_mut().iter_mut().zip(y.pixels().iter().zip(x_hat.pixels())) {
            *v = est + p.mu * (obs - est);
        }
        let sigma = if t == 1 {
            p.sigma_n
        } else {
            let drift: f64 = y
                .pixels()
                .iter()
                .zip(y_t.pixels())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / n;
            (p.sigma_scale * (p.sigma_n * p.sigma_n - drift).abs().sqrt()).max(p.sigma_floor)
        };
        let sigma = if sigma > 0.0 { sigma } else { p.sigma_n };

        let (est, groups, truncated) = group_pass(&y_t, sigma, p)?;
        let est = est.clamped();
        report.groups_processed += groups;
        report.truncated_groups += truncated;
        report.effective_sigmas.push(sigma);
        let change = relative_change(&est, &x_hat)?.map(|r| p.stop_rule.measure(r));
        report.relative_changes.push(change.unwrap_or(f64::INFINITY));
        report.iterations_run = t;
        debug!("denoise iter {t}: sigma {sigma:.4}, change {change:?}");
        let stop = matches!(change, Some(r) if r < p.tau);
        x_hat = est;
        if stop {
            report.converged = true;
            break;
        }
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((x_hat, report))
}

/// Fill the missing pixels of `y` (zero on input) using the observed ones.
///
/// Each pass sets `y_t = x̂ + μ·Hᵀ(y − H·x̂)`. The weights see an effective
/// noise level that starts at the error of the zero-filled input, decays by
/// [`INPAINT_SIGMA_DECAY`] per pass, and never drops below the residual on
/// observed pixels (or `sigma_floor`). Observed pixels of the result are not
/// reset to `y`.
pub fn inpaint(y: &ImageBuffer, mask: &MaskBuffer, p: &RestoreParams) -> Result<(ImageBuffer, RestoreReport)> {
    check_image(y, p)?;
    if mask.shape() != y.shape() {
        return Err(Error::invalid_input(format!(
            "mask is {:?}, image is {:?}",
            mask.shape(),
            y.shape()
        )));
    }
    let observed = mask.observed_count();
    if observed == 0 {
        return Err(Error::invalid_input("mask has no observed pixels"));
    }
    let start = Instant::now();
    let mut report = RestoreReport::default();
    let flags = mask.flags();
    let mut x_hat = y.clone();
    let sigma0 = initial_inpaint_sigma(y, mask, p);
    let mut sigma = sigma0;
    // The stop rule only applies once the annealed level has reached the
    // residual-driven one; before that each pass is still under-fitted.
    let mut annealing = true;

    for t in 1..=p.max_iter {
        let mut y_t = x_hat.clone();
        for (i, v) in y_t.pixels_mut().iter_mut().enumerate() {
            if flags[i] {
                let est = x_hat.pixels()[i];
                *v = est + p.mu * (y.pixels()[i] - est);
            }
        }
        let (est, groups, truncated) = group_pass(&y_t, sigma, p)?;
        let est = est.clamped();
        report.groups_processed += groups;
        report.truncated_groups += truncated;
        report.effective_sigmas.push(sigma);
        let change = relative_change(&est, &x_hat)?.map(|r| p.stop_rule.measure(r));
        report.relative_changes.push(change.unwrap_or(f64::INFINITY));
        report.iterations_run = t;
        debug!("inpaint iter {t}: sigma {sigma:.4}, change {change:?}");
        let stop = !annealing && matches!(change, Some(r) if r < p.tau);
        x_hat = est;
        if stop {
            report.converged = true;
            break;
        }
        let annealed = sigma0 * INPAINT_SIGMA_DECAY.powi(t as i32);
        let residual = observed_residual_sigma(y, &x_hat, flags, p);
        annealing = annealed > residual;
        sigma = annealed.max(residual);
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((x_hat, report))
}

/// `max(scale · RMS over observed pixels of (y − x), floor)`.
fn observed_residual_sigma(y: &ImageBuffer, x: &ImageBuffer, flags: &[bool], p: &RestoreParams) -> f64 {
    let (sum, count) = y
        .pixels()
        .iter()
        .zip(x.pixels())
        .zip(flags)
        .filter(|(_, &o)| o)
        .fold((0.0, 0usize), |(s, c), ((a, b), _)| (s + (a - b) * (a - b), c + 1));
    (p.sigma_scale * (sum / count as f64).sqrt()).max(p.sigma_floor)
}

/// The starting estimate is `y` itself, whose observed residual is zero. The
/// first pass uses the RMS error of that zero-filled start instead, estimated
/// from the observed energy and the missing fraction.
fn initial_inpaint_sigma(y: &ImageBuffer, mask: &MaskBuffer, p: &RestoreParams) -> f64 {
    let observed = mask.observed_count() as f64;
    let energy: f64 = y
        .pixels()
        .iter()
        .zip(mask.flags())
        .filter(|(_, &o)| o)
        .map(|(&v, _)| v * v)
        .sum::<f64>()
        / observed;
    let missing = mask.missing_count() as f64 / y.len() as f64;
    (p.sigma_scale * (missing * energy).sqrt()).max(p.sigma_floor)
}
