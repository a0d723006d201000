//! Patch extraction, nonlocal block matching and overlap-averaging aggregation.
//!
//! Patches are addressed by their top-left pixel. A group stacks `k` patches
//! as columns of an `side² × k` matrix, each patch vectorized column-major.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::lowrank::GroupMatrix;

pub type Position = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSpec {
    /// Patch side length `√m`.
    pub side: usize,
    /// Step between exemplar patches.
    pub stride: usize,
    /// Search window side `L`, in pixels.
    pub window: usize,
    /// Group size `k`.
    pub group_size: usize,
}

impl PatchSpec {
    pub fn validate(&self, shape: (usize, usize)) -> Result<()> {
        let (h, w) = shape;
        if self.side == 0 || self.stride == 0 || self.window == 0 || self.group_size == 0 {
            return Err(Error::invalid_param(format!(
                "patch side, stride, window and group size must all be positive: {self:?}"
            )));
        }
        if self.side > h.min(w) {
            return Err(Error::invalid_input(format!(
                "patch side {} exceeds image size {h}x{w}",
                self.side
            )));
        }
        if self.stride > self.side {
            return Err(Error::invalid_param(format!(
                "stride {} exceeds patch side {}; patches would leave gaps",
                self.stride, self.side
            )));
        }
        if self.window < self.side {
            return Err(Error::invalid_param(format!(
                "search window {} smaller than patch side {}",
                self.window, self.side
            )));
        }
        Ok(())
    }

    pub fn patch_len(&self) -> usize {
        self.side * self.side
    }
}

/// The members of one group: positions ordered by ascending distance to the
/// exemplar, which is always member 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupIndexSet {
    pub ref_pos: Position,
    pub members: Vec<Position>,
    pub distances: Vec<f64>,
    /// Set when the window held fewer than `k` candidates and the group was shrunk.
    pub truncated: bool,
}

impl GroupIndexSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn axis_positions(extent: usize, side: usize, stride: usize) -> Vec<usize> {
    let last = extent - side;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().unwrap() != last {
        out.push(last);
    }
    out
}

/// Exemplar positions in raster order at the given stride; the last valid row
/// and column are always included so every pixel is covered.
pub fn exemplar_positions(img: &ImageBuffer, spec: &PatchSpec) -> Result<Vec<Position>> {
    spec.validate(img.shape())?;
    let rows = axis_positions(img.height(), spec.side, spec.stride);
    let cols = axis_positions(img.width(), spec.side, spec.stride);
    Ok(rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
        .collect())
}

/// Inclusive range of candidate top-left coordinates along one axis. The
/// `L`-pixel window is centred on the exemplar and shifted back inside the
/// image at the borders.
fn window_range(pos: usize, extent: usize, side: usize, window: usize) -> (usize, usize) {
    if window >= extent {
        return (0, extent - side);
    }
    let centre = pos + side / 2;
    let start = centre.saturating_sub(window / 2).min(extent - window);
    (start, start + window - side)
}

/// Squared Euclidean distance between two patches.
#[inline]
pub fn patch_distance(img: &ImageBuffer, a: Position, b: Position, side: usize) -> f64 {
    let mut acc = 0.0;
    for r in 0..side {
        let pa = img.row_span(a.0 + r, a.1, side);
        let pb = img.row_span(b.0 + r, b.1, side);
        for (x, y) in pa.iter().zip(pb) {
            let d = x - y;
            acc += d * d;
        }
    }
    acc
}

/// The `k` most similar patches to the exemplar at `ref_pos` within its
/// search window. Ties are broken by raster order.
pub fn block_match(img: &ImageBuffer, ref_pos: Position, spec: &PatchSpec) -> Result<GroupIndexSet> {
    spec.validate(img.shape())?;
    let side = spec.side;
    let (h, w) = img.shape();
    if ref_pos.0 + side > h || ref_pos.1 + side > w {
        return Err(Error::invalid_input(format!(
            "exemplar {ref_pos:?} does not fit a {side}x{side} patch in a {h}x{w} image"
        )));
    }
    let (r0, r1) = window_range(ref_pos.0, h, side, spec.window);
    let (c0, c1) = window_range(ref_pos.1, w, side, spec.window);

    let mut candidates: Vec<(f64, Position)> = Vec::with_capacity((r1 - r0 + 1) * (c1 - c0 + 1));
    for r in r0..=r1 {
        for c in c0..=c1 {
            if (r, c) == ref_pos {
                continue;
            }
            candidates.push((patch_distance(img, ref_pos, (r, c), side), (r, c)));
        }
    }

    // Candidates are generated in raster order, so (distance, position) is the
    // required total order.
    let by_distance = |a: &(f64, Position), b: &(f64, Position)| -> Ordering {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    };
    let wanted = spec.group_size - 1;
    let truncated = candidates.len() < wanted;
    let take = wanted.min(candidates.len());
    if take > 0 && take < candidates.len() {
        candidates.select_nth_unstable_by(take - 1, by_distance);
    }
    candidates.truncate(take);
    candidates.sort_by(by_distance);

    let mut members = Vec::with_capacity(take + 1);
    let mut distances = Vec::with_capacity(take + 1);
    members.push(ref_pos);
    distances.push(0.0);
    for (d, p) in candidates {
        members.push(p);
        distances.push(d);
    }
    Ok(GroupIndexSet {
        ref_pos,
        members,
        distances,
        truncated,
    })
}

/// Stack the members of `idx` as columns of a `side² × k` group matrix.
pub fn form_group(img: &ImageBuffer, idx: &GroupIndexSet, side: usize) -> Result<GroupMatrix> {
    let (h, w) = img.shape();
    let m = side * side;
    let mut data = Vec::with_capacity(m * idx.len());
    for &(pr, pc) in &idx.members {
        if pr + side > h || pc + side > w {
            return Err(Error::invalid_input(format!(
                "patch at ({pr}, {pc}) leaves the {h}x{w} image"
            )));
        }
        for c in 0..side {
            for r in 0..side {
                data.push(img.get(pr + r, pc + c));
            }
        }
    }
    GroupMatrix::from_column_major(m, idx.len(), data)
}

/// Running sums for overlap averaging.
#[derive(Debug, Clone)]
pub struct Accumulator {
    height: usize,
    width: usize,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl Accumulator {
    pub fn new(shape: (usize, usize)) -> Self {
        let n = shape.0 * shape.1;
        Accumulator {
            height: shape.0,
            width: shape.1,
            sum: vec![0.0; n],
            count: vec![0; n],
        }
    }

    pub fn add_group(&mut self, group: &GroupMatrix, idx: &GroupIndexSet, side: usize) -> Result<()> {
        if group.cols() != idx.len() || group.rows() != side * side {
            return Err(Error::Internal(format!(
                "group is {}x{}, index set has {} members of side {side}",
                group.rows(),
                group.cols(),
                idx.len()
            )));
        }
        for (j, &(pr, pc)) in idx.members.iter().enumerate() {
            if pr + side > self.height || pc + side > self.width {
                return Err(Error::Internal(format!("patch at ({pr}, {pc}) out of bounds")));
            }
            let col = group.column(j);
            for c in 0..side {
                for r in 0..side {
                    let at = (pr + r) * self.width + pc + c;
                    self.sum[at] += col[c * side + r];
                    self.count[at] += 1;
                }
            }
        }
        Ok(())
    }

    /// Element-wise sum of two accumulators; addition order matters for bitwise
    /// reproducibility, so callers that need it must merge in a fixed order.
    pub fn merge(mut self, other: &Accumulator) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.count.iter_mut().zip(&other.count) {
            *a += b;
        }
        self
    }

    pub fn finish(self) -> Result<ImageBuffer> {
        if let Some(i) = self.count.iter().position(|&c| c == 0) {
            return Err(Error::Internal(format!(
                "pixel ({}, {}) not covered by any patch",
                i / self.width,
                i % self.width
            )));
        }
        let pixels = self
            .sum
            .iter()
            .zip(&self.count)
            .map(|(s, &c)| s / c as f64)
            .collect();
        ImageBuffer::new(self.height, self.width, pixels)
    }
}

/// Average all patch contributions per pixel with uniform weights.
pub fn aggregate(
    groups: &[GroupMatrix],
    index_sets: &[GroupIndexSet],
    shape: (usize, usize),
    side: usize,
) -> Result<ImageBuffer> {
    if groups.len() != index_sets.len() {
        return Err(Error::Internal(format!(
            "{} groups but {} index sets",
            groups.len(),
            index_sets.len()
        )));
    }
    let mut acc = Accumulator::new(shape);
    for (g, idx) in groups.iter().zip(index_sets) {
        acc.add_group(g, idx, side)?;
    }
    acc.finish()
}
