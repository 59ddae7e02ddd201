//! Dense patch sampling and 128-dimensional SIFT descriptors.
//!
//! Patches are sampled on a regular grid with no keypoint detection and no
//! dominant-orientation alignment. Each patch is split into 4x4 spatial
//! bins; each bin accumulates an 8-bin orientation histogram weighted by
//! gradient magnitude, with linear interpolation across orientation bins
//! only (no spatial interpolation, no Gaussian weighting). The concatenated
//! 128-vector is L2-normalized, clipped at 0.2 and re-normalized. A patch
//! with zero gradient everywhere yields the all-zero vector.

use crate::error::{Error, Result};
use crate::image_core::GradientField;

pub const DESCRIPTOR_LEN: usize = 128;
pub const CLIP_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseSamplingParams {
    /// Pixels between patch anchors.
    pub step: usize,
    /// Patch side in pixels; must be a positive multiple of 4.
    pub patch: usize,
}

impl Default for DenseSamplingParams {
    fn default() -> Self {
        DenseSamplingParams { step: 8, patch: 16 }
    }
}

impl DenseSamplingParams {
    pub fn validate(&self) -> bool {
        self.step >= 1 && self.patch >= 4 && self.patch % 4 == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiftDescriptor {
    pub values: Vec<f64>,
    /// Patch top-left pixel.
    pub anchor: (usize, usize),
    /// Patch center pixel, used for pyramid cell membership.
    pub center: (usize, usize),
}

/// Anchors `(x, y)` of all patches that fit, row-major. Empty when the
/// image is smaller than the patch.
pub fn dense_grid(width: usize, height: usize, params: &DenseSamplingParams) -> Vec<(usize, usize)> {
    debug_assert!(params.validate());
    if width < params.patch || height < params.patch {
        return Vec::new();
    }
    let mut anchors = Vec::new();
    let mut y = 0;
    while y + params.patch <= height {
        let mut x = 0;
        while x + params.patch <= width {
            anchors.push((x, y));
            x += params.step;
        }
        y += params.step;
    }
    anchors
}

/// Orientation histogram vote: magnitude split linearly between the two
/// nearest 45-degree bins. Bin centers sit at (b + 0.5) * 45 degrees.
#[inline]
fn orientation_vote(theta: f64, magnitude: f64, hist: &mut [f64; 8]) {
    let c = theta / 45.0 - 0.5;
    let lower = c.floor();
    let frac = c - lower;
    let b0 = lower.rem_euclid(8.0) as usize;
    let b1 = (b0 + 1) % 8;
    hist[b0] += magnitude * (1.0 - frac);
    hist[b1] += magnitude * frac;
}

/// SIFT descriptor for the `patch`-sided square anchored at `anchor`.
pub fn sift_descriptor(
    grad: &GradientField,
    anchor: (usize, usize),
    patch: usize,
) -> Result<SiftDescriptor> {
    let (ax, ay) = anchor;
    if ax + patch > grad.width || ay + patch > grad.height {
        return Err(Error::PatchOutOfBounds {
            x: ax,
            y: ay,
            patch,
            width: grad.width,
            height: grad.height,
        });
    }
    let bin_side = patch / 4;
    let mut hists = [[0.0f64; 8]; 16];
    for dy in 0..patch {
        for dx in 0..patch {
            let i = grad.idx(ax + dx, ay + dy);
            let m = grad.magnitude[i];
            if m == 0.0 {
                continue;
            }
            let spatial = (dy / bin_side) * 4 + dx / bin_side;
            orientation_vote(grad.orientation[i], m, &mut hists[spatial]);
        }
    }
    let mut values: Vec<f64> = hists.iter().flatten().copied().collect();
    l2_normalize(&mut values);
    // clip and renormalize until stable, so both the unit norm and the
    // clip ceiling hold in the returned descriptor
    for _ in 0..100 {
        if values.iter().all(|&v| v <= CLIP_THRESHOLD + 1e-9) {
            break;
        }
        for v in values.iter_mut() {
            if *v > CLIP_THRESHOLD {
                *v = CLIP_THRESHOLD;
            }
        }
        l2_normalize(&mut values);
    }
    Ok(SiftDescriptor {
        values,
        anchor,
        center: (ax + patch / 2, ay + patch / 2),
    })
}

fn l2_normalize(values: &mut [f64]) {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in values.iter_mut() {
            *v /= norm;
        }
    }
}

/// All descriptors of the dense grid over `grad`, in grid order.
pub fn dense_descriptors(
    grad: &GradientField,
    params: &DenseSamplingParams,
) -> Result<Vec<SiftDescriptor>> {
    dense_grid(grad.width, grad.height, params)
        .into_iter()
        .map(|anchor| sift_descriptor(grad, anchor, params.patch))
        .collect()
}
