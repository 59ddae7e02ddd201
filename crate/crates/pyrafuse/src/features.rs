//! The three pyramid feature vectors: PHOW (visual words), PHOC (HSV
//! color) and PHOG (oriented gradients on contour edges).
//!
//! All three share the same quad-tree geometry and level weight schedule
//! from [`crate::pyramid`]. Levels are concatenated in order 0..=L, cells
//! row-major within a level.

use crate::codebook::{assign, Codebook};
use crate::dense_sift::{dense_descriptors, DenseSamplingParams};
use crate::error::{Error, Result};
use crate::image_core::{
    canny_edges, rgb_to_hsv, sobel_gradients, to_grayscale, EdgeMap, GradientField, RgbImage,
};
use crate::pyramid::{cell_index, cell_rects, level_weight, pyramid_dim, CellRect, PyramidParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Phow,
    Phoc,
    Phog,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::Phow, FeatureKind::Phoc, FeatureKind::Phog];

    pub fn name(&self) -> &'static str {
        match self {
            FeatureKind::Phow => "phow",
            FeatureKind::Phoc => "phoc",
            FeatureKind::Phog => "phog",
        }
    }
}

/// A tagged, weighted, concatenated pyramid histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
    /// Start index of each level's block within `values`.
    pub level_offsets: Vec<usize>,
}

/// HSV quantization grid. Defaults 8/3/3 give 72 bins per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColorQuantParams {
    pub h_bins: usize,
    pub s_bins: usize,
    pub v_bins: usize,
}

impl Default for ColorQuantParams {
    fn default() -> Self {
        ColorQuantParams { h_bins: 8, s_bins: 3, v_bins: 3 }
    }
}

impl ColorQuantParams {
    pub fn total_bins(&self) -> usize {
        self.h_bins * self.s_bins * self.v_bins
    }
}

/// Gradient-orientation quantization for PHOG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationRange {
    Full360,
    Half180,
}

impl OrientationRange {
    pub fn span(&self) -> f64 {
        match self {
            OrientationRange::Full360 => 360.0,
            OrientationRange::Half180 => 180.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrientationParams {
    pub k_bins: usize,
    pub range: OrientationRange,
}

impl Default for OrientationParams {
    fn default() -> Self {
        OrientationParams { k_bins: 20, range: OrientationRange::Full360 }
    }
}

/// Flat HSV bin index: `h_bin * (s_bins*v_bins) + s_bin * v_bins + v_bin`,
/// each sub-index `min(floor(value/width), bins-1)` over uniform widths.
pub fn hsv_bin_index(h: f64, s: f64, v: f64, params: &ColorQuantParams) -> usize {
    let sub = |value: f64, range: f64, bins: usize| -> usize {
        let width = range / bins as f64;
        ((value / width) as usize).min(bins - 1)
    };
    let hb = sub(h, 360.0, params.h_bins);
    let sb = sub(s, 1.0, params.s_bins);
    let vb = sub(v, 1.0, params.v_bins);
    hb * (params.s_bins * params.v_bins) + sb * params.v_bins + vb
}

/// PHOC: per level and cell, count pixels per HSV bin, scale by
/// `level_weight(l, L) / N` with `N` the whole-image pixel count.
/// Total L1 mass is 1 for every image.
pub fn build_phoc(
    img: &RgbImage,
    pyr: &PyramidParams,
    q: &ColorQuantParams,
) -> Result<FeatureVector> {
    let bins = q.total_bins();
    let n_total = (img.width * img.height) as f64;
    // quantize once, then histogram per level
    let mut bin_of: Vec<usize> = Vec::with_capacity(img.width * img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let (r, g, b) = img.rgb(x, y);
            let (h, s, v) = rgb_to_hsv(r, g, b);
            bin_of.push(hsv_bin_index(h, s, v, q));
        }
    }
    let mut values = Vec::with_capacity(pyramid_dim(bins, pyr.levels));
    let mut level_offsets = Vec::with_capacity(pyr.levels as usize + 1);
    for l in 0..=pyr.levels {
        level_offsets.push(values.len());
        let cells = cell_rects(img.width, img.height, l)?;
        let weight = level_weight(l, pyr.levels)?;
        for cell in &cells {
            let mut hist = vec![0usize; bins];
            for y in cell.y0..cell.y1 {
                for x in cell.x0..cell.x1 {
                    hist[bin_of[y * img.width + x]] += 1;
                }
            }
            values.extend(hist.into_iter().map(|c| weight * c as f64 / n_total));
        }
    }
    Ok(FeatureVector { kind: FeatureKind::Phoc, values, level_offsets })
}

/// Orientation histogram of the edge pixels inside `cell`: each edge pixel
/// adds its gradient magnitude to the bin containing its orientation.
pub fn orientation_histogram(
    grad: &GradientField,
    edges: &EdgeMap,
    cell: &CellRect,
    params: &OrientationParams,
) -> Vec<f64> {
    let span = params.range.span();
    let width = span / params.k_bins as f64;
    let mut hist = vec![0.0f64; params.k_bins];
    for y in cell.y0..cell.y1 {
        for x in cell.x0..cell.x1 {
            if !edges.at(x, y) {
                continue;
            }
            let i = grad.idx(x, y);
            let mut theta = grad.orientation[i];
            if let OrientationRange::Half180 = params.range {
                theta %= 180.0;
            }
            let bin = ((theta / width) as usize) % params.k_bins;
            hist[bin] += grad.magnitude[i];
        }
    }
    hist
}

/// PHOG: Canny edges and Sobel gradients on the grayscale image, per-cell
/// orientation histograms, each level's block L1-normalized then scaled by
/// its level weight. An all-zero level stays all-zero.
pub fn build_phog(
    img: &RgbImage,
    pyr: &PyramidParams,
    params: &OrientationParams,
    canny_low: f64,
    canny_high: f64,
) -> Result<FeatureVector> {
    // surface a level error before the size-3 floor does
    cell_rects(img.width, img.height, pyr.levels)?;
    let gray = to_grayscale(img);
    let grad = sobel_gradients(&gray)?;
    let edges = canny_edges(&gray, canny_low, canny_high)?;

    let mut values = Vec::with_capacity(pyramid_dim(params.k_bins, pyr.levels));
    let mut level_offsets = Vec::with_capacity(pyr.levels as usize + 1);
    for l in 0..=pyr.levels {
        level_offsets.push(values.len());
        let start = values.len();
        for cell in cell_rects(img.width, img.height, l)? {
            values.extend(orientation_histogram(&grad, &edges, &cell, params));
        }
        let mass: f64 = values[start..].iter().sum();
        if mass > 0.0 {
            let scale = level_weight(l, pyr.levels)? / mass;
            for v in values[start..].iter_mut() {
                *v *= scale;
            }
        }
    }
    Ok(FeatureVector { kind: FeatureKind::Phog, values, level_offsets })
}

/// PHOW: dense SIFT descriptors quantized against the codebook; per level
/// and cell, histogram the words of descriptors whose patch center lies in
/// the cell; each level's block is divided by the total descriptor count
/// then scaled by its level weight.
pub fn build_phow(
    img: &RgbImage,
    codebook: &Codebook,
    pyr: &PyramidParams,
    samp: &DenseSamplingParams,
) -> Result<FeatureVector> {
    cell_rects(img.width, img.height, pyr.levels)?;
    let gray = to_grayscale(img);
    let grad = sobel_gradients(&gray)?;
    let descriptors = dense_descriptors(&grad, samp)?;
    if descriptors.is_empty() {
        return Err(Error::NoPatchesFit { width: img.width, height: img.height });
    }
    let words: Vec<(usize, (usize, usize))> = descriptors
        .iter()
        .map(|d| (assign(codebook, &d.values), d.center))
        .collect();
    let v = codebook.words();
    let total = words.len() as f64;

    let mut values = Vec::with_capacity(pyramid_dim(v, pyr.levels));
    let mut level_offsets = Vec::with_capacity(pyr.levels as usize + 1);
    for l in 0..=pyr.levels {
        level_offsets.push(values.len());
        let cells = 1usize << (2 * l);
        let mut hists = vec![0usize; cells * v];
        for &(word, (cx, cy)) in &words {
            let cell = cell_index(img.width, img.height, l, cx, cy);
            hists[cell * v + word] += 1;
        }
        let weight = level_weight(l, pyr.levels)?;
        values.extend(hists.into_iter().map(|c| weight * c as f64 / total));
    }
    Ok(FeatureVector { kind: FeatureKind::Phow, values, level_offsets })
}
