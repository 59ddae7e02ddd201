//! Image decoding and the pixel-level primitives every descriptor consumes:
//! grayscale, HSV conversion, gradients, edges.
//!
//! All operations here are pure functions of their inputs and safe to call
//! concurrently.

use std::path::Path;

use crate::error::{Error, Result};

/// Decoded 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// `width * height * 3` bytes, R,G,B interleaved.
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1);
        assert_eq!(pixels.len(), width * height * 3);
        RgbImage { width, height, pixels }
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> (u8, u8, u8) {
        let i = (y * self.width + x) * 3;
        (self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }
}

/// Luminance image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl GrayImage {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Value at `(x, y)` with replicate padding outside the frame.
    #[inline]
    pub fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.at(x, y)
    }
}

/// Per-pixel horizontal/vertical derivatives plus derived magnitude and
/// orientation (degrees in `[0, 360)`).
#[derive(Debug, Clone)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

impl GradientField {
    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }
}

/// Binary edge mask from the Canny detector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
}

impl EdgeMap {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }
}

/// Decode a PNG or JPEG file. Grayscale sources expand to R=G=B.
pub fn load_image(path: &Path) -> Result<RgbImage> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let reader = image::ImageReader::open(path)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?
        .with_guessed_format()
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    match reader.format() {
        Some(image::ImageFormat::Png) | Some(image::ImageFormat::Jpeg) => {}
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
    let img = reader
        .decode()
        .map_err(|_| Error::CorruptImage(path.to_path_buf()))?
        .into_rgb8();
    let (w, h) = img.dimensions();
    Ok(RgbImage::new(w as usize, h as usize, img.into_raw()))
}

/// ITU-R 601 luma: `(0.299 R + 0.587 G + 0.114 B) / 255`.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let values = img
        .pixels
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
        .collect();
    GrayImage { width: img.width, height: img.height, values }
}

/// Standard hexcone RGB -> HSV. Returns `(h in [0,360), s in [0,1], v in [0,1])`;
/// hue is 0 for achromatic pixels.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let rf = r as f64 / 255.0;
    let gf = g as f64 / 255.0;
    let bf = b as f64 / 255.0;
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return (0.0, 0.0, v);
    }
    let mut h = if max == rf {
        60.0 * ((gf - bf) / delta)
    } else if max == gf {
        60.0 * ((bf - rf) / delta + 2.0)
    } else {
        60.0 * ((rf - gf) / delta + 4.0)
    };
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h = 0.0;
    }
    (h, s, v)
}

#[inline]
fn orientation_deg(gx: f64, gy: f64) -> f64 {
    let mut deg = gy.atan2(gx).to_degrees();
    if deg < 0.0 {
        deg += 360.0;
    }
    if deg >= 360.0 {
        deg = 0.0;
    }
    deg
}

/// 3x3 Sobel gradients with replicate border padding.
pub fn sobel_gradients(img: &GrayImage) -> Result<GradientField> {
    if img.width < 3 || img.height < 3 {
        return Err(Error::ImageTooSmall { width: img.width, height: img.height, min: 3 });
    }
    let (w, h) = (img.width, img.height);
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let mut magnitude = vec![0.0; w * h];
    let mut orientation = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| img.at_clamped(x + dx, y + dy);
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let i = y as usize * w + x as usize;
            gx[i] = sx;
            gy[i] = sy;
            magnitude[i] = (sx * sx + sy * sy).sqrt();
            orientation[i] = orientation_deg(sx, sy);
        }
    }
    Ok(GradientField { width: w, height: h, gx, gy, magnitude, orientation })
}

/// 5x5 Gaussian smoothing, sigma = 1.0, replicate border.
fn gaussian_smooth(img: &GrayImage) -> GrayImage {
    let sigma = 1.0f64;
    let mut kernel = [0.0f64; 5];
    for (i, k) in kernel.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *k = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let norm: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= norm;
    }
    let (w, h) = (img.width, img.height);
    // separable: horizontal then vertical pass
    let mut tmp = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                acc += k * img.at_clamped(x + i as isize - 2, y);
            }
            tmp[y as usize * w + x as usize] = acc;
        }
    }
    let tmp_img = GrayImage { width: w, height: h, values: tmp };
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                acc += k * tmp_img.at_clamped(x, y + i as isize - 2);
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    GrayImage { width: w, height: h, values: out }
}

/// Canny edge detection: Gaussian smoothing (sigma 1.0, 5x5), Sobel
/// gradients, non-maximum suppression, hysteresis. `low` and `high` are
/// fractions of the maximum gradient magnitude.
pub fn canny_edges(img: &GrayImage, low: f64, high: f64) -> Result<EdgeMap> {
    if !(0.0..1.0).contains(&low) || !(low < high && high <= 1.0) {
        return Err(Error::InvalidThresholds { low, high });
    }
    if img.width < 3 || img.height < 3 {
        return Err(Error::ImageTooSmall { width: img.width, height: img.height, min: 3 });
    }
    let smoothed = gaussian_smooth(img);
    let grad = sobel_gradients(&smoothed)?;
    let (w, h) = (img.width, img.height);

    let max_mag = grad.magnitude.iter().cloned().fold(0.0f64, f64::max);
    if max_mag == 0.0 {
        return Ok(EdgeMap { width: w, height: h, mask: vec![false; w * h] });
    }
    let low_t = low * max_mag;
    let high_t = high * max_mag;

    // non-maximum suppression along the quantized gradient direction
    let mut nms = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = grad.magnitude[i];
            if m == 0.0 {
                continue;
            }
            let theta = grad.orientation[i] % 180.0;
            let (dx, dy): (isize, isize) = if theta < 22.5 || theta >= 157.5 {
                (1, 0)
            } else if theta < 67.5 {
                (1, 1)
            } else if theta < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let sample = |dx: isize, dy: isize| -> f64 {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    0.0
                } else {
                    grad.magnitude[ny as usize * w + nx as usize]
                }
            };
            if m >= sample(dx, dy) && m >= sample(-dx, -dy) {
                nms[i] = m;
            }
        }
    }

    // hysteresis: strong pixels seed, weak pixels join if 8-connected
    let mut mask = vec![false; w * h];
    let mut stack = Vec::new();
    for i in 0..w * h {
        if nms[i] >= high_t && !mask[i] {
            mask[i] = true;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (cx, cy) = (j % w, j / w);
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = cx as isize + dx;
                        let ny = cy as isize + dy;
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let n = ny as usize * w + nx as usize;
                        if !mask[n] && nms[n] >= low_t {
                            mask[n] = true;
                            stack.push(n);
                        }
                    }
                }
            }
        }
    }
    Ok(EdgeMap { width: w, height: h, mask })
}
