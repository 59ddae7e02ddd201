//! Independent oracle implementations checking the library against
//! straight-line reference computations.

use pyrafuse::codebook::{assign, kmeanspp_init, lloyd, Codebook};
use pyrafuse::dense_sift::{dense_descriptors, sift_descriptor, DenseSamplingParams};
use pyrafuse::features::{
    build_phow, orientation_histogram, OrientationParams, OrientationRange,
};
use pyrafuse::image_core::{
    canny_edges, sobel_gradients, EdgeMap, GradientField, GrayImage, RgbImage,
};
use pyrafuse::pyramid::{cell_rects, level_weight, PyramidParams};
use pyrafuse::svm::{decision, smo_train, KernelSpec};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gray(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> GrayImage {
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            values.push(f(x, y));
        }
    }
    GrayImage { width, height, values }
}

// ---------------------------------------------------------------------------
// SIFT descriptor oracle: loop over every pixel of the patch, apply the
// binning rules directly, then normalize/clip/renormalize to a fixed point.

fn sift_oracle(grad: &GradientField, anchor: (usize, usize), patch: usize) -> Vec<f64> {
    let mut desc = vec![0.0f64; 128];
    let bin_side = patch / 4;
    for dy in 0..patch {
        for dx in 0..patch {
            let (x, y) = (anchor.0 + dx, anchor.1 + dy);
            let i = y * grad.width + x;
            let m = grad.magnitude[i];
            if m == 0.0 {
                continue;
            }
            let theta = grad.orientation[i];
            let row = dy / bin_side;
            let col = dx / bin_side;
            // orientation vote split between the two bins whose centers
            // (b + 0.5) * 45 bracket theta
            let c = theta / 45.0 - 0.5;
            let lower = c.floor();
            let frac = c - lower;
            let b0 = lower.rem_euclid(8.0) as usize;
            let b1 = (b0 + 1) % 8;
            let base = (row * 4 + col) * 8;
            desc[base + b0] += m * (1.0 - frac);
            desc[base + b1] += m * frac;
        }
    }
    let normalize = |d: &mut Vec<f64>| {
        let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            for v in d.iter_mut() {
                *v /= n;
            }
        }
    };
    normalize(&mut desc);
    for _ in 0..100 {
        if desc.iter().all(|&v| v <= 0.2 + 1e-9) {
            break;
        }
        for v in desc.iter_mut() {
            *v = v.min(0.2);
        }
        normalize(&mut desc);
    }
    desc
}

#[test]
fn sift_step_edge_matches_oracle() {
    let img = gray(16, 16, |x, _| if x < 8 { 0.0 } else { 1.0 });
    let grad = sobel_gradients(&img).unwrap();
    let d = sift_descriptor(&grad, (0, 0), 16).unwrap();
    let expected = sift_oracle(&grad, (0, 0), 16);
    for (k, (a, b)) in d.values.iter().zip(&expected).enumerate() {
        assert!((a - b).abs() < 1e-12, "component {k}: {a} vs {b}");
    }
}

#[test]
fn sift_textured_patch_matches_oracle() {
    let img = gray(24, 24, |x, y| ((x * 3 + y * 5) % 9) as f64 / 9.0);
    let grad = sobel_gradients(&img).unwrap();
    for anchor in [(0, 0), (8, 4), (4, 8)] {
        let d = sift_descriptor(&grad, anchor, 16).unwrap();
        let expected = sift_oracle(&grad, anchor, 16);
        for (a, b) in d.values.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

// ---------------------------------------------------------------------------
// Canny oracle: direct 2D convolution, Sobel, non-maximum suppression and
// iterate-to-fixpoint hysteresis, written independently of the library.

fn canny_oracle(img: &GrayImage, low: f64, high: f64) -> Vec<bool> {
    let (w, h) = (img.width, img.height);
    let at = |v: &Vec<f64>, x: isize, y: isize| -> f64 {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        v[y * w + x]
    };

    // 5x5 Gaussian, sigma 1.0, as an outer product of 1-d kernels
    let mut k1 = [0.0f64; 5];
    for (i, k) in k1.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *k = (-d * d / 2.0).exp();
    }
    let s: f64 = k1.iter().sum();
    for k in k1.iter_mut() {
        *k /= s;
    }
    let mut rows = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (ix, kx) in k1.iter().enumerate() {
                acc += kx * at(&img.values, x + ix as isize - 2, y);
            }
            rows[y as usize * w + x as usize] = acc;
        }
    }
    let mut smooth = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (iy, ky) in k1.iter().enumerate() {
                acc += ky * at(&rows, x, y + iy as isize - 2);
            }
            smooth[y as usize * w + x as usize] = acc;
        }
    }

    let mut mag = vec![0.0; w * h];
    let mut ang = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| at(&smooth, x + dx, y + dy);
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let i = y as usize * w + x as usize;
            mag[i] = (gx * gx + gy * gy).sqrt();
            let mut a = gy.atan2(gx).to_degrees();
            if a < 0.0 {
                a += 360.0;
            }
            ang[i] = a % 180.0;
        }
    }
    let max_mag = mag.iter().cloned().fold(0.0f64, f64::max);
    if max_mag == 0.0 {
        return vec![false; w * h];
    }

    let mut nms = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if mag[i] == 0.0 {
                continue;
            }
            let t = ang[i];
            let (dx, dy): (isize, isize) = if !(22.5..157.5).contains(&t) {
                (1, 0)
            } else if t < 67.5 {
                (1, 1)
            } else if t < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let neighbor = |sx: isize, sy: isize| -> f64 {
                let nx = x as isize + sx;
                let ny = y as isize + sy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    0.0
                } else {
                    mag[ny as usize * w + nx as usize]
                }
            };
            if mag[i] >= neighbor(dx, dy) && mag[i] >= neighbor(-dx, -dy) {
                nms[i] = mag[i];
            }
        }
    }

    // hysteresis by repeated relaxation until no pixel changes
    let (lo, hi) = (low * max_mag, high * max_mag);
    let mut mask: Vec<bool> = nms.iter().map(|&m| m >= hi).collect();
    loop {
        let mut changed = false;
        for y in 0..h as isize {
            for x in 0..w as isize {
                let i = y as usize * w + x as usize;
                if mask[i] || nms[i] < lo {
                    continue;
                }
                'scan: for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        if mask[ny as usize * w + nx as usize] {
                            mask[i] = true;
                            changed = true;
                            break 'scan;
                        }
                    }
                }
            }
        }
        if !changed {
            return mask;
        }
    }
}

#[test]
fn canny_split_fixture_matches_oracle() {
    let img = gray(32, 32, |x, _| if x < 16 { 0.0 } else { 1.0 });
    let edges = canny_edges(&img, 0.1, 0.2).unwrap();
    let expected = canny_oracle(&img, 0.1, 0.2);
    assert_eq!(edges.mask, expected);
    assert!(expected.iter().any(|&e| e));
}

#[test]
fn canny_textured_fixture_matches_oracle() {
    let img = gray(32, 32, |x, y| {
        if (x / 8 + y / 8) % 2 == 0 {
            0.2
        } else {
            0.9
        }
    });
    let edges = canny_edges(&img, 0.1, 0.2).unwrap();
    assert_eq!(edges.mask, canny_oracle(&img, 0.1, 0.2));
}

// ---------------------------------------------------------------------------
// k-means oracles

fn blob_points(seed: u64, per_blob: usize) -> Vec<Vec<f64>> {
    // 3 well-separated Gaussian-ish blobs in 128-d space
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    for blob in 0..3usize {
        for _ in 0..per_blob {
            let mut p = vec![0.0f64; 128];
            for v in p.iter_mut() {
                *v = rng.gen::<f64>() - 0.5;
            }
            p[blob] += 30.0;
            points.push(p);
        }
    }
    points
}

fn nearest_blob(p: &[f64]) -> usize {
    (0..3).max_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap()).unwrap()
}

#[test]
fn kmeanspp_seeds_hit_distinct_blobs() {
    let points = blob_points(5, 100);
    let trials = 1000;
    let mut distinct_pp = 0usize;
    let mut distinct_uniform = 0usize;
    for t in 0..trials {
        let centers = kmeanspp_init(&points, 3, t as u64).unwrap();
        let blobs: std::collections::BTreeSet<usize> =
            centers.iter().map(|c| nearest_blob(c)).collect();
        if blobs.len() == 3 {
            distinct_pp += 1;
        }
        // uniform-random-init oracle on the same data
        let mut rng = ChaCha8Rng::seed_from_u64(t as u64 ^ 0xdead);
        let mut idx = std::collections::BTreeSet::new();
        while idx.len() < 3 {
            idx.insert(rng.gen_range(0..points.len()));
        }
        let blobs: std::collections::BTreeSet<usize> =
            idx.iter().map(|&i| nearest_blob(&points[i])).collect();
        if blobs.len() == 3 {
            distinct_uniform += 1;
        }
    }
    let frac_pp = distinct_pp as f64 / trials as f64;
    let frac_uniform = distinct_uniform as f64 / trials as f64;
    assert!(frac_pp >= 0.95, "kmeans++ distinct-blob rate {frac_pp}");
    assert!(frac_pp > frac_uniform, "{frac_pp} vs uniform {frac_uniform}");
}

/// Plain Lloyd reference: no convergence shortcuts, fixed iteration count.
fn lloyd_oracle(points: &[Vec<f64>], init: &[Vec<f64>], iters: usize) -> (Vec<Vec<f64>>, f64) {
    let dim = init[0].len();
    let mut centers = init.to_vec();
    for _ in 0..iters {
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for p in points {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, c) in centers.iter().enumerate() {
                let d: f64 = p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            counts[best] += 1;
            for (s, v) in sums[best].iter_mut().zip(p) {
                *s += v;
            }
        }
        for k in 0..centers.len() {
            if counts[k] > 0 {
                for (c, s) in centers[k].iter_mut().zip(&sums[k]) {
                    *c = s / counts[k] as f64;
                }
            }
        }
    }
    let inertia = points
        .iter()
        .map(|p| {
            centers
                .iter()
                .map(|c| p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    (centers, inertia)
}

#[test]
fn lloyd_matches_reference_and_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let points: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..8).map(|_| rng.gen::<f64>() * 10.0).collect())
        .collect();
    let init = kmeanspp_init(&points, 5, 3).unwrap();

    let cb = lloyd(&points, &init, 100, 1e-12, 0);
    let (_, oracle_inertia) = lloyd_oracle(&points, &init, 200);
    assert!(
        (cb.inertia - oracle_inertia).abs() <= 1e-6 * oracle_inertia,
        "{} vs {}",
        cb.inertia,
        oracle_inertia
    );

    // inertia after k iterations is non-increasing in k
    let mut prev = f64::INFINITY;
    for k in 1..=12 {
        let cb_k = lloyd(&points, &init, k, 0.0, 0);
        assert!(cb_k.inertia <= prev + 1e-9, "iter {k}: {} > {prev}", cb_k.inertia);
        prev = cb_k.inertia;
    }
}

#[test]
fn assign_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let centers: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..128).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let cb = Codebook { centers: centers.clone(), rng_seed: 0, inertia: 0.0 };
    for _ in 0..100 {
        let d: Vec<f64> = (0..128).map(|_| rng.gen::<f64>()).collect();
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (k, c) in centers.iter().enumerate() {
            let dist: f64 = d.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best_d {
                best = k;
                best_d = dist;
            }
        }
        assert_eq!(assign(&cb, &d), best);
    }
}

// ---------------------------------------------------------------------------
// SMO vs projected-gradient QP oracle

fn dual_objective(alpha: &[f64], y: &[f64], gram: &[Vec<f64>]) -> f64 {
    let n = alpha.len();
    let mut obj: f64 = alpha.iter().sum();
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            obj -= 0.5 * alpha[i] * alpha[j] * y[i] * y[j] * gram[i][j];
        }
    }
    obj
}

/// Projected-gradient ascent on the SVM dual: gradient step, then
/// alternating projection onto the box and the equality hyperplane.
fn qp_oracle(x: &[Vec<f64>], y: &[f64], c: f64, iters: usize) -> Vec<f64> {
    let n = x.len();
    let gram: Vec<Vec<f64>> = x
        .iter()
        .map(|a| x.iter().map(|b| a.iter().zip(b).map(|(p, q)| p * q).sum()).collect())
        .collect();
    // Lipschitz bound for the gradient: largest row sum of |Q|
    let lip = (0..n)
        .map(|i| (0..n).map(|j| gram[i][j].abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let step = 1.0 / lip;
    let mut alpha = vec![0.0f64; n];
    for _ in 0..iters {
        // gradient of W: 1 - Q alpha
        let mut grad = vec![1.0f64; n];
        for i in 0..n {
            for j in 0..n {
                grad[i] -= y[i] * y[j] * gram[i][j] * alpha[j];
            }
        }
        let v: Vec<f64> = (0..n).map(|i| alpha[i] + step * grad[i]).collect();
        // exact projection onto {0 <= a <= C, sum a_i y_i = 0}: bisection
        // on the multiplier of the equality constraint
        let residual = |lambda: f64| -> f64 {
            v.iter().zip(y).map(|(&vi, &yi)| (vi - lambda * yi).clamp(0.0, c) * yi).sum()
        };
        let (mut lo, mut hi) = (-1e9, 1e9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        for i in 0..n {
            alpha[i] = (v[i] - lambda * y[i]).clamp(0.0, c);
        }
    }
    alpha
}

#[test]
fn smo_dual_matches_qp_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    // 40 random separable 2-d points
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..20 {
        x.push(vec![rng.gen::<f64>(), rng.gen::<f64>()]);
        y.push(-1.0);
        x.push(vec![rng.gen::<f64>() + 2.5, rng.gen::<f64>() + 0.5]);
        y.push(1.0);
    }
    let c = 100.0;
    let svm = smo_train(&x, &y, KernelSpec::Linear, c, 1e-3, 10, 1).unwrap();

    // recover the full alpha vector from the stored support vectors
    let mut alpha = vec![0.0f64; x.len()];
    for (sv, &a) in svm.support_vectors.iter().zip(&svm.alphas) {
        let i = x.iter().position(|xi| xi == sv).unwrap();
        alpha[i] = a.abs();
    }
    let gram: Vec<Vec<f64>> = x
        .iter()
        .map(|a| x.iter().map(|b| a.iter().zip(b).map(|(p, q)| p * q).sum()).collect())
        .collect();
    let smo_obj = dual_objective(&alpha, &y, &gram);
    let oracle_alpha = qp_oracle(&x, &y, c, 20_000);
    let oracle_obj = dual_objective(&oracle_alpha, &y, &gram);
    assert!(
        (smo_obj - oracle_obj).abs() <= 1e-3 * oracle_obj.abs().max(1.0),
        "smo {smo_obj} vs oracle {oracle_obj}"
    );
}

#[test]
fn kkt_holds_on_twenty_random_problems() {
    for trial in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..12 {
            x.push(vec![rng.gen::<f64>(), rng.gen::<f64>()]);
            y.push(-1.0);
            x.push(vec![rng.gen::<f64>() + 3.0, rng.gen::<f64>() - 0.5]);
            y.push(1.0);
        }
        let tol = 1e-3;
        let c = 10.0;
        let svm = smo_train(&x, &y, KernelSpec::Linear, c, tol, 10, trial).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            let margin = yi * decision(&svm, xi).unwrap();
            let alpha = svm
                .support_vectors
                .iter()
                .zip(&svm.alphas)
                .find(|(sv, _)| sv.as_slice() == xi.as_slice())
                .map(|(_, &a)| a.abs())
                .unwrap_or(0.0);
            if alpha < 1e-9 {
                assert!(margin >= 1.0 - tol - 1e-6, "trial {trial}: margin {margin}");
            } else if alpha < c - 1e-9 {
                assert!((margin - 1.0).abs() <= tol + 1e-6, "trial {trial}: margin {margin}");
            } else {
                assert!(margin <= 1.0 + tol + 1e-6, "trial {trial}: margin {margin}");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Feature-builder oracles

#[test]
fn orientation_histogram_matches_direct_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (w, h) = (16usize, 16usize);
    let mut grad = GradientField {
        width: w,
        height: h,
        gx: vec![0.0; w * h],
        gy: vec![0.0; w * h],
        magnitude: vec![0.0; w * h],
        orientation: vec![0.0; w * h],
    };
    let mut mask = vec![false; w * h];
    // 50 random edge pixels
    let mut placed = 0;
    while placed < 50 {
        let i = rng.gen_range(0..w * h);
        if mask[i] {
            continue;
        }
        mask[i] = true;
        grad.magnitude[i] = rng.gen::<f64>() * 10.0;
        grad.orientation[i] = rng.gen::<f64>() * 360.0;
        placed += 1;
    }
    let edges = EdgeMap { width: w, height: h, mask: mask.clone() };
    let cell = cell_rects(w, h, 0).unwrap()[0];
    let params = OrientationParams { k_bins: 20, range: OrientationRange::Full360 };
    let hist = orientation_histogram(&grad, &edges, &cell, &params);

    let mut expected = vec![0.0f64; 20];
    for i in 0..w * h {
        if mask[i] {
            let bin = (grad.orientation[i] / 18.0) as usize % 20;
            expected[bin] += grad.magnitude[i];
        }
    }
    for (a, b) in hist.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn phow_matches_bruteforce_construction() {
    // 64x64 fixture, V=8, L=1
    let mut pixels = Vec::with_capacity(64 * 64 * 3);
    for y in 0..64usize {
        for x in 0..64usize {
            let v = (((x * 7 + y * 11) % 23) * 11) as u8;
            pixels.extend_from_slice(&[v, v.wrapping_add(40), v.wrapping_add(80)]);
        }
    }
    let img = RgbImage::new(64, 64, pixels);
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let centers: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..128).map(|_| rng.gen::<f64>() * 0.2).collect())
        .collect();
    let cb = Codebook { centers, rng_seed: 0, inertia: 0.0 };
    let pyr = PyramidParams { levels: 1 };
    let samp = DenseSamplingParams::default();
    let fv = build_phow(&img, &cb, &pyr, &samp).unwrap();

    // brute force: assign all 49 descriptors, bucket by center cell,
    // histogram, weight
    let gray_img = pyrafuse::image_core::to_grayscale(&img);
    let grad = sobel_gradients(&gray_img).unwrap();
    let descriptors = dense_descriptors(&grad, &samp).unwrap();
    assert_eq!(descriptors.len(), 49);
    let total = descriptors.len() as f64;
    let mut expected = Vec::new();
    for l in 0..=1u32 {
        let cells = cell_rects(64, 64, l).unwrap();
        let weight = level_weight(l, 1).unwrap();
        for cell in &cells {
            let mut hist = vec![0.0f64; 8];
            for d in &descriptors {
                if cell.contains(d.center.0, d.center.1) {
                    hist[assign(&cb, &d.values)] += 1.0;
                }
            }
            expected.extend(hist.into_iter().map(|n| weight * n / total));
        }
    }
    assert_eq!(fv.values.len(), expected.len());
    for (k, (a, b)) in fv.values.iter().zip(&expected).enumerate() {
        assert!((a - b).abs() < 1e-12, "component {k}: {a} vs {b}");
    }
}
