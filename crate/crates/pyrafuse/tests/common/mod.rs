//! Shared test fixtures: a synthetic dataset whose class identity is
//! encoded jointly in dominant color, edge shape and texture, so that all
//! three feature channels are discriminative by construction.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const IMG_SIDE: usize = 64;

pub const CLASS_NAMES: [&str; 4] = ["circle_red", "square_green", "cross_blue", "bars_yellow"];

fn clamp_u8(v: f64) -> u8 {
    v.clamp(0.0, 255.0) as u8
}

/// Render one synthetic image of the given class. Pixel buffer is RGB8,
/// row-major, 64x64.
pub fn render_image(class: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let side = IMG_SIDE;
    // dominant background color per class
    let base: (f64, f64, f64) = match class {
        0 => (200.0, 40.0, 40.0),  // red
        1 => (40.0, 190.0, 40.0),  // green
        2 => (40.0, 60.0, 210.0),  // blue
        _ => (210.0, 200.0, 40.0), // yellow
    };
    let jitter: f64 = rng.gen_range(-20.0..20.0);
    let mut pix = vec![0u8; side * side * 3];
    for y in 0..side {
        for x in 0..side {
            let i = (y * side + x) * 3;
            let noise: f64 = rng.gen_range(-12.0..12.0);
            pix[i] = clamp_u8(base.0 + jitter + noise);
            pix[i + 1] = clamp_u8(base.1 + jitter + noise);
            pix[i + 2] = clamp_u8(base.2 + jitter + noise);
        }
    }

    // class texture: stripes of class-specific orientation and period,
    // modulating brightness over the whole frame
    for y in 0..side {
        for x in 0..side {
            let phase = match class {
                0 => x / 4,           // vertical stripes, fine
                1 => y / 4,           // horizontal stripes, fine
                2 => (x + y) / 6,     // diagonal stripes
                _ => (x / 8) + (y / 8), // coarse checker
            };
            if phase % 2 == 0 {
                let i = (y * side + x) * 3;
                for ch in 0..3 {
                    pix[i + ch] = clamp_u8(pix[i + ch] as f64 - 35.0);
                }
            }
        }
    }

    // class shape: a thick dark outline at a jittered position
    let cx = (side / 2) as isize + rng.gen_range(-4..=4);
    let cy = (side / 2) as isize + rng.gen_range(-4..=4);
    let r = rng.gen_range(14..=18) as isize;
    let mut mark = |x: isize, y: isize| {
        if x >= 0 && y >= 0 && (x as usize) < side && (y as usize) < side {
            let i = (y as usize * side + x as usize) * 3;
            pix[i] = 10;
            pix[i + 1] = 10;
            pix[i + 2] = 10;
        }
    };
    match class {
        0 => {
            // circle outline
            for y in -r - 2..=r + 2 {
                for x in -r - 2..=r + 2 {
                    let d2 = x * x + y * y;
                    if d2 >= (r - 1) * (r - 1) && d2 <= (r + 1) * (r + 1) {
                        mark(cx + x, cy + y);
                    }
                }
            }
        }
        1 => {
            // square outline
            for d in -r..=r {
                for t in -1..=1isize {
                    mark(cx + d, cy - r + t);
                    mark(cx + d, cy + r + t);
                    mark(cx - r + t, cy + d);
                    mark(cx + r + t, cy + d);
                }
            }
        }
        2 => {
            // X cross of diagonals
            for d in -r..=r {
                for t in -1..=1isize {
                    mark(cx + d, cy + d + t);
                    mark(cx + d, cy - d + t);
                }
            }
        }
        _ => {
            // three horizontal bars
            for bar in 0..3isize {
                let by = cy - r + bar * r;
                for x in -r..=r {
                    for t in -1..=1isize {
                        mark(cx + x, by + t);
                    }
                }
            }
        }
    }
    pix
}

/// Write `classes x per_class` PNGs under `root`, one subdirectory per
/// class. Deterministic for a fixed seed.
pub fn generate_dataset(root: &Path, per_class: usize, seed: u64) {
    for (c, name) in CLASS_NAMES.iter().enumerate() {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..per_class {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x1000193) ^ (i as u64) << 32);
            let pix = render_image(c, &mut rng);
            let path = dir.join(format!("img_{i:03}.png"));
            image::save_buffer(
                &path,
                &pix,
                IMG_SIDE as u32,
                IMG_SIDE as u32,
                image::ColorType::Rgb8,
            )
            .unwrap();
        }
    }
}
