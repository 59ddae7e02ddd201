//! Visual-vocabulary construction: k-means++ seeding plus Lloyd iteration,
//! and nearest-word assignment.
//!
//! All randomness flows through a seeded ChaCha8 generator, so identical
//! inputs and seed give a bit-identical codebook.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-4;

/// The visual vocabulary: `V` cluster centers over descriptor space.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// `V` rows, each of dimension `dim`.
    pub centers: Vec<Vec<f64>>,
    pub rng_seed: u64,
    /// Final sum of squared distances from each training point to its center.
    pub inertia: f64,
}

impl Codebook {
    pub fn words(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, each next center drawn with
/// probability proportional to its squared distance to the nearest chosen
/// center.
pub fn kmeanspp_init(points: &[Vec<f64>], v: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    assert!(v >= 1 && points.len() >= v);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(v);
    let first = rng.gen_range(0..points.len());
    centers.push(points[first].clone());

    // squared distance to nearest chosen center, updated incrementally
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < v {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(Error::NotEnoughDistinctPoints {
                requested: v,
                distinct: centers.len(),
            });
        }
        let mut target = rng.gen::<f64>() * total;
        let mut chosen = points.len() - 1;
        for (i, &w) in d2.iter().enumerate() {
            target -= w;
            if target <= 0.0 {
                chosen = i;
                break;
            }
        }
        // duplicates have d2 = 0 and cannot be selected, so centers stay distinct
        let c = points[chosen].clone();
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, &c);
            if d < d2[i] {
                d2[i] = d;
            }
        }
        centers.push(c);
    }
    Ok(centers)
}

/// Lloyd iteration from the given initial centers. Alternates assignment
/// and mean update until the relative inertia change drops below `tol` or
/// `max_iter` is reached. Emptied clusters are reseeded with the point
/// currently farthest from its assigned center.
pub fn lloyd(
    points: &[Vec<f64>],
    init_centers: &[Vec<f64>],
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Codebook {
    assert!(!points.is_empty() && !init_centers.is_empty());
    let v = init_centers.len();
    let dim = init_centers[0].len();
    let mut centers: Vec<Vec<f64>> = init_centers.to_vec();
    let mut assignment = vec![0usize; points.len()];
    let mut inertia = f64::INFINITY;

    for _ in 0..max_iter {
        // assignment step
        let mut new_inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (mut best, mut best_d) = (0usize, f64::INFINITY);
            for (k, c) in centers.iter().enumerate() {
                let d = sq_dist(p, c);
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            assignment[i] = best;
            new_inertia += best_d;
        }

        let converged = inertia.is_finite() && (inertia - new_inertia).abs() <= tol * inertia;
        inertia = new_inertia;
        if converged {
            break;
        }

        // update step
        let mut sums = vec![vec![0.0f64; dim]; v];
        let mut counts = vec![0usize; v];
        for (i, p) in points.iter().enumerate() {
            let k = assignment[i];
            counts[k] += 1;
            for (s, x) in sums[k].iter_mut().zip(p) {
                *s += x;
            }
        }
        for k in 0..v {
            if counts[k] > 0 {
                for (c, s) in centers[k].iter_mut().zip(&sums[k]) {
                    *c = s / counts[k] as f64;
                }
            } else {
                // reseed with the point farthest from its assigned center
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centers[assignment[a]]);
                        let db = sq_dist(&points[b], &centers[assignment[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers[k] = points[far].clone();
            }
        }
    }

    // final inertia for the returned centers
    let final_inertia: f64 = points
        .iter()
        .map(|p| {
            centers
                .iter()
                .map(|c| sq_dist(p, c))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();

    Codebook { centers, rng_seed: seed, inertia: final_inertia }
}

/// Full training: k-means++ seeding then Lloyd.
pub fn train(
    points: &[Vec<f64>],
    v: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<Codebook> {
    let init = kmeanspp_init(points, v, seed)?;
    Ok(lloyd(points, &init, max_iter, tol, seed))
}

/// Index of the nearest center by squared Euclidean distance; ties go to
/// the lowest index.
pub fn assign(codebook: &Codebook, descriptor: &[f64]) -> usize {
    let (mut best, mut best_d) = (0usize, f64::INFINITY);
    for (k, c) in codebook.centers.iter().enumerate() {
        let d = sq_dist(descriptor, c);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}
