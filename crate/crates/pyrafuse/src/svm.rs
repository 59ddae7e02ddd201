//! Soft-margin SVM trained by simplified SMO, one-vs-rest multiclass
//! wrapper with softmax probability outputs, and stratified k-fold
//! cross-validation for hyperparameter selection.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureKind;

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_PASSES: usize = 10;
/// Hard cap on SMO sweeps so a slowly oscillating problem still terminates.
const MAX_SWEEPS: usize = 2000;
/// Default C grid for cross-validation.
pub const DEFAULT_C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    /// Ordering used for cross-validation tie-breaks: Linear before Rbf.
    fn rank(&self) -> u8 {
        match self {
            KernelSpec::Linear => 0,
            KernelSpec::Rbf { .. } => 1,
        }
    }
}

/// Trained binary classifier. `alphas[i]` stores `alpha_i * y_i` for the
/// i-th support vector, so the decision function is
/// `sum_i alphas[i] * K(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c: f64,
}

impl BinarySvm {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }
}

/// One-vs-rest multiclass SVM over one feature kind.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvm {
    /// Sorted category names; binary `j` separates class `j` from the rest.
    pub class_labels: Vec<String>,
    pub binaries: Vec<BinarySvm>,
    pub feature_kind: FeatureKind,
}

/// Per-class probabilities; entries in `[0,1]`, summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    pub probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Simplified SMO: sweep all points, pick a random second multiplier for
/// each KKT violator, update the pair analytically. Terminates after
/// `max_passes` consecutive sweeps without a change. Deterministic for a
/// fixed `seed`.
pub fn smo_train(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: KernelSpec,
    c: f64,
    tol: f64,
    max_passes: usize,
    seed: u64,
) -> Result<BinarySvm> {
    let n = x.len();
    assert!(n >= 2 && n == y.len());
    let dim = x[0].len();
    for xi in x {
        if xi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: xi.len() });
        }
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(Error::SingleClassInput);
    }

    let gram: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| kernel.eval(a, b)).collect()).collect();
    let mut alpha = vec![0.0f64; n];
    let mut b = 0.0f64;
    let f = |alpha: &[f64], b: f64, i: usize| -> f64 {
        let mut s = b;
        for k in 0..n {
            if alpha[k] != 0.0 {
                s += alpha[k] * y[k] * gram[k][i];
            }
        }
        s
    };

    // analytic update of the (i, j) multiplier pair; returns false when
    // the pair is at its box constraint or the step is negligible
    let update_pair = |alpha: &mut Vec<f64>, b: &mut f64, i: usize, j: usize, e_i: f64| -> bool {
        let e_j = f(alpha, *b, j) - y[j];
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let (lo, hi) = if y[i] != y[j] {
            ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
        } else {
            ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
        };
        if lo >= hi {
            return false;
        }
        let eta = 2.0 * gram[i][j] - gram[i][i] - gram[j][j];
        if eta >= 0.0 {
            return false;
        }
        let aj = (aj_old - y[j] * (e_i - e_j) / eta).clamp(lo, hi);
        if (aj - aj_old).abs() < 1e-7 {
            return false;
        }
        let ai = ai_old + y[i] * y[j] * (aj_old - aj);
        let b1 = *b - e_i - y[i] * (ai - ai_old) * gram[i][i] - y[j] * (aj - aj_old) * gram[i][j];
        let b2 = *b - e_j - y[i] * (ai - ai_old) * gram[i][j] - y[j] * (aj - aj_old) * gram[j][j];
        alpha[i] = ai;
        alpha[j] = aj;
        *b = if ai > 0.0 && ai < c {
            b1
        } else if aj > 0.0 && aj < c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        true
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passes = 0usize;
    let mut sweeps = 0usize;
    while passes < max_passes && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut num_changed = 0usize;
        for i in 0..n {
            let e_i = f(&alpha, b, i) - y[i];
            let violates = (y[i] * e_i < -tol && alpha[i] < c) || (y[i] * e_i > tol && alpha[i] > 0.0);
            if !violates {
                continue;
            }
            // random second multiplier first, then scan the rest so a
            // blocked pair cannot stall convergence
            let start = rng.gen_range(0..n);
            let mut changed = false;
            for off in 0..n {
                let j = (start + off) % n;
                if j != i && update_pair(&mut alpha, &mut b, i, j, e_i) {
                    changed = true;
                    break;
                }
            }
            if changed {
                num_changed += 1;
            }
        }
        passes = if num_changed == 0 { passes + 1 } else { 0 };
    }

    let mut support_vectors = Vec::new();
    let mut alphas = Vec::new();
    for i in 0..n {
        if alpha[i] > 1e-12 {
            support_vectors.push(x[i].clone());
            alphas.push(alpha[i] * y[i]);
        }
    }
    Ok(BinarySvm { support_vectors, alphas, bias: b, kernel, c })
}

/// Raw decision score `sum_i alphas[i] * K(sv_i, x) + bias`.
pub fn decision(svm: &BinarySvm, x: &[f64]) -> Result<f64> {
    if !svm.support_vectors.is_empty() && svm.dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: svm.dim(), got: x.len() });
    }
    let mut s = svm.bias;
    for (sv, &a) in svm.support_vectors.iter().zip(&svm.alphas) {
        s += a * svm.kernel.eval(sv, x);
    }
    Ok(s)
}

fn sorted_classes(labels: &[String]) -> Vec<String> {
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    classes
}

/// One binary SVM per class in sorted label order (that class = +1, rest = -1).
pub fn ovr_train(
    x: &[Vec<f64>],
    labels: &[String],
    kernel: KernelSpec,
    c: f64,
    tol: f64,
    max_passes: usize,
    seed: u64,
    feature_kind: FeatureKind,
) -> Result<MulticlassSvm> {
    assert_eq!(x.len(), labels.len());
    let class_labels = sorted_classes(labels);
    if class_labels.len() < 2 {
        return Err(Error::SingleClassInput);
    }
    let mut binaries = Vec::with_capacity(class_labels.len());
    for (j, class) in class_labels.iter().enumerate() {
        let y: Vec<f64> = labels.iter().map(|l| if l == class { 1.0 } else { -1.0 }).collect();
        let sub_seed = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(j as u64);
        binaries.push(smo_train(x, &y, kernel, c, tol, max_passes, sub_seed)?);
    }
    Ok(MulticlassSvm { class_labels, binaries, feature_kind })
}

/// Raw one-vs-rest decision scores, one per class.
pub fn decision_scores(model: &MulticlassSvm, x: &[f64]) -> Result<Vec<f64>> {
    model.binaries.iter().map(|b| decision(b, x)).collect()
}

/// Softmax over the raw scores with max-subtraction for stability.
pub fn predict_proba(model: &MulticlassSvm, x: &[f64]) -> Result<ProbabilityVector> {
    let scores = decision_scores(model, x)?;
    Ok(softmax(&scores))
}

pub fn softmax(scores: &[f64]) -> ProbabilityVector {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    ProbabilityVector { probs: exps.iter().map(|e| e / total).collect() }
}

/// Argmax class label.
pub fn predict(model: &MulticlassSvm, x: &[f64]) -> Result<String> {
    let p = predict_proba(model, x)?;
    Ok(model.class_labels[p.argmax()].clone())
}

/// Stratified k-fold cross-validation over `param_grid`. Returns the best
/// `(kernel, C)` and the per-param mean accuracies in grid order. Ties go
/// to the smallest C, then Linear before Rbf.
pub fn cross_validate(
    x: &[Vec<f64>],
    labels: &[String],
    param_grid: &[(KernelSpec, f64)],
    k: usize,
    tol: f64,
    max_passes: usize,
    seed: u64,
    feature_kind: FeatureKind,
) -> Result<((KernelSpec, f64), Vec<f64>)> {
    assert!(k >= 2 && !param_grid.is_empty());
    let classes = sorted_classes(labels);
    if classes.len() < 2 {
        return Err(Error::SingleClassInput);
    }

    // assign each sample a fold, stratified per class
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; x.len()];
    for class in &classes {
        let mut idx: Vec<usize> = (0..x.len()).filter(|&i| &labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::TooFewSamplesPerClass {
                class: class.clone(),
                count: idx.len(),
                folds: k,
            });
        }
        // Fisher-Yates with the shared rng
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = pos % k;
        }
    }

    let mut accuracies = Vec::with_capacity(param_grid.len());
    for (param_idx, &(kernel, c)) in param_grid.iter().enumerate() {
        let mut correct = 0usize;
        let mut total = 0usize;
        for fold in 0..k {
            let train_idx: Vec<usize> = (0..x.len()).filter(|&i| fold_of[i] != fold).collect();
            let test_idx: Vec<usize> = (0..x.len()).filter(|&i| fold_of[i] == fold).collect();
            let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
            let train_y: Vec<String> = train_idx.iter().map(|&i| labels[i].clone()).collect();
            let sub_seed = seed
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add((param_idx * k + fold) as u64);
            let model = ovr_train(
                &train_x, &train_y, kernel, c, tol, max_passes, sub_seed, feature_kind,
            )?;
            for &i in &test_idx {
                if predict(&model, &x[i])? == labels[i] {
                    correct += 1;
                }
                total += 1;
            }
        }
        accuracies.push(correct as f64 / total as f64);
    }

    let mut best = 0usize;
    for i in 1..param_grid.len() {
        let (bk, bc) = param_grid[best];
        let (ik, ic) = param_grid[i];
        let better = accuracies[i] > accuracies[best]
            || (accuracies[i] == accuracies[best]
                && (ic < bc || (ic == bc && ik.rank() < bk.rank())));
        if better {
            best = i;
        }
    }
    Ok((param_grid[best], accuracies))
}
