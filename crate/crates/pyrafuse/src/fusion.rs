//! Adaptive late fusion: learn per-feature weights by counting correct
//! recognitions on the training set, fuse per-feature probability vectors
//! as a convex combination, and decide by argmax.

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};
use crate::svm::{predict, MulticlassSvm, ProbabilityVector};

/// Convex weights over the three feature channels; they always sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    pub a_phow: f64,
    pub a_phoc: f64,
    pub a_phog: f64,
}

impl FusionWeights {
    pub fn uniform() -> Self {
        FusionWeights { a_phow: 1.0 / 3.0, a_phoc: 1.0 / 3.0, a_phog: 1.0 / 3.0 }
    }

    /// Normalize raw correct-recognition counts; all-zero counts fall back
    /// to uniform weights.
    pub fn from_counts(phow: usize, phoc: usize, phog: usize) -> Self {
        let total = phow + phoc + phog;
        if total == 0 {
            return Self::uniform();
        }
        let t = total as f64;
        FusionWeights {
            a_phow: phow as f64 / t,
            a_phoc: phoc as f64 / t,
            a_phog: phog as f64 / t,
        }
    }

    pub fn get(&self, kind: FeatureKind) -> f64 {
        match kind {
            FeatureKind::Phow => self.a_phow,
            FeatureKind::Phoc => self.a_phoc,
            FeatureKind::Phog => self.a_phog,
        }
    }
}

/// One training sample for weight learning: the three feature vectors of
/// an image plus its true label.
pub struct FeatureTriple {
    pub phow: FeatureVector,
    pub phoc: FeatureVector,
    pub phog: FeatureVector,
}

/// Count, per classifier, how many training images it recognizes
/// correctly, then normalize the counters into weights.
pub fn learn_weights(
    phow_clf: &MulticlassSvm,
    phoc_clf: &MulticlassSvm,
    phog_clf: &MulticlassSvm,
    training: &[(FeatureTriple, String)],
) -> Result<FusionWeights> {
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut counts = [0usize; 3];
    for (triple, label) in training {
        if &predict(phow_clf, &triple.phow.values)? == label {
            counts[0] += 1;
        }
        if &predict(phoc_clf, &triple.phoc.values)? == label {
            counts[1] += 1;
        }
        if &predict(phog_clf, &triple.phog.values)? == label {
            counts[2] += 1;
        }
    }
    Ok(FusionWeights::from_counts(counts[0], counts[1], counts[2]))
}

/// Component-wise weighted sum of the three per-feature distributions.
pub fn fuse(
    d_phow: &ProbabilityVector,
    d_phoc: &ProbabilityVector,
    d_phog: &ProbabilityVector,
    w: &FusionWeights,
) -> Result<ProbabilityVector> {
    let n = d_phow.probs.len();
    if d_phoc.probs.len() != n {
        return Err(Error::LengthMismatch(n, d_phoc.probs.len()));
    }
    if d_phog.probs.len() != n {
        return Err(Error::LengthMismatch(n, d_phog.probs.len()));
    }
    let probs = (0..n)
        .map(|j| w.a_phow * d_phow.probs[j] + w.a_phoc * d_phoc.probs[j] + w.a_phog * d_phog.probs[j])
        .collect();
    Ok(ProbabilityVector { probs })
}

/// Label of the maximal fused probability; ties go to the lowest class index.
pub fn decide<'a>(fused: &ProbabilityVector, class_labels: &'a [String]) -> &'a str {
    assert!(!fused.probs.is_empty() && fused.probs.len() == class_labels.len());
    &class_labels[fused.argmax()]
}
