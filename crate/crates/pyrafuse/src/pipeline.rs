//! End-to-end orchestration: dataset ingestion, training, evaluation,
//! single-image classification and the report formats.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codebook::{self, Codebook};
use crate::dense_sift::{dense_descriptors, DenseSamplingParams};
use crate::error::{Error, Result};
use crate::features::{
    build_phoc, build_phog, build_phow, ColorQuantParams, FeatureKind, FeatureVector,
    OrientationParams, OrientationRange,
};
use crate::fusion::{self, FeatureTriple, FusionWeights};
use crate::image_core::{load_image, sobel_gradients, to_grayscale, RgbImage};
use crate::pyramid::PyramidParams;
use crate::svm::{
    cross_validate, decision_scores, ovr_train, softmax, KernelSpec, MulticlassSvm,
    ProbabilityVector, DEFAULT_C_GRID,
};

/// Full parameter record for a training run. Persisted inside the model
/// bundle so evaluation and classification replay the same settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Highest pyramid level L.
    pub levels: u32,
    /// Vocabulary size V.
    pub words: usize,
    pub step: usize,
    pub patch: usize,
    pub h_bins: usize,
    pub s_bins: usize,
    pub v_bins: usize,
    pub k_bins: usize,
    pub orientation_range: OrientationRange,
    pub canny_low: f64,
    pub canny_high: f64,
    pub kernel: KernelSpec,
    /// Fixed box constraint; `None` selects C by cross-validation.
    pub c: Option<f64>,
    pub cv_folds: usize,
    pub svm_tol: f64,
    pub svm_max_passes: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    /// Cap on pooled descriptors for codebook training.
    pub max_codebook_descriptors: usize,
    /// Training images per class in the dataset split.
    pub train_per_class: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            levels: 2,
            words: 200,
            step: 8,
            patch: 16,
            h_bins: 8,
            s_bins: 3,
            v_bins: 3,
            k_bins: 20,
            orientation_range: OrientationRange::Full360,
            canny_low: 0.1,
            canny_high: 0.2,
            kernel: KernelSpec::Linear,
            c: None,
            cv_folds: 3,
            svm_tol: 1e-3,
            svm_max_passes: 10,
            kmeans_max_iter: 100,
            kmeans_tol: 1e-4,
            max_codebook_descriptors: 200_000,
            train_per_class: 60,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn pyramid(&self) -> PyramidParams {
        PyramidParams { levels: self.levels }
    }

    pub fn sampling(&self) -> DenseSamplingParams {
        DenseSamplingParams { step: self.step, patch: self.patch }
    }

    pub fn color_quant(&self) -> ColorQuantParams {
        ColorQuantParams { h_bins: self.h_bins, s_bins: self.s_bins, v_bins: self.v_bins }
    }

    pub fn orientation(&self) -> OrientationParams {
        OrientationParams { k_bins: self.k_bins, range: self.orientation_range }
    }

    fn sub_seed(&self, stream: u64) -> u64 {
        self.seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(stream)
    }
}

/// Train/test split over a class-per-subdirectory dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub classes: Vec<String>,
    /// Per-class training image paths, parallel to `classes`.
    pub train: Vec<Vec<PathBuf>>,
    /// Per-class test image paths, parallel to `classes`.
    pub test: Vec<Vec<PathBuf>>,
}

/// Everything needed to classify new images: codebook, the three
/// classifiers, fusion weights and the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub config: PipelineConfig,
    pub codebook: Codebook,
    pub phow_clf: MulticlassSvm,
    pub phoc_clf: MulticlassSvm,
    pub phog_clf: MulticlassSvm,
    pub weights: FusionWeights,
    pub class_labels: Vec<String>,
}

/// Rows are the true class, columns the predicted class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        ConfusionMatrix { labels, counts: vec![vec![0; n]; n] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// CSV with a header row, then one row per true class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluation report: fused and per-feature accuracies plus the confusion
/// matrix of the fused classifier.
#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub overall_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub phow_accuracy: f64,
    pub phoc_accuracy: f64,
    pub phog_accuracy: f64,
    pub fusion_weights: [f64; 3],
}

impl Evaluation {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png") | Some("jpg") | Some("jpeg")
    )
}

/// Scan `root` for one subdirectory per class and split each class's
/// images into train/test: filenames sorted, shuffled by a seeded RNG,
/// first `train_per_class` to train, the rest to test.
pub fn ingest_dataset(root: &Path, train_per_class: usize, seed: u64) -> Result<DatasetSplit> {
    if !root.is_dir() {
        return Err(Error::NotADirectory(root.to_path_buf()));
    }
    let read_dir = |p: &Path| -> Result<Vec<PathBuf>> {
        let mut entries = Vec::new();
        let iter = std::fs::read_dir(p)
            .map_err(|source| Error::Io { path: p.to_path_buf(), source })?;
        for e in iter {
            let e = e.map_err(|source| Error::Io { path: p.to_path_buf(), source })?;
            entries.push(e.path());
        }
        Ok(entries)
    };

    let mut class_dirs: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in read_dir(root)? {
        if entry.is_dir() {
            if let Some(name) = entry.file_name().and_then(|n| n.to_str()) {
                class_dirs.insert(name.to_string(), entry.clone());
            }
        }
    }
    if class_dirs.len() < 2 {
        return Err(Error::TooFewClasses(class_dirs.len()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes = Vec::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (name, dir) in class_dirs {
        let mut images: Vec<PathBuf> =
            read_dir(&dir)?.into_iter().filter(|p| is_image_file(p)).collect();
        images.sort();
        if images.len() < train_per_class + 1 {
            return Err(Error::TooFewImages {
                class: name,
                count: images.len(),
                need: train_per_class + 1,
            });
        }
        for i in (1..images.len()).rev() {
            let j = rng.gen_range(0..=i);
            images.swap(i, j);
        }
        let rest = images.split_off(train_per_class);
        classes.push(name);
        train.push(images);
        test.push(rest);
    }
    Ok(DatasetSplit { classes, train, test })
}

fn with_path_context<T>(result: Result<T>, path: &Path) -> Result<T> {
    result.map_err(|e| match e {
        // image-loading errors already carry the path
        e @ (Error::FileNotFound(_)
        | Error::UnsupportedFormat(_)
        | Error::CorruptImage(_)
        | Error::Io { .. }
        | Error::AtImage { .. }) => e,
        other => Error::AtImage { path: path.to_path_buf(), source: Box::new(other) },
    })
}

fn build_triple(
    img: &RgbImage,
    config: &PipelineConfig,
    codebook: &Codebook,
) -> Result<FeatureTriple> {
    let pyr = config.pyramid();
    Ok(FeatureTriple {
        phow: build_phow(img, codebook, &pyr, &config.sampling())?,
        phoc: build_phoc(img, &pyr, &config.color_quant())?,
        phog: build_phog(img, &pyr, &config.orientation(), config.canny_low, config.canny_high)?,
    })
}

/// Pool dense-SIFT descriptors from every image in `paths`, uniformly
/// subsampled to at most `cap` descriptors, and train the codebook.
pub fn build_codebook_from_images(paths: &[PathBuf], config: &PipelineConfig) -> Result<Codebook> {
    let mut pool: Vec<Vec<f64>> = Vec::new();
    for path in paths {
        let img = load_image(path)?;
        let gray = to_grayscale(&img);
        let grad = with_path_context(sobel_gradients(&gray), path)?;
        for d in dense_descriptors(&grad, &config.sampling())? {
            pool.push(d.values);
        }
    }
    let cap = config.max_codebook_descriptors;
    if pool.len() > cap {
        pool = (0..cap).map(|i| pool[i * pool.len() / cap].clone()).collect();
    }
    codebook::train(
        &pool,
        config.words,
        config.sub_seed(1),
        config.kmeans_max_iter,
        config.kmeans_tol,
    )
}

fn train_one_classifier(
    x: &[Vec<f64>],
    labels: &[String],
    config: &PipelineConfig,
    kind: FeatureKind,
    stream: u64,
) -> Result<MulticlassSvm> {
    let (kernel, c) = match config.c {
        Some(c) => (config.kernel, c),
        None => {
            let grid: Vec<(KernelSpec, f64)> =
                DEFAULT_C_GRID.iter().map(|&c| (config.kernel, c)).collect();
            let (best, _) = cross_validate(
                x,
                labels,
                &grid,
                config.cv_folds,
                config.svm_tol,
                config.svm_max_passes,
                config.sub_seed(stream),
                kind,
            )?;
            best
        }
    };
    ovr_train(
        x,
        labels,
        kernel,
        c,
        config.svm_tol,
        config.svm_max_passes,
        config.sub_seed(stream + 100),
        kind,
    )
}

/// The full training procedure: codebook, per-image features, one
/// classifier per feature, fusion weights.
pub fn train_pipeline(split: &DatasetSplit, config: &PipelineConfig) -> Result<ModelBundle> {
    if split.classes.len() < 2 {
        return Err(Error::SingleClassInput);
    }
    let train_paths: Vec<PathBuf> = split.train.iter().flatten().cloned().collect();
    let codebook = build_codebook_from_images(&train_paths, config)?;

    let mut labels: Vec<String> = Vec::new();
    let mut triples: Vec<FeatureTriple> = Vec::new();
    for (class, paths) in split.classes.iter().zip(&split.train) {
        for path in paths {
            let img = load_image(path)?;
            triples.push(with_path_context(build_triple(&img, config, &codebook), path)?);
            labels.push(class.clone());
        }
    }

    let phow_x: Vec<Vec<f64>> = triples.iter().map(|t| t.phow.values.clone()).collect();
    let phoc_x: Vec<Vec<f64>> = triples.iter().map(|t| t.phoc.values.clone()).collect();
    let phog_x: Vec<Vec<f64>> = triples.iter().map(|t| t.phog.values.clone()).collect();

    let phow_clf = train_one_classifier(&phow_x, &labels, config, FeatureKind::Phow, 10)?;
    let phoc_clf = train_one_classifier(&phoc_x, &labels, config, FeatureKind::Phoc, 20)?;
    let phog_clf = train_one_classifier(&phog_x, &labels, config, FeatureKind::Phog, 30)?;

    let training: Vec<(FeatureTriple, String)> =
        triples.into_iter().zip(labels.iter().cloned()).collect();
    let weights = fusion::learn_weights(&phow_clf, &phoc_clf, &phog_clf, &training)?;

    Ok(ModelBundle {
        config: config.clone(),
        codebook,
        class_labels: phow_clf.class_labels.clone(),
        phow_clf,
        phoc_clf,
        phog_clf,
        weights,
    })
}

/// Per-feature and fused distributions for one already-decoded image.
pub fn classify_image(
    bundle: &ModelBundle,
    img: &RgbImage,
) -> Result<(String, ProbabilityVector, [ProbabilityVector; 3])> {
    let triple = build_triple(img, &bundle.config, &bundle.codebook)?;
    let d_phow = softmax(&decision_scores(&bundle.phow_clf, &triple.phow.values)?);
    let d_phoc = softmax(&decision_scores(&bundle.phoc_clf, &triple.phoc.values)?);
    let d_phog = softmax(&decision_scores(&bundle.phog_clf, &triple.phog.values)?);
    let fused = fusion::fuse(&d_phow, &d_phoc, &d_phog, &bundle.weights)?;
    let label = fusion::decide(&fused, &bundle.class_labels).to_string();
    Ok((label, fused, [d_phow, d_phoc, d_phog]))
}

/// Classify one image file.
pub fn classify(
    bundle: &ModelBundle,
    path: &Path,
) -> Result<(String, ProbabilityVector, [ProbabilityVector; 3])> {
    let img = load_image(path)?;
    with_path_context(classify_image(bundle, &img), path)
}

/// Run the fused classifier over the test half of `split` and tabulate
/// the confusion matrix plus per-feature accuracies.
pub fn evaluate(bundle: &ModelBundle, split: &DatasetSplit) -> Result<Evaluation> {
    for class in &bundle.class_labels {
        if !split.classes.contains(class) {
            return Err(Error::ClassMismatch(class.clone()));
        }
    }
    let index_of: BTreeMap<&String, usize> =
        bundle.class_labels.iter().enumerate().map(|(i, l)| (l, i)).collect();

    let mut confusion = ConfusionMatrix::new(bundle.class_labels.clone());
    let mut per_feature_correct = [0u64; 3];
    let mut total = 0u64;
    for (class, paths) in split.classes.iter().zip(&split.test) {
        let Some(&true_idx) = index_of.get(class) else {
            continue; // dataset classes outside the model are skipped
        };
        for path in paths {
            let img = load_image(path)?;
            let triple = with_path_context(build_triple(&img, &bundle.config, &bundle.codebook), path)?;
            let clfs = [&bundle.phow_clf, &bundle.phoc_clf, &bundle.phog_clf];
            let feats = [&triple.phow, &triple.phoc, &triple.phog];
            let mut pvs = Vec::with_capacity(3);
            for (clf, feat) in clfs.iter().zip(feats) {
                let pv = softmax(&decision_scores(clf, &feat.values)?);
                pvs.push(pv);
            }
            for m in 0..3 {
                if clfs[m].class_labels[pvs[m].argmax()] == *class {
                    per_feature_correct[m] += 1;
                }
            }
            let fused = fusion::fuse(&pvs[0], &pvs[1], &pvs[2], &bundle.weights)?;
            let pred_idx = fused.argmax();
            confusion.counts[true_idx][pred_idx] += 1;
            total += 1;
        }
    }

    let per_class_accuracy = confusion
        .counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let s: u64 = row.iter().sum();
            if s == 0 {
                0.0
            } else {
                row[i] as f64 / s as f64
            }
        })
        .collect();
    let overall_accuracy = confusion.accuracy();
    let denom = total.max(1) as f64;
    Ok(Evaluation {
        overall_accuracy,
        per_class_accuracy,
        phow_accuracy: per_feature_correct[0] as f64 / denom,
        phoc_accuracy: per_feature_correct[1] as f64 / denom,
        phog_accuracy: per_feature_correct[2] as f64 / denom,
        fusion_weights: [bundle.weights.a_phow, bundle.weights.a_phoc, bundle.weights.a_phog],
        confusion,
    })
}

/// Build one feature vector for an image using the bundle's configuration.
pub fn extract_feature(
    bundle: &ModelBundle,
    path: &Path,
    kind: FeatureKind,
) -> Result<FeatureVector> {
    let img = load_image(path)?;
    let pyr = bundle.config.pyramid();
    let result = match kind {
        FeatureKind::Phow => build_phow(&img, &bundle.codebook, &pyr, &bundle.config.sampling()),
        FeatureKind::Phoc => build_phoc(&img, &pyr, &bundle.config.color_quant()),
        FeatureKind::Phog => build_phog(
            &img,
            &pyr,
            &bundle.config.orientation(),
            bundle.config.canny_low,
            bundle.config.canny_high,
        ),
    };
    with_path_context(result, path)
}
