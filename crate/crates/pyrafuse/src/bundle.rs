//! Model persistence: a little-endian binary container with magic "PFZ1",
//! a format version, a tagged key-value config block, length-prefixed
//! sections and a trailing CRC-32 of all prior bytes.
//!
//! Round-trips are bit-exact: every numeric field is written as its IEEE
//! representation, so `load(save(b)) == b` holds field by field.

use std::path::Path;

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::features::{FeatureKind, OrientationRange};
use crate::fusion::FusionWeights;
use crate::pipeline::{ModelBundle, PipelineConfig};
use crate::svm::{BinarySvm, KernelSpec, MulticlassSvm};

const MAGIC: &[u8; 4] = b"PFZ1";
const VERSION: u32 = 1;

const TAG_U64: u8 = 0;
const TAG_F64: u8 = 1;
const TAG_STR: u8 = 2;

// ---------------------------------------------------------------------------
// CRC-32 (IEEE 802.3, reflected)

fn crc32(bytes: &[u8]) -> u32 {
    let mut table = [0u32; 256];
    for (i, entry) in table.iter_mut().enumerate() {
        let mut c = i as u32;
        for _ in 0..8 {
            c = if c & 1 != 0 { 0xedb88320 ^ (c >> 1) } else { c >> 1 };
        }
        *entry = c;
    }
    let mut crc = 0xffffffffu32;
    for &b in bytes {
        crc = table[((crc ^ b as u32) & 0xff) as usize] ^ (crc >> 8);
    }
    crc ^ 0xffffffff
}

// ---------------------------------------------------------------------------
// Byte buffer helpers

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.buf.len() {
            return None;
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }
    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
    fn str(&mut self) -> Option<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).ok()
    }
}

// ---------------------------------------------------------------------------
// Config block

enum ConfigValue {
    U64(u64),
    F64(f64),
    Str(String),
}

fn write_config(w: &mut Writer, config: &PipelineConfig) {
    let mut entries: Vec<(&str, ConfigValue)> = vec![
        ("levels", ConfigValue::U64(config.levels as u64)),
        ("words", ConfigValue::U64(config.words as u64)),
        ("step", ConfigValue::U64(config.step as u64)),
        ("patch", ConfigValue::U64(config.patch as u64)),
        ("h_bins", ConfigValue::U64(config.h_bins as u64)),
        ("s_bins", ConfigValue::U64(config.s_bins as u64)),
        ("v_bins", ConfigValue::U64(config.v_bins as u64)),
        ("k_bins", ConfigValue::U64(config.k_bins as u64)),
        (
            "orientation_range",
            ConfigValue::Str(
                match config.orientation_range {
                    OrientationRange::Full360 => "full360",
                    OrientationRange::Half180 => "half180",
                }
                .to_string(),
            ),
        ),
        ("canny_low", ConfigValue::F64(config.canny_low)),
        ("canny_high", ConfigValue::F64(config.canny_high)),
        (
            "kernel",
            ConfigValue::Str(
                match config.kernel {
                    KernelSpec::Linear => "linear",
                    KernelSpec::Rbf { .. } => "rbf",
                }
                .to_string(),
            ),
        ),
        ("cv_folds", ConfigValue::U64(config.cv_folds as u64)),
        ("svm_tol", ConfigValue::F64(config.svm_tol)),
        ("svm_max_passes", ConfigValue::U64(config.svm_max_passes as u64)),
        ("kmeans_max_iter", ConfigValue::U64(config.kmeans_max_iter as u64)),
        ("kmeans_tol", ConfigValue::F64(config.kmeans_tol)),
        ("max_codebook_descriptors", ConfigValue::U64(config.max_codebook_descriptors as u64)),
        ("train_per_class", ConfigValue::U64(config.train_per_class as u64)),
        ("seed", ConfigValue::U64(config.seed)),
    ];
    if let KernelSpec::Rbf { gamma } = config.kernel {
        entries.push(("gamma", ConfigValue::F64(gamma)));
    }
    if let Some(c) = config.c {
        entries.push(("c", ConfigValue::F64(c)));
    }
    w.u32(entries.len() as u32);
    for (key, value) in entries {
        w.str(key);
        match value {
            ConfigValue::U64(v) => {
                w.u8(TAG_U64);
                w.u64(v);
            }
            ConfigValue::F64(v) => {
                w.u8(TAG_F64);
                w.f64(v);
            }
            ConfigValue::Str(v) => {
                w.u8(TAG_STR);
                w.str(&v);
            }
        }
    }
}

fn read_config(r: &mut Reader) -> Option<PipelineConfig> {
    let count = r.u32()?;
    let mut u64s = std::collections::BTreeMap::new();
    let mut f64s = std::collections::BTreeMap::new();
    let mut strs = std::collections::BTreeMap::new();
    for _ in 0..count {
        let key = r.str()?;
        match r.u8()? {
            TAG_U64 => {
                u64s.insert(key, r.u64()?);
            }
            TAG_F64 => {
                f64s.insert(key, r.f64()?);
            }
            TAG_STR => {
                strs.insert(key, r.str()?);
            }
            _ => return None,
        }
    }
    let kernel = match strs.get("kernel")?.as_str() {
        "linear" => KernelSpec::Linear,
        "rbf" => KernelSpec::Rbf { gamma: *f64s.get("gamma")? },
        _ => return None,
    };
    Some(PipelineConfig {
        levels: *u64s.get("levels")? as u32,
        words: *u64s.get("words")? as usize,
        step: *u64s.get("step")? as usize,
        patch: *u64s.get("patch")? as usize,
        h_bins: *u64s.get("h_bins")? as usize,
        s_bins: *u64s.get("s_bins")? as usize,
        v_bins: *u64s.get("v_bins")? as usize,
        k_bins: *u64s.get("k_bins")? as usize,
        orientation_range: match strs.get("orientation_range")?.as_str() {
            "full360" => OrientationRange::Full360,
            "half180" => OrientationRange::Half180,
            _ => return None,
        },
        canny_low: *f64s.get("canny_low")?,
        canny_high: *f64s.get("canny_high")?,
        kernel,
        c: f64s.get("c").copied(),
        cv_folds: *u64s.get("cv_folds")? as usize,
        svm_tol: *f64s.get("svm_tol")?,
        svm_max_passes: *u64s.get("svm_max_passes")? as usize,
        kmeans_max_iter: *u64s.get("kmeans_max_iter")? as usize,
        kmeans_tol: *f64s.get("kmeans_tol")?,
        max_codebook_descriptors: *u64s.get("max_codebook_descriptors")? as usize,
        train_per_class: *u64s.get("train_per_class")? as usize,
        seed: *u64s.get("seed")?,
    })
}

// ---------------------------------------------------------------------------
// Section payloads

fn write_codebook(w: &mut Writer, cb: &Codebook) {
    w.u64(cb.rng_seed);
    w.f64(cb.inertia);
    w.u32(cb.words() as u32);
    w.u32(cb.dim() as u32);
    for center in &cb.centers {
        for &v in center {
            w.f64(v);
        }
    }
}

fn read_codebook(r: &mut Reader) -> Option<Codebook> {
    let rng_seed = r.u64()?;
    let inertia = r.f64()?;
    let v = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let mut centers = Vec::with_capacity(v);
    for _ in 0..v {
        let mut c = Vec::with_capacity(dim);
        for _ in 0..dim {
            c.push(r.f64()?);
        }
        centers.push(c);
    }
    Some(Codebook { centers, rng_seed, inertia })
}

fn write_kernel(w: &mut Writer, k: &KernelSpec) {
    match k {
        KernelSpec::Linear => w.u8(0),
        KernelSpec::Rbf { gamma } => {
            w.u8(1);
            w.f64(*gamma);
        }
    }
}

fn read_kernel(r: &mut Reader) -> Option<KernelSpec> {
    match r.u8()? {
        0 => Some(KernelSpec::Linear),
        1 => Some(KernelSpec::Rbf { gamma: r.f64()? }),
        _ => None,
    }
}

fn write_multiclass(w: &mut Writer, m: &MulticlassSvm) {
    w.u32(m.binaries.len() as u32);
    for b in &m.binaries {
        write_kernel(w, &b.kernel);
        w.f64(b.c);
        w.f64(b.bias);
        let dim = b.dim();
        w.u32(b.support_vectors.len() as u32);
        w.u32(dim as u32);
        for &a in &b.alphas {
            w.f64(a);
        }
        for sv in &b.support_vectors {
            for &v in sv {
                w.f64(v);
            }
        }
    }
}

fn read_multiclass(
    r: &mut Reader,
    class_labels: &[String],
    kind: FeatureKind,
) -> Option<MulticlassSvm> {
    let n = r.u32()? as usize;
    if n != class_labels.len() {
        return None;
    }
    let mut binaries = Vec::with_capacity(n);
    for _ in 0..n {
        let kernel = read_kernel(r)?;
        let c = r.f64()?;
        let bias = r.f64()?;
        let n_sv = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let mut alphas = Vec::with_capacity(n_sv);
        for _ in 0..n_sv {
            alphas.push(r.f64()?);
        }
        let mut support_vectors = Vec::with_capacity(n_sv);
        for _ in 0..n_sv {
            let mut sv = Vec::with_capacity(dim);
            for _ in 0..dim {
                sv.push(r.f64()?);
            }
            support_vectors.push(sv);
        }
        binaries.push(BinarySvm { support_vectors, alphas, bias, kernel, c });
    }
    Some(MulticlassSvm { class_labels: class_labels.to_vec(), binaries, feature_kind: kind })
}

// ---------------------------------------------------------------------------
// Container

fn write_container(config: &PipelineConfig, sections: &[(&str, Vec<u8>)]) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    write_config(&mut w, config);
    w.u32(sections.len() as u32);
    for (name, payload) in sections {
        w.str(name);
        w.u64(payload.len() as u64);
        w.buf.extend_from_slice(payload);
    }
    let crc = crc32(&w.buf);
    w.u32(crc);
    w.buf
}

struct Container {
    config: PipelineConfig,
    sections: Vec<(String, Vec<u8>)>,
}

fn read_container(path: &Path, bytes: &[u8]) -> Result<Container> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    if bytes.len() < 8 {
        return Err(Error::ChecksumMismatch(path.to_path_buf()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion { path: path.to_path_buf(), version });
    }
    if bytes.len() < 12 {
        return Err(Error::ChecksumMismatch(path.to_path_buf()));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    if crc32(body) != stored {
        return Err(Error::ChecksumMismatch(path.to_path_buf()));
    }

    let corrupt = || Error::ChecksumMismatch(path.to_path_buf());
    let mut r = Reader::new(&body[8..]);
    let config = read_config(&mut r).ok_or_else(corrupt)?;
    let count = r.u32().ok_or_else(corrupt)? as usize;
    let mut sections = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.str().ok_or_else(corrupt)?;
        let len = r.u64().ok_or_else(corrupt)? as usize;
        let payload = r.take(len).ok_or_else(corrupt)?.to_vec();
        sections.push((name, payload));
    }
    Ok(Container { config, sections })
}

impl Container {
    fn section<'a>(&'a self, path: &Path, name: &str) -> Result<&'a [u8]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.as_slice())
            .ok_or_else(|| Error::MissingSection {
                path: path.to_path_buf(),
                section: name.to_string(),
            })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Serialize a full model bundle.
pub fn bundle_to_bytes(bundle: &ModelBundle) -> Vec<u8> {
    let mut labels = Writer::default();
    labels.u32(bundle.class_labels.len() as u32);
    for l in &bundle.class_labels {
        labels.str(l);
    }
    let mut cb = Writer::default();
    write_codebook(&mut cb, &bundle.codebook);
    let mut phow = Writer::default();
    write_multiclass(&mut phow, &bundle.phow_clf);
    let mut phoc = Writer::default();
    write_multiclass(&mut phoc, &bundle.phoc_clf);
    let mut phog = Writer::default();
    write_multiclass(&mut phog, &bundle.phog_clf);
    let mut fusion = Writer::default();
    fusion.f64(bundle.weights.a_phow);
    fusion.f64(bundle.weights.a_phoc);
    fusion.f64(bundle.weights.a_phog);

    write_container(
        &bundle.config,
        &[
            ("labels", labels.buf),
            ("codebook", cb.buf),
            ("svm.phow", phow.buf),
            ("svm.phoc", phoc.buf),
            ("svm.phog", phog.buf),
            ("fusion", fusion.buf),
        ],
    )
}

pub fn bundle_from_bytes(path: &Path, bytes: &[u8]) -> Result<ModelBundle> {
    let container = read_container(path, bytes)?;
    let corrupt = || Error::ChecksumMismatch(path.to_path_buf());

    let mut r = Reader::new(container.section(path, "labels")?);
    let n = r.u32().ok_or_else(corrupt)? as usize;
    let mut class_labels = Vec::with_capacity(n);
    for _ in 0..n {
        class_labels.push(r.str().ok_or_else(corrupt)?);
    }

    let mut r = Reader::new(container.section(path, "codebook")?);
    let codebook = read_codebook(&mut r).ok_or_else(corrupt)?;

    let mut clfs = Vec::with_capacity(3);
    for (name, kind) in [
        ("svm.phow", FeatureKind::Phow),
        ("svm.phoc", FeatureKind::Phoc),
        ("svm.phog", FeatureKind::Phog),
    ] {
        let mut r = Reader::new(container.section(path, name)?);
        clfs.push(read_multiclass(&mut r, &class_labels, kind).ok_or_else(corrupt)?);
    }
    let phog_clf = clfs.pop().unwrap();
    let phoc_clf = clfs.pop().unwrap();
    let phow_clf = clfs.pop().unwrap();

    let mut r = Reader::new(container.section(path, "fusion")?);
    let weights = FusionWeights {
        a_phow: r.f64().ok_or_else(corrupt)?,
        a_phoc: r.f64().ok_or_else(corrupt)?,
        a_phog: r.f64().ok_or_else(corrupt)?,
    };

    Ok(ModelBundle {
        config: container.config,
        codebook,
        phow_clf,
        phoc_clf,
        phog_clf,
        weights,
        class_labels,
    })
}

pub fn save_model(bundle: &ModelBundle, path: &Path) -> Result<()> {
    write_file(path, &bundle_to_bytes(bundle))
}

pub fn load_model(path: &Path) -> Result<ModelBundle> {
    let bytes = read_file(path)?;
    bundle_from_bytes(path, &bytes)
}

/// Codebook-only file, as written by the `build-codebook` subcommand.
pub fn save_codebook(codebook: &Codebook, config: &PipelineConfig, path: &Path) -> Result<()> {
    let mut cb = Writer::default();
    write_codebook(&mut cb, codebook);
    write_file(path, &write_container(config, &[("codebook", cb.buf)]))
}

pub fn load_codebook(path: &Path) -> Result<(Codebook, PipelineConfig)> {
    let bytes = read_file(path)?;
    let container = read_container(path, &bytes)?;
    let mut r = Reader::new(container.section(path, "codebook")?);
    let codebook =
        read_codebook(&mut r).ok_or_else(|| Error::ChecksumMismatch(path.to_path_buf()))?;
    Ok((codebook, container.config))
}
