//! Dataset readers and the balanced class-pair subset protocol.

pub mod cifar;
pub mod idx;

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::prior::derive_seed;
use crate::tensor::Tensor;

pub use cifar::{encode_cifar10_record, parse_cifar10_bin};
pub use idx::{encode_mnist_idx, parse_mnist_idx};

/// Environment variable naming the default data directory (holding `mnist/`
/// and `cifar10/`).
pub const DATA_DIR_ENV: &str = "GNCLAB_DATA_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub pixels: Tensor,
    pub class_id: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Mnist,
    Cifar10,
    Synthetic,
}

impl DatasetKind {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar" | "cifar10" => Ok(DatasetKind::Cifar10),
            "synthetic" => Ok(DatasetKind::Synthetic),
            other => Err(Error::InvalidArgument(format!(
                "unknown dataset '{other}' (expected mnist, cifar10 or synthetic)"
            ))),
        }
    }

    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            DatasetKind::Mnist => crate::arch::MNIST_SHAPE.to_vec(),
            DatasetKind::Cifar10 => crate::arch::CIFAR_SHAPE.to_vec(),
            DatasetKind::Synthetic => vec![2],
        }
    }
}

/// Train and test images of one dataset, immutable once loaded.
#[derive(Debug, Clone, Default)]
pub struct ImagePool {
    pub train: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
    /// `(file name, sha256 hex)` of every file read.
    pub checksums: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Tensor,
    pub y: f64,
}

/// Frozen train/test split for one class pair. The smaller class id maps to
/// label +1 and the larger to -1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTask {
    pub class_pair: (u8, u8),
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub subset_seed: u64,
}

impl BinaryTask {
    pub fn input_shape(&self) -> &[usize] {
        self.train
            .first()
            .or(self.test.first())
            .map(|s| s.x.shape())
            .unwrap_or(&[])
    }

    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    /// Train followed by test; the point set for Lipschitz estimation.
    pub fn union(&self) -> impl Iterator<Item = &Sample> {
        self.train.iter().chain(&self.test)
    }

    /// SHA-256 over labels and the exact bit patterns of every input.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update([self.class_pair.0, self.class_pair.1]);
        h.update(self.subset_seed.to_le_bytes());
        for (tag, set) in [(0u8, &self.train), (1u8, &self.test)] {
            h.update([tag]);
            h.update((set.len() as u64).to_le_bytes());
            for s in set {
                h.update(s.y.to_bits().to_le_bytes());
                for v in s.x.data() {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }
}

fn label_for(class_id: u8, pair: (u8, u8)) -> f64 {
    if class_id == pair.0.min(pair.1) {
        1.0
    } else {
        -1.0
    }
}

/// Balanced subset of `n` training images (n/2 per class), interleaved so
/// that for a fixed seed the subset for `n1 < n2` is a prefix of the one
/// for `n2`. The test set is every test image of the two classes.
pub fn build_binary_task(pool: &ImagePool, class_pair: (u8, u8), n: usize, subset_seed: u64) -> Result<BinaryTask> {
    let (a, b) = class_pair;
    if a == b {
        return Err(Error::InvalidArgument(format!("class pair ({a},{b}) needs two classes")));
    }
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("training size {n} must be positive and even")));
    }
    let pair = (a.min(b), a.max(b));
    let half = n / 2;
    let mut picks = Vec::with_capacity(2);
    for class in [pair.0, pair.1] {
        let mut idx: Vec<usize> = pool
            .train
            .iter()
            .enumerate()
            .filter(|(_, im)| im.class_id == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < half {
            return Err(Error::Dataset(format!(
                "class {class} has {} training images, {half} requested",
                idx.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(subset_seed, &[class as u64]));
        idx.shuffle(&mut rng);
        idx.truncate(half);
        picks.push(idx);
    }
    let mut train = Vec::with_capacity(n);
    for i in 0..half {
        for class_picks in &picks {
            let im = &pool.train[class_picks[i]];
            train.push(Sample {
                x: im.pixels.clone(),
                y: label_for(im.class_id, pair),
            });
        }
    }
    let test = pool
        .test
        .iter()
        .filter(|im| im.class_id == pair.0 || im.class_id == pair.1)
        .map(|im| Sample {
            x: im.pixels.clone(),
            y: label_for(im.class_id, pair),
        })
        .collect();
    Ok(BinaryTask {
        class_pair: pair,
        train,
        test,
        subset_seed,
    })
}

/// Per-channel 2x2 max pooling of a CxHxW image with even extents.
pub fn downsample2(image: &Tensor) -> Result<Tensor> {
    let &[c, h, w] = image.shape() else {
        return Err(Error::InvalidArgument(format!(
            "downsample2 needs a CxHxW image, got {:?}",
            image.shape()
        )));
    };
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::InvalidArgument(format!("odd extents {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let src = image.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let at = |dy: usize, dx: usize| src[ch * h * w + (2 * y + dy) * w + 2 * x + dx];
                out.push(at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1)));
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// Two isotropic unit-variance Gaussians in the plane centred at
/// `(+separation/2, 0)` (class 0) and `(-separation/2, 0)` (class 1).
pub fn synthetic_pool(per_class_train: usize, per_class_test: usize, separation: f64, seed: u64) -> ImagePool {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5157]));
    let mut draw = |count: usize| {
        let mut out = Vec::with_capacity(2 * count);
        for _ in 0..count {
            for class_id in [0u8, 1] {
                let sign = if class_id == 0 { 1.0 } else { -1.0 };
                let x0: f64 = StandardNormal.sample(&mut rng);
                let x1: f64 = StandardNormal.sample(&mut rng);
                out.push(LabeledImage {
                    pixels: Tensor::from_vec(vec![x0 + sign * separation / 2.0, x1]),
                    class_id,
                });
            }
        }
        out
    };
    let train = draw(per_class_train);
    let test = draw(per_class_test);
    ImagePool {
        train,
        test,
        checksums: Vec::new(),
    }
}

/// Convenience: balanced synthetic task with `n` training and `n_test` test points.
pub fn synthetic_task(n: usize, n_test: usize, separation: f64, seed: u64) -> Result<BinaryTask> {
    let pool = synthetic_pool(n.div_ceil(2).max(1), n_test.div_ceil(2).max(1), separation, seed);
    build_binary_task(&pool, (0, 1), n, seed)
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn find_file(dir: &Path, stems: &[&str]) -> Result<PathBuf> {
    for stem in stems {
        for suffix in ["", ".gz"] {
            let p = dir.join(format!("{stem}{suffix}"));
            if p.is_file() {
                return Ok(p);
            }
        }
    }
    Err(Error::Dataset(format!(
        "none of {stems:?} (optionally .gz) found in {}",
        dir.display()
    )))
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads the MNIST train and test splits from IDX files (raw or gzip).
pub fn load_mnist(dir: &Path) -> Result<ImagePool> {
    let mut pool = ImagePool::default();
    for (images, labels, is_train) in [
        (["train-images-idx3-ubyte", "train-images.idx3-ubyte"], ["train-labels-idx1-ubyte", "train-labels.idx1-ubyte"], true),
        (["t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"], ["t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"], false),
    ] {
        let ip = find_file(dir, &images)?;
        let lp = find_file(dir, &labels)?;
        let ib = read_maybe_gz(&ip)?;
        let lb = read_maybe_gz(&lp)?;
        let parsed = parse_mnist_idx(&ib, &lb).map_err(|e| Error::parse(file_name(&ip), e))?;
        if parsed.first().is_some_and(|im| im.pixels.shape() != crate::arch::MNIST_SHAPE) {
            return Err(Error::Dataset(format!("{} is not 28x28", ip.display())));
        }
        pool.checksums.push((file_name(&ip), sha256_hex(&ib)));
        pool.checksums.push((file_name(&lp), sha256_hex(&lb)));
        if is_train {
            pool.train = parsed;
        } else {
            pool.test = parsed;
        }
    }
    Ok(pool)
}

/// Loads `data_batch_{1..5}.bin` and `test_batch.bin` (directly in `dir` or
/// in `dir/cifar-10-batches-bin`).
pub fn load_cifar10(dir: &Path) -> Result<ImagePool> {
    let nested = dir.join("cifar-10-batches-bin");
    let dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let mut pool = ImagePool::default();
    for i in 1..=5 {
        let p = find_file(&dir, &[&format!("data_batch_{i}.bin")])?;
        let bytes = read_maybe_gz(&p)?;
        pool.train
            .extend(parse_cifar10_bin(&bytes).map_err(|e| Error::parse(file_name(&p), e))?);
        pool.checksums.push((file_name(&p), sha256_hex(&bytes)));
    }
    let p = find_file(&dir, &["test_batch.bin"])?;
    let bytes = read_maybe_gz(&p)?;
    pool.test = parse_cifar10_bin(&bytes).map_err(|e| Error::parse(file_name(&p), e))?;
    pool.checksums.push((file_name(&p), sha256_hex(&bytes)));
    Ok(pool)
}

/// `$GNCLAB_DATA_DIR/<name>` when the variable is set, else `data/<name>`.
pub fn default_data_dir(name: &str) -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
        .join(name)
}
