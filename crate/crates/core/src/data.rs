//! CIFAR-10/100 binary ingestion, class-balanced subsampling and batching.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{Real, Tensor};

pub const IMAGE_SIDE: usize = 32;
pub const IMAGE_CHANNELS: usize = 3;
pub const IMAGE_BYTES: usize = IMAGE_CHANNELS * IMAGE_SIDE * IMAGE_SIDE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Cifar10,
    Cifar100,
}

impl Variant {
    pub fn class_count(self) -> usize {
        match self {
            Self::Cifar10 => 10,
            Self::Cifar100 => 100,
        }
    }

    /// Bytes per record: label byte(s) then the image.
    pub fn record_bytes(self) -> usize {
        match self {
            Self::Cifar10 => 1 + IMAGE_BYTES,
            Self::Cifar100 => 2 + IMAGE_BYTES,
        }
    }

    fn subdir(self) -> &'static str {
        match self {
            Self::Cifar10 => "cifar-10-batches-bin",
            Self::Cifar100 => "cifar-100-binary",
        }
    }

    /// `(file name, expected record count)` for the train and test splits.
    pub fn files(self) -> (Vec<(&'static str, usize)>, Vec<(&'static str, usize)>) {
        match self {
            Self::Cifar10 => (
                vec![
                    ("data_batch_1.bin", 10000),
                    ("data_batch_2.bin", 10000),
                    ("data_batch_3.bin", 10000),
                    ("data_batch_4.bin", 10000),
                    ("data_batch_5.bin", 10000),
                ],
                vec![("test_batch.bin", 10000)],
            ),
            Self::Cifar100 => (vec![("train.bin", 50000)], vec![("test.bin", 10000)]),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cifar10" => Ok(Self::Cifar10),
            "cifar100" => Ok(Self::Cifar100),
            _ => Err(Error::config(format!(
                "unknown dataset '{s}' (expected cifar10 or cifar100)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cifar10 => "cifar10",
            Self::Cifar100 => "cifar100",
        })
    }
}

/// Per-channel mean and standard deviation of pixels scaled to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; IMAGE_CHANNELS],
    pub std: [f64; IMAGE_CHANNELS],
}

impl Normalization {
    fn of(pixels: &[u8]) -> Self {
        let plane = IMAGE_SIDE * IMAGE_SIDE;
        let mut sum = [0.0f64; IMAGE_CHANNELS];
        let mut sq = [0.0f64; IMAGE_CHANNELS];
        let mut count = 0usize;
        for img in pixels.chunks_exact(IMAGE_BYTES) {
            for (c, chan) in img.chunks_exact(plane).enumerate() {
                for &b in chan {
                    let v = b as f64 / 255.0;
                    sum[c] += v;
                    sq[c] += v * v;
                }
            }
            count += plane;
        }
        let mut mean = [0.0; IMAGE_CHANNELS];
        let mut std = [1.0; IMAGE_CHANNELS];
        if count > 0 {
            for c in 0..IMAGE_CHANNELS {
                mean[c] = sum[c] / count as f64;
                let var = sq[c] / count as f64 - mean[c] * mean[c];
                std[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
            }
        }
        Self { mean, std }
    }
}

/// Images are kept as raw bytes and standardised when a batch is taken.
#[derive(Clone, Debug)]
pub struct Dataset {
    pixels: Vec<u8>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub split: String,
    pub stats: Normalization,
}

impl Dataset {
    /// Builds a dataset from raw `[N, 3, 32, 32]` bytes, computing its own
    /// normalisation statistics.
    pub fn from_raw(
        pixels: Vec<u8>,
        labels: Vec<usize>,
        class_count: usize,
        split: &str,
    ) -> Result<Self> {
        if pixels.len() != labels.len() * IMAGE_BYTES {
            return Err(Error::dim(format!(
                "{} pixel bytes for {} labels",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::config(format!(
                "label {bad} outside 0..{class_count}"
            )));
        }
        let stats = Normalization::of(&pixels);
        Ok(Self {
            pixels,
            labels,
            class_count,
            split: split.to_owned(),
            stats,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The same samples standardised with `stats` instead of their own.
    pub fn with_stats(mut self, stats: Normalization) -> Self {
        self.stats = stats;
        self
    }

    pub fn raw_image(&self, i: usize) -> &[u8] {
        &self.pixels[i * IMAGE_BYTES..(i + 1) * IMAGE_BYTES]
    }

    /// Standardised images `[len, 3, 32, 32]` and their labels.
    pub fn batch<T: Real>(&self, indices: &[usize]) -> (Tensor<T>, Vec<usize>) {
        let plane = IMAGE_SIDE * IMAGE_SIDE;
        let mut data = Vec::with_capacity(indices.len() * IMAGE_BYTES);
        for &i in indices {
            for (c, chan) in self.raw_image(i).chunks_exact(plane).enumerate() {
                let (m, s) = (self.stats.mean[c], self.stats.std[c]);
                data.extend(chan.iter().map(|&b| T::cst((b as f64 / 255.0 - m) / s)));
            }
        }
        let x = Tensor::new(
            &[indices.len(), IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE],
            data,
        )
        .expect("batch shape");
        (x, indices.iter().map(|&i| self.labels[i]).collect())
    }

    /// The first `n` samples (all of them if `n` is larger), keeping the
    /// current statistics.
    pub fn head(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        Ok(self.subset(&idx, &self.split)?.with_stats(self.stats))
    }

    fn subset(&self, indices: &[usize], split: &str) -> Result<Self> {
        let mut pixels = Vec::with_capacity(indices.len() * IMAGE_BYTES);
        for &i in indices {
            pixels.extend_from_slice(self.raw_image(i));
        }
        Self::from_raw(
            pixels,
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.class_count,
            split,
        )
    }
}

fn resolve_dir(dir: &Path, variant: Variant) -> PathBuf {
    let nested = dir.join(variant.subdir());
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

fn read_records(
    path: &Path,
    variant: Variant,
    pixels: &mut Vec<u8>,
    labels: &mut Vec<usize>,
) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let rec = variant.record_bytes();
    if bytes.is_empty() || bytes.len() % rec != 0 {
        return Err(Error::format(
            path,
            format!(
                "{} bytes is not a whole number of {rec}-byte records",
                bytes.len()
            ),
        ));
    }
    let label_bytes = rec - IMAGE_BYTES;
    for (k, r) in bytes.chunks_exact(rec).enumerate() {
        // CIFAR-100 stores the coarse label first, then the fine label
        let label = r[label_bytes - 1] as usize;
        if label >= variant.class_count() {
            return Err(Error::format(
                path,
                format!("record {k}: label {label} out of range"),
            ));
        }
        labels.push(label);
        pixels.extend_from_slice(&r[label_bytes..]);
    }
    Ok(())
}

/// Reads the standard binary distribution from `dir` (or its
/// `cifar-10-batches-bin` / `cifar-100-binary` subdirectory). Both splits
/// are standardised with statistics of the training split.
pub fn load_cifar(dir: impl AsRef<Path>, variant: Variant) -> Result<(Dataset, Dataset)> {
    let dir = resolve_dir(dir.as_ref(), variant);
    let (train_files, test_files) = variant.files();
    let read = |files: &[(&str, usize)], split: &str| -> Result<Dataset> {
        let mut pixels = Vec::new();
        let mut labels = Vec::new();
        for (name, _) in files {
            read_records(&dir.join(name), variant, &mut pixels, &mut labels)?;
        }
        Dataset::from_raw(pixels, labels, variant.class_count(), split)
    };
    let train = read(&train_files, "train")?;
    let test = read(&test_files, "test")?.with_stats(train.stats);
    Ok((train, test))
}

/// One line of a [`download_check`] report.
#[derive(Clone, Debug, Serialize)]
pub struct FileCheck {
    pub path: PathBuf,
    pub expected_bytes: u64,
    pub actual_bytes: Option<u64>,
    pub ok: bool,
}

/// Checks that every file of the distribution exists with its published
/// size. Nothing is fetched.
pub fn download_check(dir: impl AsRef<Path>, variant: Variant) -> Vec<FileCheck> {
    let dir = resolve_dir(dir.as_ref(), variant);
    let (train, test) = variant.files();
    train
        .iter()
        .chain(&test)
        .map(|(name, records)| {
            let path = dir.join(name);
            let expected_bytes = (records * variant.record_bytes()) as u64;
            let actual_bytes = fs::metadata(&path).ok().map(|m| m.len());
            FileCheck {
                ok: actual_bytes == Some(expected_bytes),
                path,
                expected_bytes,
                actual_bytes,
            }
        })
        .collect()
}

/// Draws `total / class_count` samples of every class without replacement.
/// The result carries statistics of its own samples.
pub fn subsample_per_class(ds: &Dataset, total: usize, seed: u64) -> Result<Dataset> {
    let k = ds.class_count;
    if total == 0 || total % k != 0 {
        return Err(Error::config(format!(
            "{total} samples cannot be split evenly over {k} classes"
        )));
    }
    if total > ds.len() {
        return Err(Error::config(format!(
            "asked for {total} samples from {}",
            ds.len()
        )));
    }
    let per_class = total / k;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = SeededRng::new(seed);
    let mut chosen = Vec::with_capacity(total);
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.len() < per_class {
            return Err(Error::config(format!(
                "class {class} has {} samples, {per_class} needed",
                members.len()
            )));
        }
        rng.shuffle(members);
        chosen.extend_from_slice(&members[..per_class]);
    }
    rng.shuffle(&mut chosen);
    ds.subset(&chosen, &ds.split)
}

/// Index batches for one epoch, reshuffled from `(seed, epoch)`. The last
/// batch may be short.
pub fn batches(len: usize, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..len).collect();
    SeededRng::with_stream(seed, epoch).shuffle(&mut order);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
