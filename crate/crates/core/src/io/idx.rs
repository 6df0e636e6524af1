//! IDX files (the MNIST distribution format): big-endian magic and
//! dimensions followed by unsigned bytes.

use std::path::Path;

use super::atomic::{read_bytes, write_atomic};
use crate::error::{Error, Result};
use crate::nn::{LabeledSet, Tensor};
use crate::shifts::Image;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    /// `count` images of `rows x cols`, pixels scaled to `[0, 1]`.
    Images(Vec<Image>),
    Labels(Vec<u8>),
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            Error::parse(
                path,
                format!("truncated header: need 4 bytes at offset {offset}, file has {}", bytes.len()),
            )
        })
}

/// Parses an in-memory IDX file; `path` is only used in error messages.
pub fn parse_idx(bytes: &[u8], path: &Path) -> Result<IdxData> {
    let magic = be_u32(bytes, 0, path)?;
    let dims = match magic {
        IMAGES_MAGIC => 3,
        LABELS_MAGIC => 1,
        other => {
            return Err(Error::parse(
                path,
                format!("bad magic 0x{other:08x} at offset 0 (expected 0x{IMAGES_MAGIC:08x} or 0x{LABELS_MAGIC:08x})"),
            ))
        }
    };
    let sizes = (0..dims)
        .map(|k| be_u32(bytes, 4 + 4 * k, path).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * dims;
    let expected: usize = sizes.iter().product();
    let payload = &bytes[header..];
    if payload.len() != expected {
        return Err(Error::parse(
            path,
            format!(
                "payload at offset {header}: expected {expected} bytes for dims {sizes:?}, found {}",
                payload.len()
            ),
        ));
    }
    Ok(match magic {
        IMAGES_MAGIC => {
            let (rows, cols) = (sizes[1], sizes[2]);
            let per = rows * cols;
            let images = (0..sizes[0])
                .map(|i| Image {
                    height: rows,
                    width: cols,
                    channels: 1,
                    pixels: payload[i * per..(i + 1) * per]
                        .iter()
                        .map(|&b| f64::from(b) / 255.0)
                        .collect(),
                })
                .collect();
            IdxData::Images(images)
        }
        _ => IdxData::Labels(payload.to_vec()),
    })
}

pub fn read_idx(path: &Path) -> Result<IdxData> {
    parse_idx(&read_bytes(path)?, path)
}

pub fn read_idx_images(path: &Path) -> Result<Vec<Image>> {
    match read_idx(path)? {
        IdxData::Images(v) => Ok(v),
        IdxData::Labels(_) => Err(Error::parse(path, "expected an image file, found labels")),
    }
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    match read_idx(path)? {
        IdxData::Labels(v) => Ok(v.into_iter().map(usize::from).collect()),
        IdxData::Images(_) => Err(Error::parse(path, "expected a label file, found images")),
    }
}

/// Serialises images (pixels quantised to bytes) in IDX format.
pub fn encode_idx_images(images: &[Image]) -> Result<Vec<u8>> {
    let (rows, cols) = images.first().map_or((0, 0), |i| (i.height, i.width));
    if images.iter().any(|i| i.height != rows || i.width != cols || i.channels != 1) {
        return Err(Error::shape("IDX images must share one grayscale size"));
    }
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        out.extend(img.pixels.iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[usize]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        out.push(u8::try_from(l).map_err(|_| Error::input(format!("label {l} does not fit a byte")))?);
    }
    Ok(out)
}

pub fn write_idx_images(path: &Path, images: &[Image]) -> Result<()> {
    write_atomic(path, &encode_idx_images(images)?)
}

pub fn write_idx_labels(path: &Path, labels: &[usize]) -> Result<()> {
    write_atomic(path, &encode_idx_labels(labels)?)
}

/// An image split with labels, as loaded from a pair of IDX files.
#[derive(Debug, Clone)]
pub struct ImageSplit {
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
}

impl ImageSplit {
    pub fn load(images: &Path, labels: &Path) -> Result<Self> {
        let images_v = read_idx_images(images)?;
        let labels_v = read_idx_labels(labels)?;
        if images_v.len() != labels_v.len() {
            return Err(Error::parse(
                labels,
                format!("{} labels for {} images", labels_v.len(), images_v.len()),
            ));
        }
        Ok(ImageSplit {
            images: images_v,
            labels: labels_v,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn to_labeled(&self) -> LabeledSet {
        LabeledSet {
            samples: self.images.iter().map(Image::to_tensor).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        self.images.iter().map(Image::to_tensor).collect()
    }
}

/// The standard MNIST file layout inside `dir`.
#[derive(Debug, Clone)]
pub struct MnistFiles {
    pub train_images: std::path::PathBuf,
    pub train_labels: std::path::PathBuf,
    pub test_images: std::path::PathBuf,
    pub test_labels: std::path::PathBuf,
}

impl MnistFiles {
    pub fn in_dir(dir: &Path) -> Self {
        MnistFiles {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
        }
    }

    pub fn load_train(&self) -> Result<ImageSplit> {
        ImageSplit::load(&self.train_images, &self.train_labels)
    }

    pub fn load_test(&self) -> Result<ImageSplit> {
        ImageSplit::load(&self.test_images, &self.test_labels)
    }
}
