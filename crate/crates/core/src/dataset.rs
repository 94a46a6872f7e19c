//! Datasets: IDX files and small synthetic image sets.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::encoding::{normalize, stream_rng};
use crate::error::{Result, SnnError};
use crate::network::Shape;

/// Images in `[0, 1]`, each stored channel-major (`C x H x W`), with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub shape: Shape,
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(shape: Shape, images: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(SnnError::mismatch("dataset labels", images.len(), labels.len()));
        }
        if let Some(img) = images.iter().find(|img| img.len() != shape.len()) {
            return Err(SnnError::mismatch("dataset image size", shape.len(), img.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(SnnError::InvalidArgument(format!(
                "label {bad} outside 0..{num_classes}"
            )));
        }
        Ok(Self {
            shape,
            images,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.shape.len()
    }

    /// Every image normalized to zero mean and unit max-magnitude.
    pub fn normalized(&self) -> Result<Vec<Vec<f64>>> {
        self.images.iter().map(|img| normalize(img)).collect()
    }

    /// First `n` samples and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let part = |r: std::ops::Range<usize>| Dataset {
            shape: self.shape,
            images: self.images[r.clone()].to_vec(),
            labels: self.labels[r].to_vec(),
            num_classes: self.num_classes,
        };
        (part(0..n), part(n..self.len()))
    }

    pub fn take(&self, n: usize) -> Dataset {
        self.split_at(n).0
    }
}

/// Raw IDX array: big-endian dimensions and unsigned-byte payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<u32>,
    pub data: Vec<u8>,
}

impl IdxArray {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(SnnError::IdxFormat {
                offset: bytes.len(),
                message: "file shorter than the 4-byte magic".into(),
            });
        }
        for (offset, &b) in bytes[..2].iter().enumerate() {
            if b != 0 {
                return Err(SnnError::IdxFormat {
                    offset,
                    message: format!("magic byte must be 0x00, found {b:#04x}"),
                });
            }
        }
        if bytes[2] != 0x08 {
            return Err(SnnError::IdxFormat {
                offset: 2,
                message: format!("only unsigned-byte data (0x08) is supported, found {:#04x}", bytes[2]),
            });
        }
        let ndim = bytes[3] as usize;
        if ndim == 0 {
            return Err(SnnError::IdxFormat {
                offset: 3,
                message: "zero dimensions".into(),
            });
        }
        let header = 4 + 4 * ndim;
        if bytes.len() < header {
            return Err(SnnError::IdxFormat {
                offset: bytes.len(),
                message: format!("header needs {header} bytes for {ndim} dimensions"),
            });
        }
        let dims: Vec<u32> = bytes[4..header]
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .filter(|&c| c.checked_add(header).is_some())
            .ok_or_else(|| SnnError::IdxOverflow(dims.clone()))?;
        let payload = &bytes[header..];
        if payload.len() < count {
            return Err(SnnError::IdxTruncated {
                expected: count,
                actual: payload.len(),
            });
        }
        Ok(Self {
            dims,
            data: payload[..count].to_vec(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| SnnError::io(path, e))?;
        Self::parse(&bytes)
    }

    /// Interpret as images: `N x H x W` or `N x H x W x C`, scaled by 1/255.
    pub fn to_images(&self) -> Result<(Shape, Vec<Vec<f64>>)> {
        let (n, h, w, c) = match self.dims.as_slice() {
            [n, h, w] => (*n as usize, *h as usize, *w as usize, 1usize),
            [n, h, w, c] => (*n as usize, *h as usize, *w as usize, *c as usize),
            _ => {
                return Err(SnnError::InvalidArgument(format!(
                    "image IDX needs 3 or 4 dimensions, found {:?}",
                    self.dims
                )))
            }
        };
        let per = h * w * c;
        let images = (0..n)
            .map(|s| {
                let src = &self.data[s * per..(s + 1) * per];
                // interleaved HWC -> channel-major CHW
                let mut img = vec![0.0; per];
                for y in 0..h {
                    for x in 0..w {
                        for ch in 0..c {
                            img[ch * h * w + y * w + x] = src[(y * w + x) * c + ch] as f64 / 255.0;
                        }
                    }
                }
                img
            })
            .collect();
        Ok((Shape::new(c, h, w), images))
    }
}

/// Parse an IDX image file into an unlabeled (all-zero label) dataset.
pub fn load_idx(path: &Path) -> Result<Dataset> {
    let arr = IdxArray::read(path)?;
    let (shape, images) = arr.to_images()?;
    let n = images.len();
    Dataset::new(shape, images, vec![0; n], 1)
}

/// Images plus a 1-D label file.
pub fn load_idx_dataset(images: &Path, labels: &Path) -> Result<Dataset> {
    let img = IdxArray::read(images)?;
    let lab = IdxArray::read(labels)?;
    if lab.dims.len() != 1 {
        return Err(SnnError::InvalidArgument(format!(
            "label IDX must be one-dimensional, found {:?}",
            lab.dims
        )));
    }
    let (shape, images) = img.to_images()?;
    let labels: Vec<usize> = lab.data.iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(shape, images, labels, num_classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    TwoGaussians,
    Bars,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::TwoGaussians => "two-gaussians",
            SynthKind::Bars => "bars",
        })
    }
}

impl FromStr for SynthKind {
    type Err = SnnError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "two-gaussians" | "twogaussians" => Ok(SynthKind::TwoGaussians),
            "bars" => Ok(SynthKind::Bars),
            other => Err(SnnError::InvalidArgument(format!("unknown synthetic dataset {other:?}"))),
        }
    }
}

/// Rendering knobs for [`synth_dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub size: usize,
    /// Std of additive Gaussian pixel noise before clipping to `[0, 1]`.
    pub pixel_noise: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            size: 16,
            pixel_noise: 0.1,
        }
    }
}

/// Deterministic two-class image set; sample `i` has label `i % 2`.
///
/// `TwoGaussians` draws one Gaussian bump per image whose center is jittered
/// around a class-specific anchor. `Bars` draws a two-pixel-wide horizontal
/// (class 0) or vertical (class 1) bar at a random offset.
pub fn synth_dataset(kind: SynthKind, n: usize, seed: u64, opts: SynthOptions) -> Result<Dataset> {
    if n < 2 {
        return Err(SnnError::InvalidArgument("synthetic dataset needs n >= 2".into()));
    }
    if opts.size < 4 {
        return Err(SnnError::InvalidArgument("synthetic images need size >= 4".into()));
    }
    let s = opts.size;
    let sf = s as f64;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let mut rng = stream_rng(seed, i as u64);
        let mut img = vec![0.0; s * s];
        match kind {
            SynthKind::TwoGaussians => {
                let anchor = if label == 0 { 0.35 } else { 0.65 };
                let jitter = 0.08 * sf;
                let cy = anchor * sf + jitter * rng.sample::<f64, _>(StandardNormal);
                let cx = anchor * sf + jitter * rng.sample::<f64, _>(StandardNormal);
                let width = 0.15 * sf;
                for y in 0..s {
                    for x in 0..s {
                        let r2 = (y as f64 + 0.5 - cy).powi(2) + (x as f64 + 0.5 - cx).powi(2);
                        img[y * s + x] = (-r2 / (2.0 * width * width)).exp();
                    }
                }
            }
            SynthKind::Bars => {
                let pos = rng.random_range(0..s - 1);
                for a in 0..s {
                    for b in pos..pos + 2 {
                        let (y, x) = if label == 0 { (b, a) } else { (a, b) };
                        img[y * s + x] = 1.0;
                    }
                }
            }
        }
        if opts.pixel_noise > 0.0 {
            for p in img.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *p = (*p + opts.pixel_noise * z).clamp(0.0, 1.0);
            }
        }
        images.push(img);
        labels.push(label);
    }
    Dataset::new(Shape::new(1, s, s), images, labels, 2)
}
