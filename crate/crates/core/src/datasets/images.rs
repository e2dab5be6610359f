//! Pixel normalization, resolution pyramids and image directories.

use std::fs;
use std::path::{Path, PathBuf};

use alae_autodiff::Array;

use super::DataError;

/// Name of the manifest file inside an image corpus directory.
pub const MANIFEST: &str = "manifest.txt";

/// `x / 127.5 - 1`.
pub fn normalize(p: u8) -> f32 {
    p as f32 / 127.5 - 1.0
}

/// Inverse of [`normalize`], rounding and clamping to 8 bits.
pub fn denormalize(v: f32) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// Area-averaged downscales of a square `[R, R, C]` (or `[1, R, R, C]`)
/// image, from 4 px up to the source. Index `k` holds the `4 * 2^k` image.
pub fn build_resolution_pyramid(image: &Array<f32>) -> Result<Vec<Array<f32>>, DataError> {
    let s = image.shape();
    let img = match s.len() {
        3 => image.clone().reshape(&[1, s[0], s[1], s[2]]),
        4 if s[0] == 1 => image.clone(),
        _ => return Err(DataError::Invalid(format!("expected a single HWC image, got shape {s:?}"))),
    };
    let (h, w) = (img.shape()[1], img.shape()[2]);
    if h != w {
        return Err(DataError::Invalid(format!("image is {h}x{w}, not square")));
    }
    if h < 4 || !h.is_power_of_two() {
        return Err(DataError::Invalid(format!("side {h} is not a power of two >= 4")));
    }
    let mut levels = vec![img];
    while levels.last().unwrap().shape()[1] > 4 {
        let next = levels.last().unwrap().down2();
        levels.push(next);
    }
    levels.reverse();
    Ok(levels)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageRecord {
    pub path: PathBuf,
    pub label: Option<i64>,
}

/// Square images held as one `[n, r, r, C]` tensor per pyramid level.
#[derive(Clone, Debug)]
pub struct ImageCorpus {
    pub items: Vec<ImageRecord>,
    pub channels: usize,
    /// `levels[k]` has resolution `4 * 2^k`.
    pub levels: Vec<Array<f32>>,
}

impl ImageCorpus {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// Items `idx` at `level` as `[idx.len(), r, r, C]`.
    pub fn gather(&self, idx: &[usize], level: usize) -> Array<f32> {
        let a = &self.levels[level];
        let s = a.shape();
        let per = s[1] * s[2] * s[3];
        let mut out = Vec::with_capacity(idx.len() * per);
        for &i in idx {
            out.extend_from_slice(&a.data()[i * per..(i + 1) * per]);
        }
        Array::from_vec(vec![idx.len(), s[1], s[2], s[3]], out)
    }
}

/// Decodes one image file to `[R, R, channels]` in `[-1, 1]`.
pub fn load_image(path: &Path, channels: usize) -> Result<Array<f32>, DataError> {
    let err = |reason: String| DataError::Image {
        path: path.to_path_buf(),
        reason,
    };
    let img = image::open(path).map_err(|e| err(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f32> = match channels {
        1 => img.to_luma8().into_raw().into_iter().map(normalize).collect(),
        3 => img.to_rgb8().into_raw().into_iter().map(normalize).collect(),
        c => return Err(err(format!("unsupported channel count {c}"))),
    };
    Ok(Array::from_vec(vec![h, w, channels], data))
}

/// Reads `dir/manifest.txt` (one relative path per line, optionally
/// followed by a tab and an integer label; `#` starts a comment) and builds
/// the pyramid of every listed image.
pub fn load_image_corpus(dir: &Path, channels: usize) -> Result<ImageCorpus, DataError> {
    let manifest = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest).map_err(|e| DataError::io(&manifest, e))?;
    let mut items = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let path = PathBuf::from(parts.next().unwrap());
        let label = match parts.next() {
            Some(l) => Some(l.trim().parse().map_err(|_| DataError::Format {
                path: manifest.clone(),
                reason: format!("line {}: bad label {l:?}", ln + 1),
            })?),
            None => None,
        };
        items.push(ImageRecord { path, label });
    }
    if items.is_empty() {
        return Err(DataError::Invalid(format!("{} lists no images", manifest.display())));
    }
    let mut levels: Vec<Vec<f32>> = Vec::new();
    let mut side = 0;
    for item in &items {
        let img = load_image(&dir.join(&item.path), channels)?;
        let pyr = build_resolution_pyramid(&img)?;
        if levels.is_empty() {
            side = img.shape()[0];
            levels = vec![Vec::new(); pyr.len()];
        } else if img.shape()[0] != side {
            return Err(DataError::Invalid(format!(
                "{} is {}px but the corpus is {side}px",
                item.path.display(),
                img.shape()[0]
            )));
        }
        for (acc, l) in levels.iter_mut().zip(&pyr) {
            acc.extend_from_slice(l.data());
        }
    }
    let n = items.len();
    let levels = levels
        .into_iter()
        .enumerate()
        .map(|(k, data)| {
            let r = 4 << k;
            Array::from_vec(vec![n, r, r, channels], data)
        })
        .collect();
    Ok(ImageCorpus {
        items,
        channels,
        levels,
    })
}
