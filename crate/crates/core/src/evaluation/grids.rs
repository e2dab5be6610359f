//! Image grids: samples, reconstructions, latent traversals, style mixing,
//! and the sample dump consumed by external FID tools.

use std::fs;
use std::ops::Range;
use std::path::Path;

use alae_autodiff::{Array, Float};
use image::{ImageBuffer, Luma, Rgb};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ppl::{lerp, slerp, LatentSpace};
use super::EvalError;
use crate::datasets::denormalize;
use crate::model_zoo::{ModelError, NetworkBundle, NoiseSource};
use crate::rng::normal_array;

/// Images generated per forward pass when dumping samples.
const SAMPLE_CHUNK: usize = 50;

/// A canvas of equally sized tiles with values in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    pub rows: usize,
    pub cols: usize,
    pub tile_h: usize,
    pub tile_w: usize,
    pub channels: usize,
    /// `[rows * tile_h, cols * tile_w, channels]`, row-major.
    pub pixels: Vec<f32>,
}

impl ImageGrid {
    /// A black canvas.
    pub fn new(rows: usize, cols: usize, tile_h: usize, tile_w: usize, channels: usize) -> Self {
        ImageGrid {
            rows,
            cols,
            tile_h,
            tile_w,
            channels,
            pixels: vec![-1.0; rows * tile_h * cols * tile_w * channels],
        }
    }

    /// Lays out `[N, H, W, C]` tiles row by row, `cols` per row.
    pub fn from_tiles(tiles: &Array<f32>, cols: usize) -> Self {
        let [n, h, w, c] = tile_dims(tiles);
        let cols = cols.max(1);
        let mut grid = ImageGrid::new(n.div_ceil(cols), cols, h, w, c);
        for i in 0..n {
            grid.set_tile(i / cols, i % cols, tiles, i);
        }
        grid
    }

    pub fn width(&self) -> usize {
        self.cols * self.tile_w
    }

    pub fn height(&self) -> usize {
        self.rows * self.tile_h
    }

    /// Copies tile `index` of `tiles` into cell `(row, col)`.
    pub fn set_tile(&mut self, row: usize, col: usize, tiles: &Array<f32>, index: usize) {
        let (h, w, c) = (self.tile_h, self.tile_w, self.channels);
        let src = &tiles.data()[index * h * w * c..(index + 1) * h * w * c];
        let stride = self.width() * c;
        for y in 0..h {
            let dst = (row * h + y) * stride + col * w * c;
            self.pixels[dst..dst + w * c].copy_from_slice(&src[y * w * c..(y + 1) * w * c]);
        }
    }

    /// Contents of cell `(row, col)` as `[H, W, C]` values.
    pub fn tile(&self, row: usize, col: usize) -> Vec<f32> {
        let (h, w, c) = (self.tile_h, self.tile_w, self.channels);
        let stride = self.width() * c;
        let mut out = Vec::with_capacity(h * w * c);
        for y in 0..h {
            let src = (row * h + y) * stride + col * w * c;
            out.extend_from_slice(&self.pixels[src..src + w * c]);
        }
        out
    }

    /// Stacks grids with identical tiles and column counts vertically.
    pub fn stack(grids: &[ImageGrid]) -> Result<ImageGrid, EvalError> {
        let first = grids.first().ok_or(EvalError::Empty("grid list"))?;
        if grids
            .iter()
            .any(|g| (g.cols, g.tile_h, g.tile_w, g.channels) != (first.cols, first.tile_h, first.tile_w, first.channels))
        {
            return Err(EvalError::Mismatch("grids differ in layout".into()));
        }
        Ok(ImageGrid {
            rows: grids.iter().map(|g| g.rows).sum(),
            pixels: grids.iter().flat_map(|g| g.pixels.iter().copied()).collect(),
            ..first.clone()
        })
    }

    /// Writes an 8-bit PNG (grayscale for one channel, RGB for three).
    pub fn save_png(&self, path: &Path) -> Result<(), EvalError> {
        let (w, h) = (self.width() as u32, self.height() as u32);
        let bytes: Vec<u8> = self.pixels.iter().map(|&v| denormalize(v)).collect();
        let res = match self.channels {
            1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes).map(|img| img.save(path)),
            3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes).map(|img| img.save(path)),
            c => return Err(EvalError::Config(format!("cannot write {c}-channel images"))),
        };
        match res {
            Some(Ok(())) => Ok(()),
            Some(Err(e)) => Err(EvalError::io(path, e)),
            None => Err(EvalError::io(path, "pixel buffer does not match the grid size")),
        }
    }
}

fn tile_dims(tiles: &Array<f32>) -> [usize; 4] {
    let s = tiles.shape();
    [s[0], s[1], s[2], s[3]]
}

/// Views bundle outputs (or inputs) as `[N, H, W, C]` tiles: square
/// flat vectors become one-channel images.
pub fn to_tiles<T: Float>(x: &Array<T>) -> Result<Array<f32>, EvalError> {
    let x: Array<f32> = x.cast();
    match *x.shape() {
        [_, _, _, _] => Ok(x),
        [n, d] => {
            for c in [1usize, 3] {
                let side = ((d / c) as f64).sqrt().round() as usize;
                if side * side * c == d {
                    return Ok(x.reshape(&[n, side, side, c]));
                }
            }
            Err(EvalError::Config(format!("{d}-D vectors are not square images")))
        }
        _ => Err(EvalError::Mismatch(format!("cannot tile an array of shape {:?}", x.shape()))),
    }
}

fn check_images<T: Float>(bundle: &NetworkBundle<T>, x: &Array<T>) -> Result<(), EvalError> {
    let expected = bundle.sample_shape(bundle.growth().level);
    if x.ndim() == 0 || x.shape()[1..] != expected[..] {
        let got = x.shape().get(1).copied().unwrap_or(0);
        return Err(match bundle.is_style() {
            true => ModelError::ResolutionMismatch {
                expected: expected[0],
                got,
            },
            false => ModelError::DimensionMismatch {
                what: "input vector",
                expected: expected[0],
                got,
            },
        }
        .into());
    }
    Ok(())
}

fn rows_of<T: Float>(x: &Array<T>, rows: Range<usize>) -> Array<T> {
    let per = x.len() / x.shape()[0].max(1);
    let mut shape = x.shape().to_vec();
    shape[0] = rows.len();
    Array::from_vec(shape, x.data()[rows.start * per..rows.end * per].to_vec())
}

/// Draws `n` samples from the prior and decodes them (noise from `rng`).
pub fn generate_samples<T: Float>(bundle: &NetworkBundle<T>, n: usize, rng: &mut ChaCha8Rng) -> Result<Array<T>, EvalError> {
    let z: Array<T> = normal_array(&[n, bundle.latent_dim()], rng);
    let w = bundle.mapper_forward(&z)?;
    let noise = bundle.sample_noise(n, bundle.growth().level, rng);
    let mut src = if noise.is_empty() {
        NoiseSource::Zero
    } else {
        NoiseSource::Maps(&noise)
    };
    Ok(bundle.generate_from(&w, &mut src)?)
}

/// Decodes `steps` evenly spaced points between two latent endpoints
/// (spherical in Z, linear in W) into a single row, with zero noise.
pub fn traversal_grid<T: Float>(
    bundle: &NetworkBundle<T>,
    space: LatentSpace,
    endpoints: (&[f64], &[f64]),
    steps: usize,
) -> Result<ImageGrid, EvalError> {
    let d = bundle.latent_dim();
    let (a, b) = endpoints;
    if a.len() != d || b.len() != d {
        return Err(ModelError::DimensionMismatch {
            what: "traversal endpoint",
            expected: d,
            got: if a.len() != d { a.len() } else { b.len() },
        }
        .into());
    }
    if steps < 2 {
        return Err(EvalError::Config(format!("a traversal needs at least 2 steps, got {steps}")));
    }
    let mut latents = Vec::with_capacity(steps * d);
    for s in 0..steps {
        let t = s as f64 / (steps - 1) as f64;
        latents.extend(match space {
            LatentSpace::Z => slerp(a, b, t),
            LatentSpace::W => lerp(a, b, t),
        });
    }
    let latents: Array<T> = Array::from_vec(vec![steps, d], latents).cast();
    let w = match space {
        LatentSpace::Z => bundle.mapper_forward(&latents)?,
        LatentSpace::W => latents,
    };
    let images = bundle.generate_from(&w, &mut NoiseSource::Zero)?;
    Ok(ImageGrid::from_tiles(&to_tiles(&images)?, steps))
}

#[derive(Clone, Debug)]
pub struct Reconstruction<T> {
    /// `G(E(x))`, same shape as the input.
    pub output: Array<T>,
    /// Mean over the batch of `‖E(x) − E(G(E(x)))‖²`.
    pub latent_gap: f64,
    /// Mean over pixels of the across-batch variance of the outputs;
    /// zero means every reconstruction is identical.
    pub output_variance: f64,
    /// Inputs and outputs side by side: each row holds `pairs_per_row`
    /// (input, output) pairs.
    pub grid: ImageGrid,
}

/// Reconstructs `images` with every noise map fixed to zero.
pub fn reconstruct_batch<T: Float>(
    bundle: &NetworkBundle<T>,
    images: &Array<T>,
    pairs_per_row: usize,
) -> Result<Reconstruction<T>, EvalError> {
    check_images(bundle, images)?;
    let growth = bundle.growth();
    let w = bundle.encoder_forward(images, growth)?.w;
    let output = bundle.generate_from(&w, &mut NoiseSource::Zero)?;
    let w_rec = bundle.encoder_forward(&output, growth)?.w;
    let n = images.shape()[0];
    let latent_gap = w
        .data()
        .iter()
        .zip(w_rec.data())
        .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
        .sum::<f64>()
        / n as f64;

    let per = output.len() / n;
    let mut variance = 0.0;
    for p in 0..per {
        let vals: Vec<f64> = (0..n).map(|i| output.data()[i * per + p].as_f64()).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        variance += vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    }

    let inputs = to_tiles(images)?;
    let outputs = to_tiles(&output)?;
    let [_, h, wd, c] = tile_dims(&inputs);
    let pairs_per_row = pairs_per_row.max(1);
    let mut grid = ImageGrid::new(n.div_ceil(pairs_per_row), 2 * pairs_per_row, h, wd, c);
    for i in 0..n {
        let (r, k) = (i / pairs_per_row, i % pairs_per_row);
        grid.set_tile(r, 2 * k, &inputs, i);
        grid.set_tile(r, 2 * k + 1, &outputs, i);
    }
    Ok(Reconstruction {
        output,
        latent_gap,
        output_variance: variance / per as f64,
        grid,
    })
}

/// Which style sites take the source code in a mixing cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteRange {
    Coarse,
    Middle,
    Fine,
    /// Explicit site indices.
    Sites(Range<usize>),
}

/// Splits `levels` generator levels into coarse / middle / fine level
/// ranges. With five or more levels: levels 0–1, 2–3 and the rest. With
/// fewer, the same 2:2:rest proportions of a nine-level generator are
/// rescaled, keeping at least one coarse and one middle level when there
/// are enough levels.
pub fn site_partition(levels: usize) -> [Range<usize>; 3] {
    if levels >= 5 {
        return [0..2, 2..4, 4..levels];
    }
    let coarse = ((levels as f64 * 2.0 / 9.0).round() as usize).clamp(1.min(levels), levels);
    let middle = ((levels as f64 * 4.0 / 9.0).round() as usize).max(coarse + 1).min(levels);
    [0..coarse, coarse..middle, middle..levels]
}

impl SiteRange {
    /// Site indices for a generator with `levels` levels and
    /// `sites_per_level` sites each.
    pub fn sites(&self, levels: usize, sites_per_level: usize) -> Range<usize> {
        let total = levels * sites_per_level;
        let scale = |r: &Range<usize>| r.start * sites_per_level..r.end * sites_per_level;
        let [c, m, f] = site_partition(levels);
        match self {
            SiteRange::Coarse => scale(&c),
            SiteRange::Middle => scale(&m),
            SiteRange::Fine => scale(&f),
            SiteRange::Sites(r) => r.start.min(total)..r.end.min(total),
        }
    }
}

/// Mixing grid with `(|sources| + 1) × (|destinations| + 1)` cells. Row
/// `i + 1` belongs to source `i`, column `j + 1` to destination `j`; the
/// header row and column show the real images. Each inner cell decodes the
/// source code on `range` and the destination code on every other site,
/// with zero noise.
pub fn style_mixing_grid<T: Float>(
    bundle: &NetworkBundle<T>,
    sources: &Array<T>,
    destinations: &Array<T>,
    range: &SiteRange,
) -> Result<ImageGrid, EvalError> {
    check_images(bundle, sources)?;
    check_images(bundle, destinations)?;
    let growth = bundle.growth();
    let ws = bundle.encoder_forward(sources, growth)?.w;
    let wd = bundle.encoder_forward(destinations, growth)?.w;
    let (ns, nd) = (sources.shape()[0], destinations.shape()[0]);
    let sites = bundle.num_sites();
    let levels = growth.level + 1;
    let mixed = range.sites(levels, sites / levels);

    let src_tiles = to_tiles(sources)?;
    let dst_tiles = to_tiles(destinations)?;
    let [_, h, w, c] = tile_dims(&src_tiles);
    let mut grid = ImageGrid::new(ns + 1, nd + 1, h, w, c);
    for j in 0..nd {
        grid.set_tile(0, j + 1, &dst_tiles, j);
    }
    for i in 0..ns {
        grid.set_tile(i + 1, 0, &src_tiles, i);
        // One decode per source row: destination codes everywhere, the
        // source code repeated on the mixed sites.
        let src_rep = repeat_row(&ws, i, nd);
        let codes: Vec<Array<T>> = (0..sites)
            .map(|s| if mixed.contains(&s) { src_rep.clone() } else { wd.clone() })
            .collect();
        let cells = to_tiles(&bundle.generator_forward(&codes, growth, &mut NoiseSource::Zero)?)?;
        for j in 0..nd {
            grid.set_tile(i + 1, j + 1, &cells, j);
        }
    }
    Ok(grid)
}

fn repeat_row<T: Float>(x: &Array<T>, row: usize, times: usize) -> Array<T> {
    let d = x.shape()[1];
    let r = &x.data()[row * d..(row + 1) * d];
    Array::from_vec(vec![times, d], r.iter().copied().cycle().take(times * d).collect())
}

/// Writes `n_samples` generated images (and, if given, reconstructions of
/// `real`) as PNG files under `out_dir`, plus `manifest.txt` listing their
/// paths relative to `out_dir`. Returns the manifest entries.
pub fn fid_export<T: Float>(
    bundle: &NetworkBundle<T>,
    n_samples: usize,
    out_dir: &Path,
    real: Option<&Array<T>>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>, EvalError> {
    let mut entries = Vec::new();
    let write_dir = |sub: &str| -> Result<(), EvalError> {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| EvalError::io(&dir, e))
    };
    let write_tiles = |sub: &str, images: &Array<T>, offset: usize, entries: &mut Vec<String>| -> Result<(), EvalError> {
        let tiles = to_tiles(images)?;
        for i in 0..tiles.shape()[0] {
            let rel = format!("{sub}/{sub}_{:05}.png", offset + i);
            ImageGrid::from_tiles(&rows_of(&tiles, i..i + 1), 1).save_png(&out_dir.join(&rel))?;
            entries.push(rel);
        }
        Ok(())
    };

    write_dir("generated")?;
    let mut done = 0;
    while done < n_samples {
        let n = SAMPLE_CHUNK.min(n_samples - done);
        let images = generate_samples(bundle, n, rng)?;
        write_tiles("generated", &images, done, &mut entries)?;
        done += n;
    }
    if let Some(real) = real {
        write_dir("reconstructed")?;
        let n = real.shape()[0];
        let mut start = 0;
        while start < n {
            let end = (start + SAMPLE_CHUNK).min(n);
            let rec = reconstruct_batch(bundle, &rows_of(real, start..end), 1)?;
            write_tiles("reconstructed", &rec.output, start, &mut entries)?;
            start = end;
        }
    }
    let manifest = out_dir.join("manifest.txt");
    let mut text = entries.join("\n");
    text.push('\n');
    fs::write(&manifest, text).map_err(|e| EvalError::io(&manifest, e))?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_nine_levels_matches_the_fixed_split() {
        assert_eq!(site_partition(9), [0..2, 2..4, 4..9]);
        assert_eq!(site_partition(4), [0..1, 1..2, 2..4]);
        assert_eq!(site_partition(1), [0..1, 1..1, 1..1]);
        assert_eq!(site_partition(3), [0..1, 1..2, 2..3]);
        for levels in 1..12 {
            let [c, m, f] = site_partition(levels);
            assert_eq!((c.start, c.end, m.end, f.end), (0, m.start, f.start, levels));
        }
    }

    #[test]
    fn tiles_round_trip_through_a_grid() {
        let data: Vec<f32> = (0..2 * 2 * 3 * 1).map(|v| v as f32 / 12.0).collect();
        let tiles = Array::from_vec(vec![2, 2, 3, 1], data.clone());
        let grid = ImageGrid::from_tiles(&tiles, 2);
        assert_eq!((grid.width(), grid.height()), (6, 2));
        assert_eq!(grid.tile(0, 1), data[6..].to_vec());
    }

    #[test]
    fn flat_square_vectors_become_gray_tiles() {
        let x = Array::<f32>::zeros(&[3, 784]);
        assert_eq!(to_tiles(&x).unwrap().shape(), &[3, 28, 28, 1]);
        assert!(to_tiles(&Array::<f32>::zeros(&[3, 10])).is_err());
    }
}
