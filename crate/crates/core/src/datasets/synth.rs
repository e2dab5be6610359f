//! Procedural face-like images for desk-scale runs of the style model.
//!
//! Each image is a background gradient with a hair mass, a skin-toned face
//! ellipse, eyes, brows, nose shading and a mouth, all with randomized
//! geometry and colours. Rendering is 2x supersampled, so the corpus has
//! smooth edges at every pyramid level.

use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, MANIFEST};
use crate::rng::stream;

type Color = [f32; 3];

struct Ellipse {
    cx: f32,
    cy: f32,
    rx: f32,
    ry: f32,
}

impl Ellipse {
    fn contains(&self, x: f32, y: f32) -> bool {
        let dx = (x - self.cx) / self.rx;
        let dy = (y - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }
}

fn jitter(rng: &mut ChaCha8Rng, c: Color, amount: f32) -> Color {
    c.map(|v| (v + rng.gen_range(-amount..amount)).clamp(0.0, 1.0))
}

fn scale(c: Color, f: f32) -> Color {
    c.map(|v| (v * f).clamp(0.0, 1.0))
}

/// Renders one `size x size` face.
pub fn render_face(size: u32, rng: &mut ChaCha8Rng) -> RgbImage {
    const SKIN: [Color; 5] = [
        [0.96, 0.80, 0.69],
        [0.89, 0.68, 0.55],
        [0.76, 0.55, 0.40],
        [0.55, 0.38, 0.26],
        [0.36, 0.24, 0.16],
    ];
    const HAIR: [Color; 5] = [
        [0.08, 0.06, 0.05],
        [0.30, 0.18, 0.09],
        [0.62, 0.45, 0.22],
        [0.85, 0.75, 0.50],
        [0.55, 0.55, 0.55],
    ];
    let skin = SKIN[rng.gen_range(0..SKIN.len())];
    let skin = jitter(rng, skin, 0.05);
    let hair = HAIR[rng.gen_range(0..HAIR.len())];
    let hair = jitter(rng, hair, 0.05);
    let bg_top: Color = [rng.gen(), rng.gen(), rng.gen()];
    let bg_bottom = jitter(rng, bg_top, 0.3);
    let iris = jitter(rng, [0.25, 0.35, 0.45], 0.2);
    let lips = jitter(rng, scale(skin, 0.7), 0.05);
    let lips = [lips[0].max(0.45), lips[1] * 0.8, lips[2] * 0.8];

    // geometry in unit coordinates
    let cx = 0.5 + rng.gen_range(-0.05..0.05);
    let cy = 0.54 + rng.gen_range(-0.04..0.04);
    let face = Ellipse {
        cx,
        cy,
        rx: rng.gen_range(0.24..0.31),
        ry: rng.gen_range(0.31..0.38),
    };
    let hair_shape = Ellipse {
        cx,
        cy: cy - rng.gen_range(0.06..0.12),
        rx: face.rx * rng.gen_range(1.05..1.3),
        ry: face.ry * rng.gen_range(0.95..1.15),
    };
    let hairline = cy - face.ry * rng.gen_range(0.35..0.65);
    let long_hair = rng.gen_bool(0.4);
    let eye_dx = face.rx * rng.gen_range(0.36..0.48);
    let eye_y = cy - face.ry * rng.gen_range(0.12..0.25);
    let eye_r = face.rx * rng.gen_range(0.12..0.18);
    let look = rng.gen_range(-0.3..0.3) * eye_r;
    let eyes: Vec<(Ellipse, Ellipse)> = [-1.0f32, 1.0]
        .iter()
        .map(|s| {
            let white = Ellipse {
                cx: cx + s * eye_dx,
                cy: eye_y,
                rx: eye_r,
                ry: eye_r * 0.6,
            };
            let pupil = Ellipse {
                cx: cx + s * eye_dx + look,
                cy: eye_y,
                rx: eye_r * 0.5,
                ry: eye_r * 0.5,
            };
            (white, pupil)
        })
        .collect();
    let brow_y = eye_y - eye_r * rng.gen_range(1.1..1.6);
    let brows: Vec<Ellipse> = [-1.0f32, 1.0]
        .iter()
        .map(|s| Ellipse {
            cx: cx + s * eye_dx,
            cy: brow_y,
            rx: eye_r * 1.3,
            ry: eye_r * 0.25,
        })
        .collect();
    let nose = Ellipse {
        cx,
        cy: cy + face.ry * 0.1,
        rx: face.rx * 0.1,
        ry: face.ry * 0.16,
    };
    let mouth = Ellipse {
        cx,
        cy: cy + face.ry * rng.gen_range(0.45..0.58),
        rx: face.rx * rng.gen_range(0.3..0.5),
        ry: face.ry * rng.gen_range(0.05..0.12),
    };
    let light = rng.gen_range(-0.25..0.25f32);

    let ss = 2 * size;
    let shade = |x: f32, y: f32| -> Color {
        let mut c = {
            let t = y;
            [0, 1, 2].map(|i| bg_top[i] * (1.0 - t) + bg_bottom[i] * t)
        };
        if hair_shape.contains(x, y) || (long_hair && (x - cx).abs() < hair_shape.rx && y > cy && y < cy + face.ry * 0.9) {
            c = hair;
        }
        if face.contains(x, y) && y > hairline - (x - cx).powi(2) * 0.8 {
            let f = 1.0 + light * (x - cx) / face.rx;
            c = scale(skin, f);
            if nose.contains(x, y) && x > cx {
                c = scale(c, 0.88);
            }
            for b in &brows {
                if b.contains(x, y) {
                    c = scale(hair, 0.8);
                }
            }
            for (white, pupil) in &eyes {
                if white.contains(x, y) {
                    c = [0.95, 0.95, 0.95];
                    if pupil.contains(x, y) {
                        c = iris;
                    }
                }
            }
            if mouth.contains(x, y) && y > mouth.cy - mouth.ry * 0.3 {
                c = lips;
            }
        }
        c
    };
    let mut img = RgbImage::new(size, size);
    for py in 0..size {
        for px in 0..size {
            let mut acc = [0.0f32; 3];
            for sy in 0..2 {
                for sx in 0..2 {
                    let x = (2 * px + sx) as f32 + 0.5;
                    let y = (2 * py + sy) as f32 + 0.5;
                    let c = shade(x / ss as f32, y / ss as f32);
                    for i in 0..3 {
                        acc[i] += c[i] / 4.0;
                    }
                }
            }
            img.put_pixel(px, py, Rgb(acc.map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)));
        }
    }
    img
}

/// Writes `count` PNG faces and a manifest into `dir`.
pub fn generate_faces(dir: &Path, count: usize, size: u32, seed: u64) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let mut rng = stream(seed, "synthetic-faces");
    let mut manifest = String::new();
    for i in 0..count {
        let name = format!("face_{i:05}.png");
        let path = dir.join(&name);
        render_face(size, &mut rng).save(&path).map_err(|e| DataError::Image {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        manifest.push_str(&name);
        manifest.push('\n');
    }
    let m = dir.join(MANIFEST);
    fs::write(&m, manifest).map_err(|e| DataError::io(&m, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::load_image_corpus;

    #[test]
    fn deterministic_and_loadable() {
        let dir = tempfile::tempdir().unwrap();
        generate_faces(dir.path(), 6, 32, 4).unwrap();
        let a = render_face(32, &mut stream(4, "synthetic-faces"));
        let b = image::open(dir.path().join("face_00000.png")).unwrap().to_rgb8();
        assert_eq!(a, b);
        let corpus = load_image_corpus(dir.path(), 3).unwrap();
        assert_eq!(corpus.len(), 6);
        assert_eq!(corpus.levels.len(), 4);
        assert_eq!(corpus.levels[3].shape(), &[6, 32, 32, 3]);
        // faces differ from each other
        assert_ne!(corpus.gather(&[0], 3), corpus.gather(&[1], 3));
    }
}
