//! Procedural data for tests, demos, and offline experimentation: colored
//! image suites with local oriented structure, a 13-class texture set, and
//! hyperspectral cubes with class layouts matching the published AVIRIS
//! scenes. All generators are deterministic in their seed.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::rng::derive_rng;
use crate::sampler::{HsiCube, ImageStore, StoredImage};

/// Smooth pseudo-random scalar field in roughly [-1, 1]: a few random
/// low-frequency sinusoids.
struct SmoothField {
    waves: Vec<(f64, f64, f64, f64)>, // (fx, fy, phase, amp)
}

impl SmoothField {
    fn new<R: Rng>(scale: f64, rng: &mut R) -> Self {
        let n = 6;
        let waves = (0..n)
            .map(|_| {
                let angle = rng.random_range(0.0..PI);
                let freq = rng.random_range(0.3..1.0) / scale;
                (
                    freq * angle.cos(),
                    freq * angle.sin(),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.5..1.0),
                )
            })
            .collect();
        Self { waves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let mut v = 0.0;
        let mut norm = 0.0;
        for (fx, fy, phase, amp) in &self.waves {
            v += amp * (2.0 * PI * (fx * x + fy * y) + phase).sin();
            norm += amp;
        }
        v / norm
    }
}

/// Colored images with localized oriented gratings, blobs, and smooth
/// gradients; stand-ins for small natural photographs.
pub fn synthetic_image_store(count: usize, height: usize, width: usize, seed: u64) -> ImageStore {
    let images = (0..count)
        .map(|i| {
            let mut rng = derive_rng(seed, i as u64);
            StoredImage {
                id: format!("synthetic_{i:04}.png"),
                data: synthetic_image(height, width, &mut rng),
            }
        })
        .collect();
    ImageStore::from_images(images)
}

fn synthetic_image(height: usize, width: usize, rng: &mut ChaCha8Rng) -> Array3<f64> {
    let corners: Vec<[f64; 3]> = (0..4)
        .map(|_| std::array::from_fn(|_| rng.random_range(0.25..0.75)))
        .collect();
    let mut img = Array3::zeros((height, width, 3));
    for r in 0..height {
        let fr = r as f64 / (height - 1).max(1) as f64;
        for c in 0..width {
            let fc = c as f64 / (width - 1).max(1) as f64;
            for ch in 0..3 {
                let top = corners[0][ch] * (1.0 - fc) + corners[1][ch] * fc;
                let bottom = corners[2][ch] * (1.0 - fc) + corners[3][ch] * fc;
                img[[r, c, ch]] = top * (1.0 - fr) + bottom * fr;
            }
        }
    }

    let gratings = rng.random_range(5..=9);
    for _ in 0..gratings {
        let cy = rng.random_range(0.0..height as f64);
        let cx = rng.random_range(0.0..width as f64);
        let radius = rng.random_range(height as f64 / 8.0..height as f64 / 3.0);
        let theta = rng.random_range(0.0..PI);
        let freq = rng.random_range(0.07..0.45);
        let phase = rng.random_range(0.0..2.0 * PI);
        let amp = rng.random_range(0.25..0.6);
        let axis: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
        let (dx, dy) = (theta.cos(), theta.sin());
        let square = rng.random_bool(0.5);
        let r_lo = (cy - 3.0 * radius).max(0.0) as usize;
        let r_hi = ((cy + 3.0 * radius) as usize).min(height);
        let c_lo = (cx - 3.0 * radius).max(0.0) as usize;
        let c_hi = ((cx + 3.0 * radius) as usize).min(width);
        for r in r_lo..r_hi {
            for c in c_lo..c_hi {
                let (y, x) = (r as f64 - cy, c as f64 - cx);
                let env = (-(x * x + y * y) / (2.0 * radius * radius)).exp();
                if env < 0.01 {
                    continue;
                }
                let mut s = (2.0 * PI * freq * (x * dx + y * dy) + phase).sin();
                if square {
                    s = s.signum();
                }
                for ch in 0..3 {
                    img[[r, c, ch]] += amp * env * s * axis[ch];
                }
            }
        }
    }

    let blobs = rng.random_range(2..=5);
    for _ in 0..blobs {
        let cy = rng.random_range(0.0..height as f64);
        let cx = rng.random_range(0.0..width as f64);
        let radius = rng.random_range(3.0..(height as f64 / 6.0).max(3.5));
        let color: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let r_lo = (cy - radius).max(0.0) as usize;
        let r_hi = ((cy + radius + 1.0) as usize).min(height);
        let c_lo = (cx - radius).max(0.0) as usize;
        let c_hi = ((cx + radius + 1.0) as usize).min(width);
        for r in r_lo..r_hi {
            for c in c_lo..c_hi {
                let (y, x) = (r as f64 - cy, c as f64 - cx);
                if x * x + y * y <= radius * radius {
                    for ch in 0..3 {
                        img[[r, c, ch]] = 0.35 * img[[r, c, ch]] + 0.65 * color[ch];
                    }
                }
            }
        }
    }

    img.mapv_inplace(|v| v.clamp(0.0, 1.0));
    img
}

/// Images tiled into cells of colored oriented bars: positions within one
/// cell share orientation/color (a learnable context), different cells
/// differ. `cell` is the tile side in pixels.
pub fn oriented_bar_images(count: usize, side: usize, cell: usize, seed: u64) -> ImageStore {
    let images = (0..count)
        .map(|i| {
            let mut rng = derive_rng(seed, 0xba50_0000 + i as u64);
            StoredImage {
                id: format!("bars_{i:04}.png"),
                data: bar_image(side, cell, &mut rng),
            }
        })
        .collect();
    ImageStore::from_images(images)
}

fn bar_image(side: usize, cell: usize, rng: &mut ChaCha8Rng) -> Array3<f64> {
    let cells = side.div_ceil(cell);
    struct Cell {
        theta: f64,
        freq: f64,
        phase: f64,
        base: [f64; 3],
        fg: [f64; 3],
    }
    let mut grid = Vec::with_capacity(cells * cells);
    for _ in 0..cells * cells {
        let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.6));
        let fg: [f64; 3] = std::array::from_fn(|i| (base[i] + rng.random_range(0.35..0.6)).min(1.0));
        grid.push(Cell {
            theta: rng.random_range(0.0..PI),
            freq: rng.random_range(0.10..0.30),
            phase: rng.random_range(0.0..2.0 * PI),
            base,
            fg,
        });
    }
    let mut img = Array3::zeros((side, side, 3));
    for r in 0..side {
        for c in 0..side {
            let cellref = &grid[(r / cell) * cells + (c / cell)];
            let (dx, dy) = (cellref.theta.cos(), cellref.theta.sin());
            let s = (2.0 * PI * cellref.freq * (c as f64 * dx + r as f64 * dy) + cellref.phase).sin();
            let on = s > 0.0;
            for ch in 0..3 {
                let v = if on { cellref.fg[ch] } else { cellref.base[ch] };
                img[[r, c, ch]] = (v + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0);
            }
        }
    }
    img
}

/// Thirteen distinct grayscale textures with randomized local phase, a slow
/// contrast field, and pixel noise, so that nearby patches of one texture
/// share statistics but rarely match pixel-for-pixel.
pub fn texture_suite(side: usize, seed: u64) -> Vec<Array2<f64>> {
    (0..13)
        .map(|k| {
            let mut rng = derive_rng(seed, 0x7e47 + k as u64);
            texture_image(k, side, &mut rng)
        })
        .collect()
}

fn texture_image(kind: usize, side: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let phase_field = SmoothField::new(40.0, rng);
    let gain_field = SmoothField::new(70.0, rng);
    let noise_sigma = 0.05;
    let mut blob_field = None;
    if kind == 8 {
        blob_field = Some(SmoothField::new(9.0, rng));
    }

    let mut img = Array2::zeros((side, side));
    let mut white = vec![0.0; side * side];
    for v in &mut white {
        *v = rng.random_range(0.0..1.0);
    }

    for r in 0..side {
        for c in 0..side {
            let (x, y) = (c as f64, r as f64);
            let jitter = 2.5 * PI * phase_field.at(x, y);
            let t = match kind {
                // oriented gratings: two frequencies x two orientations
                0 => square_wave(x / 7.0 * 2.0 * PI + jitter),
                1 => square_wave(y / 7.0 * 2.0 * PI + jitter),
                2 => ((x + y) / 8.5 * 2.0 * PI + jitter).sin(),
                3 => ((x - y) / 8.5 * 2.0 * PI + jitter).sin(),
                // checkerboards, fine and coarse
                4 => checker(x, y, 6.0, jitter),
                5 => checker(x, y, 14.0, jitter),
                // high-frequency grating
                6 => (x / 3.2 * 2.0 * PI + jitter).sin(),
                // white noise
                7 => 2.0 * white[r * side + c] - 1.0,
                // coarse blobs
                8 => 2.0 * blob_field.as_ref().unwrap().at(x, y),
                // polka dots, bright on dark and dark on bright
                9 => dots(x, y, 13.0, 3.4, jitter),
                10 => -dots(x, y, 13.0, 3.4, jitter),
                // crosshatch
                11 => square_wave(x / 7.0 * 2.0 * PI + jitter)
                    .max(square_wave(y / 7.0 * 2.0 * PI + jitter)),
                // wavy grating
                12 => ((x / 6.0 + 2.2 * (y / 17.0 + jitter / 4.0).sin()) * 2.0 * PI).sin(),
                _ => unreachable!("thirteen texture kinds"),
            };
            let gain = 0.75 + 0.25 * gain_field.at(x, y);
            let noise: f64 = {
                // Box-Muller on two uniform draws
                let u1: f64 = rng.random_range(1e-12..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos() * noise_sigma
            };
            img[[r, c]] = (0.5 + 0.42 * t * gain + noise).clamp(0.0, 1.0);
        }
    }
    img
}

fn square_wave(phase: f64) -> f64 {
    if phase.sin() > 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn checker(x: f64, y: f64, period: f64, jitter: f64) -> f64 {
    let fx = ((x / period + jitter / (2.0 * PI)).floor() as i64) & 1;
    let fy = ((y / period).floor() as i64) & 1;
    if fx == fy {
        1.0
    } else {
        -1.0
    }
}

fn dots(x: f64, y: f64, lattice: f64, radius: f64, jitter: f64) -> f64 {
    let ox = jitter / (2.0 * PI) * lattice * 0.5;
    let gx = ((x + ox) / lattice).round() * lattice - ox;
    let gy = (y / lattice).round() * lattice;
    let d2 = (x - gx) * (x - gx) + (y - gy) * (y - gy);
    if d2 <= radius * radius {
        1.0
    } else {
        -0.6
    }
}

/// Dimensions and per-class pixel counts of a hyperspectral scene.
#[derive(Debug, Clone)]
pub struct HsiLayout {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub class_counts: Vec<usize>,
}

/// 145 x 145, 220 bands, 16 classes, 10366 labeled pixels.
pub fn indian_pines_layout() -> HsiLayout {
    HsiLayout {
        height: 145,
        width: 145,
        bands: 220,
        class_counts: vec![
            54, 1434, 834, 234, 497, 747, 26, 489, 20, 968, 2468, 614, 212, 1294, 380, 95,
        ],
    }
}

/// 512 x 217, 220 bands, 16 classes, 54129 labeled pixels.
pub fn salinas_layout() -> HsiLayout {
    HsiLayout {
        height: 512,
        width: 217,
        bands: 220,
        class_counts: vec![
            2009, 3726, 1976, 1394, 2678, 3959, 3579, 11271, 6203, 3278, 1068, 1927, 916, 1070,
            7268, 1807,
        ],
    }
}

/// Raw synthetic scene with the given layout: per-class smooth spectral
/// signatures, a slow illumination field, per-band noise, and compact
/// label regions holding exactly the per-class counts.
pub fn aviris_like_raw(layout: &HsiLayout, seed: u64) -> (Array3<f32>, Array2<u32>) {
    let mut rng = derive_rng(seed, 0xa1b2);
    let (h, w, bands) = (layout.height, layout.width, layout.bands);
    let labels = grow_label_regions(h, w, &layout.class_counts, &mut rng);

    // class 0 = unlabeled background, then one signature per class
    let signatures: Vec<Vec<f64>> = (0..=layout.class_counts.len())
        .map(|_| spectral_signature(bands, &mut rng))
        .collect();
    let illum = SmoothField::new(h.min(w) as f64 / 4.0, &mut rng);

    let mut cube = Array3::zeros((h, w, bands));
    for r in 0..h {
        for c in 0..w {
            let sig = &signatures[labels[[r, c]] as usize];
            let gain = 1.0 + 0.12 * illum.at(c as f64, r as f64);
            for band in 0..bands {
                let u1: f64 = rng.random_range(1e-12..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                let noise = (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos() * 0.035;
                cube[[r, c, band]] = ((sig[band] * gain + noise).max(0.0)) as f32;
            }
        }
    }
    (cube, labels)
}

/// In-memory normalized cube with the given layout.
pub fn aviris_like_cube(layout: &HsiLayout, seed: u64) -> HsiCube {
    let (raw, labels) = aviris_like_raw(layout, seed);
    HsiCube::from_raw(raw.mapv(|v| v as f64), labels, Vec::new())
        .expect("generated cube is finite and consistent")
}

/// Small cube for unit tests: `classes` equal-sized square-ish regions.
pub fn small_hsi_cube(height: usize, width: usize, bands: usize, classes: usize, seed: u64) -> HsiCube {
    let per = height * width / (2 * classes);
    let layout = HsiLayout {
        height,
        width,
        bands,
        class_counts: vec![per; classes],
    };
    aviris_like_cube(&layout, seed)
}

fn spectral_signature(bands: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let bumps = rng.random_range(3..=5);
    let params: Vec<(f64, f64, f64)> = (0..bumps)
        .map(|_| {
            (
                rng.random_range(0.0..bands as f64),
                rng.random_range(bands as f64 / 40.0..bands as f64 / 7.0),
                rng.random_range(0.3..1.0),
            )
        })
        .collect();
    let baseline_phase = rng.random_range(0.0..2.0 * PI);
    let baseline_amp = rng.random_range(0.05..0.15);
    (0..bands)
        .map(|b| {
            let mut v = 0.25 + baseline_amp * (2.0 * PI * b as f64 / bands as f64 + baseline_phase).sin();
            for (mu, sigma, amp) in &params {
                let z = (b as f64 - mu) / sigma;
                v += amp * (-0.5 * z * z).exp();
            }
            v
        })
        .collect()
}

/// Assigns exactly `counts[k]` cells to class k+1 (0 stays unlabeled) by
/// ring growth around random seeds; larger classes are placed first.
fn grow_label_regions(
    h: usize,
    w: usize,
    counts: &[usize],
    rng: &mut ChaCha8Rng,
) -> Array2<u32> {
    let total: usize = counts.iter().sum();
    assert!(total <= h * w, "labels exceed grid");
    let mut labels = Array2::<u32>::zeros((h, w));
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&k| std::cmp::Reverse(counts[k]));

    for &k in &order {
        let want = counts[k];
        let mut got = 0;
        let (sr, sc) = loop {
            let r = rng.random_range(0..h);
            let c = rng.random_range(0..w);
            if labels[[r, c]] == 0 {
                break (r, c);
            }
        };
        let mut radius = 0usize;
        while got < want {
            let r_lo = sr.saturating_sub(radius);
            let r_hi = (sr + radius).min(h - 1);
            let c_lo = sc.saturating_sub(radius);
            let c_hi = (sc + radius).min(w - 1);
            for r in r_lo..=r_hi {
                for c in c_lo..=c_hi {
                    // only the new ring
                    let on_ring = r == r_lo || r == r_hi || c == c_lo || c == c_hi;
                    let is_new = radius == 0
                        || r < sr.saturating_sub(radius - 1)
                        || r > (sr + radius - 1).min(h - 1)
                        || c < sc.saturating_sub(radius - 1)
                        || c > (sc + radius - 1).min(w - 1);
                    if on_ring && is_new && labels[[r, c]] == 0 && got < want {
                        labels[[r, c]] = (k + 1) as u32;
                        got += 1;
                    }
                }
            }
            radius += 1;
            if radius > h + w {
                // grid nearly full near this seed; sweep any free cells
                for r in 0..h {
                    for c in 0..w {
                        if labels[[r, c]] == 0 && got < want {
                            labels[[r, c]] = (k + 1) as u32;
                            got += 1;
                        }
                    }
                }
                break;
            }
        }
        assert_eq!(got, want, "region growth must place exact counts");
    }
    labels
}

/// Saves every image of a store as an 8-bit PNG under `dir`.
pub fn write_image_store_pngs<P: AsRef<Path>>(store: &ImageStore, dir: P) -> Result<()> {
    std::fs::create_dir_all(dir.as_ref())?;
    for img in store.images() {
        let (h, w, _) = img.data.dim();
        let mut out = image::RgbImage::new(w as u32, h as u32);
        for r in 0..h {
            for c in 0..w {
                let px: [u8; 3] = std::array::from_fn(|ch| {
                    (img.data[[r, c, ch]] * 255.0).round().clamp(0.0, 255.0) as u8
                });
                out.put_pixel(c as u32, r as u32, image::Rgb(px));
            }
        }
        out.save(dir.as_ref().join(&img.id))?;
    }
    Ok(())
}

/// Saves grayscale textures as `texture_00.png`, ... under `dir`.
pub fn write_texture_pngs<P: AsRef<Path>>(textures: &[Array2<f64>], dir: P) -> Result<()> {
    std::fs::create_dir_all(dir.as_ref())?;
    for (i, tex) in textures.iter().enumerate() {
        let (h, w) = tex.dim();
        let mut out = image::GrayImage::new(w as u32, h as u32);
        for r in 0..h {
            for c in 0..w {
                let v = (tex[[r, c]] * 255.0).round().clamp(0.0, 255.0) as u8;
                out.put_pixel(c as u32, r as u32, image::Luma([v]));
            }
        }
        out.save(dir.as_ref().join(format!("texture_{i:02}.png")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_are_in_range_and_reproducible() {
        let a = synthetic_image_store(2, 64, 48, 9);
        let b = synthetic_image_store(2, 64, 48, 9);
        assert_eq!(a.len(), 2);
        for (x, y) in a.images().iter().zip(b.images().iter()) {
            assert_eq!(x.data, y.data);
            assert!(x.data.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn texture_suite_has_thirteen_distinct_textures() {
        let texs = texture_suite(96, 5);
        assert_eq!(texs.len(), 13);
        for t in &texs {
            assert_eq!(t.dim(), (96, 96));
            assert!(t.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // pairwise mean absolute difference should be clearly nonzero
        for i in 0..13 {
            for j in (i + 1)..13 {
                let diff: f64 = texs[i]
                    .iter()
                    .zip(texs[j].iter())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / (96.0 * 96.0);
                assert!(diff > 0.02, "textures {i} and {j} look identical");
            }
        }
    }

    #[test]
    fn label_regions_hold_exact_counts() {
        let mut rng = derive_rng(3, 0);
        let counts = vec![10, 25, 7, 300];
        let labels = grow_label_regions(30, 30, &counts, &mut rng);
        for (k, want) in counts.iter().enumerate() {
            let got = labels.iter().filter(|&&l| l == (k + 1) as u32).count();
            assert_eq!(got, *want);
        }
    }

    #[test]
    fn small_cube_is_consistent() {
        let cube = small_hsi_cube(20, 20, 6, 3, 11);
        assert_eq!(cube.bands(), 6);
        assert_eq!(cube.num_classes(), 3);
        let labeled = cube.labeled_pixels();
        assert_eq!(labeled.len(), 3 * (20 * 20 / 6));
    }
}
