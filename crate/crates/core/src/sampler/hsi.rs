//! Hyperspectral cube ingestion.
//!
//! A cube lives in two files: a raw little-endian f32 binary in
//! band-sequential (BSQ) order and a JSON sidecar `<cube>.json` holding
//! `{"width", "height", "bands", "dtype": "f32", "interleave": "bsq"}`.
//! Ground truth is an 8- or 16-bit PNG/PGM raster of class indices with
//! 0 meaning unlabeled.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeHeader {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub dtype: String,
    pub interleave: String,
}

/// A hyperspectral image with per-band min-max normalized values in [0, 1]
/// and a ground-truth label raster (0 = unlabeled).
#[derive(Debug, Clone)]
pub struct HsiCube {
    cube: Array3<f64>, // (row, column, band), normalized
    label_map: Array2<u32>,
    class_names: Vec<String>,
}

impl HsiCube {
    /// Builds a cube from raw (unnormalized) values, applying per-band
    /// min-max normalization; constant bands map to zero.
    pub fn from_raw(raw: Array3<f64>, label_map: Array2<u32>, class_names: Vec<String>) -> Result<Self> {
        let (h, w, bands) = raw.dim();
        if label_map.dim() != (h, w) {
            return Err(Error::Shape(format!(
                "label raster {:?} does not match cube {h}x{w}",
                label_map.dim()
            )));
        }
        if !raw.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("hyperspectral cube".into()));
        }
        let classes = label_map.iter().copied().max().unwrap_or(0) as usize;
        let names = if class_names.len() == classes {
            class_names
        } else {
            (1..=classes).map(|k| format!("class_{k:02}")).collect()
        };

        let mut cube = raw;
        for band in 0..bands {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in 0..h {
                for c in 0..w {
                    let v = cube[[r, c, band]];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            let range = hi - lo;
            for r in 0..h {
                for c in 0..w {
                    let v = &mut cube[[r, c, band]];
                    *v = if range == 0.0 { 0.0 } else { (*v - lo) / range };
                }
            }
        }
        Ok(Self { cube, label_map, class_names: names })
    }

    pub fn height(&self) -> usize {
        self.cube.dim().0
    }

    pub fn width(&self) -> usize {
        self.cube.dim().1
    }

    pub fn bands(&self) -> usize {
        self.cube.dim().2
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.cube
    }

    pub fn label_map(&self) -> &Array2<u32> {
        &self.label_map
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// (row, column, zero-based class) of every labeled pixel, raster order.
    pub fn labeled_pixels(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for ((r, c), &l) in self.label_map.indexed_iter() {
            if l > 0 {
                out.push((r, c, (l - 1) as usize));
            }
        }
        out
    }
}

fn sidecar_path(cube_path: &Path) -> std::path::PathBuf {
    let mut os = cube_path.as_os_str().to_os_string();
    os.push(".json");
    os.into()
}

/// Reads the raw f32 cube next to its JSON sidecar. Returned shape is
/// (height, width, bands).
pub fn read_cube<P: AsRef<Path>>(cube_path: P) -> Result<Array3<f32>> {
    let cube_path = cube_path.as_ref();
    let header: CubeHeader =
        serde_json::from_reader(BufReader::new(File::open(sidecar_path(cube_path))?))?;
    if header.dtype != "f32" {
        return Err(Error::Format(format!("unsupported dtype {}", header.dtype)));
    }
    if header.interleave != "bsq" {
        return Err(Error::Format(format!(
            "unsupported interleave {}",
            header.interleave
        )));
    }
    let (h, w, bands) = (header.height, header.width, header.bands);
    let expected = 4 * h * w * bands;
    let mut bytes = Vec::new();
    BufReader::new(File::open(cube_path)?).read_to_end(&mut bytes)?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "cube file is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let mut cube = Array3::zeros((h, w, bands));
    for band in 0..bands {
        for r in 0..h {
            for c in 0..w {
                let off = 4 * ((band * h + r) * w + c);
                cube[[r, c, band]] = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            }
        }
    }
    Ok(cube)
}

/// Writes the raw cube and its JSON sidecar.
pub fn write_cube<P: AsRef<Path>>(cube_path: P, cube: &Array3<f32>) -> Result<()> {
    let cube_path = cube_path.as_ref();
    let (h, w, bands) = cube.dim();
    let header = CubeHeader {
        width: w,
        height: h,
        bands,
        dtype: "f32".into(),
        interleave: "bsq".into(),
    };
    serde_json::to_writer_pretty(
        BufWriter::new(File::create(sidecar_path(cube_path))?),
        &header,
    )?;
    let mut out = BufWriter::new(File::create(cube_path)?);
    for band in 0..bands {
        for r in 0..h {
            for c in 0..w {
                out.write_all(&cube[[r, c, band]].to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads an 8- or 16-bit PNG/PGM class-index raster.
pub fn read_label_map<P: AsRef<Path>>(path: P) -> Result<Array2<u32>> {
    let img = image::open(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut labels = Array2::zeros((h, w));
    match img {
        image::DynamicImage::ImageLuma8(buf) => {
            for (x, y, px) in buf.enumerate_pixels() {
                labels[[y as usize, x as usize]] = px.0[0] as u32;
            }
        }
        image::DynamicImage::ImageLuma16(buf) => {
            for (x, y, px) in buf.enumerate_pixels() {
                labels[[y as usize, x as usize]] = px.0[0] as u32;
            }
        }
        _ => {
            return Err(Error::Format(
                "label raster must be 8- or 16-bit grayscale".into(),
            ))
        }
    }
    Ok(labels)
}

/// Writes a label raster as 8-bit (if it fits) or 16-bit grayscale PNG.
pub fn write_label_map<P: AsRef<Path>>(path: P, labels: &Array2<u32>) -> Result<()> {
    let (h, w) = labels.dim();
    let max = labels.iter().copied().max().unwrap_or(0);
    if max <= u8::MAX as u32 {
        let mut img = image::GrayImage::new(w as u32, h as u32);
        for ((r, c), &l) in labels.indexed_iter() {
            img.put_pixel(c as u32, r as u32, image::Luma([l as u8]));
        }
        img.save(path.as_ref())?;
    } else if max <= u16::MAX as u32 {
        let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(w as u32, h as u32);
        for ((r, c), &l) in labels.indexed_iter() {
            img.put_pixel(c as u32, r as u32, image::Luma([l as u16]));
        }
        img.save(path.as_ref())?;
    } else {
        return Err(Error::Format("label values exceed 16 bits".into()));
    }
    Ok(())
}

/// Loads and normalizes a cube plus its ground-truth raster.
pub fn load_hsi<P: AsRef<Path>, Q: AsRef<Path>>(cube_path: P, labels_path: Q) -> Result<HsiCube> {
    let raw = read_cube(cube_path)?;
    let labels = read_label_map(labels_path)?;
    HsiCube::from_raw(raw.mapv(|v| v as f64), labels, Vec::new())
}
