//! RGB image ingestion.

use std::path::Path;

use ndarray::Array3;

use crate::error::{Error, Result};

/// One decoded image, values in [0, 1], indexed (row, column, channel).
#[derive(Debug, Clone)]
pub struct StoredImage {
    pub id: String,
    pub data: Array3<f64>,
}

impl StoredImage {
    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }
}

/// A directory of decoded RGB images in deterministic (lexicographic) order.
#[derive(Debug, Clone)]
pub struct ImageStore {
    images: Vec<StoredImage>,
    skipped: usize,
}

impl ImageStore {
    pub fn from_images(images: Vec<StoredImage>) -> Self {
        Self { images, skipped: 0 }
    }

    pub fn images(&self) -> &[StoredImage] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Files that could not be decoded.
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

/// Decodes every PNG/JPEG in `dir` to [0, 1] RGB. Undecodable files are
/// skipped and counted; an empty result is an error.
pub fn load_rgb_dataset<P: AsRef<Path>>(dir: P) -> Result<ImageStore> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    paths.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));

    let mut images = Vec::new();
    let mut skipped = 0;
    for path in paths {
        match image::open(&path) {
            Ok(img) => {
                let rgb = img.to_rgb8();
                let (w, h) = (rgb.width() as usize, rgb.height() as usize);
                let mut data = Array3::zeros((h, w, 3));
                for (x, y, px) in rgb.enumerate_pixels() {
                    for c in 0..3 {
                        data[[y as usize, x as usize, c]] = px.0[c] as f64 / 255.0;
                    }
                }
                let id = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                images.push(StoredImage { id, data });
            }
            Err(_) => skipped += 1,
        }
    }
    if images.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no decodable images in {}",
            dir.display()
        )));
    }
    Ok(ImageStore { images, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    #[test]
    fn loads_in_lexicographic_order_and_normalizes() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = RgbImage::new(4, 4);
        img.put_pixel(0, 0, Rgb([255, 0, 128]));
        img.save(dir.path().join("b.png")).unwrap();
        img.save(dir.path().join("a.png")).unwrap();
        let store = load_rgb_dataset(dir.path()).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.images()[0].id, "a.png");
        assert_eq!(store.images()[1].id, "b.png");
        let data = &store.images()[0].data;
        assert_eq!(data[[0, 0, 0]], 1.0);
        assert_eq!(data[[0, 0, 1]], 0.0);
        assert!((data[[0, 0, 2]] - 128.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn corrupt_files_are_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        RgbImage::new(4, 4).save(dir.path().join("ok.png")).unwrap();
        std::fs::write(dir.path().join("broken.png"), b"not an image").unwrap();
        let store = load_rgb_dataset(dir.path()).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.skipped(), 1);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_rgb_dataset(dir.path()).is_err());
    }
}
