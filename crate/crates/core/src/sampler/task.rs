//! Self-labeled contextual-group tasks.
//!
//! A task is built by picking `C` random seed windows and, for each,
//! sampling `N - 1` further windows at integer offsets within the
//! `[-g, +g]^2` slide lattice (the seed itself is instance one). In RGB
//! mode every instance then passes through the color augmentation: with
//! probability `gray_probability` it is replaced by its BT.601 luma
//! replicated over the three channels, otherwise each channel is scaled by
//! an independent factor from `[1 - jitter, 1 + jitter]` and clipped to
//! [0, 1]. The two transformations are mutually exclusive per patch.

use ndarray::s;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Patch;
use crate::sampler::hsi::HsiCube;
use crate::sampler::image_store::ImageStore;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Rgb,
    Hsi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Contextual groups per task (C).
    pub groups: usize,
    /// Patches per group (N).
    pub per_group: usize,
    /// Patch side in pixels (a).
    pub patch_side: usize,
    /// Channel count (b).
    pub channels: usize,
    /// Slide radius in pixels (g).
    pub slide_radius: usize,
    pub gray_probability: f64,
    pub jitter_amplitude: f64,
    pub mode: SampleMode,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.per_group == 0 {
            return Err(Error::Config("groups and per_group must be >= 1".into()));
        }
        if self.patch_side == 0 || self.channels == 0 {
            return Err(Error::Config("patch_side and channels must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gray_probability) {
            return Err(Error::Config("gray_probability must lie in [0, 1]".into()));
        }
        if self.jitter_amplitude < 0.0 {
            return Err(Error::Config("jitter_amplitude must be >= 0".into()));
        }
        Ok(())
    }

    /// Natural-image defaults: 100 groups, 19-pixel windows slid +/-25 px,
    /// half the patches gray-converted, 10% color jitter.
    pub fn natural_rgb() -> Self {
        Self {
            groups: 100,
            per_group: 16,
            patch_side: 19,
            channels: 3,
            slide_radius: 25,
            gray_probability: 0.5,
            jitter_amplitude: 0.10,
            mode: SampleMode::Rgb,
        }
    }

    /// Spectral defaults: 20 groups of 3x3 windows slid +/-2 px, no color
    /// augmentation.
    pub fn spectral(bands: usize) -> Self {
        Self {
            groups: 20,
            per_group: 25,
            patch_side: 3,
            channels: bands,
            slide_radius: 2,
            gray_probability: 0.0,
            jitter_amplitude: 0.0,
            mode: SampleMode::Hsi,
        }
    }
}

/// Number of distinct positions a seed window can slide to.
pub fn slide_lattice_size(g: usize) -> usize {
    (2 * g + 1) * (2 * g + 1)
}

#[derive(Debug, Clone)]
pub struct TaskExample {
    pub patch: Patch,
    /// Class index in [0, C).
    pub class: usize,
    /// Provenance: which contextual group produced this example.
    pub group: usize,
    /// Provenance: source plane (image index, or 0 for a cube).
    pub plane: usize,
    /// Provenance: top-left (row, column) of the window in its plane.
    pub origin: (usize, usize),
}

/// `C` groups of `per_class` labeled patches.
#[derive(Debug, Clone)]
pub struct TaskDataset {
    pub examples: Vec<TaskExample>,
    pub classes: usize,
    pub per_class: usize,
}

impl TaskDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// (patch, class) borrows in example order.
    pub fn pairs(&self) -> Vec<(&Patch, usize)> {
        self.examples.iter().map(|e| (&e.patch, e.class)).collect()
    }
}

/// Where patches come from.
#[derive(Debug, Clone, Copy)]
pub enum SampleSource<'a> {
    Rgb(&'a ImageStore),
    Hsi(&'a HsiCube),
}

/// One plane a window can be cut from.
struct Plane<'a> {
    data: ndarray::ArrayView3<'a, f64>,
}

fn planes<'a>(source: &SampleSource<'a>, cfg: &SamplerConfig) -> Result<Vec<Plane<'a>>> {
    match source {
        SampleSource::Rgb(store) => {
            if cfg.channels != 3 || cfg.mode != SampleMode::Rgb {
                return Err(Error::Config(
                    "RGB sources need mode=rgb and channels=3".into(),
                ));
            }
            Ok(store
                .images()
                .iter()
                .map(|img| Plane { data: img.data.view() })
                .collect())
        }
        SampleSource::Hsi(cube) => {
            if cfg.mode != SampleMode::Hsi {
                return Err(Error::Config("HSI sources need mode=hsi".into()));
            }
            if cfg.channels != cube.bands() {
                return Err(Error::Config(format!(
                    "config expects {} channels, cube has {} bands",
                    cfg.channels,
                    cube.bands()
                )));
            }
            Ok(vec![Plane { data: cube.data().view() }])
        }
    }
}

/// Builds a fresh task: `C` uniformly random seed windows (area weighted
/// across planes, with full slide room inside bounds) and `N` instances per
/// group.
pub fn build_task<R: Rng>(
    source: SampleSource,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<TaskDataset> {
    cfg.validate()?;
    let planes = planes(&source, cfg)?;
    let a = cfg.patch_side;
    let g = cfg.slide_radius;
    let margin = a + 2 * g;

    // Seed positions leaving +/-g slide room on every side.
    let mut counts = Vec::with_capacity(planes.len());
    let mut total = 0u64;
    for p in &planes {
        let (h, w, _) = p.data.dim();
        let (rows, cols) = if h >= margin && w >= margin {
            ((h - margin + 1) as u64, (w - margin + 1) as u64)
        } else {
            (0, 0)
        };
        counts.push((rows, cols));
        total += rows * cols;
    }
    if total == 0 {
        return Err(Error::InsufficientData(format!(
            "no image offers a {a}x{a} window with +/-{g} slide room (need at least {margin}x{margin})"
        )));
    }

    let mut examples = Vec::with_capacity(cfg.groups * cfg.per_group);
    for class in 0..cfg.groups {
        let mut pick = rng.random_range(0..total);
        let mut plane_idx = 0;
        for (i, (rows, cols)) in counts.iter().enumerate() {
            let n = rows * cols;
            if pick < n {
                plane_idx = i;
                break;
            }
            pick -= n;
        }
        let (_, cols) = counts[plane_idx];
        let seed_r = g + (pick / cols) as usize;
        let seed_c = g + (pick % cols) as usize;
        let plane = &planes[plane_idx].data;

        for n in 0..cfg.per_group {
            let (dr, dc) = if n == 0 {
                (0i64, 0i64)
            } else {
                let gi = g as i64;
                (rng.random_range(-gi..=gi), rng.random_range(-gi..=gi))
            };
            let r0 = (seed_r as i64 + dr) as usize;
            let c0 = (seed_c as i64 + dc) as usize;
            let window = plane.slice(s![r0..r0 + a, c0..c0 + a, ..]).to_owned();
            let mut patch = Patch::new(window)?;
            if cfg.mode == SampleMode::Rgb {
                patch = augment_patch(&patch, cfg, rng);
            }
            examples.push(TaskExample {
                patch,
                class,
                group: class,
                plane: plane_idx,
                origin: (r0, c0),
            });
        }
    }
    Ok(TaskDataset {
        examples,
        classes: cfg.groups,
        per_class: cfg.per_group,
    })
}

/// Color-based enrichment of an RGB patch; see the module docs.
pub fn augment_patch<R: Rng>(patch: &Patch, cfg: &SamplerConfig, rng: &mut R) -> Patch {
    debug_assert_eq!(patch.channels(), 3);
    if rng.random_bool(cfg.gray_probability) {
        let mut data = patch.data().clone();
        let a = patch.side();
        for r in 0..a {
            for c in 0..a {
                let y = LUMA[0] * data[[r, c, 0]] + LUMA[1] * data[[r, c, 1]] + LUMA[2] * data[[r, c, 2]];
                for ch in 0..3 {
                    data[[r, c, ch]] = y;
                }
            }
        }
        Patch::new(data).expect("luma of finite values is finite")
    } else {
        let lo = 1.0 - cfg.jitter_amplitude;
        let hi = 1.0 + cfg.jitter_amplitude;
        let factors = [
            rng.random_range(lo..=hi),
            rng.random_range(lo..=hi),
            rng.random_range(lo..=hi),
        ];
        let mut data = patch.data().clone();
        let a = patch.side();
        for r in 0..a {
            for c in 0..a {
                for ch in 0..3 {
                    data[[r, c, ch]] = (data[[r, c, ch]] * factors[ch]).clamp(0.0, 1.0);
                }
            }
        }
        Patch::new(data).expect("clipped product of finite values is finite")
    }
}

/// Stratified per-class random split into an E subset (`round(N * e_fraction)`
/// examples per class) and an M subset (the rest). The subsets are disjoint
/// and their union is the input.
pub fn split_em<R: Rng>(
    task: &TaskDataset,
    e_fraction: f64,
    rng: &mut R,
) -> Result<(TaskDataset, TaskDataset)> {
    if !(e_fraction > 0.0 && e_fraction < 1.0) {
        return Err(Error::Config(format!(
            "e_fraction must lie in (0, 1), got {e_fraction}"
        )));
    }
    let n = task.per_class;
    let take = (n as f64 * e_fraction).round() as usize;
    if take == 0 || take == n {
        return Err(Error::Config(format!(
            "split would leave a class empty: {take} of {n} per class"
        )));
    }

    let mut e_examples = Vec::with_capacity(task.classes * take);
    let mut m_examples = Vec::with_capacity(task.classes * (n - take));
    for class in 0..task.classes {
        let mut idx: Vec<usize> = task
            .examples
            .iter()
            .enumerate()
            .filter(|(_, e)| e.class == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() != n {
            return Err(Error::Config(format!(
                "class {class} has {} examples, expected {n}",
                idx.len()
            )));
        }
        partial_shuffle(&mut idx, rng);
        for (pos, i) in idx.into_iter().enumerate() {
            let ex = task.examples[i].clone();
            if pos < take {
                e_examples.push(ex);
            } else {
                m_examples.push(ex);
            }
        }
    }
    Ok((
        TaskDataset { examples: e_examples, classes: task.classes, per_class: take },
        TaskDataset { examples: m_examples, classes: task.classes, per_class: n - take },
    ))
}

/// Fisher-Yates; kept local so the draw sequence is pinned by this crate.
pub(crate) fn partial_shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
