//! Junction likelihood maps and pixel-level junction detection.
//!
//! Detection keeps a pixel when it is the maximum of its `k x k`
//! neighbourhood; positions are pixel centres (no offset regression).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binfmt::{read_planes, write_planes, HEATMAP_MAGIC};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::synthgen::FloorPlanAnnotation;

pub const DEFAULT_THRESHOLD: f32 = 0.5;
pub const DEFAULT_MAX_OUT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapSource {
    Oracle,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionHeatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
    pub source: HeatmapSource,
}

impl JunctionHeatmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            source: HeatmapSource::External,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        write_planes(w, HEATMAP_MAGIC, (1, self.height, self.width), &self.values)
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        let ((c, height, width), values) = read_planes(r, HEATMAP_MAGIC)?;
        if c != 1 {
            return Err(Error::Format(format!("heatmap must have 1 channel, found {c}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("heatmap contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            values,
            source: HeatmapSource::External,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectedJunction {
    pub position: Point,
    pub score: f32,
}

/// Odd NMS window size; only 3, 5 and 7 are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NmsKernel(usize);

impl NmsKernel {
    pub const DEFAULT: NmsKernel = NmsKernel(3);

    pub fn size(self) -> usize {
        self.0
    }
}

impl Default for NmsKernel {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<usize> for NmsKernel {
    type Error = Error;

    fn try_from(k: usize) -> Result<Self> {
        match k {
            3 | 5 | 7 => Ok(NmsKernel(k)),
            _ => Err(Error::Config(format!("NMS kernel must be 3, 5 or 7, got {k}"))),
        }
    }
}

/// Sum of unit-peak Gaussian bumps at every distinct line endpoint, plus
/// seeded uniform noise in `[-noise, noise]`, clamped to `[0, 1]`.
pub fn render_oracle_heatmap(
    plan: &FloorPlanAnnotation,
    sigma: f64,
    noise: f32,
    seed: u64,
) -> JunctionHeatmap {
    assert!(sigma > 0.0, "sigma must be positive");
    let (w, h) = (plan.canvas.0 as usize, plan.canvas.1 as usize);
    let mut acc = vec![0.0f64; w * h];
    let radius = (6.0 * sigma).ceil() as i64;
    let inv = 1.0 / (2.0 * sigma * sigma);
    for j in plan.junctions() {
        let (cx, cy) = (j.x.round() as i64, j.y.round() as i64);
        for y in (cy - radius).max(0)..=(cy + radius).min(h as i64 - 1) {
            for x in (cx - radius).max(0)..=(cx + radius).min(w as i64 - 1) {
                let d2 = (x as f64 - j.x).powi(2) + (y as f64 - j.y).powi(2);
                acc[y as usize * w + x as usize] += (-d2 * inv).exp();
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = acc
        .into_iter()
        .map(|v| {
            let n = if noise > 0.0 { rng.gen_range(-noise..=noise) as f64 } else { 0.0 };
            (v + n).clamp(0.0, 1.0) as f32
        })
        .collect();
    JunctionHeatmap {
        width: w,
        height: h,
        values,
        source: HeatmapSource::Oracle,
    }
}

fn sort_detections(out: &mut [(usize, f32)]) {
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

fn to_junctions(hm: &JunctionHeatmap, picks: Vec<(usize, f32)>) -> Vec<DetectedJunction> {
    picks
        .into_iter()
        .map(|(i, score)| DetectedJunction {
            position: Point::new((i % hm.width) as f64, (i / hm.width) as f64),
            score,
        })
        .collect()
}

/// Windowed-maximum suppression.
///
/// A pixel survives when no pixel in its window is larger and no earlier
/// (row-major) pixel in its window is equal. Survivors at or above
/// `threshold` are returned by descending score (row-major among ties), at
/// most `max_out` of them.
pub fn nms_detect(
    hm: &JunctionHeatmap,
    kernel: NmsKernel,
    threshold: f32,
    max_out: usize,
) -> Vec<DetectedJunction> {
    let r = (kernel.size() / 2) as i64;
    let (w, h) = (hm.width as i64, hm.height as i64);
    let mut picks = Vec::new();
    for y in 0..h {
        'pixel: for x in 0..w {
            let i = (y * w + x) as usize;
            let v = hm.values[i];
            if v < threshold {
                continue;
            }
            for qy in (y - r).max(0)..=(y + r).min(h - 1) {
                for qx in (x - r).max(0)..=(x + r).min(w - 1) {
                    let q = (qy * w + qx) as usize;
                    let u = hm.values[q];
                    if u > v || (u == v && q < i) {
                        continue 'pixel;
                    }
                }
            }
            picks.push((i, v));
        }
    }
    sort_detections(&mut picks);
    picks.truncate(max_out);
    to_junctions(hm, picks)
}

/// At most one junction per `bin x bin` cell, at the cell's maximum pixel
/// (first in row-major order on ties).
pub fn bin_quantize_detect(hm: &JunctionHeatmap, bin: usize, threshold: f32) -> Vec<DetectedJunction> {
    assert!(bin >= 2, "bin size must be at least 2");
    let mut picks = Vec::new();
    for by in (0..hm.height).step_by(bin) {
        for bx in (0..hm.width).step_by(bin) {
            let mut best: Option<(usize, f32)> = None;
            for y in by..(by + bin).min(hm.height) {
                for x in bx..(bx + bin).min(hm.width) {
                    let i = y * hm.width + x;
                    let v = hm.values[i];
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((i, v));
                    }
                }
            }
            if let Some((i, v)) = best {
                if v >= threshold {
                    picks.push((i, v));
                }
            }
        }
    }
    sort_detections(&mut picks);
    to_junctions(hm, picks)
}
