//! Node and edge inputs for the line graph: normalized geometry, features
//! pooled along each candidate, and shared-junction coordinates.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Segment};
use crate::graph::CandidateGraph;
use crate::nn::Tensor;
use crate::synthgen::RasterFeatureMap;

pub const BASIC_DIM: usize = 8;
pub const EDGE_DIM: usize = 2;
pub const ALONG_SAMPLES: usize = 32;
pub const POOLED_PER_CHANNEL: usize = 16;
const NORMAL_OFFSETS: [f64; 3] = [-1.0, 0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Rroi,
    Loi,
}

pub fn pooled_dim(channels: usize) -> usize {
    POOLED_PER_CHANNEL * channels
}

pub fn node_dim(channels: usize) -> usize {
    BASIC_DIM + pooled_dim(channels)
}

#[inline]
fn normalize(v: f64, extent: f64) -> f64 {
    2.0 * v / extent - 1.0
}

/// Midpoint, both endpoints, length over the canvas diagonal and `|cos|` of
/// the angle to the x axis. With an rng the endpoint order is a coin flip,
/// otherwise the canonical order is used.
pub fn basic_info(seg: &Segment, canvas: (u32, u32), rng: Option<&mut dyn RngCore>) -> [f64; BASIC_DIM] {
    let swap = rng.is_some_and(|r| r.gen::<bool>());
    basic_info_ordered(seg, canvas, swap)
}

fn basic_info_ordered(seg: &Segment, canvas: (u32, u32), swap: bool) -> [f64; BASIC_DIM] {
    let (w, h) = (canvas.0 as f64, canvas.1 as f64);
    let mut s = seg.canonical();
    if swap {
        s = s.reversed();
    }
    let (a, b, m) = (s.a(), s.b(), s.midpoint());
    let len = s.length();
    [
        normalize(m.x, w),
        normalize(m.y, h),
        normalize(a.x, w),
        normalize(a.y, h),
        normalize(b.x, w),
        normalize(b.y, h),
        len / w.hypot(h),
        (s.direction().x / len).abs(),
    ]
}

pub fn edge_embedding(shared: Point, canvas: (u32, u32)) -> [f64; EDGE_DIM] {
    [normalize(shared.x, canvas.0 as f64), normalize(shared.y, canvas.1 as f64)]
}

fn bilinear(plane: &[f32], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(width - 1), (y0 + 1).min(height - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let at = |xx: usize, yy: usize| plane[yy * width + xx] as f64;
    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

fn pool(fm: &RasterFeatureMap, seg: &Segment, offsets: &[f64], out: &mut [f64]) {
    let d = seg.direction();
    let len = seg.length();
    let normal = Point::new(-d.y / len, d.x / len);
    let mut grid = vec![0.0; ALONG_SAMPLES * offsets.len()];
    for c in 0..fm.channels {
        let plane = fm.plane(c);
        for k in 0..ALONG_SAMPLES {
            let p = seg.point_at(k as f64 / (ALONG_SAMPLES - 1) as f64);
            for (o, &off) in offsets.iter().enumerate() {
                let q = p.add(normal.scale(off));
                grid[k * offsets.len() + o] = bilinear(plane, fm.width, fm.height, q.x, q.y);
            }
        }
        let dst = &mut out[c * POOLED_PER_CHANNEL..(c + 1) * POOLED_PER_CHANNEL];
        for (i, slot) in dst.iter_mut().enumerate() {
            *slot = grid[2 * i * offsets.len()..(2 * i + 2) * offsets.len()]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
}

/// 32 samples along the segment times 3 normal offsets, bilinear per
/// channel, max-pooled in 2x3 blocks to 16 values per channel.
pub fn rroi_pool(fm: &RasterFeatureMap, seg: &Segment) -> Vec<f64> {
    let mut out = vec![0.0; pooled_dim(fm.channels)];
    pool(fm, seg, &NORMAL_OFFSETS, &mut out);
    out
}

/// On-line samples only, max-pooled in pairs.
pub fn loi_pool(fm: &RasterFeatureMap, seg: &Segment) -> Vec<f64> {
    let mut out = vec![0.0; pooled_dim(fm.channels)];
    pool(fm, seg, &[0.0], &mut out);
    out
}

/// Pooled features for every node, one row per node.
pub fn pooled_features(graph: &CandidateGraph, fm: &RasterFeatureMap, pooling: Pooling) -> Tensor {
    let dim = pooled_dim(fm.channels);
    let mut t = Tensor::zeros(graph.len(), dim);
    let offsets: &[f64] = match pooling {
        Pooling::Rroi => &NORMAL_OFFSETS,
        Pooling::Loi => &[0.0],
    };
    for (n, node) in graph.nodes.iter().enumerate() {
        pool(fm, &node.segment.canonical(), offsets, t.row_mut(n));
    }
    t
}

pub fn basic_features(graph: &CandidateGraph, canvas: (u32, u32), mut rng: Option<&mut dyn RngCore>) -> Tensor {
    let mut t = Tensor::zeros(graph.len(), BASIC_DIM);
    for (n, node) in graph.nodes.iter().enumerate() {
        let swap = rng.as_mut().is_some_and(|r| r.gen::<bool>());
        let row = basic_info_ordered(&node.segment, canvas, swap);
        t.row_mut(n).copy_from_slice(&row);
    }
    t
}

/// Basic information followed by pooled features.
pub fn node_features(basic: &Tensor, pooled: &Tensor) -> Tensor {
    Tensor::concat_cols(&[basic, pooled])
}

/// Shared-junction coordinates, one row per graph edge.
pub fn edge_features(graph: &CandidateGraph, canvas: (u32, u32)) -> Tensor {
    let mut t = Tensor::zeros(graph.edges.len(), EDGE_DIM);
    for (k, e) in graph.edges.iter().enumerate() {
        t.row_mut(k).copy_from_slice(&edge_embedding(e.shared, canvas));
    }
    t
}
