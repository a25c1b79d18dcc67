//! End-to-end glue: sample synthesis, junction detection, candidate graph,
//! node features and inference.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::embed::{basic_features, node_features, pooled_features, Pooling};
use crate::error::Result;
use crate::graph::{candidate_graph, CandidateGraph, Suppression};
use crate::junction::{
    nms_detect, render_oracle_heatmap, DetectedJunction, JunctionHeatmap, NmsKernel, DEFAULT_MAX_OUT,
    DEFAULT_THRESHOLD,
};
use crate::nn::{predict, GraphInput, ModelParams, Tensor};
use crate::synthgen::{generate_plan, rasterize, FloorPlanAnnotation, GeneratorConfig, RasterFeatureMap, StyleConfig};

pub const DEFAULT_SIGMA: f64 = 1.0;
pub const DEFAULT_HEATMAP_NOISE: f32 = 0.05;
/// Channels fed to pooling: the raster's RGB plus the junction heatmap.
pub const FEATURE_CHANNELS: usize = 4;

/// Where junctions come from: ground-truth endpoints, or NMS on the heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JunctionMode {
    Oracle,
    #[default]
    Detected,
}

impl FromStr for JunctionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "oracle" => Ok(JunctionMode::Oracle),
            "detected" => Ok(JunctionMode::Detected),
            other => Err(format!("unknown junction mode {other:?} (expected oracle or detected)")),
        }
    }
}

impl fmt::Display for JunctionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JunctionMode::Oracle => "oracle",
            JunctionMode::Detected => "detected",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub junctions: JunctionMode,
    pub suppression: Suppression,
    pub nms_kernel: usize,
    pub threshold: f32,
    pub max_out: usize,
    pub pooling: Pooling,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            junctions: JunctionMode::Detected,
            suppression: Suppression::Nds,
            nms_kernel: NmsKernel::DEFAULT.size(),
            threshold: DEFAULT_THRESHOLD,
            max_out: DEFAULT_MAX_OUT,
            pooling: Pooling::Rroi,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        NmsKernel::try_from(self.nms_kernel)?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(crate::Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        Ok(())
    }
}

/// A plan with its rendered raster and junction heatmap.
#[derive(Debug, Clone)]
pub struct Sample {
    pub plan: FloorPlanAnnotation,
    pub raster: RasterFeatureMap,
    pub heatmap: JunctionHeatmap,
}

impl Sample {
    /// Generates plan `seed` and renders it with a style and heatmap noise
    /// derived from the same seed.
    pub fn synthesize(seed: u64, gen: &GeneratorConfig, heatmap_noise: f32) -> Result<Self> {
        let plan = generate_plan(seed, gen)?;
        Ok(Self::render(plan, &StyleConfig::sample(seed), heatmap_noise, seed))
    }

    pub fn render(plan: FloorPlanAnnotation, style: &StyleConfig, heatmap_noise: f32, seed: u64) -> Self {
        let raster = rasterize(&plan, style);
        let heatmap = render_oracle_heatmap(&plan, DEFAULT_SIGMA, heatmap_noise, seed.wrapping_add(0x4ea7));
        Self { plan, raster, heatmap }
    }

    pub fn canvas(&self) -> (u32, u32) {
        self.plan.canvas
    }
}

pub fn oracle_junctions(plan: &FloorPlanAnnotation) -> Vec<DetectedJunction> {
    plan.junctions()
        .into_iter()
        .map(|position| DetectedJunction { position, score: 1.0 })
        .collect()
}

pub fn detect_junctions(
    plan: &FloorPlanAnnotation,
    heatmap: &JunctionHeatmap,
    cfg: &PipelineConfig,
) -> Result<Vec<DetectedJunction>> {
    Ok(match cfg.junctions {
        JunctionMode::Oracle => oracle_junctions(plan),
        JunctionMode::Detected => nms_detect(heatmap, NmsKernel::try_from(cfg.nms_kernel)?, cfg.threshold, cfg.max_out),
    })
}

/// Everything about one sample that does not depend on model parameters.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub junctions: Vec<DetectedJunction>,
    pub graph: CandidateGraph,
    pub pooled: Tensor,
    pub canvas: (u32, u32),
}

impl Prepared {
    pub fn new(
        junctions: Vec<DetectedJunction>,
        raster: &RasterFeatureMap,
        heatmap: &JunctionHeatmap,
        cfg: &PipelineConfig,
    ) -> Self {
        let graph = candidate_graph(&junctions, cfg.suppression);
        let fm = raster.with_extra_channel(&heatmap.values);
        let pooled = pooled_features(&graph, &fm, cfg.pooling);
        let canvas = (raster.width as u32, raster.height as u32);
        Self { junctions, graph, pooled, canvas }
    }

    /// Model input. With an RNG, each node's endpoint order is drawn at
    /// random; without one the canonical order is used.
    pub fn input(&self, rng: Option<&mut dyn RngCore>) -> GraphInput {
        let basic = basic_features(&self.graph, self.canvas, rng);
        GraphInput::new(node_features(&basic, &self.pooled), &self.graph, self.canvas)
    }

    /// Scores every node with `params` and returns the scored graph.
    pub fn infer(&self, params: &ModelParams) -> Result<CandidateGraph> {
        let mut graph = self.graph.clone();
        graph.node_scores = Some(if graph.is_empty() { Vec::new() } else { predict(params, &self.input(None))? });
        Ok(graph)
    }
}

pub fn prepare(sample: &Sample, cfg: &PipelineConfig) -> Result<Prepared> {
    let junctions = detect_junctions(&sample.plan, &sample.heatmap, cfg)?;
    Ok(Prepared::new(junctions, &sample.raster, &sample.heatmap, cfg))
}

/// Worker count: `GLSP_THREADS` if set to a positive integer, otherwise the
/// available parallelism.
pub fn thread_count() -> usize {
    std::env::var("GLSP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Maps `f` over `items` on up to [`thread_count`] threads. Results are in
/// input order regardless of scheduling.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = thread_count().min(items.len());
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                s.spawn(move || part.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}
