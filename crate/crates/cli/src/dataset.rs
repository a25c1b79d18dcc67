//! On-disk datasets: one annotation, raster and heatmap per plan, listed in
//! `index.json` with the generating configuration beside it.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use glsp_core::geometry::SegmentClass;
use glsp_core::junction::JunctionHeatmap;
use glsp_core::pipeline::{Sample, DEFAULT_HEATMAP_NOISE};
use glsp_core::synthgen::{generate_plan, load_annotation, save_annotation, GeneratorConfig, RasterFeatureMap, StyleConfig};
use serde::{Deserialize, Serialize};

pub const INDEX_FILE: &str = "index.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    /// Draw a fresh style per plan; otherwise `style` is used for all.
    pub random_style: bool,
    pub style: StyleConfig,
    pub heatmap_noise: f32,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            generator: GeneratorConfig::default(),
            random_style: true,
            style: StyleConfig::default(),
            heatmap_noise: DEFAULT_HEATMAP_NOISE,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCounts {
    pub wall: usize,
    pub door: usize,
    pub window: usize,
}

impl ClassCounts {
    pub fn of(plan: &glsp_core::synthgen::FloorPlanAnnotation) -> Self {
        Self {
            wall: plan.count_class(SegmentClass::Wall),
            door: plan.count_class(SegmentClass::Door),
            window: plan.count_class(SegmentClass::Window),
        }
    }

    fn add(&mut self, o: ClassCounts) {
        self.wall += o.wall;
        self.door += o.door;
        self.window += o.window;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub seed: u64,
    pub annotation: String,
    pub raster: String,
    pub heatmap: String,
    pub class_counts: ClassCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetIndex {
    pub count: usize,
    pub class_counts: ClassCounts,
    pub entries: Vec<IndexEntry>,
}

/// Removes the listed files on drop unless [`Outputs::keep`] was called.
#[derive(Default)]
pub struct Outputs {
    paths: Vec<PathBuf>,
    keep: bool,
}

impl Outputs {
    pub fn add(&mut self, p: impl Into<PathBuf>) -> PathBuf {
        let p = p.into();
        self.paths.push(p.clone());
        p
    }

    pub fn keep(mut self) {
        self.keep = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.keep {
            for p in &self.paths {
                let _ = fs::remove_file(p);
            }
        }
    }
}

pub fn generate(out_dir: &Path, count: usize, cfg: &GenConfig) -> Result<DatasetIndex> {
    cfg.generator.validate()?;
    if !cfg.random_style {
        cfg.style.validate()?;
    }
    ensure!((0.0..=1.0).contains(&cfg.heatmap_noise), "heatmap_noise must lie in [0, 1]");
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut outputs = Outputs::default();
    let mut entries = Vec::with_capacity(count);
    let mut totals = ClassCounts::default();
    for i in 0..count {
        let seed = cfg.seed.wrapping_add(i as u64);
        let plan = generate_plan(seed, &cfg.generator)?;
        let style = if cfg.random_style { StyleConfig::sample(seed) } else { StyleConfig { seed, ..cfg.style.clone() } };
        let sample = Sample::render(plan, &style, cfg.heatmap_noise, seed);
        let name = format!("plan_{i:05}");
        let entry = IndexEntry {
            seed,
            annotation: format!("{name}.json"),
            raster: format!("{name}.rast"),
            heatmap: format!("{name}.heat"),
            class_counts: ClassCounts::of(&sample.plan),
        };
        save_annotation(&sample.plan, outputs.add(out_dir.join(&entry.annotation)))?;
        sample.raster.write_to(outputs.add(out_dir.join(&entry.raster)))?;
        sample.heatmap.write_to(outputs.add(out_dir.join(&entry.heatmap)))?;
        totals.add(entry.class_counts);
        entries.push(entry);
    }
    let index = DatasetIndex { count, class_counts: totals, entries };
    fs::write(outputs.add(out_dir.join(INDEX_FILE)), serde_json::to_string_pretty(&index)?)?;
    fs::write(outputs.add(out_dir.join(CONFIG_FILE)), serde_json::to_string_pretty(cfg)?)?;
    outputs.keep();
    Ok(index)
}

pub fn read_index(dir: &Path) -> Result<DatasetIndex> {
    let path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let index: DatasetIndex = serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))?;
    if index.count != index.entries.len() {
        bail!("index lists {} entries but declares count {}", index.entries.len(), index.count);
    }
    Ok(index)
}

pub fn load_sample(dir: &Path, entry: &IndexEntry) -> Result<Sample> {
    let ctx = |f: &str| format!("dataset entry {f}");
    let plan = load_annotation(dir.join(&entry.annotation)).with_context(|| ctx(&entry.annotation))?;
    let raster = RasterFeatureMap::read_from(dir.join(&entry.raster)).with_context(|| ctx(&entry.raster))?;
    let heatmap = JunctionHeatmap::read_from(dir.join(&entry.heatmap)).with_context(|| ctx(&entry.heatmap))?;
    let (w, h) = (plan.canvas.0 as usize, plan.canvas.1 as usize);
    if (raster.width, raster.height) != (w, h) || (heatmap.width, heatmap.height) != (w, h) {
        bail!("{}: raster or heatmap size does not match the annotation canvas", entry.annotation);
    }
    if ClassCounts::of(&plan) != entry.class_counts {
        bail!("{}: class counts differ from the index", entry.annotation);
    }
    Ok(Sample { plan, raster, heatmap })
}

pub fn load_dataset(dir: &Path) -> Result<Vec<Sample>> {
    let index = read_index(dir)?;
    index.entries.iter().map(|e| load_sample(dir, e)).collect()
}
