use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use glsp_core::embed::node_dim;
use glsp_core::eval::{evaluate, EvalReport, PredictionSet, Thresholds};
use glsp_core::junction::{HeatmapSource, JunctionHeatmap};
use glsp_core::nn::{load_checkpoint, save_checkpoint, ModelParams};
use glsp_core::pipeline::{detect_junctions, par_map, prepare, JunctionMode, PipelineConfig, Prepared, Sample, FEATURE_CHANNELS};
use glsp_core::synthgen::{load_annotation, save_annotation, FloorPlanAnnotation, LineAnnotation, RasterFeatureMap, StyleConfig};
use glsp_core::train::{format_log, train_from, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::{generate, load_dataset, GenConfig, Outputs};
use crate::{EvalArgs, GenArgs, OnOff, ParseArgs, PipelineArgs, TrainArgs};

/// Thickness written for predicted lines, which carry no width estimate.
const PREDICTED_THICKNESS: f64 = 2.0;

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", p.display()))
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

impl PipelineArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(s) = self.suppression {
            cfg.suppression = s.into();
        }
        if let Some(k) = &self.nms_kernel {
            cfg.nms_kernel = k.parse().expect("restricted by clap");
        }
        if let Some(j) = self.junctions {
            cfg.junctions = j.into();
        }
    }
}

pub fn gen(a: GenArgs) -> Result<()> {
    let mut cfg: GenConfig = read_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let index = generate(&a.out, a.count, &cfg)?;
    println!(
        "wrote {} plans to {} (walls {}, doors {}, windows {})",
        index.count,
        a.out.display(),
        index.class_counts.wall,
        index.class_counts.door,
        index.class_counts.window
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = read_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(pk) = a.pk {
        cfg.pk = matches!(pk, OnOff::On);
    }
    if let Some(n) = a.steps {
        cfg.steps = n;
    }
    a.pipeline.apply(&mut cfg.pipeline);
    cfg.validate()?;
    let samples = load_dataset(&a.data)?;
    let init = match &a.init {
        Some(p) => {
            let params = load_checkpoint(p).with_context(|| format!("cannot load {}", p.display()))?;
            cfg.model = params.config;
            params
        }
        None => ModelParams::init(cfg.model, cfg.seed)?,
    };
    let outcome = train_from(&samples, &cfg, init)?;
    let mut outputs = Outputs::default();
    save_checkpoint(&outputs.add(&a.out), &outcome.params)?;
    fs::write(outputs.add(with_suffix(&a.out, ".log")), format_log(&outcome.log))?;
    fs::write(outputs.add(with_suffix(&a.out, ".config.json")), serde_json::to_string_pretty(&cfg)?)?;
    outputs.keep();
    let last = outcome.log.last().map_or(f64::NAN, |e| e.loss);
    println!(
        "trained {} steps on {} plans ({} skipped), final loss {last:.5}",
        cfg.steps,
        samples.len() - outcome.skipped,
        outcome.skipped
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub pipeline: PipelineConfig,
    pub thresholds: Thresholds,
    pub gt_as_predictions: bool,
}

fn parse_thresholds(s: &str) -> Result<Vec<f64>> {
    let out = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad threshold {t:?}")))
        .collect::<Result<Vec<_>>>()?;
    ensure!(out.iter().all(|&t| t > 0.0 && t.is_finite()), "thresholds must be positive");
    Ok(out)
}

fn check_model(params: &ModelParams) -> Result<()> {
    let want = node_dim(FEATURE_CHANNELS);
    if params.config.input_dim != want {
        bail!(
            "checkpoint/model-shape mismatch: checkpoint expects {}-dimensional node features, the pipeline produces {want}",
            params.config.input_dim
        );
    }
    Ok(())
}

pub fn eval_samples(samples: &[Sample], params: Option<&ModelParams>, cfg: &EvalConfig) -> Result<EvalReport> {
    let preds: Vec<Result<PredictionSet>> = par_map(samples, |s| {
        if cfg.gt_as_predictions {
            return Ok(PredictionSet::from_annotation(&s.plan));
        }
        let params = params.expect("checked by caller");
        let prepared: Prepared = prepare(s, &cfg.pipeline)?;
        let graph = prepared.infer(params)?;
        Ok(PredictionSet::from_graph(&graph, &prepared.junctions))
    });
    let items = preds
        .into_iter()
        .zip(samples)
        .map(|(p, s)| Ok((p?, s.plan.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok(evaluate(&items, &cfg.thresholds))
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut cfg: EvalConfig = read_config(a.config.as_deref())?;
    a.pipeline.apply(&mut cfg.pipeline);
    if let Some(t) = &a.thresholds {
        cfg.thresholds.line = parse_thresholds(t)?;
    }
    cfg.gt_as_predictions |= a.gt_as_predictions;
    cfg.pipeline.validate()?;
    let params = match (&a.checkpoint, cfg.gt_as_predictions) {
        (Some(p), _) => {
            let params = load_checkpoint(p).with_context(|| format!("cannot load {}", p.display()))?;
            check_model(&params)?;
            Some(params)
        }
        (None, true) => None,
        (None, false) => bail!("--checkpoint is required unless ground truth is evaluated"),
    };
    let samples = load_dataset(&a.data)?;
    let report = eval_samples(&samples, params.as_ref(), &cfg)?;
    let table = report.to_table();
    print!("{table}");
    if let Some(out) = &a.out {
        let mut outputs = Outputs::default();
        fs::write(outputs.add(out), &table)?;
        fs::write(outputs.add(with_suffix(out, ".pr.tsv")), report.curves_text())?;
        fs::write(outputs.add(with_suffix(out, ".config.json")), serde_json::to_string_pretty(&cfg)?)?;
        outputs.keep();
    }
    Ok(())
}

pub fn parse(a: ParseArgs) -> Result<()> {
    let mut cfg: PipelineConfig = read_config(a.config.as_deref())?;
    a.pipeline.apply(&mut cfg);
    cfg.validate()?;
    let params = load_checkpoint(&a.checkpoint).with_context(|| format!("cannot load {}", a.checkpoint.display()))?;
    check_model(&params)?;
    let is_annotation = a.input.extension().is_some_and(|e| e == "json");
    let (plan, raster, heatmap) = if is_annotation {
        let plan = load_annotation(&a.input)?;
        let sample = Sample::render(plan, &StyleConfig::default(), 0.0, 0);
        (Some(sample.plan), sample.raster, sample.heatmap)
    } else {
        if cfg.junctions == JunctionMode::Oracle {
            bail!("oracle junctions need an annotation input");
        }
        let raster = RasterFeatureMap::read_from(&a.input)
            .with_context(|| format!("cannot read raster {}", a.input.display()))?;
        ensure!(raster.channels == 3, "raster must have 3 channels, found {}", raster.channels);
        let heat_path = a.heatmap.clone().unwrap_or_else(|| a.input.with_extension("heat"));
        let heatmap = if heat_path.exists() {
            let hm = JunctionHeatmap::read_from(&heat_path)?;
            ensure!(
                (hm.width, hm.height) == (raster.width, raster.height),
                "heatmap size does not match the raster"
            );
            hm
        } else {
            eprintln!("warning: no heatmap at {}, no junctions will be detected", heat_path.display());
            JunctionHeatmap { source: HeatmapSource::External, ..JunctionHeatmap::zeros(raster.width, raster.height) }
        };
        (None, raster, heatmap)
    };
    let canvas = (raster.width as u32, raster.height as u32);
    let junctions = match &plan {
        Some(p) => detect_junctions(p, &heatmap, &cfg)?,
        None => detect_junctions(&FloorPlanAnnotation { scale: 1.0, canvas, lines: vec![], rooms: vec![] }, &heatmap, &cfg)?,
    };
    let prepared = Prepared::new(junctions, &raster, &heatmap, &cfg);
    let graph = prepared.infer(&params)?;
    let preds = PredictionSet::from_graph(&graph, &prepared.junctions);
    let result = FloorPlanAnnotation {
        scale: plan.as_ref().map_or(1.0, |p| p.scale),
        canvas,
        lines: preds
            .segments
            .iter()
            .map(|s| LineAnnotation {
                segment: s.segment,
                thickness: PREDICTED_THICKNESS,
                class: s.class,
                score: Some(s.score),
            })
            .collect(),
        rooms: vec![],
    };
    let mut outputs = Outputs::default();
    save_annotation(&result, outputs.add(&a.out))?;
    fs::write(outputs.add(with_suffix(&a.out, ".config.json")), serde_json::to_string_pretty(&cfg)?)?;
    outputs.keep();
    println!("wrote {} segments to {}", result.lines.len(), a.out.display());
    Ok(())
}
