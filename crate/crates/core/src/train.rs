//! Node labelling, prior-knowledge loss weights, ADAM, and the training loop.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{endpoint_max_distance, proper_intersect, structural_distance, Segment, SegmentClass};
use crate::graph::CandidateGraph;
use crate::nn::{forward, ModelConfig, ModelParams, Tape, Tensor, Var};
use crate::pipeline::{par_map, prepare, PipelineConfig, Prepared, Sample};

pub const DEFAULT_D_MAX: f64 = 25.0;
pub const BCE_EPS: f64 = 1e-7;

/// How a candidate is compared with a ground-truth line when labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Larger endpoint distance under the better pairing, against `d_max`.
    #[default]
    EndpointMax,
    /// Sum of squared endpoint distances, against `d_max²`.
    EndpointSum,
}

impl LabelRule {
    fn cost(self, a: &Segment, b: &Segment) -> f64 {
        match self {
            LabelRule::EndpointMax => endpoint_max_distance(a, b),
            LabelRule::EndpointSum => structural_distance(a, b),
        }
    }

    fn threshold(self, d_max: f64) -> f64 {
        match self {
            LabelRule::EndpointMax => d_max,
            LabelRule::EndpointSum => d_max * d_max,
        }
    }
}

/// Class of the nearest ground-truth line within reach, else null. Ties go
/// to the earlier line.
pub fn label_nodes(
    graph: &CandidateGraph,
    gt: &crate::synthgen::FloorPlanAnnotation,
    d_max: f64,
    rule: LabelRule,
) -> Vec<SegmentClass> {
    let limit = rule.threshold(d_max);
    graph
        .nodes
        .iter()
        .map(|node| {
            let mut best: Option<(f64, SegmentClass)> = None;
            for line in &gt.lines {
                let d = rule.cost(&node.segment, &line.segment);
                if d <= limit && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, line.class));
                }
            }
            best.map_or(SegmentClass::Null, |(_, c)| c)
        })
        .collect()
}

/// Per-edge flag: does the edge lie on some cycle of the multigraph?
/// An edge is on a cycle exactly when it is not a bridge.
pub(crate) fn edges_on_cycles(vertices: usize, edges: &[(usize, usize)]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); vertices];
    for (id, &(u, v)) in edges.iter().enumerate() {
        adj[u].push((v, id));
        adj[v].push((u, id));
    }
    let mut disc = vec![usize::MAX; vertices];
    let mut low = vec![0; vertices];
    let mut on_cycle = vec![true; edges.len()];
    let mut time = 0;
    for root in 0..vertices {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = time;
        low[root] = time;
        time += 1;
        // (vertex, edge used to enter it, next adjacency slot)
        let mut stack = vec![(root, usize::MAX, 0usize)];
        while let Some(&mut (u, via, ref mut slot)) = stack.last_mut() {
            if let Some(&(w, id)) = adj[u].get(*slot) {
                *slot += 1;
                if id == via {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = time;
                    low[w] = time;
                    time += 1;
                    stack.push((w, id, 0));
                } else {
                    low[u] = low[u].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > disc[parent] {
                        on_cycle[via] = false;
                    }
                }
            }
        }
    }
    on_cycle
}

/// Loss multipliers from the predicted classes: doubled for a meaningful
/// node crossing another meaningful node, and doubled again for a node on a
/// closed loop made only of walls and windows.
pub fn pk_weights(graph: &CandidateGraph) -> Vec<f64> {
    let Some(classes) = graph.predicted_classes() else {
        return vec![1.0; graph.len()];
    };
    pk_weights_for(graph, &classes)
}

pub fn pk_weights_for(graph: &CandidateGraph, classes: &[SegmentClass]) -> Vec<f64> {
    let n = graph.len();
    let mut w = vec![1.0; n];
    let meaningful: Vec<usize> = (0..n).filter(|&i| classes[i].is_meaningful()).collect();
    let mut crossed = vec![false; n];
    for (k, &i) in meaningful.iter().enumerate() {
        for &j in &meaningful[k + 1..] {
            if proper_intersect(&graph.nodes[i].segment, &graph.nodes[j].segment) {
                crossed[i] = true;
                crossed[j] = true;
            }
        }
    }
    let closed: Vec<usize> = (0..n)
        .filter(|&i| matches!(classes[i], SegmentClass::Wall | SegmentClass::Window))
        .collect();
    let vertices = graph
        .nodes
        .iter()
        .map(|c| c.junction_ids.0.max(c.junction_ids.1) + 1)
        .max()
        .unwrap_or(0);
    let edges: Vec<(usize, usize)> = closed.iter().map(|&i| graph.nodes[i].junction_ids).collect();
    let cyclic = edges_on_cycles(vertices, &edges);
    for i in 0..n {
        if crossed[i] {
            w[i] *= 2.0;
        }
    }
    for (&i, &c) in closed.iter().zip(&cyclic) {
        if c {
            w[i] *= 2.0;
        }
    }
    w
}

pub fn one_hot(labels: &[SegmentClass]) -> Tensor {
    let mut t = Tensor::zeros(labels.len(), SegmentClass::COUNT);
    for (i, c) in labels.iter().enumerate() {
        t.set(i, c.index(), 1.0);
    }
    t
}

/// Per-node weights broadcast across the four class columns.
pub fn weight_matrix(weights: &[f64]) -> Tensor {
    let mut t = Tensor::zeros(weights.len(), SegmentClass::COUNT);
    for (i, &w) in weights.iter().enumerate() {
        t.row_mut(i).fill(w);
    }
    t
}

/// Mean weighted binary cross entropy between scores and one-hot labels.
pub fn graph_loss(scores: &[[f64; 4]], labels: &[SegmentClass], weights: &[f64]) -> f64 {
    let mut tape = Tape::new();
    let flat: Vec<f64> = scores.iter().flatten().copied().collect();
    let p = tape.constant(Tensor::from_vec(scores.len(), 4, flat).expect("4 scores per node"));
    let loss = tape
        .bce_loss(p, one_hot(labels), weight_matrix(weights), BCE_EPS)
        .expect("aligned node arrays");
    tape.value(loss).item()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = shapes.into_iter().map(|t| Tensor::zeros(t.rows(), t.cols())).collect();
        Self {
            v: m.clone(),
            m,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn for_model(params: &ModelParams) -> Self {
        Self::new(params.named().into_iter().map(|(_, t)| t))
    }
}

/// ADAM with L2 weight decay folded into the gradient and bias correction.
pub fn adam_step(params: &mut [&mut Tensor], grads: &[&Tensor], state: &mut AdamState, lr: f64, weight_decay: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        assert_eq!(p.shape(), g.shape());
        let m = state.m[k].data_mut();
        let v = state.v[k].data_mut();
        for (i, (w, &gr)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            let g = gr + weight_decay * *w;
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            *w -= lr * mh / (vh.sqrt() + state.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Piecewise-constant schedule: `(first step, rate)` pairs.
    pub lr_schedule: Vec<(u64, f64)>,
    pub batch_size: usize,
    pub steps: u64,
    /// Steps before the graph loss starts updating parameters.
    pub warmup: u64,
    /// Step at which prior-knowledge weights switch on.
    pub pk_step: u64,
    pub pk: bool,
    pub weight_decay: f64,
    pub d_max: f64,
    pub label_rule: LabelRule,
    /// Randomise endpoint order in node features each step.
    pub shuffle_endpoints: bool,
    pub seed: u64,
    pub model: ModelConfig,
    pub pipeline: PipelineConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_schedule: vec![(0, 1e-3), (1500, 1e-4)],
            batch_size: 8,
            steps: 2000,
            warmup: 200,
            pk_step: 500,
            pk: true,
            weight_decay: 1e-4,
            d_max: DEFAULT_D_MAX,
            label_rule: LabelRule::EndpointMax,
            shuffle_endpoints: true,
            seed: 0,
            model: ModelConfig::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.warmup >= self.pk_step {
            return bad("warmup must end before the PK activation step");
        }
        if self.lr_schedule.is_empty() || self.lr_schedule[0].0 != 0 {
            return bad("learning-rate schedule must start at step 0");
        }
        if self.lr_schedule.windows(2).any(|w| w[0].0 >= w[1].0) {
            return bad("learning-rate schedule steps must increase");
        }
        if self.lr_schedule.iter().any(|&(_, lr)| !(lr > 0.0 && lr.is_finite())) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.d_max > 0.0) {
            return bad("d_max must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight decay must be non-negative");
        }
        self.model.validate()?;
        self.pipeline.validate()
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        self.lr_schedule
            .iter()
            .take_while(|(s, _)| *s <= step)
            .last()
            .map_or(self.lr_schedule[0].1, |&(_, lr)| lr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    pub pk_active: bool,
}

pub fn format_log(log: &[LogEntry]) -> String {
    let mut out = String::new();
    for e in log {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", e.step, e.loss, e.lr, u8::from(e.pk_active));
    }
    out
}

/// A prepared sample with its node targets.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub prepared: Prepared,
    pub targets: Tensor,
}

impl TrainItem {
    pub fn new(sample: &Sample, cfg: &TrainConfig) -> Result<Option<Self>> {
        let prepared = prepare(sample, &cfg.pipeline)?;
        if prepared.junctions.len() < 2 || prepared.graph.is_empty() {
            return Ok(None);
        }
        let labels = label_nodes(&prepared.graph, &sample.plan, cfg.d_max, cfg.label_rule);
        Ok(Some(Self { targets: one_hot(&labels), prepared }))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<LogEntry>,
    pub skipped: usize,
}

pub fn prepare_items(samples: &[Sample], cfg: &TrainConfig) -> Result<(Vec<TrainItem>, usize)> {
    let items = par_map(samples, |s| TrainItem::new(s, cfg));
    let mut kept = Vec::with_capacity(items.len());
    let mut skipped = 0;
    for item in items {
        match item? {
            Some(i) => kept.push(i),
            None => skipped += 1,
        }
    }
    Ok((kept, skipped))
}

pub fn train(samples: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_from(samples, cfg, ModelParams::init(cfg.model, cfg.seed)?)
}

/// Continues training from `params`.
pub fn train_from(samples: &[Sample], cfg: &TrainConfig, params: ModelParams) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (items, skipped) = prepare_items(samples, cfg)?;
    if items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (params, log) = train_items(&items, cfg, params)?;
    Ok(TrainOutcome { params, log, skipped })
}

fn batch_loss(
    tape: &mut Tape,
    params: &ModelParams,
    items: &[&TrainItem],
    pk_active: bool,
    rng: &mut ChaCha8Rng,
    shuffle: bool,
) -> Result<(Var, Vec<Var>)> {
    let pv = params.register(tape);
    let mut losses = Vec::with_capacity(items.len());
    for item in items {
        let input = item
            .prepared
            .input(if shuffle { Some(rng as &mut dyn rand::RngCore) } else { None });
        let logits = forward(tape, &pv, params.config.heads, &input)?;
        let probs = tape.sigmoid(logits);
        let n = input.len();
        let weights = if pk_active {
            let pt = tape.value(probs);
            let classes: Vec<SegmentClass> = (0..n)
                .map(|i| {
                    let r = pt.row(i);
                    crate::graph::argmax_class(&[r[0], r[1], r[2], r[3]])
                })
                .collect();
            pk_weights_for(&item.prepared.graph, &classes)
        } else {
            vec![1.0; n]
        };
        losses.push(tape.bce_loss(probs, item.targets.clone(), weight_matrix(&weights), BCE_EPS)?);
    }
    let mut total = losses[0];
    for &l in &losses[1..] {
        total = tape.add(total, l)?;
    }
    let mean = tape.scale(total, 1.0 / losses.len() as f64);
    Ok((mean, pv.all()))
}

/// The optimisation loop over prepared items.
pub fn train_items(items: &[TrainItem], cfg: &TrainConfig, mut params: ModelParams) -> Result<(ModelParams, Vec<LogEntry>)> {
    if params.config != cfg.model {
        return Err(Error::Checkpoint(format!(
            "initial parameters have shape {:?}, config asks for {:?}",
            params.config, cfg.model
        )));
    }
    let mut state = AdamState::for_model(&params);
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0bad_5eed);
    let mut aug_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = Vec::new();
    let mut log = Vec::with_capacity(cfg.steps as usize);
    for step in 0..cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if order.is_empty() {
                order = (0..items.len()).collect();
                order.shuffle(&mut order_rng);
                order.reverse();
            }
            batch.push(&items[order.pop().expect("refilled")]);
        }
        let pk_active = cfg.pk && step >= cfg.pk_step;
        let lr = cfg.lr_at(step);
        let mut tape = Tape::new();
        let (loss, vars) = batch_loss(&mut tape, &params, &batch, pk_active, &mut aug_rng, cfg.shuffle_endpoints)?;
        let value = tape.value(loss).item();
        if step >= cfg.warmup {
            tape.backward(loss)?;
            let grads: Vec<&Tensor> = vars.iter().map(|v| tape.grad(*v).expect("parameter gradient")).collect();
            let mut tensors = params.tensors_mut();
            adam_step(&mut tensors, &grads, &mut state, lr, cfg.weight_decay);
        }
        log.push(LogEntry { step, loss: value, lr, pk_active });
    }
    Ok((params, log))
}
