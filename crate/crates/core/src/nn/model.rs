//! Multi-head, channel-wise attention GNN over the candidate line graph.
//!
//! Every fully connected map is affine followed by a leaky ReLU, except the
//! final output projection which yields raw class logits.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tape::{leaky, sigmoid, EdgeIndex, Tape, Var};
use super::tensor::{ShapeError, Tensor};
use crate::embed::{edge_embedding, node_dim};
use crate::error::{Error, Result};
use crate::geometry::SegmentClass;
use crate::graph::CandidateGraph;

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub heads: usize,
    /// Per-head width of the node projections feeding the attention logits.
    pub attn_dim: usize,
    /// Per-head width of values and attention channels.
    pub value_dim: usize,
    /// Per-head width of the edge projection.
    pub edge_dim: usize,
    pub layers: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: node_dim(4),
            hidden: 128,
            heads: 8,
            attn_dim: 128,
            value_dim: 128,
            edge_dim: 64,
            layers: 4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("input_dim", self.input_dim),
            ("hidden", self.hidden),
            ("heads", self.heads),
            ("attn_dim", self.attn_dim),
            ("value_dim", self.value_dim),
            ("edge_dim", self.edge_dim),
            ("layers", self.layers),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("model {name} must be positive")));
            }
        }
        Ok(())
    }

    pub(crate) fn as_array(&self) -> [usize; 7] {
        [
            self.input_dim,
            self.hidden,
            self.heads,
            self.attn_dim,
            self.value_dim,
            self.edge_dim,
            self.layers,
        ]
    }

    pub(crate) fn from_array(a: [usize; 7]) -> Self {
        Self {
            input_dim: a[0],
            hidden: a[1],
            heads: a[2],
            attn_dim: a[3],
            value_dim: a[4],
            edge_dim: a[5],
            layers: a[6],
        }
    }
}

/// One attention layer. Per-head weights are stacked: column block `k` of
/// `xa_w` (or row block `k` of `wx`) belongs to head `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub xa_w: Tensor,
    pub xa_b: Tensor,
    pub za_w: Tensor,
    pub za_b: Tensor,
    pub e_w: Tensor,
    pub e_b: Tensor,
    /// Blocks of the logit map acting on the target, neighbour and edge
    /// projections respectively.
    pub wx: Tensor,
    pub wz: Tensor,
    pub we: Tensor,
    pub w_b: Tensor,
    pub v_w: Tensor,
    pub v_b: Tensor,
    pub o_w: Tensor,
    pub o_b: Tensor,
}

const LAYER_FIELDS: [&str; 14] = [
    "xa.weight", "xa.bias", "za.weight", "za.bias", "e.weight", "e.bias", "w.target", "w.neighbor", "w.edge",
    "w.bias", "v.weight", "v.bias", "o.weight", "o.bias",
];

impl LayerParams {
    fn tensors(&self) -> [&Tensor; 14] {
        [
            &self.xa_w, &self.xa_b, &self.za_w, &self.za_b, &self.e_w, &self.e_b, &self.wx, &self.wz, &self.we,
            &self.w_b, &self.v_w, &self.v_b, &self.o_w, &self.o_b,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 14] {
        [
            &mut self.xa_w,
            &mut self.xa_b,
            &mut self.za_w,
            &mut self.za_b,
            &mut self.e_w,
            &mut self.e_b,
            &mut self.wx,
            &mut self.wz,
            &mut self.we,
            &mut self.w_b,
            &mut self.v_w,
            &mut self.v_b,
            &mut self.o_w,
            &mut self.o_b,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub in_w: Tensor,
    pub in_b: Tensor,
    pub layers: Vec<LayerParams>,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..=limit)).collect();
    Tensor::from_vec(rows, cols, data).expect("sized")
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config;
        let (k, a, v, f) = (c.heads, c.attn_dim, c.value_dim, c.edge_dim);
        let in_w = glorot(&mut rng, c.input_dim, c.hidden, c.input_dim, c.hidden);
        let mut layers = Vec::with_capacity(c.layers);
        for m in 0..c.layers {
            let d_in = c.hidden;
            let d_out = if m + 1 == c.layers { SegmentClass::COUNT } else { c.hidden };
            let logit_in = 2 * a + f;
            layers.push(LayerParams {
                xa_w: glorot(&mut rng, d_in, k * a, d_in, a),
                xa_b: Tensor::zeros(1, k * a),
                za_w: glorot(&mut rng, d_in, k * a, d_in, a),
                za_b: Tensor::zeros(1, k * a),
                e_w: glorot(&mut rng, 2, k * f, 2, f),
                e_b: Tensor::zeros(1, k * f),
                wx: glorot(&mut rng, k * a, v, logit_in, v),
                wz: glorot(&mut rng, k * a, v, logit_in, v),
                we: glorot(&mut rng, k * f, v, logit_in, v),
                w_b: Tensor::zeros(1, k * v),
                v_w: glorot(&mut rng, d_in, k * v, d_in, v),
                v_b: Tensor::zeros(1, k * v),
                o_w: glorot(&mut rng, d_in + k * v, d_out, d_in + k * v, d_out),
                o_b: Tensor::zeros(1, d_out),
            });
        }
        Ok(Self {
            config,
            in_w,
            in_b: Tensor::zeros(1, c.hidden),
            layers,
        })
    }

    /// Parameter tensors with stable names, in checkpoint order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("input.weight".to_string(), &self.in_w), ("input.bias".to_string(), &self.in_b)];
        for (m, l) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_FIELDS.iter().zip(l.tensors()) {
                out.push((format!("layer{m}.{name}"), t));
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.in_w, &mut self.in_b];
        for l in &mut self.layers {
            out.extend(l.tensors_mut());
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    /// Places every parameter on the tape as a trainable leaf.
    pub fn register(&self, tape: &mut Tape) -> ParamVars {
        let in_w = tape.param(self.in_w.clone());
        let in_b = tape.param(self.in_b.clone());
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let v = l.tensors().map(|t| tape.param(t.clone()));
                LayerVars {
                    xa_w: v[0],
                    xa_b: v[1],
                    za_w: v[2],
                    za_b: v[3],
                    e_w: v[4],
                    e_b: v[5],
                    wx: v[6],
                    wz: v[7],
                    we: v[8],
                    w_b: v[9],
                    v_w: v[10],
                    v_b: v[11],
                    o_w: v[12],
                    o_b: v[13],
                }
            })
            .collect();
        ParamVars { in_w, in_b, layers }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub xa_w: Var,
    pub xa_b: Var,
    pub za_w: Var,
    pub za_b: Var,
    pub e_w: Var,
    pub e_b: Var,
    pub wx: Var,
    pub wz: Var,
    pub we: Var,
    pub w_b: Var,
    pub v_w: Var,
    pub v_b: Var,
    pub o_w: Var,
    pub o_b: Var,
}

impl LayerVars {
    fn all(&self) -> [Var; 14] {
        [
            self.xa_w, self.xa_b, self.za_w, self.za_b, self.e_w, self.e_b, self.wx, self.wz, self.we, self.w_b,
            self.v_w, self.v_b, self.o_w, self.o_b,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ParamVars {
    pub in_w: Var,
    pub in_b: Var,
    pub layers: Vec<LayerVars>,
}

impl ParamVars {
    /// Same order as [`ModelParams::tensors_mut`].
    pub fn all(&self) -> Vec<Var> {
        let mut out = vec![self.in_w, self.in_b];
        for l in &self.layers {
            out.extend(l.all());
        }
        out
    }
}

/// Model input for one line graph.
#[derive(Debug, Clone)]
pub struct GraphInput {
    /// One row per node.
    pub nodes: Tensor,
    /// Normalized coordinates of every junction carried by some edge.
    pub junctions: Tensor,
    pub index: Rc<EdgeIndex>,
}

impl GraphInput {
    pub fn new(nodes: Tensor, graph: &CandidateGraph, canvas: (u32, u32)) -> Self {
        let mut ids: Vec<usize> = graph.edges.iter().map(|e| e.junction).collect();
        ids.sort_unstable();
        ids.dedup();
        let mut junctions = Tensor::zeros(ids.len(), 2);
        let mut edges = Vec::with_capacity(graph.edges.len());
        for e in &graph.edges {
            let row = ids.binary_search(&e.junction).expect("junction listed");
            junctions.row_mut(row).copy_from_slice(&edge_embedding(e.shared, canvas));
            edges.push((e.u, e.v, row));
        }
        let index = Rc::new(EdgeIndex::from_undirected(graph.len(), ids.len(), &edges));
        Self { nodes, junctions, index }
    }

    pub fn len(&self) -> usize {
        self.nodes.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.rows() == 0
    }
}

fn fc(tape: &mut Tape, x: Var, w: Var, b: Var) -> std::result::Result<Var, ShapeError> {
    let h = tape.matmul(x, w)?;
    tape.add_row(h, b)
}

/// One attention layer: per head, channel-wise softmax over neighbours of
/// `leaky(FC_w(FC_xa(x_i) ++ FC_za(x_j) ++ FC_e(e_ij)))`, weighted sum of
/// `FC_v(x_j)`, heads concatenated after `x_i`, then the output map.
pub fn gaan_layer(
    tape: &mut Tape,
    lv: &LayerVars,
    heads: usize,
    x: Var,
    junctions: Var,
    index: &Rc<EdgeIndex>,
    last: bool,
) -> std::result::Result<Var, ShapeError> {
    let xa = fc(tape, x, lv.xa_w, lv.xa_b)?;
    let xa = tape.leaky_relu(xa, LEAKY_SLOPE);
    let za = fc(tape, x, lv.za_w, lv.za_b)?;
    let za = tape.leaky_relu(za, LEAKY_SLOPE);
    let ee = fc(tape, junctions, lv.e_w, lv.e_b)?;
    let ee = tape.leaky_relu(ee, LEAKY_SLOPE);
    let p = tape.headwise_matmul(xa, lv.wx, heads)?;
    let q = tape.headwise_matmul(za, lv.wz, heads)?;
    let r = tape.headwise_matmul(ee, lv.we, heads)?;
    let r = tape.add_row(r, lv.w_b)?;
    let v = fc(tape, x, lv.v_w, lv.v_b)?;
    let v = tape.leaky_relu(v, LEAKY_SLOPE);
    let agg = tape.edge_attention(p, q, r, v, index.clone(), LEAKY_SLOPE)?;
    let h = tape.concat_cols(&[x, agg])?;
    let out = fc(tape, h, lv.o_w, lv.o_b)?;
    Ok(if last { out } else { tape.leaky_relu(out, LEAKY_SLOPE) })
}

/// Class logits, one row of 4 per node.
pub fn forward(tape: &mut Tape, pv: &ParamVars, heads: usize, input: &GraphInput) -> std::result::Result<Var, ShapeError> {
    let x0 = tape.constant(input.nodes.clone());
    let e = tape.constant(input.junctions.clone());
    let x = fc(tape, x0, pv.in_w, pv.in_b)?;
    let mut x = tape.leaky_relu(x, LEAKY_SLOPE);
    let n = pv.layers.len();
    for (m, lv) in pv.layers.iter().enumerate() {
        x = gaan_layer(tape, lv, heads, x, e, &input.index, m + 1 == n)?;
    }
    Ok(x)
}

/// Per-node class probabilities.
pub fn predict(params: &ModelParams, input: &GraphInput) -> Result<Vec<[f64; 4]>> {
    if input.nodes.cols() != params.config.input_dim {
        return Err(Error::Checkpoint(format!(
            "model expects {}-dimensional node features, got {}",
            params.config.input_dim,
            input.nodes.cols()
        )));
    }
    let mut tape = Tape::new();
    let pv = params.register(&mut tape);
    let logits = forward(&mut tape, &pv, params.config.heads, input)?;
    let lt = tape.value(logits);
    Ok((0..lt.rows())
        .map(|i| {
            let r = lt.row(i);
            [sigmoid(r[0]), sigmoid(r[1]), sigmoid(r[2]), sigmoid(r[3])]
        })
        .collect())
}

/// Scores every node and stores them on the graph.
pub fn classify(params: &ModelParams, graph: &mut CandidateGraph, input: &GraphInput) -> Result<()> {
    let scores = predict(params, input)?;
    graph.node_scores = Some(scores);
    Ok(())
}

/// Attention logits of head `k` for one (target, neighbour, edge) triple,
/// computed directly from the layer parameters.
pub fn attention_logits(layer: &LayerParams, heads: usize, k: usize, x: &[f64], z: &[f64], e: &[f64]) -> Vec<f64> {
    let a = layer.xa_w.cols() / heads;
    let f = layer.e_w.cols() / heads;
    let c = layer.wx.cols();
    let project = |w: &Tensor, b: &Tensor, input: &[f64], width: usize| -> Vec<f64> {
        (0..width)
            .map(|o| {
                let col = k * width + o;
                let s: f64 = input.iter().enumerate().map(|(i, xi)| xi * w.get(i, col)).sum();
                leaky(s + b.get(0, col), LEAKY_SLOPE)
            })
            .collect()
    };
    let xa = project(&layer.xa_w, &layer.xa_b, x, a);
    let za = project(&layer.za_w, &layer.za_b, z, a);
    let ee = project(&layer.e_w, &layer.e_b, e, f);
    (0..c)
        .map(|o| {
            let mut s = layer.w_b.get(0, k * c + o);
            for i in 0..a {
                s += xa[i] * layer.wx.get(k * a + i, o) + za[i] * layer.wz.get(k * a + i, o);
            }
            for i in 0..f {
                s += ee[i] * layer.we.get(k * f + i, o);
            }
            leaky(s, LEAKY_SLOPE)
        })
        .collect()
}
