//! Dense tensors with reverse-mode differentiation, and the attention GNN.

mod checkpoint;
mod model;
mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use model::{
    attention_logits, classify, forward, gaan_layer, predict, GraphInput, LayerParams, LayerVars, ModelConfig,
    ModelParams, ParamVars, LEAKY_SLOPE,
};
pub use tape::{leaky, sigmoid, EdgeIndex, Tape, Var};
pub use tensor::{matmul, ShapeError, Tensor};
