//! The transformer language model: rotary GQA attention, dense or low-rank
//! FFN blocks, manual backward pass and KV-cache decoding.

mod attention;
mod config;
mod ffn;
mod transformer;

pub use attention::{rotary_apply, AttentionWeights, KVCache, Rotary};
pub use config::{
    FfnKind, ModelConfig, DEFAULT_INIT_STD, DEFAULT_ROTARY_BASE, DEFAULT_SEQ_LEN, DEFAULT_VOCAB,
};
pub use ffn::{ffn_forward, FfnWeights};
pub use transformer::{
    build_model, Block, Gradients, LayerNorm, LmOutput, Tape, TensorKind, TensorMut, TensorRef,
    TransformerLM, LN_EPS,
};
