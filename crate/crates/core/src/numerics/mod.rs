//! Numeric substrate: dense tensors, reverse-mode gradients, attention,
//! feed-forward stacks, Adam, and finite-difference verification.

pub mod adam;
pub mod attention;
pub mod ffn;
pub mod gradcheck;
pub mod tape;
pub mod tensor;

pub use adam::AdamState;
pub use attention::{
    attention_on_tape, insert_attention_params, multihead_attention, AttentionNodeIds,
    AttentionParams, HeadParams,
};
pub use ffn::{ffn_forward, ffn_on_tape, insert_ffn_params, Ffn, FfnNodeIds, LinearLayer};
pub use gradcheck::gradient_check;
pub use tape::{NodeId, Tape};
pub use tensor::{log_softmax, softmax, Tensor};
