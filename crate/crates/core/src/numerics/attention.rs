//! Multihead scaled dot-product attention over a sequence of scalar
//! tokens.
//!
//! Each scalar in the input vector is a token. Tokens are linearly
//! embedded to `token_embed_dim`, attended per head with
//! softmax(q kᵀ / √d_q) · v, concatenated, output-projected, and read
//! back out to one scalar per token, so a length-d input yields a
//! length-d output.

use rand_chacha::ChaCha8Rng;

use super::ffn::glorot_uniform;
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Per-head projection weights, stored [token_embed_dim, head_dim].
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub query: Tensor,
    pub key: Tensor,
    pub value: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub num_heads: usize,
    pub token_embed_dim: usize,
    /// scalar token -> embedding, [1, token_embed_dim]
    pub embed_weight: Tensor,
    pub embed_bias: Tensor,
    pub heads: Vec<HeadParams>,
    /// [token_embed_dim, token_embed_dim]
    pub out_proj: Tensor,
    /// embedding -> scalar readout
    pub readout_weight: Tensor,
    pub readout_bias: Tensor,
}

impl AttentionParams {
    pub fn init(rng: &mut ChaCha8Rng, num_heads: usize, token_embed_dim: usize) -> Result<Self> {
        if num_heads == 0 || token_embed_dim == 0 || token_embed_dim % num_heads != 0 {
            return Err(Error::Config(format!(
                "token_embed_dim {token_embed_dim} must be a positive multiple of num_heads {num_heads}"
            )));
        }
        let e = token_embed_dim;
        let hd = e / num_heads;
        let embed_weight = glorot_uniform(rng, 1, e, 1, e);
        let embed_bias = Tensor::zeros(vec![e]);
        let heads = (0..num_heads)
            .map(|_| HeadParams {
                query: glorot_uniform(rng, e, hd, e, hd),
                key: glorot_uniform(rng, e, hd, e, hd),
                value: glorot_uniform(rng, e, hd, e, hd),
            })
            .collect();
        let out_proj = glorot_uniform(rng, e, e, e, e);
        let readout_weight = glorot_uniform(rng, 1, e, e, 1).reshaped(vec![e])?;
        let readout_bias = Tensor::zeros(vec![1]);
        Ok(AttentionParams {
            num_heads,
            token_embed_dim,
            embed_weight,
            embed_bias,
            heads,
            out_proj,
            readout_weight,
            readout_bias,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.token_embed_dim / self.num_heads
    }

    pub fn param_count(&self) -> usize {
        let e = self.token_embed_dim;
        let hd = self.head_dim();
        e + e + self.num_heads * 3 * e * hd + e * e + e + 1
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.token_embed_dim;
        if self.num_heads == 0 || e == 0 || e % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "token_embed_dim {} must be a positive multiple of num_heads {}",
                e, self.num_heads
            )));
        }
        if self.heads.len() != self.num_heads {
            return Err(Error::Dimension(format!(
                "expected {} head parameter sets, got {}",
                self.num_heads,
                self.heads.len()
            )));
        }
        let hd = self.head_dim();
        let expect = |t: &Tensor, shape: &[usize], what: &str| -> Result<()> {
            if t.shape() != shape {
                return Err(Error::Dimension(format!(
                    "attention {what}: expected shape {shape:?}, got {:?}",
                    t.shape()
                )));
            }
            Ok(())
        };
        expect(&self.embed_weight, &[1, e], "embed weight")?;
        expect(&self.embed_bias, &[e], "embed bias")?;
        for (i, h) in self.heads.iter().enumerate() {
            expect(&h.query, &[e, hd], &format!("head {i} query"))?;
            expect(&h.key, &[e, hd], &format!("head {i} key"))?;
            expect(&h.value, &[e, hd], &format!("head {i} value"))?;
        }
        expect(&self.out_proj, &[e, e], "output projection")?;
        expect(&self.readout_weight, &[e], "readout weight")?;
        expect(&self.readout_bias, &[1], "readout bias")?;
        Ok(())
    }
}

/// Parameter node ids for one attention block inside a tape.
pub struct AttentionNodeIds {
    pub embed_weight: NodeId,
    pub embed_bias: NodeId,
    pub heads: Vec<(NodeId, NodeId, NodeId)>,
    pub out_proj: NodeId,
    pub readout_weight: NodeId,
    pub readout_bias: NodeId,
    num_heads: usize,
    head_dim: usize,
}

pub fn insert_attention_params(tape: &mut Tape, params: &AttentionParams) -> AttentionNodeIds {
    AttentionNodeIds {
        embed_weight: tape.leaf(params.embed_weight.clone()),
        embed_bias: tape.leaf(params.embed_bias.clone()),
        heads: params
            .heads
            .iter()
            .map(|h| {
                (
                    tape.leaf(h.query.clone()),
                    tape.leaf(h.key.clone()),
                    tape.leaf(h.value.clone()),
                )
            })
            .collect(),
        out_proj: tape.leaf(params.out_proj.clone()),
        readout_weight: tape.leaf(params.readout_weight.clone()),
        readout_bias: tape.leaf(params.readout_bias.clone()),
        num_heads: params.num_heads,
        head_dim: params.head_dim(),
    }
}

/// Attention subgraph: `tokens` is a length-d vector node, the result is
/// a length-d vector node.
pub fn attention_on_tape(tape: &mut Tape, tokens: NodeId, ids: &AttentionNodeIds) -> Result<NodeId> {
    let d = tape.value(tokens).len();
    let scale = 1.0 / (ids.head_dim as f64).sqrt();

    let col = tape.reshape(tokens, vec![d, 1])?;
    let raw = tape.matmul(col, ids.embed_weight)?; // [d, e]
    let embedded = tape.add_row_bias(raw, ids.embed_bias)?;

    let mut head_outputs = Vec::with_capacity(ids.num_heads);
    for &(wq, wk, wv) in &ids.heads {
        let q = tape.matmul(embedded, wq)?; // [d, hd]
        let k = tape.matmul(embedded, wk)?;
        let v = tape.matmul(embedded, wv)?;
        let kt = tape.transpose(k)?;
        let scores = tape.matmul(q, kt)?; // [d, d]
        let scaled = tape.scale(scores, scale);
        let weights = tape.softmax_rows(scaled)?;
        head_outputs.push(tape.matmul(weights, v)?);
    }
    let concat = tape.concat_cols(head_outputs)?; // [d, e]
    let projected = tape.matmul(concat, ids.out_proj)?; // [d, e]
    let readout = tape.matvec(projected, ids.readout_weight)?; // [d]
    tape.add_scalar_bias(readout, ids.readout_bias)
}

/// Pure forward pass: attend over the scalar tokens of `tokens`.
pub fn multihead_attention(tokens: &[f64], params: &AttentionParams) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput("multihead_attention tokens"));
    }
    params.validate()?;
    let mut tape = Tape::new();
    let input = tape.leaf(Tensor::vector(tokens.to_vec()));
    let ids = insert_attention_params(&mut tape, params);
    let out = attention_on_tape(&mut tape, input, &ids)?;
    Ok(tape.value(out).data().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn identity(n: usize) -> Tensor {
        let mut t = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            t.set(i, i, 1.0);
        }
        t
    }

    /// Single head, value/output/readout wired as pass-throughs.
    fn passthrough_params(e: usize) -> AttentionParams {
        let mut embed_weight = Tensor::zeros(vec![1, e]);
        embed_weight.set(0, 0, 1.0);
        let mut readout_weight = Tensor::zeros(vec![e]);
        readout_weight.data_mut()[0] = 1.0;
        AttentionParams {
            num_heads: 1,
            token_embed_dim: e,
            embed_weight,
            embed_bias: Tensor::zeros(vec![e]),
            heads: vec![HeadParams {
                query: identity(e),
                key: identity(e),
                value: identity(e),
            }],
            out_proj: identity(e),
            readout_weight,
            readout_bias: Tensor::zeros(vec![1]),
        }
    }

    #[test]
    fn single_token_passes_through_identity_projections() {
        // softmax over one token is 1, so the value comes back untouched
        let params = passthrough_params(4);
        let out = multihead_attention(&[2.5], &params).unwrap();
        assert!((out[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn identical_tokens_produce_identical_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = AttentionParams::init(&mut rng, 2, 6).unwrap();
        let out = multihead_attention(&[0.8, 0.8], &params).unwrap();
        assert!((out[0] - out[1]).abs() < 1e-12);
    }

    #[test]
    fn init_rejects_indivisible_heads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(AttentionParams::init(&mut rng, 4, 6).is_err());
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = AttentionParams::init(&mut rng, 2, 6).unwrap();
        params.heads[1].key = Tensor::zeros(vec![6, 6]);
        assert!(params.validate().is_err());
        assert!(multihead_attention(&[1.0, 2.0], &params).is_err());
    }

    #[test]
    fn empty_token_sequence_is_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = AttentionParams::init(&mut rng, 2, 6).unwrap();
        assert!(multihead_attention(&[], &params).is_err());
    }

    #[test]
    fn param_count_matches_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = AttentionParams::init(&mut rng, 2, 6).unwrap();
        // embed 6+6, heads 2*3*(6*3), out 36, readout 6+1
        assert_eq!(params.param_count(), 6 + 6 + 108 + 36 + 7);
    }
}
