//! The trainable head: four hierarchy classifiers over input features,
//! attention over the concatenated logit vector, a scene branch, an
//! alignment branch, and the training losses.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::attention::{
    attention_on_tape, insert_attention_params, AttentionNodeIds, AttentionParams,
};
use crate::numerics::ffn::{ffn_on_tape, insert_ffn_params, Ffn, FfnNodeIds, LinearLayer};
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::{log_softmax, Tensor};
use crate::pipeline::data::OffsetReader;
use crate::rng::{stream_rng, Stream};
use crate::scene::SoftSceneLabel;
use crate::taxonomy::{LabelPath, Taxonomy, HIERARCHY_NAMES};

const CHECKPOINT_MAGIC: &[u8; 4] = b"CGCK";
const CHECKPOINT_VERSION: u32 = 1;

fn default_feature_dim() -> usize {
    384
}
fn default_scene_dim() -> usize {
    crate::scene::DEFAULT_SCENE_DIM
}
fn default_text_dim() -> usize {
    crate::textalign::DEFAULT_TEXT_DIM
}
fn default_heads() -> usize {
    2
}
fn default_token_embed_dim() -> usize {
    6
}
fn default_ffn_s_layers() -> usize {
    6
}
fn default_ffn_t_layers() -> usize {
    3
}

/// Architecture hyperparameters. The class dims come from the taxonomy;
/// when a taxonomy is attached the checkpoint is self-contained for
/// evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default)]
    pub class_dims: [usize; 4],
    #[serde(default = "default_scene_dim")]
    pub scene_dim: usize,
    #[serde(default = "default_text_dim")]
    pub text_dim: usize,
    #[serde(default = "default_heads")]
    pub attention_heads: usize,
    #[serde(default = "default_token_embed_dim")]
    pub token_embed_dim: usize,
    #[serde(default = "default_ffn_s_layers")]
    pub ffn_s_layers: usize,
    #[serde(default = "default_ffn_t_layers")]
    pub ffn_t_layers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<Taxonomy>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_dim: default_feature_dim(),
            class_dims: [0; 4],
            scene_dim: default_scene_dim(),
            text_dim: default_text_dim(),
            attention_heads: default_heads(),
            token_embed_dim: default_token_embed_dim(),
            ffn_s_layers: default_ffn_s_layers(),
            ffn_t_layers: default_ffn_t_layers(),
            seed: 0,
            taxonomy: None,
        }
    }
}

impl ModelConfig {
    /// Fill class dims from a taxonomy and embed it.
    pub fn with_taxonomy(mut self, taxonomy: Taxonomy) -> Self {
        self.class_dims = taxonomy.dims();
        self.taxonomy = Some(taxonomy);
        self
    }

    /// Total logit width d = d1 + d2 + d3 + d4.
    pub fn total_logit_dim(&self) -> usize {
        self.class_dims.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("feature_dim", self.feature_dim),
            ("scene_dim", self.scene_dim),
            ("text_dim", self.text_dim),
            ("attention_heads", self.attention_heads),
            ("token_embed_dim", self.token_embed_dim),
            ("ffn_s_layers", self.ffn_s_layers),
            ("ffn_t_layers", self.ffn_t_layers),
        ] {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (h, &d) in self.class_dims.iter().enumerate() {
            if d == 0 {
                return Err(Error::Config(format!(
                    "class dimension for {} must be positive",
                    HIERARCHY_NAMES[h]
                )));
            }
        }
        if self.token_embed_dim % self.attention_heads != 0 {
            return Err(Error::Config(format!(
                "token_embed_dim {} is not divisible by attention_heads {}",
                self.token_embed_dim, self.attention_heads
            )));
        }
        if let Some(tax) = &self.taxonomy {
            tax.validate()?;
            if tax.dims() != self.class_dims {
                return Err(Error::Config(format!(
                    "taxonomy dims {:?} disagree with class_dims {:?}",
                    tax.dims(),
                    self.class_dims
                )));
            }
        }
        Ok(())
    }
}

/// All learnable weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub classifiers: Vec<LinearLayer>,
    pub attention: AttentionParams,
    pub ffn_s: Ffn,
    pub ffn_t: Ffn,
}

/// Seeded initialization; the parameter layout is a deterministic
/// function of the config.
pub fn init_model(config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, Stream::ModelInit, 0);
    let classifiers = config
        .class_dims
        .iter()
        .map(|&d| LinearLayer::init(&mut rng, d, config.feature_dim))
        .collect();
    let attention = AttentionParams::init(&mut rng, config.attention_heads, config.token_embed_dim)?;
    let d = config.total_logit_dim();
    let ffn_s = Ffn::init(
        &mut rng,
        &Ffn::geometric_widths(d, config.scene_dim, config.ffn_s_layers),
    );
    let ffn_t = Ffn::init(
        &mut rng,
        &Ffn::geometric_widths(d, config.text_dim, config.ffn_t_layers),
    );
    Ok(ModelParams {
        classifiers,
        attention,
        ffn_s,
        ffn_t,
    })
}

impl ModelParams {
    pub fn feature_dim(&self) -> usize {
        self.classifiers[0].in_dim()
    }

    /// Visit every parameter tensor in a stable order under a stable name.
    pub fn visit(&self, f: &mut impl FnMut(String, &Tensor)) {
        for (h, layer) in self.classifiers.iter().enumerate() {
            f(format!("classifier_{}.weight", HIERARCHY_NAMES[h]), &layer.weight);
            f(format!("classifier_{}.bias", HIERARCHY_NAMES[h]), &layer.bias);
        }
        f("attention.embed_weight".into(), &self.attention.embed_weight);
        f("attention.embed_bias".into(), &self.attention.embed_bias);
        for (i, head) in self.attention.heads.iter().enumerate() {
            f(format!("attention.head{i}.query"), &head.query);
            f(format!("attention.head{i}.key"), &head.key);
            f(format!("attention.head{i}.value"), &head.value);
        }
        f("attention.out_proj".into(), &self.attention.out_proj);
        f("attention.readout_weight".into(), &self.attention.readout_weight);
        f("attention.readout_bias".into(), &self.attention.readout_bias);
        for (name, ffn) in [("ffn_s", &self.ffn_s), ("ffn_t", &self.ffn_t)] {
            for (i, layer) in ffn.layers.iter().enumerate() {
                f(format!("{name}.layer{i}.weight"), &layer.weight);
                f(format!("{name}.layer{i}.bias"), &layer.bias);
            }
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(String, &mut Tensor)) {
        for (h, layer) in self.classifiers.iter_mut().enumerate() {
            f(format!("classifier_{}.weight", HIERARCHY_NAMES[h]), &mut layer.weight);
            f(format!("classifier_{}.bias", HIERARCHY_NAMES[h]), &mut layer.bias);
        }
        f("attention.embed_weight".into(), &mut self.attention.embed_weight);
        f("attention.embed_bias".into(), &mut self.attention.embed_bias);
        for (i, head) in self.attention.heads.iter_mut().enumerate() {
            f(format!("attention.head{i}.query"), &mut head.query);
            f(format!("attention.head{i}.key"), &mut head.key);
            f(format!("attention.head{i}.value"), &mut head.value);
        }
        f("attention.out_proj".into(), &mut self.attention.out_proj);
        f("attention.readout_weight".into(), &mut self.attention.readout_weight);
        f("attention.readout_bias".into(), &mut self.attention.readout_bias);
        for (name, ffn) in [("ffn_s", &mut self.ffn_s), ("ffn_t", &mut self.ffn_t)] {
            for (i, layer) in ffn.layers.iter_mut().enumerate() {
                f(format!("{name}.layer{i}.weight"), &mut layer.weight);
                f(format!("{name}.layer{i}.bias"), &mut layer.bias);
            }
        }
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.len());
        n
    }

    /// All parameters as one flat vector, in visit order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |_, t| out.extend_from_slice(t.data()));
        out
    }

    /// Overwrite parameters from a flat vector laid out in visit order.
    pub fn assign_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "flat vector has {} entries, model has {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        self.visit_mut(&mut |_, t| {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        });
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, t| ok &= t.all_finite());
        ok
    }
}

/// Parameter node ids inside a tape, in the same order as
/// `ModelParams::visit`.
pub struct ParamNodeIds {
    pub classifiers: Vec<(NodeId, NodeId)>,
    pub attention: AttentionNodeIds,
    pub ffn_s: FfnNodeIds,
    pub ffn_t: FfnNodeIds,
}

pub fn insert_params(tape: &mut Tape, params: &ModelParams) -> ParamNodeIds {
    let classifiers = params
        .classifiers
        .iter()
        .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
        .collect();
    let attention = insert_attention_params(tape, &params.attention);
    let ffn_s = insert_ffn_params(tape, &params.ffn_s);
    let ffn_t = insert_ffn_params(tape, &params.ffn_t);
    ParamNodeIds {
        classifiers,
        attention,
        ffn_s,
        ffn_t,
    }
}

impl ParamNodeIds {
    /// Gradients for every parameter, flattened in visit order.
    pub fn collect_grads(&self, grads: &[Tensor]) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.classifiers {
            out.extend_from_slice(grads[*w].data());
            out.extend_from_slice(grads[*b].data());
        }
        out.extend_from_slice(grads[self.attention.embed_weight].data());
        out.extend_from_slice(grads[self.attention.embed_bias].data());
        for (q, k, v) in &self.attention.heads {
            out.extend_from_slice(grads[*q].data());
            out.extend_from_slice(grads[*k].data());
            out.extend_from_slice(grads[*v].data());
        }
        out.extend_from_slice(grads[self.attention.out_proj].data());
        out.extend_from_slice(grads[self.attention.readout_weight].data());
        out.extend_from_slice(grads[self.attention.readout_bias].data());
        for ffn in [&self.ffn_s, &self.ffn_t] {
            for (w, b) in &ffn.layers {
                out.extend_from_slice(grads[*w].data());
                out.extend_from_slice(grads[*b].data());
            }
        }
        out
    }
}

/// Node ids of the forward pass outputs.
pub struct ForwardNodes {
    pub hierarchy_logits: [NodeId; 4],
    pub concat: NodeId,
    pub attended: NodeId,
    pub scene_logits: NodeId,
    pub alignment: NodeId,
}

/// Forward subgraph for one sample: per-hierarchy linear logits, their
/// concatenation attended as scalar tokens, then the scene and
/// alignment branches off the attended vector.
pub fn forward_on_tape(tape: &mut Tape, features: NodeId, ids: &ParamNodeIds) -> Result<ForwardNodes> {
    let mut logits = Vec::with_capacity(4);
    for (w, b) in &ids.classifiers {
        let wx = tape.matvec(*w, features)?;
        logits.push(tape.add(wx, *b)?);
    }
    let hierarchy_logits = [logits[0], logits[1], logits[2], logits[3]];
    let concat = tape.concat_vec(logits)?;
    let attended = attention_on_tape(tape, concat, &ids.attention)?;
    let scene_logits = ffn_on_tape(tape, attended, &ids.ffn_s)?;
    let alignment = ffn_on_tape(tape, attended, &ids.ffn_t)?;
    Ok(ForwardNodes {
        hierarchy_logits,
        concat,
        attended,
        scene_logits,
        alignment,
    })
}

/// Forward pass outputs for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Raw logits per hierarchy, dims (d1, d2, d3, d4).
    pub hierarchy_logits: [Vec<f64>; 4],
    /// Attention output over the concatenated logits, dim d.
    pub attended: Vec<f64>,
    /// Scene branch logits, dim d_s.
    pub scene_logits: Vec<f64>,
    /// Alignment branch output, dim d_t.
    pub alignment: Vec<f64>,
}

/// Pure forward pass.
pub fn forward(features: &[f64], params: &ModelParams) -> Result<ForwardOutput> {
    if features.len() != params.feature_dim() {
        return Err(Error::Dimension(format!(
            "features have dimension {}, model wants {}",
            features.len(),
            params.feature_dim()
        )));
    }
    let mut tape = Tape::new();
    let input = tape.leaf(Tensor::vector(features.to_vec()));
    let ids = insert_params(&mut tape, params);
    let nodes = forward_on_tape(&mut tape, input, &ids)?;
    let grab = |id: NodeId| tape.value(id).data().to_vec();
    Ok(ForwardOutput {
        hierarchy_logits: [
            grab(nodes.hierarchy_logits[0]),
            grab(nodes.hierarchy_logits[1]),
            grab(nodes.hierarchy_logits[2]),
            grab(nodes.hierarchy_logits[3]),
        ],
        attended: grab(nodes.attended),
        scene_logits: grab(nodes.scene_logits),
        alignment: grab(nodes.alignment),
    })
}

/// Sum of per-hierarchy cross-entropies against the label path.
pub fn loss_geo(output: &ForwardOutput, labels: &LabelPath) -> Result<f64> {
    let mut total = 0.0;
    for (logits, label) in output.hierarchy_logits.iter().zip(labels.as_array()) {
        if label >= logits.len() {
            return Err(Error::Index {
                what: "hierarchy label",
                index: label,
                size: logits.len(),
            });
        }
        total -= log_softmax(logits)?[label];
    }
    Ok(total)
}

/// Cross-entropy of the scene logits against a soft distribution.
pub fn loss_scene(scene_logits: &[f64], soft_label: &SoftSceneLabel) -> Result<f64> {
    if scene_logits.len() != soft_label.dim() {
        return Err(Error::Dimension(format!(
            "scene logits dim {} vs soft label dim {}",
            scene_logits.len(),
            soft_label.dim()
        )));
    }
    let ls = log_softmax(scene_logits)?;
    Ok(-soft_label
        .values()
        .iter()
        .zip(&ls)
        .map(|(s, l)| s * l)
        .sum::<f64>())
}

/// Negative cosine similarity between the alignment output and the
/// text-feature target.
pub fn loss_tla(alignment: &[f64], text_features: &[f64]) -> Result<f64> {
    if alignment.len() != text_features.len() {
        return Err(Error::Dimension(format!(
            "alignment dim {} vs text features dim {}",
            alignment.len(),
            text_features.len()
        )));
    }
    let na: f64 = alignment.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nf: f64 = text_features.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nf == 0.0 {
        return Err(Error::DegenerateInput("cosine similarity of a zero vector".into()));
    }
    let dot: f64 = alignment.iter().zip(text_features).map(|(a, b)| a * b).sum();
    Ok(-dot / (na * nf))
}

/// Relative weight of each loss term. The defaults leave the total as a
/// plain unweighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub geo: f64,
    pub scene: f64,
    pub tla: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            geo: 1.0,
            scene: 1.0,
            tla: 1.0,
        }
    }
}

/// Unweighted sum of the three loss terms.
pub fn total_loss(
    output: &ForwardOutput,
    labels: &LabelPath,
    soft_label: &SoftSceneLabel,
    text_features: &[f64],
) -> Result<f64> {
    Ok(loss_geo(output, labels)?
        + loss_scene(&output.scene_logits, soft_label)?
        + loss_tla(&output.alignment, text_features)?)
}

/// Per-sample loss nodes on a tape.
pub struct LossNodes {
    pub geo: NodeId,
    pub scene: NodeId,
    pub tla: NodeId,
    pub total: NodeId,
}

/// Attach the three losses (and their weighted total) to a forward
/// subgraph.
pub fn losses_on_tape(
    tape: &mut Tape,
    nodes: &ForwardNodes,
    labels: &LabelPath,
    soft_label: &SoftSceneLabel,
    text_features: &[f64],
    weights: &LossWeights,
) -> Result<LossNodes> {
    let mut ce_terms = Vec::with_capacity(4);
    for (node, label) in nodes.hierarchy_logits.iter().zip(labels.as_array()) {
        ce_terms.push(tape.ce_index(*node, label)?);
    }
    let geo = tape.add_n(ce_terms)?;
    let scene = tape.ce_soft(nodes.scene_logits, Tensor::vector(soft_label.values().to_vec()))?;
    let tla = tape.neg_cosine_const(nodes.alignment, Tensor::vector(text_features.to_vec()))?;
    let weighted = vec![
        tape.scale(geo, weights.geo),
        tape.scale(scene, weights.scene),
        tape.scale(tla, weights.tla),
    ];
    let total = tape.add_n(weighted)?;
    Ok(LossNodes {
        geo,
        scene,
        tla,
        total,
    })
}

/// Write `magic, version, length-prefixed config JSON, named parameter
/// sections` so evaluation can be reproduced bit-exactly.
pub fn save_checkpoint(config: &ModelConfig, params: &ModelParams, w: &mut impl Write) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let json = serde_json::to_vec(config)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let mut result = Ok(());
    params.visit(&mut |name, tensor| {
        if result.is_err() {
            return;
        }
        result = (|| -> Result<()> {
            let bytes = name.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes())?;
            w.write_all(bytes)?;
            w.write_all(&(tensor.len() as u64).to_le_bytes())?;
            for &x in tensor.data() {
                w.write_all(&x.to_le_bytes())?;
            }
            Ok(())
        })();
    });
    result
}

pub fn load_checkpoint(r: &mut impl Read) -> Result<(ModelConfig, ModelParams)> {
    let mut reader = OffsetReader::new(r);
    let magic = reader.bytes::<4>()?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(reader.format_error("bad magic, expected CGCK"));
    }
    let version = reader.u32_le()?;
    if version != CHECKPOINT_VERSION {
        return Err(reader.format_error(&format!("unsupported version {version}")));
    }
    let json = reader.string()?;
    let config: ModelConfig = serde_json::from_str(&json)
        .map_err(|e| reader.format_error(&format!("bad config json: {e}")))?;
    config.validate()?;

    let mut sections: std::collections::HashMap<String, Vec<f64>> = std::collections::HashMap::new();
    while let Some(len_bytes) = reader.maybe_bytes::<4>()? {
        let name_len = u32::from_le_bytes(len_bytes) as usize;
        let name_bytes = reader.bytes_vec(name_len)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| reader.format_error("invalid UTF-8 in section name"))?;
        let count = reader.u64_le()? as usize;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(reader.f64_le()?);
        }
        if sections.insert(name.clone(), data).is_some() {
            return Err(reader.format_error(&format!("duplicate section '{name}'")));
        }
    }

    // Shapes come from the config; sections fill in the values.
    let mut params = init_model(&config)?;
    let mut failure: Option<Error> = None;
    params.visit_mut(&mut |name, tensor| {
        if failure.is_some() {
            return;
        }
        match sections.remove(&name) {
            Some(data) if data.len() == tensor.len() => {
                tensor.data_mut().copy_from_slice(&data);
            }
            Some(data) => {
                failure = Some(Error::Format {
                    offset: 0,
                    message: format!(
                        "section '{name}' has {} values, expected {}",
                        data.len(),
                        tensor.len()
                    ),
                });
            }
            None => {
                failure = Some(Error::Format {
                    offset: 0,
                    message: format!("missing parameter section '{name}'"),
                });
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(extra) = sections.keys().next() {
        return Err(Error::Format {
            offset: 0,
            message: format!("unknown parameter section '{extra}'"),
        });
    }
    Ok((config, params))
}

pub fn save_checkpoint_file(config: &ModelConfig, params: &ModelParams, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    save_checkpoint(config, params, &mut f)
}

pub fn load_checkpoint_file(path: &Path) -> Result<(ModelConfig, ModelParams)> {
    let mut f = std::fs::File::open(path)?;
    load_checkpoint(&mut f)
}
