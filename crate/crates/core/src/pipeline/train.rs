//! Training loop and evaluation orchestration.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::FeatureRecord;
use crate::error::{Error, Result};
use crate::inference::{predict, topk_accuracy, EvalMode, HierProbs};
use crate::model::{
    forward, forward_on_tape, init_model, insert_params, losses_on_tape, LossWeights, ModelConfig,
    ModelParams,
};
use crate::numerics::{AdamState, Tape, Tensor};
use crate::rng::{stream_rng, Stream};
use crate::scene::SoftSceneLabel;
use crate::taxonomy::{Hierarchy, LabelPath, Taxonomy};
use crate::textalign::{compute_text_features, AlignmentStrategy, TextEmbedder};

/// How per-video scene targets are built from frame labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SceneLabelMode {
    #[default]
    Soft,
    Majority,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub alignment: AlignmentStrategy,
    #[serde(default)]
    pub scene_mode: SceneLabelMode,
    #[serde(default)]
    pub eval_mode: EvalMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub loss_weights: LossWeights,
}

fn default_epochs() -> usize {
    10
}
fn default_batch_size() -> usize {
    12
}
fn default_learning_rate() -> f64 {
    0.001
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            alignment: AlignmentStrategy::default(),
            scene_mode: SceneLabelMode::default(),
            eval_mode: EvalMode::default(),
            seed: 0,
            loss_weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // zero epochs is allowed: training then returns the initialization
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Mean per-sample losses over one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_geo: f64,
    pub loss_scene: f64,
    pub loss_tla: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
}

/// Precomputed supervision for one record.
struct Supervision {
    scene_target: SoftSceneLabel,
    text_features: Vec<f64>,
}

fn prepare_supervision(
    records: &[FeatureRecord],
    taxonomy: &Taxonomy,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    embedder: &TextEmbedder,
) -> Result<Vec<Supervision>> {
    // text features depend only on the label path; compute each once
    let mut text_cache: HashMap<LabelPath, Vec<f64>> = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if !taxonomy.is_valid_path(&r.labels) {
            return Err(Error::Inconsistency(format!(
                "record '{}' has a taxonomy-invalid label path",
                r.id
            )));
        }
        let scene_target = match train_config.scene_mode {
            SceneLabelMode::Soft => r.scene.soft_target(model_config.scene_dim)?,
            SceneLabelMode::Majority => r.scene.majority_target(model_config.scene_dim)?,
        };
        let text_features = match text_cache.get(&r.labels) {
            Some(v) => v.clone(),
            None => {
                let v = compute_text_features(&r.labels, embedder, train_config.alignment, taxonomy)?;
                text_cache.insert(r.labels, v.clone());
                v
            }
        };
        out.push(Supervision {
            scene_target,
            text_features,
        });
    }
    Ok(out)
}

/// Train on pre-split records. Shuffling, batching, and every update
/// are deterministic in (data, configs, seed); the log holds exact
/// per-epoch sample means of each loss term.
pub fn train(
    records: &[FeatureRecord],
    taxonomy: &Taxonomy,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    embedder: &TextEmbedder,
) -> Result<TrainOutcome> {
    model_config.validate()?;
    train_config.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyInput("training records"));
    }
    if embedder.dim() != model_config.text_dim {
        return Err(Error::Config(format!(
            "embedder dim {} vs model text_dim {}",
            embedder.dim(),
            model_config.text_dim
        )));
    }
    for r in records {
        if r.features.len() != model_config.feature_dim {
            return Err(Error::Dimension(format!(
                "record '{}' has {} features, model wants {}",
                r.id,
                r.features.len(),
                model_config.feature_dim
            )));
        }
    }
    let supervision = prepare_supervision(records, taxonomy, model_config, train_config, embedder)?;

    let mut params = init_model(model_config)?;
    let mut flat = params.flatten();
    let mut adam = AdamState::new(flat.len(), train_config.learning_rate);
    let weights = &train_config.loss_weights;
    let mut log = Vec::with_capacity(train_config.epochs);

    for epoch in 0..train_config.epochs {
        let mut order: Vec<usize> = (0..records.len()).collect();
        let mut rng = stream_rng(train_config.seed, Stream::Shuffle, epoch as u64);
        order.shuffle(&mut rng);

        let mut sum_geo = 0.0;
        let mut sum_scene = 0.0;
        let mut sum_tla = 0.0;
        let mut sum_total = 0.0;

        for (batch_index, batch) in order.chunks(train_config.batch_size).enumerate() {
            let mut tape = Tape::new();
            let ids = insert_params(&mut tape, &params);
            let mut sample_totals = Vec::with_capacity(batch.len());
            for &i in batch {
                let r = &records[i];
                let sup = &supervision[i];
                let input = tape.leaf(Tensor::vector(r.features.clone()));
                let nodes = forward_on_tape(&mut tape, input, &ids)?;
                let losses = losses_on_tape(
                    &mut tape,
                    &nodes,
                    &r.labels,
                    &sup.scene_target,
                    &sup.text_features,
                    weights,
                )?;
                let geo = tape.value(losses.geo).item();
                let scene = tape.value(losses.scene).item();
                let tla = tape.value(losses.tla).item();
                if !geo.is_finite() || !scene.is_finite() || !tla.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        batch: batch_index,
                        geo,
                        scene,
                        tla,
                    });
                }
                sum_geo += geo;
                sum_scene += scene;
                sum_tla += tla;
                sum_total += tape.value(losses.total).item();
                sample_totals.push(losses.total);
            }
            let batch_sum = tape.add_n(sample_totals)?;
            let batch_mean = tape.scale(batch_sum, 1.0 / batch.len() as f64);
            let grads = tape.backward(batch_mean)?;
            let flat_grads = ids.collect_grads(&grads);
            adam.step(&mut flat, &flat_grads)?;
            params.assign_from_flat(&flat)?;
        }

        let n = records.len() as f64;
        log.push(EpochLog {
            epoch,
            loss_total: sum_total / n,
            loss_geo: sum_geo / n,
            loss_scene: sum_scene / n,
            loss_tla: sum_tla / n,
        });
    }

    Ok(TrainOutcome { params, log })
}

/// Per-hierarchy accuracy block of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyMetrics {
    pub top1: f64,
    pub topk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: String,
    pub samples: usize,
    pub topk: usize,
    pub city: HierarchyMetrics,
    pub state: HierarchyMetrics,
    pub country: HierarchyMetrics,
    pub continent: HierarchyMetrics,
}

impl EvalReport {
    pub fn metrics(&self, h: Hierarchy) -> &HierarchyMetrics {
        match h {
            Hierarchy::City => &self.city,
            Hierarchy::State => &self.state,
            Hierarchy::Country => &self.country,
            Hierarchy::Continent => &self.continent,
        }
    }
}

/// Evaluate a model over records: top-1 and top-k accuracy for every
/// hierarchy under the requested mode.
pub fn evaluate(
    params: &ModelParams,
    config: &ModelConfig,
    records: &[FeatureRecord],
    taxonomy: &Taxonomy,
    mode: EvalMode,
    topk: usize,
) -> Result<EvalReport> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyInput("evaluation records"));
    }
    if taxonomy.dims() != config.class_dims {
        return Err(Error::Config(format!(
            "taxonomy dims {:?} disagree with checkpoint class_dims {:?}",
            taxonomy.dims(),
            config.class_dims
        )));
    }
    let mut reports = Vec::with_capacity(records.len());
    let mut truths = Vec::with_capacity(records.len());
    for r in records {
        let output = forward(&r.features, params)?;
        let probs = HierProbs::from_output(&output)?;
        reports.push(predict(&probs, taxonomy, mode)?);
        truths.push(r.labels);
    }
    let k = topk.max(1);
    let metrics = |h: Hierarchy| -> Result<HierarchyMetrics> {
        Ok(HierarchyMetrics {
            top1: topk_accuracy(&reports, &truths, 1, h)?,
            topk: topk_accuracy(&reports, &truths, k, h)?,
        })
    };
    Ok(EvalReport {
        mode: mode.name().to_string(),
        samples: records.len(),
        topk: k,
        city: metrics(Hierarchy::City)?,
        state: metrics(Hierarchy::State)?,
        country: metrics(Hierarchy::Country)?,
        continent: metrics(Hierarchy::Continent)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_checkpoint, save_checkpoint};
    use crate::pipeline::data::stratified_split;
    use crate::pipeline::synth::{generate_synthetic, make_nested_taxonomy, SynthConfig};

    fn toy_setup() -> (Taxonomy, Vec<FeatureRecord>, ModelConfig, TrainConfig) {
        let taxonomy = make_nested_taxonomy(4, 2, 2, 1).unwrap();
        let synth = SynthConfig {
            samples_per_city: 12,
            noise_sigma: 0.05,
            feature_dim: 16,
            scene_dim: 4,
            frames_per_video: 8,
            seed: 11,
            ..Default::default()
        };
        let records = generate_synthetic(&taxonomy, &synth).unwrap();
        let model_config = ModelConfig {
            feature_dim: 16,
            scene_dim: 4,
            text_dim: 8,
            seed: 5,
            ..ModelConfig::default()
        }
        .with_taxonomy(taxonomy.clone());
        let train_config = TrainConfig {
            epochs: 3,
            batch_size: 8,
            seed: 9,
            ..TrainConfig::default()
        };
        (taxonomy, records, model_config, train_config)
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (taxonomy, records, model_config, mut train_config) = toy_setup();
        train_config.epochs = 0;
        let embedder = TextEmbedder::stub(model_config.text_dim);
        let outcome = train(&records, &taxonomy, &model_config, &train_config, &embedder).unwrap();
        assert!(outcome.log.is_empty());
        assert_eq!(outcome.params, init_model(&model_config).unwrap());
    }

    #[test]
    fn same_seed_gives_bit_identical_loss_logs() {
        let (taxonomy, records, model_config, train_config) = toy_setup();
        let embedder = TextEmbedder::stub(model_config.text_dim);
        let a = train(&records, &taxonomy, &model_config, &train_config, &embedder).unwrap();
        let b = train(&records, &taxonomy, &model_config, &train_config, &embedder).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.params, b.params);
        // a different shuffle seed changes the trajectory
        let mut other = train_config.clone();
        other.seed = 10;
        let c = train(&records, &taxonomy, &model_config, &other, &embedder).unwrap();
        assert_ne!(a.log, c.log);
    }

    #[test]
    fn epoch_mean_total_loss_decreases_early() {
        let (taxonomy, records, model_config, mut train_config) = toy_setup();
        train_config.epochs = 5;
        let embedder = TextEmbedder::stub(model_config.text_dim);
        let outcome = train(&records, &taxonomy, &model_config, &train_config, &embedder).unwrap();
        for w in outcome.log.windows(2) {
            assert!(
                w[1].loss_total < w[0].loss_total,
                "epoch {} loss {} did not improve on {}",
                w[1].epoch,
                w[1].loss_total,
                w[0].loss_total
            );
        }
    }

    #[test]
    fn training_fits_the_toy_task() {
        let (taxonomy, records, model_config, mut train_config) = toy_setup();
        train_config.epochs = 80;
        train_config.learning_rate = 0.01;
        let embedder = TextEmbedder::stub(model_config.text_dim);
        let (train_recs, val_recs) = stratified_split(records, 0.75, 3).unwrap();
        let outcome = train(&train_recs, &taxonomy, &model_config, &train_config, &embedder).unwrap();
        let report = evaluate(
            &outcome.params,
            &model_config,
            &val_recs,
            &taxonomy,
            EvalMode::Codependent,
            5,
        )
        .unwrap();
        assert!(report.city.top1 >= 0.9, "val city top1 {}", report.city.top1);
        // codependent coarse accuracy can never undercut city accuracy
        assert!(report.state.top1 >= report.city.top1);
        assert!(report.country.top1 >= report.city.top1);
        assert!(report.continent.top1 >= report.city.top1);
    }

    #[test]
    fn checkpoint_reload_reproduces_evaluation() {
        let (taxonomy, records, model_config, train_config) = toy_setup();
        let embedder = TextEmbedder::stub(model_config.text_dim);
        let outcome = train(&records, &taxonomy, &model_config, &train_config, &embedder).unwrap();
        let before = evaluate(
            &outcome.params,
            &model_config,
            &records,
            &taxonomy,
            EvalMode::Codependent,
            5,
        )
        .unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&model_config, &outcome.params, &mut buf).unwrap();
        let (config2, params2) = load_checkpoint(&mut buf.as_slice()).unwrap();
        let after = evaluate(&params2, &config2, &records, &taxonomy, EvalMode::Codependent, 5).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn eval_mode_mismatch_on_dims_is_config_error() {
        let (taxonomy, records, model_config, train_config) = toy_setup();
        let embedder = TextEmbedder::stub(model_config.text_dim);
        let outcome = train(&records, &taxonomy, &model_config, &train_config, &embedder).unwrap();
        let other_tax = make_nested_taxonomy(6, 3, 1, 1).unwrap();
        let err = evaluate(
            &outcome.params,
            &model_config,
            &records,
            &other_tax,
            EvalMode::Codependent,
            5,
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn wrong_feature_dim_is_rejected() {
        let (taxonomy, mut records, model_config, train_config) = toy_setup();
        records[0].features.pop();
        let embedder = TextEmbedder::stub(model_config.text_dim);
        let err = train(&records, &taxonomy, &model_config, &train_config, &embedder);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }
}
