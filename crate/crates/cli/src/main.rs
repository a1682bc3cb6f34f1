//! Command-line interface: synthesize datasets, train, evaluate,
//! analyze class distributions, and gradient-check configurations.
//! Outputs are JSON on stdout (or a file); failures exit nonzero with a
//! structured JSON error on stderr.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use geohier::inference::{count_classes, gini, hoover, lorenz_curve, EvalMode};
use geohier::model::{
    forward_on_tape, init_model, insert_params, load_checkpoint_file, losses_on_tape,
    save_checkpoint_file, LossWeights, ModelConfig,
};
use geohier::numerics::{gradient_check, Tape, Tensor};
use geohier::pipeline::{
    evaluate, generate_synthetic, load_manifest, make_nested_taxonomy, stratified_split, train,
    write_manifest, FeatureBank, FeatureRecord, ManifestEntry, SceneInfo, SynthConfig, TrainConfig,
};
use geohier::scene::SoftSceneLabel;
use geohier::taxonomy::{load_taxonomy, Hierarchy, LabelPath, Taxonomy};
use geohier::textalign::{EmbeddingTable, TextEmbedder};
use geohier::{Error, Result};

#[derive(Parser)]
#[command(name = "geohier", about = "Hierarchical geolocalization head over precomputed features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a manifest and taxonomy, writing a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint against a manifest.
    Eval(EvalArgs),
    /// Class histograms and inequality metrics for a manifest.
    Analyze(AnalyzeArgs),
    /// Finite-difference verification of the total-loss gradients.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic dataset (taxonomy, feature bank, manifest).
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// JSON-lines dataset manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Class-definition file (tab-separated city/state/country/continent).
    #[arg(long)]
    taxonomy: PathBuf,
    /// JSON config file with "model" and "train" sections.
    #[arg(long)]
    config: PathBuf,
    /// Output checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Train/validation split ratio applied before training.
    #[arg(long, default_value_t = 0.8)]
    split_ratio: f64,
    /// Train on every record without holding out a validation set.
    #[arg(long)]
    no_split: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint produced by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// JSON-lines dataset manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// none, independent, or codependent.
    #[arg(long, default_value = "codependent")]
    mode: String,
    /// k for the top-k metric.
    #[arg(long, default_value_t = 5)]
    topk: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// JSON-lines dataset manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for per-hierarchy Lorenz curve CSV files.
    #[arg(long)]
    lorenz_dir: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// JSON config file; the "model" section must pin class_dims.
    #[arg(long)]
    config: PathBuf,
    /// Central-difference step size.
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Random evaluation points.
    #[arg(long, default_value_t = 5)]
    points: usize,
    /// Fail when the max relative error exceeds this.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    cities: usize,
    #[arg(long)]
    per_city: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for taxonomy.tsv, features.bin, manifest.jsonl.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    countries: Option<usize>,
    #[arg(long)]
    continents: Option<usize>,
    #[arg(long, default_value_t = 384)]
    feature_dim: usize,
    #[arg(long, default_value_t = 16)]
    scene_dim: usize,
    #[arg(long, default_value_t = 16)]
    frames: usize,
}

/// Train-command config file: model and train sections plus an optional
/// embedding table for the alignment targets.
#[derive(Debug, Default, Serialize, Deserialize)]
struct CliConfig {
    #[serde(default)]
    model: Option<ModelConfig>,
    #[serde(default)]
    train: Option<TrainConfig>,
    /// Path to a CGET embedding table, relative to the config file.
    #[serde(default)]
    embedding_table: Option<String>,
    /// Fall back to the deterministic stub for labels the table lacks.
    #[serde(default = "default_true")]
    stub_fallback: bool,
}

fn default_true() -> bool {
    true
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what} file not found: {}",
            path.display()
        )))
    }
}

fn read_cli_config(path: &Path) -> Result<CliConfig> {
    require_file(path, "config")?;
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn build_embedder(config: &CliConfig, config_path: &Path, text_dim: usize) -> Result<TextEmbedder> {
    match &config.embedding_table {
        Some(rel) => {
            let base = config_path.parent().unwrap_or_else(|| Path::new("."));
            let table = EmbeddingTable::load(&base.join(rel))?;
            if table.dim() != text_dim {
                return Err(Error::Config(format!(
                    "embedding table dimension {} vs model text_dim {}",
                    table.dim(),
                    text_dim
                )));
            }
            Ok(TextEmbedder::with_table(table, config.stub_fallback))
        }
        None => Ok(TextEmbedder::stub(text_dim)),
    }
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<serde_json::Value> {
    require_file(&args.manifest, "manifest")?;
    require_file(&args.taxonomy, "taxonomy")?;
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let cli_config = read_cli_config(&args.config)?;
    let model_config = cli_config
        .model
        .clone()
        .unwrap_or_default()
        .with_taxonomy(taxonomy.clone());
    let train_config = cli_config.train.clone().unwrap_or_default();
    let embedder = build_embedder(&cli_config, &args.config, model_config.text_dim)?;

    let records = load_manifest(&args.manifest, &taxonomy)?;
    let (train_recs, val_recs) = if args.no_split {
        (records, Vec::new())
    } else {
        stratified_split(records, args.split_ratio, train_config.seed)?
    };

    let outcome = train(&train_recs, &taxonomy, &model_config, &train_config, &embedder)?;
    save_checkpoint_file(&model_config, &outcome.params, &args.out)?;

    let val_report = if val_recs.is_empty() {
        None
    } else {
        Some(evaluate(
            &outcome.params,
            &model_config,
            &val_recs,
            &taxonomy,
            train_config.eval_mode,
            5,
        )?)
    };
    Ok(json!({
        "checkpoint": args.out.display().to_string(),
        "train_samples": train_recs.len(),
        "val_samples": val_recs.len(),
        "epochs": outcome.log,
        "val_report": val_report,
    }))
}

fn cmd_eval(args: &EvalArgs) -> Result<serde_json::Value> {
    require_file(&args.checkpoint, "checkpoint")?;
    require_file(&args.manifest, "manifest")?;
    let mode = EvalMode::parse(&args.mode)?;
    let (config, params) = load_checkpoint_file(&args.checkpoint)?;
    let taxonomy = config.taxonomy.clone().ok_or_else(|| {
        Error::Config("checkpoint carries no taxonomy; re-train with this version".into())
    })?;
    let records = load_manifest(&args.manifest, &taxonomy)?;
    let report = evaluate(&params, &config, &records, &taxonomy, mode, args.topk)?;
    Ok(serde_json::to_value(report)?)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<serde_json::Value> {
    require_file(&args.manifest, "manifest")?;
    let entries = geohier::pipeline::read_manifest(&args.manifest)?;
    if entries.is_empty() {
        return Err(Error::EmptyInput("manifest"));
    }
    let class_records: Vec<geohier::taxonomy::ClassRecord> = entries
        .iter()
        .map(|e| geohier::taxonomy::ClassRecord {
            city: e.city.clone(),
            state: e.state.clone(),
            country: e.country.clone(),
            continent: e.continent.clone(),
        })
        .collect();
    let taxonomy = geohier::taxonomy::build_taxonomy(&class_records)?;
    let paths: Vec<LabelPath> = entries
        .iter()
        .map(|e| taxonomy.path_for_names(&e.city, &e.state, &e.country, &e.continent))
        .collect::<Result<_>>()?;

    if let Some(dir) = &args.lorenz_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut hierarchies = serde_json::Map::new();
    for h in Hierarchy::ALL {
        let counts = count_classes(&paths, &taxonomy, h)?;
        let lorenz = lorenz_curve(&counts)?;
        if let Some(dir) = &args.lorenz_dir {
            let mut csv = String::new();
            for (x, y) in &lorenz {
                csv.push_str(&format!("{x},{y}\n"));
            }
            std::fs::write(dir.join(format!("{}.csv", h.name())), csv)?;
        }
        let histogram: serde_json::Map<String, serde_json::Value> = taxonomy
            .class_names(h)
            .iter()
            .zip(counts.values())
            .map(|(name, &c)| (name.clone(), json!(c as u64)))
            .collect();
        hierarchies.insert(
            h.name().to_string(),
            json!({
                "classes": counts.len(),
                "gini": gini(&counts)?,
                "hoover": hoover(&counts)?,
                "histogram": histogram,
                "lorenz": lorenz,
            }),
        );
    }
    Ok(json!({
        "samples": entries.len(),
        "hierarchies": hierarchies,
    }))
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<serde_json::Value> {
    use rand::Rng;
    let cli_config = read_cli_config(&args.config)?;
    let config = cli_config.model.clone().ok_or_else(|| {
        Error::Config("gradcheck config needs a \"model\" section with class_dims".into())
    })?;
    config.validate()?;
    let template = init_model(&config)?;
    let mut rng = geohier::rng::stream_rng(config.seed, geohier::rng::Stream::Synthetic, 9);
    let weights = LossWeights::default();
    let mut worst: f64 = 0.0;

    for _ in 0..args.points.max(1) {
        let features: Vec<f64> = (0..config.feature_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let labels = LabelPath {
            city: rng.random_range(0..config.class_dims[0]),
            state: rng.random_range(0..config.class_dims[1]),
            country: rng.random_range(0..config.class_dims[2]),
            continent: rng.random_range(0..config.class_dims[3]),
        };
        let raw: Vec<f64> = (0..config.scene_dim)
            .map(|_| rng.random_range(0.05..1.0))
            .collect();
        let z: f64 = raw.iter().sum();
        let soft = SoftSceneLabel::from_distribution(raw.iter().map(|x| x / z).collect())?;
        let ft: Vec<f64> = (0..config.text_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();

        let loss_of = |flat: &[f64]| -> Result<f64> {
            let mut params = template.clone();
            params.assign_from_flat(flat)?;
            let mut tape = Tape::new();
            let input = tape.leaf(Tensor::vector(features.clone()));
            let ids = insert_params(&mut tape, &params);
            let nodes = forward_on_tape(&mut tape, input, &ids)?;
            let losses = losses_on_tape(&mut tape, &nodes, &labels, &soft, &ft, &weights)?;
            Ok(tape.value(losses.total).item())
        };
        let grad_of = |flat: &[f64]| -> Result<Vec<f64>> {
            let mut params = template.clone();
            params.assign_from_flat(flat)?;
            let mut tape = Tape::new();
            let input = tape.leaf(Tensor::vector(features.clone()));
            let ids = insert_params(&mut tape, &params);
            let nodes = forward_on_tape(&mut tape, input, &ids)?;
            let losses = losses_on_tape(&mut tape, &nodes, &labels, &soft, &ft, &weights)?;
            let grads = tape.backward(losses.total)?;
            Ok(ids.collect_grads(&grads))
        };

        let mut flat = template.flatten();
        for v in flat.iter_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
        worst = worst.max(gradient_check(loss_of, grad_of, &flat, args.eps)?);
    }

    if worst > args.tolerance {
        return Err(Error::Evaluation(format!(
            "max relative gradient error {worst:.3e} exceeds tolerance {:.3e}",
            args.tolerance
        )));
    }
    Ok(json!({
        "points": args.points,
        "eps": args.eps,
        "params": template.param_count(),
        "max_relative_error": worst,
        "tolerance": args.tolerance,
    }))
}

fn taxonomy_to_tsv(taxonomy: &Taxonomy) -> String {
    let mut out = String::from("# city\tstate\tcountry\tcontinent\n");
    for city in 0..taxonomy.cities.len() {
        let path = taxonomy.ancestors_of(city).expect("valid city id");
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            taxonomy.cities[path.city],
            taxonomy.states[path.state],
            taxonomy.countries[path.country],
            taxonomy.continents[path.continent],
        ));
    }
    out
}

fn cmd_synth(args: &SynthArgs) -> Result<serde_json::Value> {
    let states = args.states.unwrap_or_else(|| (args.cities / 2).max(1));
    let countries = args.countries.unwrap_or_else(|| (states / 2).max(1));
    let continents = args.continents.unwrap_or_else(|| (countries / 2).max(1));
    let taxonomy = make_nested_taxonomy(args.cities, states, countries, continents)?;
    let config = SynthConfig {
        samples_per_city: args.per_city,
        noise_sigma: args.sigma,
        feature_dim: args.feature_dim,
        scene_dim: args.scene_dim,
        frames_per_video: args.frames,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let records = generate_synthetic(&taxonomy, &config)?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("taxonomy.tsv"), taxonomy_to_tsv(&taxonomy))?;

    let mut bank = FeatureBank::new(args.feature_dim);
    let mut entries = Vec::with_capacity(records.len());
    for r in &records {
        let index = bank.push(r.features.clone())?;
        entries.push(manifest_entry(r, &taxonomy, index));
    }
    bank.save(&args.out.join("features.bin"))?;
    write_manifest(&entries, &args.out.join("manifest.jsonl"))?;

    Ok(json!({
        "out": args.out.display().to_string(),
        "cities": args.cities,
        "states": states,
        "countries": countries,
        "continents": continents,
        "records": records.len(),
        "files": ["taxonomy.tsv", "features.bin", "manifest.jsonl"],
    }))
}

fn manifest_entry(record: &FeatureRecord, taxonomy: &Taxonomy, index: usize) -> ManifestEntry {
    let (frame_scenes, soft_scene) = match &record.scene {
        SceneInfo::FrameIds(ids) => (Some(ids.clone()), None),
        SceneInfo::Soft(label) => (None, Some(label.values().to_vec())),
    };
    ManifestEntry {
        id: record.id.clone(),
        feature_file: "features.bin".into(),
        feature_index: index,
        city: taxonomy.cities[record.labels.city].clone(),
        state: taxonomy.states[record.labels.state].clone(),
        country: taxonomy.countries[record.labels.country].clone(),
        continent: taxonomy.continents[record.labels.continent].clone(),
        frame_scenes,
        soft_scene,
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(args) => emit(&cmd_train(args)?, None),
        Command::Eval(args) => emit(&cmd_eval(args)?, args.out.as_deref()),
        Command::Analyze(args) => emit(&cmd_analyze(args)?, args.out.as_deref()),
        Command::Gradcheck(args) => emit(&cmd_gradcheck(args)?, None),
        Command::Synth(args) => emit(&cmd_synth(args)?, None),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        let payload = json!({
            "error": {
                "kind": e.kind(),
                "message": e.to_string(),
            }
        });
        eprintln!("{}", serde_json::to_string(&payload).expect("serializable error"));
        std::process::exit(1);
    }
}
