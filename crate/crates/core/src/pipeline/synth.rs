//! Desk-scale synthetic datasets: one unit prototype per city in
//! feature space, Gaussian noise around it, and per-city scene
//! distributions so scene supervision carries location signal.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::data::{FeatureRecord, SceneInfo};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::taxonomy::{build_taxonomy, ClassRecord, Taxonomy};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub samples_per_city: usize,
    pub noise_sigma: f64,
    pub feature_dim: usize,
    pub scene_dim: usize,
    pub frames_per_video: usize,
    /// Probability mass a city's home scene gets on top of the uniform
    /// floor; zero makes scenes uninformative.
    pub scene_affinity: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            samples_per_city: 64,
            noise_sigma: 0.1,
            feature_dim: 384,
            scene_dim: crate::scene::DEFAULT_SCENE_DIM,
            frames_per_video: 16,
            scene_affinity: 0.6,
            seed: 0,
        }
    }
}

/// Nested toy taxonomy: cities map onto contiguous blocks of states,
/// states onto countries, countries onto continents.
pub fn make_nested_taxonomy(
    n_cities: usize,
    n_states: usize,
    n_countries: usize,
    n_continents: usize,
) -> Result<Taxonomy> {
    if n_cities == 0 || n_states == 0 || n_countries == 0 || n_continents == 0 {
        return Err(Error::Config("all hierarchy sizes must be positive".into()));
    }
    if n_cities < n_states || n_states < n_countries || n_countries < n_continents {
        return Err(Error::Config(format!(
            "hierarchy sizes must not grow coarser: {n_cities} >= {n_states} >= {n_countries} >= {n_continents} violated"
        )));
    }
    let records: Vec<ClassRecord> = (0..n_cities)
        .map(|i| {
            let s = i * n_states / n_cities;
            let k = s * n_countries / n_states;
            let t = k * n_continents / n_countries;
            ClassRecord {
                city: format!("City{i:03}"),
                state: format!("State{s:02}"),
                country: format!("Country{k:02}"),
                continent: format!("Continent{t}"),
            }
        })
        .collect();
    let taxonomy = build_taxonomy(&records)?;
    taxonomy.validate()?;
    Ok(taxonomy)
}

/// City prototypes used by a synthetic dataset, exposed so tests can
/// run nearest-prototype checks.
pub fn city_prototypes(taxonomy: &Taxonomy, config: &SynthConfig) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(config.seed, Stream::Synthetic, 0);
    (0..taxonomy.cities.len())
        .map(|_| {
            let raw: Vec<f64> = (0..config.feature_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            raw.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

/// Deterministic synthetic records for a taxonomy.
pub fn generate_synthetic(taxonomy: &Taxonomy, config: &SynthConfig) -> Result<Vec<FeatureRecord>> {
    if config.samples_per_city < 2 {
        return Err(Error::Stratification {
            class: "every city".into(),
            count: config.samples_per_city,
        });
    }
    if config.feature_dim == 0 || config.scene_dim == 0 || config.frames_per_video == 0 {
        return Err(Error::Config("synthetic dims must be positive".into()));
    }
    let prototypes = city_prototypes(taxonomy, config);
    // continue on the same stream so prototypes and samples are one
    // deterministic sequence
    let mut rng = stream_rng(config.seed, Stream::Synthetic, 1);
    let mut records = Vec::with_capacity(taxonomy.cities.len() * config.samples_per_city);
    for (city, prototype) in prototypes.iter().enumerate() {
        let labels = taxonomy.ancestors_of(city)?;
        let home_scene = rng.random_range(0..config.scene_dim);
        for s in 0..config.samples_per_city {
            let features: Vec<f64> = prototype
                .iter()
                .map(|&p| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    p + config.noise_sigma * noise
                })
                .collect();
            let frames: Vec<usize> = (0..config.frames_per_video)
                .map(|_| {
                    if rng.random::<f64>() < config.scene_affinity {
                        home_scene
                    } else {
                        rng.random_range(0..config.scene_dim)
                    }
                })
                .collect();
            records.push(FeatureRecord {
                id: format!("{}-{s:04}", taxonomy.cities[city]),
                features,
                labels,
                scene: SceneInfo::FrameIds(frames),
            });
        }
    }
    Ok(records)
}
