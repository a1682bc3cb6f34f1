//! Text-label feature targets for alignment training.
//!
//! Targets come from an embedding table keyed by label text, or from a
//! deterministic stub embedder that stands in for a pretrained text
//! encoder. Two combination strategies: the city embedding alone, or
//! the renormalized mean over all four hierarchy labels.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::hash_bytes;
use crate::taxonomy::{LabelPath, Taxonomy};

/// Default text-feature dimension.
pub const DEFAULT_TEXT_DIM: usize = 512;

const TABLE_MAGIC: &[u8; 4] = b"CGET";
const TABLE_VERSION: u32 = 1;

/// Which hierarchy labels feed the alignment target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentStrategy {
    CityOnly,
    #[default]
    AllHierarchies,
}

/// Label text to unit-norm embedding, fixed dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, text: &str) -> Option<&[f64]> {
        self.entries.get(text).map(|v| v.as_slice())
    }

    /// Insert after renormalizing to unit L2 norm.
    pub fn insert(&mut self, text: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension(format!(
                "embedding for '{text}' has dimension {}, table wants {}",
                vector.len(),
                self.dim
            )));
        }
        self.entries.insert(text.to_string(), normalize(vector)?);
        Ok(())
    }

    /// Binary table format: magic, version u32 LE, entry count u64 LE,
    /// dimension u32 LE, then per entry a length-prefixed UTF-8 text and
    /// the vector as 32-bit LE floats.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(TABLE_MAGIC)?;
        w.write_all(&TABLE_VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        let mut texts: Vec<&String> = self.entries.keys().collect();
        texts.sort();
        for text in texts {
            let bytes = text.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes())?;
            w.write_all(bytes)?;
            for &x in &self.entries[text] {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut reader = crate::pipeline::data::OffsetReader::new(r);
        let magic = reader.bytes::<4>()?;
        if &magic != TABLE_MAGIC {
            return Err(reader.format_error("bad magic, expected CGET"));
        }
        let version = reader.u32_le()?;
        if version != TABLE_VERSION {
            return Err(reader.format_error(&format!("unsupported version {version}")));
        }
        let count = reader.u64_le()? as usize;
        let dim = reader.u32_le()? as usize;
        if dim == 0 {
            return Err(reader.format_error("embedding dimension must be positive"));
        }
        let mut table = EmbeddingTable::new(dim);
        for _ in 0..count {
            let text = reader.string()?;
            let mut vector = Vec::with_capacity(dim);
            for _ in 0..dim {
                vector.push(reader.f32_le()? as f64);
            }
            table.insert(&text, &vector)?;
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        Self::read_from(&mut f)
    }
}

fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateInput("cannot normalize a zero or non-finite vector".into()));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Deterministic stand-in for a pretrained text encoder: key a
/// generator from the UTF-8 bytes, draw standard normals, normalize.
pub fn stub_embed(text: &str, dim: usize) -> Result<Vec<f64>> {
    if text.is_empty() {
        return Err(Error::EmptyInput("text to embed"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hash_bytes(text.as_bytes()));
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&v)
}

/// Embedding source: optional table with optional stub fallback.
#[derive(Debug, Clone)]
pub struct TextEmbedder {
    dim: usize,
    table: Option<EmbeddingTable>,
    stub_fallback: bool,
}

impl TextEmbedder {
    /// Pure stub embedder.
    pub fn stub(dim: usize) -> Self {
        TextEmbedder {
            dim,
            table: None,
            stub_fallback: true,
        }
    }

    pub fn with_table(table: EmbeddingTable, stub_fallback: bool) -> Self {
        TextEmbedder {
            dim: table.dim(),
            table: Some(table),
            stub_fallback,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f64>> {
        if let Some(table) = &self.table {
            if let Some(v) = table.get(text) {
                return Ok(v.to_vec());
            }
            if !self.stub_fallback {
                return Err(Error::Lookup(text.to_string()));
            }
        }
        stub_embed(text, self.dim)
    }
}

/// Alignment target for a label path: the city embedding, or the
/// renormalized mean of all four hierarchy embeddings.
pub fn compute_text_features(
    path: &LabelPath,
    embedder: &TextEmbedder,
    strategy: AlignmentStrategy,
    taxonomy: &Taxonomy,
) -> Result<Vec<f64>> {
    let city = &taxonomy.cities[path.city];
    match strategy {
        AlignmentStrategy::CityOnly => embedder.embed(city),
        AlignmentStrategy::AllHierarchies => {
            let texts = [
                city.as_str(),
                taxonomy.states[path.state].as_str(),
                taxonomy.countries[path.country].as_str(),
                taxonomy.continents[path.continent].as_str(),
            ];
            let mut mean = vec![0.0; embedder.dim()];
            for text in texts {
                let e = embedder.embed(text)?;
                for (m, x) in mean.iter_mut().zip(&e) {
                    *m += x / 4.0;
                }
            }
            normalize(&mean)
        }
    }
}
