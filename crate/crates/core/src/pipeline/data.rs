//! Dataset records, binary feature files, manifests, and the
//! stratified split.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::scene::{majority_scene_label, soft_scene_label, SoftSceneLabel};
use crate::taxonomy::{LabelPath, Taxonomy};

const RECORDS_MAGIC: &[u8; 4] = b"CGFR";
const RECORDS_VERSION: u32 = 1;
const BANK_MAGIC: &[u8; 4] = b"CGFB";
const BANK_VERSION: u32 = 1;

/// Scene supervision as it arrives with a sample: raw per-frame class
/// ids, or an already-computed soft distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneInfo {
    FrameIds(Vec<usize>),
    Soft(SoftSceneLabel),
}

impl SceneInfo {
    /// Soft training target at the requested dimension.
    pub fn soft_target(&self, scene_dim: usize) -> Result<SoftSceneLabel> {
        match self {
            SceneInfo::FrameIds(ids) => soft_scene_label(ids, scene_dim),
            SceneInfo::Soft(label) => {
                if label.dim() != scene_dim {
                    return Err(Error::Dimension(format!(
                        "soft scene label has dimension {}, model wants {scene_dim}",
                        label.dim()
                    )));
                }
                Ok(label.clone())
            }
        }
    }

    /// Majority-vote training target (one-hot) at the requested dimension.
    pub fn majority_target(&self, scene_dim: usize) -> Result<SoftSceneLabel> {
        let class = match self {
            SceneInfo::FrameIds(ids) => majority_scene_label(ids)?,
            SceneInfo::Soft(label) => label.argmax(),
        };
        SoftSceneLabel::one_hot(class, scene_dim)
    }
}

/// One sample: a pre-extracted feature vector with its label path and
/// scene supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub features: Vec<f64>,
    pub labels: LabelPath,
    pub scene: SceneInfo,
}

/// Tracks how many bytes were consumed so format errors can report
/// where the file went wrong.
pub struct OffsetReader<'a, R: Read> {
    inner: &'a mut R,
    offset: u64,
}

impl<'a, R: Read> OffsetReader<'a, R> {
    pub fn new(inner: &'a mut R) -> Self {
        OffsetReader { inner, offset: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn format_error(&self, message: &str) -> Error {
        Error::Format {
            offset: self.offset,
            message: message.to_string(),
        }
    }

    pub fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| Error::Format {
            offset: self.offset,
            message: format!("unexpected end of data ({e})"),
        })?;
        self.offset += N as u64;
        Ok(buf)
    }

    /// Like `bytes`, but a clean end-of-stream at the boundary yields
    /// `None`; a partial read is still a format error.
    pub fn maybe_bytes<const N: usize>(&mut self) -> Result<Option<[u8; N]>> {
        let mut buf = [0u8; N];
        let mut filled = 0;
        while filled < N {
            let n = self.inner.read(&mut buf[filled..])?;
            if n == 0 {
                if filled == 0 {
                    return Ok(None);
                }
                return Err(Error::Format {
                    offset: self.offset + filled as u64,
                    message: "unexpected end of data".to_string(),
                });
            }
            filled += n;
        }
        self.offset += N as u64;
        Ok(Some(buf))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    pub fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>()?))
    }

    pub fn u64_le(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?))
    }

    pub fn f32_le(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes::<4>()?))
    }

    pub fn f64_le(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }

    pub fn bytes_vec(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| Error::Format {
            offset: self.offset,
            message: format!("unexpected end of data ({e})"),
        })?;
        self.offset += n as u64;
        Ok(buf)
    }

    pub fn string(&mut self) -> Result<String> {
        let len = self.u32_le()? as usize;
        let buf = self.bytes_vec(len)?;
        String::from_utf8(buf).map_err(|_| Error::Format {
            offset: self.offset,
            message: "invalid UTF-8 in string field".to_string(),
        })
    }

    /// True when no more bytes remain.
    pub fn at_eof(&mut self) -> Result<bool> {
        let mut buf = [0u8; 1];
        match self.inner.read(&mut buf) {
            Ok(0) => Ok(true),
            Ok(_) => {
                self.offset += 1;
                Ok(false)
            }
            Err(e) => Err(e.into()),
        }
    }
}

/// Serialize records losslessly. Empty input yields a valid file with
/// count zero.
pub fn write_features(records: &[FeatureRecord], w: &mut impl Write) -> Result<()> {
    let feature_dim = records.first().map_or(0, |r| r.features.len());
    for r in records {
        if r.features.len() != feature_dim {
            return Err(Error::Dimension(format!(
                "record '{}' has {} features, expected {feature_dim}",
                r.id,
                r.features.len()
            )));
        }
    }
    w.write_all(RECORDS_MAGIC)?;
    w.write_all(&RECORDS_VERSION.to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    w.write_all(&(feature_dim as u32).to_le_bytes())?;
    for r in records {
        let id = r.id.as_bytes();
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id)?;
        for label in r.labels.as_array() {
            w.write_all(&(label as u32).to_le_bytes())?;
        }
        for &x in &r.features {
            w.write_all(&x.to_le_bytes())?;
        }
        match &r.scene {
            SceneInfo::FrameIds(ids) => {
                w.write_all(&[0u8])?;
                w.write_all(&(ids.len() as u32).to_le_bytes())?;
                for &id in ids {
                    w.write_all(&(id as u32).to_le_bytes())?;
                }
            }
            SceneInfo::Soft(label) => {
                w.write_all(&[1u8])?;
                w.write_all(&(label.dim() as u32).to_le_bytes())?;
                for &x in label.values() {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

/// Read back a record file; truncation or corruption fails closed with
/// the byte offset of the problem.
pub fn read_features(r: &mut impl Read) -> Result<Vec<FeatureRecord>> {
    let mut reader = OffsetReader::new(r);
    let magic = reader.bytes::<4>()?;
    if &magic != RECORDS_MAGIC {
        return Err(reader.format_error("bad magic, expected CGFR"));
    }
    let version = reader.u32_le()?;
    if version != RECORDS_VERSION {
        return Err(reader.format_error(&format!("unsupported version {version}")));
    }
    let count = reader.u64_le()? as usize;
    let feature_dim = reader.u32_le()? as usize;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let id = reader.string()?;
        let labels = LabelPath {
            city: reader.u32_le()? as usize,
            state: reader.u32_le()? as usize,
            country: reader.u32_le()? as usize,
            continent: reader.u32_le()? as usize,
        };
        let mut features = Vec::with_capacity(feature_dim);
        for _ in 0..feature_dim {
            features.push(reader.f64_le()?);
        }
        let scene = match reader.u8()? {
            0 => {
                let n = reader.u32_le()? as usize;
                let mut ids = Vec::with_capacity(n);
                for _ in 0..n {
                    ids.push(reader.u32_le()? as usize);
                }
                SceneInfo::FrameIds(ids)
            }
            1 => {
                let n = reader.u32_le()? as usize;
                let mut values = Vec::with_capacity(n);
                for _ in 0..n {
                    values.push(reader.f64_le()?);
                }
                SceneInfo::Soft(
                    SoftSceneLabel::from_distribution(values)
                        .map_err(|e| reader.format_error(&format!("bad soft scene label: {e}")))?,
                )
            }
            tag => return Err(reader.format_error(&format!("unknown scene tag {tag}"))),
        };
        records.push(FeatureRecord {
            id,
            labels,
            features,
            scene,
        });
    }
    if !reader.at_eof()? {
        return Err(reader.format_error("trailing bytes after final record"));
    }
    Ok(records)
}

pub fn write_features_file(records: &[FeatureRecord], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_features(records, &mut f)
}

pub fn read_features_file(path: &Path) -> Result<Vec<FeatureRecord>> {
    let mut f = std::fs::File::open(path)?;
    read_features(&mut f)
}

/// Feature vectors alone, indexed by manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl FeatureBank {
    pub fn new(dim: usize) -> Self {
        FeatureBank {
            dim,
            vectors: Vec::new(),
        }
    }

    pub fn push(&mut self, v: Vec<f64>) -> Result<usize> {
        if v.len() != self.dim {
            return Err(Error::Dimension(format!(
                "feature vector has dimension {}, bank wants {}",
                v.len(),
                self.dim
            )));
        }
        self.vectors.push(v);
        Ok(self.vectors.len() - 1)
    }

    pub fn get(&self, index: usize) -> Result<&[f64]> {
        self.vectors
            .get(index)
            .map(|v| v.as_slice())
            .ok_or(Error::Index {
                what: "feature bank entry",
                index,
                size: self.vectors.len(),
            })
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(BANK_MAGIC)?;
        w.write_all(&BANK_VERSION.to_le_bytes())?;
        w.write_all(&(self.vectors.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for v in &self.vectors {
            for &x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut reader = OffsetReader::new(r);
        let magic = reader.bytes::<4>()?;
        if &magic != BANK_MAGIC {
            return Err(reader.format_error("bad magic, expected CGFB"));
        }
        let version = reader.u32_le()?;
        if version != BANK_VERSION {
            return Err(reader.format_error(&format!("unsupported version {version}")));
        }
        let count = reader.u64_le()? as usize;
        let dim = reader.u32_le()? as usize;
        let mut vectors = Vec::with_capacity(count);
        for _ in 0..count {
            let mut v = Vec::with_capacity(dim);
            for _ in 0..dim {
                v.push(reader.f64_le()?);
            }
            vectors.push(v);
        }
        Ok(FeatureBank { dim, vectors })
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

/// One manifest line: labels by name plus a pointer into a feature
/// bank, with scene supervision in exactly one form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub feature_file: String,
    pub feature_index: usize,
    pub city: String,
    pub state: String,
    pub country: String,
    pub continent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_scenes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soft_scene: Option<Vec<f64>>,
}

impl ManifestEntry {
    pub fn scene_info(&self) -> Result<SceneInfo> {
        match (&self.frame_scenes, &self.soft_scene) {
            (Some(ids), None) => Ok(SceneInfo::FrameIds(ids.clone())),
            (None, Some(values)) => Ok(SceneInfo::Soft(SoftSceneLabel::from_distribution(
                values.clone(),
            )?)),
            (Some(_), Some(_)) => Err(Error::Inconsistency(format!(
                "manifest entry '{}' has both frame_scenes and soft_scene",
                self.id
            ))),
            (None, None) => Err(Error::Inconsistency(format!(
                "manifest entry '{}' has neither frame_scenes nor soft_scene",
                self.id
            ))),
        }
    }
}

/// Parse a JSON-lines manifest without touching feature banks.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut entries = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| {
            Error::Inconsistency(format!("manifest line {}: {e}", lineno + 1))
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for entry in entries {
        serde_json::to_writer(&mut f, entry)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// Resolve a manifest into full records: label names are matched
/// against the taxonomy and feature vectors pulled from banks (paths
/// relative to the manifest location, each bank loaded once).
pub fn load_manifest(path: &Path, taxonomy: &Taxonomy) -> Result<Vec<FeatureRecord>> {
    let entries = read_manifest(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut banks: HashMap<PathBuf, FeatureBank> = HashMap::new();
    let mut records = Vec::with_capacity(entries.len());
    for entry in entries {
        let labels =
            taxonomy.path_for_names(&entry.city, &entry.state, &entry.country, &entry.continent)?;
        let bank_path = base.join(&entry.feature_file);
        if !banks.contains_key(&bank_path) {
            banks.insert(bank_path.clone(), FeatureBank::load(&bank_path)?);
        }
        let bank = &banks[&bank_path];
        let features = bank.get(entry.feature_index)?.to_vec();
        let scene = entry.scene_info()?;
        records.push(FeatureRecord {
            id: entry.id,
            features,
            labels,
            scene,
        });
    }
    Ok(records)
}

/// Per-city train/val sizes under largest-remainder rounding, with at
/// least one sample on each side.
fn split_sizes(n: usize, ratio: f64) -> (usize, usize) {
    let train_quota = ratio * n as f64;
    let val_quota = (1.0 - ratio) * n as f64;
    let mut train = train_quota.floor() as usize;
    let mut val = val_quota.floor() as usize;
    if train + val < n {
        // one leftover sample goes to the larger fractional remainder;
        // ties favor the training side
        if train_quota.fract() >= val_quota.fract() {
            train += 1;
        } else {
            val += 1;
        }
    }
    if train == 0 {
        train = 1;
        val = n - 1;
    } else if val == 0 {
        val = 1;
        train = n - 1;
    }
    (train, val)
}

/// Stratified split by city: every city is represented on both sides,
/// per-city proportions follow `ratio` as closely as rounding allows,
/// and sample assignment is deterministic under `seed`.
pub fn stratified_split(
    records: Vec<FeatureRecord>,
    ratio: f64,
    seed: u64,
) -> Result<(Vec<FeatureRecord>, Vec<FeatureRecord>)> {
    if !(0.0 < ratio && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let mut by_city: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        by_city.entry(r.labels.city).or_default().push(i);
    }
    let mut cities: Vec<usize> = by_city.keys().copied().collect();
    cities.sort_unstable();

    let mut assign_train = vec![false; records.len()];
    let mut rng = stream_rng(seed, Stream::Split, 0);
    for city in cities {
        let mut indices = by_city.remove(&city).expect("city present");
        if indices.len() < 2 {
            return Err(Error::Stratification {
                class: format!("city {city}"),
                count: indices.len(),
            });
        }
        indices.shuffle(&mut rng);
        let (n_train, _) = split_sizes(indices.len(), ratio);
        for &i in &indices[..n_train] {
            assign_train[i] = true;
        }
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, r) in records.into_iter().enumerate() {
        if assign_train[i] {
            train.push(r);
        } else {
            val.push(r);
        }
    }
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{build_taxonomy, ClassRecord};
    use proptest::prelude::*;
    use rand::Rng;

    fn record(id: &str, city: usize, features: Vec<f64>) -> FeatureRecord {
        FeatureRecord {
            id: id.to_string(),
            features,
            labels: LabelPath {
                city,
                state: 0,
                country: 0,
                continent: 0,
            },
            scene: SceneInfo::FrameIds(vec![0, 1, 0]),
        }
    }

    #[test]
    fn empty_record_list_round_trips() {
        let mut buf = Vec::new();
        write_features(&[], &mut buf).unwrap();
        let back = read_features(&mut buf.as_slice()).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn records_round_trip_bit_exact() {
        let mut rng = stream_rng(3, Stream::Synthetic, 0);
        let records: Vec<FeatureRecord> = (0..3)
            .map(|i| {
                let features: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 3.0 - 1.5).collect();
                let scene = if i == 2 {
                    SceneInfo::Soft(SoftSceneLabel::from_distribution(vec![0.25, 0.75]).unwrap())
                } else {
                    SceneInfo::FrameIds(vec![i, i + 1, i])
                };
                FeatureRecord {
                    id: format!("sample-{i}"),
                    features,
                    labels: LabelPath {
                        city: i,
                        state: i / 2,
                        country: 0,
                        continent: 0,
                    },
                    scene,
                }
            })
            .collect();
        let mut buf = Vec::new();
        write_features(&records, &mut buf).unwrap();
        let back = read_features(&mut buf.as_slice()).unwrap();
        assert_eq!(records, back);
        // byte-level determinism too
        let mut buf2 = Vec::new();
        write_features(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn truncated_file_is_format_error_with_offset() {
        let records = vec![record("a", 0, vec![1.0, 2.0]), record("b", 0, vec![3.0, 4.0])];
        let mut buf = Vec::new();
        write_features(&records, &mut buf).unwrap();
        let cut = buf.len() - 7;
        let err = read_features(&mut &buf[..cut]).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert!(offset > 0 && offset <= cut as u64),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_format_error() {
        let buf = b"XXXX\x01\x00\x00\x00".to_vec();
        assert!(matches!(
            read_features(&mut buf.as_slice()),
            Err(Error::Format { offset: 4, .. })
        ));
    }

    #[test]
    fn bank_round_trips() {
        let mut bank = FeatureBank::new(3);
        bank.push(vec![1.0, -2.0, 0.5]).unwrap();
        bank.push(vec![0.0, 9.25, -1.0]).unwrap();
        let mut buf = Vec::new();
        bank.write_to(&mut buf).unwrap();
        let back = FeatureBank::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(bank, back);
        assert!(back.get(2).is_err());
    }

    #[test]
    fn split_sizes_examples() {
        assert_eq!(split_sizes(10, 0.8), (8, 2));
        assert_eq!(split_sizes(2, 0.8), (1, 1));
        assert_eq!(split_sizes(2, 0.99), (1, 1));
        assert_eq!(split_sizes(7, 0.8), (6, 1)); // 5.6 vs 1.4: leftover to train
        assert_eq!(split_sizes(8, 0.8), (6, 2)); // 6.4 vs 1.6: leftover to val
    }

    #[test]
    fn split_is_deterministic_and_respects_ratio() {
        let records: Vec<FeatureRecord> = (0..10).map(|i| record(&format!("r{i}"), 0, vec![i as f64])).collect();
        let (train1, val1) = stratified_split(records.clone(), 0.8, 7).unwrap();
        let (train2, val2) = stratified_split(records, 0.8, 7).unwrap();
        assert_eq!(train1, train2);
        assert_eq!(val1, val2);
        assert_eq!(train1.len(), 8);
        assert_eq!(val1.len(), 2);
    }

    #[test]
    fn singleton_city_is_stratification_error() {
        let records = vec![record("a", 0, vec![0.0]), record("b", 0, vec![1.0]), record("c", 1, vec![2.0])];
        let err = stratified_split(records, 0.8, 1).unwrap_err();
        assert!(matches!(err, Error::Stratification { .. }));
    }

    #[test]
    fn manifest_round_trip_resolves_labels_and_features() {
        let dir = tempfile::tempdir().unwrap();
        let tax = build_taxonomy(&[
            ClassRecord {
                city: "a".into(),
                state: "s".into(),
                country: "k".into(),
                continent: "t".into(),
            },
            ClassRecord {
                city: "b".into(),
                state: "s".into(),
                country: "k".into(),
                continent: "t".into(),
            },
        ])
        .unwrap();
        let mut bank = FeatureBank::new(2);
        bank.push(vec![1.0, 2.0]).unwrap();
        bank.push(vec![3.0, 4.0]).unwrap();
        bank.save(&dir.path().join("features.bin")).unwrap();
        let entries = vec![
            ManifestEntry {
                id: "v0".into(),
                feature_file: "features.bin".into(),
                feature_index: 1,
                city: "b".into(),
                state: "s".into(),
                country: "k".into(),
                continent: "t".into(),
                frame_scenes: Some(vec![0, 0, 2]),
                soft_scene: None,
            },
            ManifestEntry {
                id: "v1".into(),
                feature_file: "features.bin".into(),
                feature_index: 0,
                city: "a".into(),
                state: "s".into(),
                country: "k".into(),
                continent: "t".into(),
                frame_scenes: None,
                soft_scene: Some(vec![0.5, 0.5]),
            },
        ];
        let manifest_path = dir.path().join("manifest.jsonl");
        write_manifest(&entries, &manifest_path).unwrap();
        let records = load_manifest(&manifest_path, &tax).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].features, vec![3.0, 4.0]);
        assert_eq!(records[0].labels.city, 1);
        assert_eq!(records[1].scene, SceneInfo::Soft(SoftSceneLabel::from_distribution(vec![0.5, 0.5]).unwrap()));
    }

    #[test]
    fn manifest_scene_fields_are_exclusive() {
        let entry = ManifestEntry {
            id: "x".into(),
            feature_file: "f".into(),
            feature_index: 0,
            city: "a".into(),
            state: "s".into(),
            country: "k".into(),
            continent: "t".into(),
            frame_scenes: Some(vec![1]),
            soft_scene: Some(vec![1.0]),
        };
        assert!(entry.scene_info().is_err());
    }

    proptest! {
        #[test]
        fn split_preserves_the_multiset(
            sizes in proptest::collection::vec(2..9usize, 1..6),
            seed in 0..1000u64,
        ) {
            let mut records = Vec::new();
            for (city, &n) in sizes.iter().enumerate() {
                for i in 0..n {
                    records.push(record(&format!("c{city}-{i}"), city, vec![city as f64, i as f64]));
                }
            }
            let total = records.len();
            let (train, val) = stratified_split(records.clone(), 0.8, seed).unwrap();
            prop_assert_eq!(train.len() + val.len(), total);
            let mut combined: Vec<String> = train.iter().chain(val.iter()).map(|r| r.id.clone()).collect();
            combined.sort();
            let mut original: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
            original.sort();
            prop_assert_eq!(combined, original);
            // every city on both sides
            for city in 0..sizes.len() {
                prop_assert!(train.iter().any(|r| r.labels.city == city));
                prop_assert!(val.iter().any(|r| r.labels.city == city));
            }
        }
    }
}
