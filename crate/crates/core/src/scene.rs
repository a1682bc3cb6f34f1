//! Per-video scene supervision from per-frame scene class ids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of scene categories.
pub const DEFAULT_SCENE_DIM: usize = 16;

/// Frame-fraction distribution over scene categories: entry j is the
/// fraction of frames assigned class j. Nonnegative, sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftSceneLabel(Vec<f64>);

impl SoftSceneLabel {
    /// Wrap an existing distribution, checking the simplex invariant.
    pub fn from_distribution(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("soft scene label"));
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::DegenerateInput("soft scene label has negative or non-finite entries".into()));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::DegenerateInput(format!(
                "soft scene label sums to {sum}, expected 1"
            )));
        }
        Ok(SoftSceneLabel(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Most-represented class; ties go to the lowest id.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// One-hot distribution at `class`.
    pub fn one_hot(class: usize, dim: usize) -> Result<Self> {
        if class >= dim {
            return Err(Error::Index {
                what: "scene class",
                index: class,
                size: dim,
            });
        }
        let mut v = vec![0.0; dim];
        v[class] = 1.0;
        Ok(SoftSceneLabel(v))
    }
}

/// Fraction of frames per scene class.
pub fn soft_scene_label(frame_scene_ids: &[usize], scene_dim: usize) -> Result<SoftSceneLabel> {
    if frame_scene_ids.is_empty() {
        return Err(Error::EmptyInput("video has no frames"));
    }
    let mut counts = vec![0usize; scene_dim];
    for &id in frame_scene_ids {
        if id >= scene_dim {
            return Err(Error::Index {
                what: "scene class",
                index: id,
                size: scene_dim,
            });
        }
        counts[id] += 1;
    }
    let n = frame_scene_ids.len() as f64;
    Ok(SoftSceneLabel(counts.into_iter().map(|c| c as f64 / n).collect()))
}

/// The most frequent scene id; ties go to the lowest id.
pub fn majority_scene_label(frame_scene_ids: &[usize]) -> Result<usize> {
    if frame_scene_ids.is_empty() {
        return Err(Error::EmptyInput("video has no frames"));
    }
    let max_id = *frame_scene_ids.iter().max().expect("non-empty");
    let mut counts = vec![0usize; max_id + 1];
    for &id in frame_scene_ids {
        counts[id] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fractions_count_frames() {
        let ids = [0, 0, 0, 0, 0, 0, 0, 1, 1, 1];
        let label = soft_scene_label(&ids, 16).unwrap();
        assert_eq!(label.values()[0], 0.7);
        assert_eq!(label.values()[1], 0.3);
        assert!(label.values()[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_frames_are_one_hot() {
        let label = soft_scene_label(&[5; 12], 16).unwrap();
        assert_eq!(label.values()[5], 1.0);
        assert_eq!(label.argmax(), 5);
    }

    #[test]
    fn empty_video_is_error() {
        assert!(soft_scene_label(&[], 16).is_err());
        assert!(majority_scene_label(&[]).is_err());
    }

    #[test]
    fn out_of_range_id_is_error() {
        assert!(soft_scene_label(&[3, 16], 16).is_err());
    }

    #[test]
    fn majority_basic_and_tie_rule() {
        assert_eq!(majority_scene_label(&[0, 0, 1]).unwrap(), 0);
        // tie between 1 and 2 goes to the lowest id
        assert_eq!(majority_scene_label(&[2, 1, 1, 2]).unwrap(), 1);
    }

    #[test]
    fn matches_histogram_oracle_on_random_ids() {
        let mut rng = crate::rng::stream_rng(1, crate::rng::Stream::Synthetic, 7);
        use rand::Rng;
        let ids: Vec<usize> = (0..100).map(|_| rng.random_range(0..16usize)).collect();
        let label = soft_scene_label(&ids, 16).unwrap();
        // independent histogram-then-normalize
        let mut hist = [0usize; 16];
        for &id in &ids {
            hist[id] += 1;
        }
        for j in 0..16 {
            assert_eq!(label.values()[j], hist[j] as f64 / 100.0);
        }
        // count-and-argmin oracle for the majority label
        let maj = majority_scene_label(&ids).unwrap();
        let best_count = *hist.iter().max().unwrap();
        let expected = hist.iter().position(|&c| c == best_count).unwrap();
        assert_eq!(maj, expected);
    }

    proptest! {
        #[test]
        fn output_is_on_the_simplex(ids in proptest::collection::vec(0..16usize, 1..200)) {
            let label = soft_scene_label(&ids, 16).unwrap();
            let sum: f64 = label.values().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(label.values().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn argmax_agrees_with_majority_when_unique(ids in proptest::collection::vec(0..6usize, 1..60)) {
            let label = soft_scene_label(&ids, 6).unwrap();
            let mut hist = [0usize; 6];
            for &id in &ids {
                hist[id] += 1;
            }
            let top = *hist.iter().max().unwrap();
            if hist.iter().filter(|&&c| c == top).count() == 1 {
                prop_assert_eq!(label.argmax(), majority_scene_label(&ids).unwrap());
            }
        }
    }
}
