//! Hierarchical evaluation: probability refinement, independent and
//! codependent prediction, top-k accuracy, and distribution-inequality
//! analytics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ForwardOutput;
use crate::numerics::softmax;
use crate::taxonomy::{Hierarchy, LabelPath, Taxonomy};

/// Log-probability floor; keeps refinement finite when a probability
/// underflows to zero.
const LOG_FLOOR: f64 = -745.0;

/// Per-hierarchy probability vectors, each on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct HierProbs {
    pub probs: [Vec<f64>; 4],
}

impl HierProbs {
    pub fn new(probs: [Vec<f64>; 4]) -> Result<Self> {
        for (h, p) in probs.iter().enumerate() {
            if p.is_empty() {
                return Err(Error::EmptyInput("hierarchy probabilities"));
            }
            let sum: f64 = p.iter().sum();
            if p.iter().any(|&x| !(0.0..=1.0 + 1e-9).contains(&x)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::DegenerateInput(format!(
                    "hierarchy {h} probabilities are not on the simplex (sum {sum})"
                )));
            }
        }
        Ok(HierProbs { probs })
    }

    /// Softmax over each hierarchy's logits.
    pub fn from_output(output: &ForwardOutput) -> Result<Self> {
        Ok(HierProbs {
            probs: [
                softmax(&output.hierarchy_logits[0])?,
                softmax(&output.hierarchy_logits[1])?,
                softmax(&output.hierarchy_logits[2])?,
                softmax(&output.hierarchy_logits[3])?,
            ],
        })
    }

    pub fn dims(&self) -> [usize; 4] {
        [
            self.probs[0].len(),
            self.probs[1].len(),
            self.probs[2].len(),
            self.probs[3].len(),
        ]
    }
}

/// Refined per-hierarchy scores: products of a class's probability with
/// all its strict ancestors' probabilities. Unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedScores {
    pub scores: [Vec<f64>; 4],
}

/// Multiply each class's probability by its ancestors', in log space:
/// city scores absorb state, country, and continent probabilities;
/// continent scores are unchanged.
pub fn refine_probabilities(probs: &HierProbs, taxonomy: &Taxonomy) -> Result<RefinedScores> {
    if probs.dims() != taxonomy.dims() {
        return Err(Error::Dimension(format!(
            "probability dims {:?} vs taxonomy dims {:?}",
            probs.dims(),
            taxonomy.dims()
        )));
    }
    let log = |p: f64| p.ln().max(LOG_FLOOR);
    let [city_p, state_p, country_p, continent_p] = &probs.probs;

    let continent_log: Vec<f64> = continent_p.iter().map(|&p| log(p)).collect();
    let country_log: Vec<f64> = country_p
        .iter()
        .enumerate()
        .map(|(k, &p)| log(p) + continent_log[taxonomy.country_to_continent[k]])
        .collect();
    let state_log: Vec<f64> = state_p
        .iter()
        .enumerate()
        .map(|(s, &p)| log(p) + country_log[taxonomy.state_to_country[s]])
        .collect();
    let city_log: Vec<f64> = city_p
        .iter()
        .enumerate()
        .map(|(c, &p)| log(p) + state_log[taxonomy.city_to_state[c]])
        .collect();

    Ok(RefinedScores {
        scores: [
            city_log.iter().map(|&l| l.exp()).collect(),
            state_log.iter().map(|&l| l.exp()).collect(),
            country_log.iter().map(|&l| l.exp()).collect(),
            continent_p.clone(),
        ],
    })
}

/// How coarse probabilities participate in prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Per-hierarchy argmax of the raw probabilities.
    None,
    /// Per-hierarchy argmax of refined scores; the path may be
    /// taxonomy-inconsistent.
    Independent,
    /// Argmax of the refined city scores, then ancestors traced
    /// upwards; the path is always taxonomy-valid.
    #[default]
    Codependent,
}

impl EvalMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(EvalMode::None),
            "independent" => Ok(EvalMode::Independent),
            "codependent" => Ok(EvalMode::Codependent),
            other => Err(Error::Config(format!(
                "unknown eval mode '{other}' (expected none, independent, or codependent)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EvalMode::None => "none",
            EvalMode::Independent => "independent",
            EvalMode::Codependent => "codependent",
        }
    }
}

/// Prediction for one sample: the predicted path, the full per-hierarchy
/// class rankings under the mode's scores, and the refined city scores.
#[derive(Debug, Clone, Serialize)]
pub struct PredictionReport {
    pub mode: EvalMode,
    pub path: LabelPath,
    /// Class ids per hierarchy, best first; ties broken by lowest id.
    pub rankings: [Vec<usize>; 4],
    pub refined_city_scores: Vec<f64>,
}

fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..scores.len()).collect();
    ids.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ids
}

/// Predict under the requested mode. Ties always break toward the
/// lowest class id.
pub fn predict(probs: &HierProbs, taxonomy: &Taxonomy, mode: EvalMode) -> Result<PredictionReport> {
    let refined = refine_probabilities(probs, taxonomy)?;
    let score_source = match mode {
        EvalMode::None => &probs.probs,
        EvalMode::Independent | EvalMode::Codependent => &refined.scores,
    };
    let rankings: [Vec<usize>; 4] = [
        rank_descending(&score_source[0]),
        rank_descending(&score_source[1]),
        rank_descending(&score_source[2]),
        rank_descending(&score_source[3]),
    ];
    let path = match mode {
        EvalMode::None | EvalMode::Independent => LabelPath {
            city: rankings[0][0],
            state: rankings[1][0],
            country: rankings[2][0],
            continent: rankings[3][0],
        },
        EvalMode::Codependent => taxonomy.ancestors_of(rankings[0][0])?,
    };
    Ok(PredictionReport {
        mode,
        path,
        rankings,
        refined_city_scores: refined.scores[0].clone(),
    })
}

/// Fraction of samples whose true class is among the k best for the
/// hierarchy. Top-1 follows the predicted path (which codependent mode
/// derives from the city); larger k ranks by the mode's scores. k is
/// clipped to the class count.
pub fn topk_accuracy(
    reports: &[PredictionReport],
    ground_truths: &[LabelPath],
    k: usize,
    hierarchy: Hierarchy,
) -> Result<f64> {
    if reports.len() != ground_truths.len() {
        return Err(Error::Dimension(format!(
            "{} reports vs {} ground truths",
            reports.len(),
            ground_truths.len()
        )));
    }
    if reports.is_empty() {
        return Err(Error::EmptyInput("topk_accuracy samples"));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let h = hierarchy.index();
    let mut hits = 0usize;
    for (report, truth) in reports.iter().zip(ground_truths) {
        let truth_id = truth.get(hierarchy);
        let hit = if k == 1 {
            report.path.get(hierarchy) == truth_id
        } else {
            let k = k.min(report.rankings[h].len());
            report.rankings[h][..k].contains(&truth_id)
        };
        if hit {
            hits += 1;
        }
    }
    Ok(hits as f64 / reports.len() as f64)
}

/// Per-class sample counts for inequality analytics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    counts: Vec<f64>,
}

impl ClassCounts {
    pub fn new(counts: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyInput("class counts"));
        }
        if counts.iter().any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(Error::DegenerateInput("class counts must be finite and nonnegative".into()));
        }
        Ok(ClassCounts { counts })
    }

    pub fn from_integers(counts: &[usize]) -> Result<Self> {
        Self::new(counts.iter().map(|&c| c as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.counts.len() as f64
    }

    fn require_positive_total(&self) -> Result<f64> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::DegenerateInput("all class counts are zero".into()));
        }
        Ok(total)
    }

    fn sorted_ascending(&self) -> Vec<f64> {
        let mut v = self.counts.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Count samples per class at one hierarchy.
pub fn count_classes(paths: &[LabelPath], taxonomy: &Taxonomy, hierarchy: Hierarchy) -> Result<ClassCounts> {
    let mut counts = vec![0usize; taxonomy.dim(hierarchy)];
    for p in paths {
        let id = p.get(hierarchy);
        if id >= counts.len() {
            return Err(Error::Index {
                what: "class id",
                index: id,
                size: counts.len(),
            });
        }
        counts[id] += 1;
    }
    ClassCounts::from_integers(&counts)
}

/// Cumulative-share curve: classes sorted ascending by count, point i
/// at (i/n, cumulative/total), starting at (0,0) and ending at (1,1).
pub fn lorenz_curve(counts: &ClassCounts) -> Result<Vec<(f64, f64)>> {
    counts.require_positive_total()?;
    let sorted = counts.sorted_ascending();
    let n = sorted.len();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &c in &sorted {
        acc += c;
        cumulative.push(acc);
    }
    let total = *cumulative.last().expect("non-empty");
    let mut points = Vec::with_capacity(n + 1);
    points.push((0.0, 0.0));
    for (i, &c) in cumulative.iter().enumerate() {
        points.push(((i + 1) as f64 / n as f64, c / total));
    }
    Ok(points)
}

/// Gini coefficient over ascending-sorted counts:
/// G = 2 Σ i·y_i / (n Σ y_i) − (n+1)/n, with i = 1..n.
pub fn gini(counts: &ClassCounts) -> Result<f64> {
    let total = counts.require_positive_total()?;
    let sorted = counts.sorted_ascending();
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &y)| (i + 1) as f64 * y)
        .sum();
    Ok(2.0 * weighted / (n * total) - (n + 1.0) / n)
}

/// Hoover index: H = ½ Σ |y_i − ȳ| / Σ y_i.
pub fn hoover(counts: &ClassCounts) -> Result<f64> {
    let total = counts.require_positive_total()?;
    let mean = counts.mean();
    let deviation: f64 = counts.values().iter().map(|&y| (y - mean).abs()).sum();
    Ok(0.5 * deviation / total)
}
