//! Replay-set scoring and selection.
//!
//! Samples of a finished task are scored by the model just trained on it:
//! prediction entropy (low confidence = hard) and Euclidean distance of the
//! encoder feature to its class centroid (small = central). Selection works
//! per class so every strategy returns `K/2` real and `K/2` fake samples.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::Dataset;
use crate::model::{Model, ModelError};
use crate::numkernel::{softmax_rows, KernelError, Tensor};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("class {class} has no samples")]
    EmptyClass { class: u8 },
    #[error("class {class}: need {needed} samples, only {available} available")]
    Insufficient {
        class: u8,
        needed: usize,
        available: usize,
    },
    #[error("task {task} contributed {got} samples, expected {expected}")]
    Contribution {
        task: usize,
        got: usize,
        expected: usize,
    },
    #[error("task {task} contributes sample {index} twice")]
    Duplicate { task: usize, index: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Natural-log entropy with `0·log 0 = 0`.
pub fn entropy<T: Scalar>(p: &[T]) -> Result<T, ReplayError> {
    if p.is_empty() {
        return Err(ReplayError::Parameter(
            "entropy of an empty distribution".into(),
        ));
    }
    if let Some(neg) = p.iter().find(|&&v| v < T::zero() || !v.is_finite()) {
        return Err(ReplayError::Parameter(format!("invalid probability {neg}")));
    }
    let total: T = p.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) {
        return Err(ReplayError::Parameter(format!(
            "probabilities sum to {total}"
        )));
    }
    Ok(p.iter()
        .filter(|&&v| v > T::zero())
        .map(|&v| -v * v.ln())
        .sum())
}

/// Per-class mean feature vectors, `[real, fake]`.
pub fn class_centroids<T: Scalar>(
    features: &Tensor<T>,
    labels: &[u8],
) -> Result<[Tensor<T>; 2], ReplayError> {
    if features.rows() != labels.len() {
        return Err(ReplayError::Parameter(format!(
            "{} feature rows for {} labels",
            features.rows(),
            labels.len()
        )));
    }
    let dim = features.cols();
    let mut sums = [vec![T::zero(); dim], vec![T::zero(); dim]];
    let mut counts = [0usize; 2];
    for (i, &y) in labels.iter().enumerate() {
        if y > 1 {
            return Err(ReplayError::Parameter(format!("label {y} not in {{0, 1}}")));
        }
        counts[y as usize] += 1;
        for (s, &v) in sums[y as usize].iter_mut().zip(features.row(i)) {
            *s = *s + v;
        }
    }
    let mean = |class: u8| -> Result<Tensor<T>, ReplayError> {
        let n = counts[class as usize];
        if n == 0 {
            return Err(ReplayError::EmptyClass { class });
        }
        let n = T::count(n);
        Ok(Tensor::vector(
            sums[class as usize].iter().map(|&s| s / n).collect(),
        )?)
    };
    Ok([mean(0)?, mean(1)?])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `K/4` hardest plus `K/4` most central samples per class.
    Ours,
    AllHard,
    AllEasy,
    AllMargin,
    AllCenter,
    /// Class-balanced uniform sampling.
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Ours,
        Strategy::AllHard,
        Strategy::AllEasy,
        Strategy::AllMargin,
        Strategy::AllCenter,
        Strategy::Random,
    ];
}

/// Why a sample was picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Hard,
    Easy,
    Center,
    Margin,
    Random,
    /// Filled in after the hard and central picks overlapped.
    Backfill,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Hard => "hard",
            Criterion::Easy => "easy",
            Criterion::Center => "center",
            Criterion::Margin => "margin",
            Criterion::Random => "random",
            Criterion::Backfill => "backfill",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredSample<T> {
    /// Row in the scored dataset.
    pub index: usize,
    pub label: u8,
    pub entropy: T,
    pub centroid_distance: T,
}

/// Scores every sample with `model`: entropy of its prediction and distance
/// of its feature vector to the centroid of its own class.
pub fn score_samples<T: Scalar>(
    model: &Model<T>,
    data: &Dataset<T>,
) -> Result<Vec<ScoredSample<T>>, ReplayError> {
    let out = model.forward_batch(data.inputs())?;
    let probs = softmax_rows(&out.logits, T::one())?;
    let centroids = class_centroids(&out.features, data.labels())?;
    data.labels()
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let c = centroids[y as usize].data();
            let dist = out
                .features
                .row(i)
                .iter()
                .zip(c)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt();
            Ok(ScoredSample {
                index: i,
                label: y,
                entropy: entropy(probs.row(i))?,
                centroid_distance: dist,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selected<T> {
    pub index: usize,
    pub label: u8,
    pub entropy: T,
    pub centroid_distance: T,
    pub criterion: Criterion,
}

/// Per-sample random keys for [`Strategy::Random`]: one `u64` per row, drawn
/// in dataset order from a ChaCha8 stream seeded with `seed`. The smallest
/// `K/2` keys of each class win, which is uniform sampling without
/// replacement.
pub fn random_keys(n: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Selects `k` replay samples from already scored samples.
///
/// `k` must be a positive multiple of 4 and each class needs at least `k/2`
/// samples. Equal scores are broken by lower index. `seed` only matters for
/// [`Strategy::Random`].
pub fn select_from_scores<T: Scalar>(
    scores: &[ScoredSample<T>],
    k: usize,
    strategy: Strategy,
    seed: u64,
) -> Result<Vec<Selected<T>>, ReplayError> {
    if k == 0 || !k.is_multiple_of(4) {
        return Err(ReplayError::Parameter(format!(
            "replay size must be a positive multiple of 4, got {k}"
        )));
    }
    let half = k / 2;
    let quarter = k / 4;
    for class in 0..2u8 {
        let available = scores.iter().filter(|s| s.label == class).count();
        if available < half {
            return Err(ReplayError::Insufficient {
                class,
                needed: half,
                available,
            });
        }
    }
    let keys = match strategy {
        Strategy::Random => random_keys(scores.len(), seed),
        _ => Vec::new(),
    };

    let by_entropy_desc = |a: &ScoredSample<T>, b: &ScoredSample<T>| {
        cmp_scalar(b.entropy, a.entropy).then(a.index.cmp(&b.index))
    };
    let by_entropy_asc = |a: &ScoredSample<T>, b: &ScoredSample<T>| {
        cmp_scalar(a.entropy, b.entropy).then(a.index.cmp(&b.index))
    };
    let by_distance_asc = |a: &ScoredSample<T>, b: &ScoredSample<T>| {
        cmp_scalar(a.centroid_distance, b.centroid_distance).then(a.index.cmp(&b.index))
    };
    let by_distance_desc = |a: &ScoredSample<T>, b: &ScoredSample<T>| {
        cmp_scalar(b.centroid_distance, a.centroid_distance).then(a.index.cmp(&b.index))
    };

    let mut picked = Vec::with_capacity(k);
    for class in 0..2u8 {
        let members: Vec<ScoredSample<T>> = scores
            .iter()
            .filter(|s| s.label == class)
            .copied()
            .collect();
        let mark = |s: &ScoredSample<T>, criterion| Selected {
            index: s.index,
            label: s.label,
            entropy: s.entropy,
            centroid_distance: s.centroid_distance,
            criterion,
        };
        match strategy {
            Strategy::Ours => {
                let hard = top_k(&members, (3 * quarter).min(members.len()), by_entropy_desc);
                let center = top_k(&members, quarter, by_distance_asc);
                let mut taken = HashSet::with_capacity(half);
                for s in &hard[..quarter] {
                    taken.insert(s.index);
                    picked.push(mark(s, Criterion::Hard));
                }
                for s in &center {
                    if taken.insert(s.index) {
                        picked.push(mark(s, Criterion::Center));
                    }
                }
                for s in &hard[quarter..] {
                    if taken.len() == half {
                        break;
                    }
                    if taken.insert(s.index) {
                        picked.push(mark(s, Criterion::Backfill));
                    }
                }
                debug_assert_eq!(taken.len(), half);
            }
            Strategy::AllHard => picked.extend(
                top_k(&members, half, by_entropy_desc)
                    .iter()
                    .map(|s| mark(s, Criterion::Hard)),
            ),
            Strategy::AllEasy => picked.extend(
                top_k(&members, half, by_entropy_asc)
                    .iter()
                    .map(|s| mark(s, Criterion::Easy)),
            ),
            Strategy::AllMargin => picked.extend(
                top_k(&members, half, by_distance_desc)
                    .iter()
                    .map(|s| mark(s, Criterion::Margin)),
            ),
            Strategy::AllCenter => picked.extend(
                top_k(&members, half, by_distance_asc)
                    .iter()
                    .map(|s| mark(s, Criterion::Center)),
            ),
            Strategy::Random => {
                let by_key = |a: &ScoredSample<T>, b: &ScoredSample<T>| {
                    keys[a.index]
                        .cmp(&keys[b.index])
                        .then(a.index.cmp(&b.index))
                };
                picked.extend(
                    top_k(&members, half, by_key)
                        .iter()
                        .map(|s| mark(s, Criterion::Random)),
                );
            }
        }
    }
    Ok(picked)
}

/// Scores `data` with `model` and selects `k` samples.
pub fn select_replay<T: Scalar>(
    model: &Model<T>,
    data: &Dataset<T>,
    k: usize,
    strategy: Strategy,
    seed: u64,
) -> Result<Vec<Selected<T>>, ReplayError> {
    let scores = score_samples(model, data)?;
    select_from_scores(&scores, k, strategy, seed)
}

fn cmp_scalar<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// The `k` smallest items under `cmp`, in order. Partitions first so only
/// the selected prefix is sorted.
fn top_k<S: Copy>(items: &[S], k: usize, cmp: impl Fn(&S, &S) -> Ordering) -> Vec<S> {
    let mut v = items.to_vec();
    if k == 0 {
        return Vec::new();
    }
    if k < v.len() {
        v.select_nth_unstable_by(k - 1, &cmp);
        v.truncate(k);
    }
    v.sort_by(&cmp);
    v
}

/// One stored replay sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayEntry<T> {
    /// 1-based task the sample came from.
    pub task: usize,
    /// Row in that task's training set.
    pub index: usize,
    pub label: u8,
    pub input: Vec<T>,
    pub criterion: Criterion,
}

/// Accumulated replay samples; grows by exactly `K` per finished task and
/// never evicts.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplaySet<T> {
    k: usize,
    entries: Vec<ReplayEntry<T>>,
}

impl<T: Scalar> ReplaySet<T> {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            entries: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ReplayEntry<T>] {
        &self.entries
    }

    /// Adds the selection made on task `task`'s training data.
    pub fn add_task(
        &mut self,
        task: usize,
        data: &Dataset<T>,
        selected: &[Selected<T>],
    ) -> Result<(), ReplayError> {
        if selected.len() != self.k {
            return Err(ReplayError::Contribution {
                task,
                got: selected.len(),
                expected: self.k,
            });
        }
        let mut seen = HashSet::with_capacity(selected.len());
        for s in selected {
            if !seen.insert(s.index) {
                return Err(ReplayError::Duplicate {
                    task,
                    index: s.index,
                });
            }
        }
        self.entries.extend(selected.iter().map(|s| ReplayEntry {
            task,
            index: s.index,
            label: s.label,
            input: data.inputs().row(s.index).to_vec(),
            criterion: s.criterion,
        }));
        Ok(())
    }

    pub fn count_for_task(&self, task: usize) -> usize {
        self.entries.iter().filter(|e| e.task == task).count()
    }
}

/// Writes a selection audit:
/// `sample_id,label,task_id,entropy,centroid_distance,criterion`.
pub fn write_selection_csv<T: Scalar>(
    path: &Path,
    task: usize,
    selected: &[Selected<T>],
) -> Result<(), ReplayError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "sample_id,label,task_id,entropy,centroid_distance,criterion"
    )?;
    for s in selected {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.index,
            s.label,
            task,
            s.entropy.as_f64(),
            s.centroid_distance.as_f64(),
            s.criterion.as_str()
        )?;
    }
    out.flush()?;
    Ok(())
}
