//! Independent oracle suites.
//!
//! Each suite recomputes library results by a different route (finite
//! differences, scalar transcriptions, brute-force sorting, pairwise
//! counting) and reports the largest disagreement per check.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::losses::{
    ce_on_tape, fd_on_tape, kd_on_tape, loss_fd, loss_kd, loss_scl, objective_with_params, Batch,
    LossError, LossWeights, TermSet,
};
use crate::metrics::{auc, AccuracyMatrix, MetricError};
use crate::model::{Activation, Architecture, Model, ModelError};
use crate::numkernel::{grad_check_many, GradCheckReport, KernelError, Tape, Tensor, Var};
use crate::replay::{
    entropy, random_keys, select_from_scores, ReplayError, ScoredSample, Strategy,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite {0:?} (expected grad, losses, replay, metrics or all)")]
    UnknownSuite(String),
    #[error("no kink-free draw found for seed {seed} after {attempts} attempts")]
    NoDraw { seed: u64, attempts: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Grad,
    Losses,
    Replay,
    Metrics,
    All,
}

impl FromStr for Suite {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grad" => Ok(Suite::Grad),
            "losses" => Ok(Suite::Losses),
            "replay" => Ok(Suite::Replay),
            "metrics" => Ok(Suite::Metrics),
            "all" => Ok(Suite::All),
            other => Err(VerifyError::UnknownSuite(other.to_string())),
        }
    }
}

/// One oracle comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
}

impl Check {
    fn within(
        suite: &'static str,
        name: impl Into<String>,
        max_error: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            suite,
            name: name.into(),
            // NaN never passes
            passed: max_error <= tolerance,
            max_error,
            tolerance,
        }
    }

    fn exact(suite: &'static str, name: impl Into<String>, ok: bool) -> Self {
        Self {
            suite,
            name: name.into(),
            passed: ok,
            max_error: if ok { 0.0 } else { f64::INFINITY },
            tolerance: 0.0,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}/{}: max error {:.3e} (tolerance {:.0e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.max_error,
            self.tolerance
        )
    }
}

pub fn run(suite: Suite) -> Result<Vec<Check>, VerifyError> {
    Ok(match suite {
        Suite::Grad => grad_suite()?,
        Suite::Losses => loss_suite()?,
        Suite::Replay => replay_suite()?,
        Suite::Metrics => metric_suite()?,
        Suite::All => {
            let mut all = grad_suite()?;
            all.extend(loss_suite()?);
            all.extend(replay_suite()?);
            all.extend(metric_suite()?);
            all
        }
    })
}

// ---------------------------------------------------------------- gradients

/// Loss whose student-parameter gradient is checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradTarget {
    Ce,
    Scl,
    Kd,
    Fd,
    Dfil,
}

impl GradTarget {
    pub const ALL: [GradTarget; 5] = [
        GradTarget::Ce,
        GradTarget::Scl,
        GradTarget::Kd,
        GradTarget::Fd,
        GradTarget::Dfil,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GradTarget::Ce => "ce",
            GradTarget::Scl => "scl",
            GradTarget::Kd => "kd",
            GradTarget::Fd => "fd",
            GradTarget::Dfil => "dfil",
        }
    }
}

pub const GRAD_BATCH: usize = 8;
pub const GRAD_EPS: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const GRAD_SEEDS: u64 = 20;
/// Draws with a hidden pre-activation closer than this to the ReLU kink are
/// rejected; a probe of size `eps` could otherwise cross it.
pub const KINK_MARGIN: f64 = 1e-3;
const MAX_DRAWS: usize = 1000;

/// Network used for the gradient checks: 8 → 32 → 8 features → 2.
///
/// Central differences at `eps = 1e-5` carry roundoff near `1e-11` in
/// absolute terms, so the relative criterion can only be met where every
/// gradient component stays well above `1e-7`. The default network has
/// thousands of weights and, at `T = 20`, distillation gradients small
/// enough that a few of them always fall below that level.
pub fn grad_architecture() -> Architecture {
    Architecture {
        input_dim: 8,
        hidden: vec![32],
        feature_dim: 8,
    }
}

/// The teacher's classifier weights are multiplied by this, giving the
/// confident soft labels a trained teacher would produce.
pub const TEACHER_LOGIT_SCALE: f64 = 40.0;

/// A random student, teacher and batch for one gradient check.
pub struct GradDraw {
    pub student: Model<f64>,
    pub teacher: Model<f64>,
    pub batch: Batch<f64>,
    /// Draws rejected for sitting near a ReLU kink.
    pub rejected: usize,
}

fn min_hidden_margin(model: &Model<f64>, x: &Tensor<f64>) -> Result<f64, VerifyError> {
    let mut h = x.clone();
    let mut margin = f64::INFINITY;
    for layer in model.encoder() {
        let pre = h.matmul(&layer.weight)?;
        let pre = pre.zip_with(&bias_rows(&layer.bias, pre.rows()), |a, b| a + b)?;
        h = match layer.activation {
            Activation::Relu => {
                margin = pre.data().iter().fold(margin, |m, v| m.min(v.abs()));
                pre.map(|v| v.max(0.0))?
            }
            Activation::Linear => pre,
        };
    }
    Ok(margin)
}

fn bias_rows(bias: &Tensor<f64>, rows: usize) -> Tensor<f64> {
    let data: Vec<f64> = (0..rows)
        .flat_map(|_| bias.data().iter().copied())
        .collect();
    Tensor::from_vec(vec![rows, bias.len()], data).expect("finite bias")
}

fn perturb_biases(model: &mut Model<f64>, rng: &mut ChaCha8Rng) {
    let n = model.encoder().len() + 1;
    let mut params = model.params_mut();
    for i in 0..n {
        for b in params[2 * i + 1].data_mut() {
            *b = rng.random_range(-0.2..0.2);
        }
    }
}

/// Deterministic draw for `seed`: B = 8, d = 8, balanced labels,
/// [`grad_architecture`] with random biases.
pub fn grad_draw(seed: u64) -> Result<GradDraw, VerifyError> {
    let arch = grad_architecture();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..MAX_DRAWS {
        let mut student = Model::new(&arch, rng.random())?;
        perturb_biases(&mut student, &mut rng);
        let mut teacher = Model::new(&arch, rng.random())?;
        perturb_biases(&mut teacher, &mut rng);
        let last = 2 * teacher.encoder().len();
        for w in teacher.params_mut()[last].data_mut() {
            *w *= TEACHER_LOGIT_SCALE;
        }
        let data: Vec<f64> = (0..GRAD_BATCH * arch.input_dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let x = Tensor::from_vec(vec![GRAD_BATCH, arch.input_dim], data)?;
        let mut labels: Vec<u8> = (0..GRAD_BATCH).map(|i| (i % 2) as u8).collect();
        labels.shuffle(&mut rng);
        if min_hidden_margin(&student, &x)? < KINK_MARGIN {
            continue;
        }
        return Ok(GradDraw {
            student,
            teacher,
            batch: Batch::from_new_task(x, labels)?,
            rejected: attempt,
        });
    }
    Err(VerifyError::NoDraw {
        seed,
        attempts: MAX_DRAWS,
    })
}

/// Central-difference check of one loss over every student parameter.
pub fn grad_case(target: GradTarget, seed: u64) -> Result<GradCheckReport, VerifyError> {
    let draw = grad_draw(seed)?;
    let weights = LossWeights::default();
    let teacher_out = draw.teacher.forward_batch(draw.batch.inputs())?;
    let labels = draw.batch.labels();
    let f = |tape: &mut Tape<f64>, params: &[Var]| -> Result<Var, VerifyError> {
        if target == GradTarget::Dfil {
            let obj = objective_with_params(
                tape,
                &draw.batch,
                &draw.student,
                params,
                Some(&draw.teacher),
                &weights,
                TermSet::dfil(false),
            )?;
            return Ok(obj.total);
        }
        let x = tape.constant(draw.batch.inputs().clone());
        let fwd = draw.student.record_with(tape, params, x)?;
        Ok(match target {
            GradTarget::Ce => ce_on_tape(tape, fwd.logits, labels)?,
            GradTarget::Scl => {
                crate::losses::scl_on_tape(tape, fwd.features, labels, weights.scl_temperature)?
                    .value
            }
            GradTarget::Kd => kd_on_tape(
                tape,
                &teacher_out.logits,
                fwd.logits,
                weights.kd_temperature,
            )?,
            GradTarget::Fd => fd_on_tape(tape, &teacher_out.features, fwd.features)?,
            GradTarget::Dfil => unreachable!(),
        })
    };
    grad_check_many(f, &draw.student.param_tensors(), GRAD_EPS)
}

fn grad_suite() -> Result<Vec<Check>, VerifyError> {
    let mut checks = Vec::new();
    for target in GradTarget::ALL {
        let mut worst: f64 = 0.0;
        for seed in 0..GRAD_SEEDS {
            worst = worst.max(grad_case(target, seed)?.max_relative_error);
        }
        checks.push(Check::within(
            "grad",
            format!("{} ({GRAD_SEEDS} seeds, relative)", target.name()),
            worst,
            GRAD_TOLERANCE,
        ));
    }
    Ok(checks)
}

// ------------------------------------------------------------------- losses

/// Contrastive loss written out pair by pair, without the stabilising shift.
pub fn scl_reference(features: &[Vec<f64>], labels: &[u8], tau: f64) -> f64 {
    let b = features.len();
    let cos = |i: usize, j: usize| {
        let dot: f64 = features[i]
            .iter()
            .zip(&features[j])
            .map(|(a, c)| a * c)
            .sum();
        let ni: f64 = features[i].iter().map(|a| a * a).sum::<f64>().sqrt();
        let nj: f64 = features[j].iter().map(|a| a * a).sum::<f64>().sqrt();
        dot / (ni * nj)
    };
    let mut total = 0.0;
    for i in 0..b {
        let positives: Vec<usize> = (0..b)
            .filter(|&j| j != i && labels[j] == labels[i])
            .collect();
        if positives.is_empty() {
            continue;
        }
        let mut negatives = 0.0;
        for k in 0..b {
            if labels[k] != labels[i] {
                negatives += (cos(i, k) / tau).exp();
            }
        }
        let mut anchor = 0.0;
        for &j in &positives {
            let e = (cos(i, j) / tau).exp();
            anchor += -(e / (e + negatives)).ln();
        }
        total += anchor / positives.len() as f64;
    }
    total
}

fn softmax_reference(z: &[f64], t: f64) -> Vec<f64> {
    let e: Vec<f64> = z.iter().map(|v| (v / t).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

fn loss_suite() -> Result<Vec<Check>, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5C1);
    let mut checks = Vec::new();

    let label_sets: [[u8; 4]; 4] = [[0, 1, 0, 1], [1, 1, 0, 0], [0, 0, 0, 1], [1, 0, 1, 1]];
    let mut worst: f64 = 0.0;
    for case in 0..40 {
        let f = random_matrix(&mut rng, 4, 6, 1.5);
        let labels = label_sets[case % label_sets.len()];
        let got = loss_scl(&Tensor::from_rows(&f)?, &labels, 0.1)?.value;
        worst = worst.max((got - scl_reference(&f, &labels, 0.1)).abs());
    }
    checks.push(Check::within(
        "losses",
        "scl vs pairwise transcription (B=4)",
        worst,
        1e-10,
    ));

    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let t = random_matrix(&mut rng, 5, 2, 30.0);
        let expected: f64 = t
            .iter()
            .map(|row| {
                let p = softmax_reference(row, 20.0);
                -p.iter().map(|q| q * q.ln()).sum::<f64>()
            })
            .sum();
        let tt = Tensor::from_rows(&t)?;
        worst = worst.max((loss_kd(&tt, &tt, 20.0)? - expected).abs());
    }
    checks.push(Check::within(
        "losses",
        "kd(t, t) equals summed teacher entropy",
        worst,
        1e-10,
    ));

    let mut all_zero = true;
    for _ in 0..20 {
        let a = Tensor::from_rows(&random_matrix(&mut rng, 6, 16, 3.0))?;
        all_zero &= loss_fd(&a, &a)? == 0.0;
    }
    checks.push(Check::exact("losses", "fd(a, a) == 0", all_zero));

    let mut worst: f64 = 0.0;
    for b in [1usize, 2, 7, 32] {
        for _ in 0..5 {
            let rows: Vec<Vec<f64>> = (0..b)
                .map(|_| {
                    let v: f64 = rng.random_range(-50.0..50.0);
                    vec![v, v]
                })
                .collect();
            let labels: Vec<u8> = (0..b).map(|_| rng.random_range(0..2)).collect();
            let mut tape = Tape::new();
            let z = tape.constant(Tensor::from_rows(&rows)?);
            let ce = ce_on_tape(&mut tape, z, &labels)?;
            worst = worst.max((tape.scalar(ce) - b as f64 * std::f64::consts::LN_2).abs());
        }
    }
    checks.push(Check::within(
        "losses",
        "ce on uniform predictions equals B ln 2",
        worst,
        1e-12,
    ));
    Ok(checks)
}

// ------------------------------------------------------------------- replay

/// Brute-force selection: fully sort each class under the strategy's order
/// with index tie-breaks and read off the prefix.
pub fn replay_reference(
    scores: &[ScoredSample<f64>],
    k: usize,
    strategy: Strategy,
    seed: u64,
) -> BTreeSet<usize> {
    let keys = random_keys(scores.len(), seed);
    let mut chosen = BTreeSet::new();
    for class in 0..2u8 {
        let members: Vec<&ScoredSample<f64>> = scores.iter().filter(|s| s.label == class).collect();
        let sorted = |key: &dyn Fn(&ScoredSample<f64>) -> f64| -> Vec<usize> {
            let mut v: Vec<(f64, usize)> = members.iter().map(|s| (key(s), s.index)).collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            v.into_iter().map(|(_, i)| i).collect()
        };
        let hard = sorted(&|s| -s.entropy);
        let picks: Vec<usize> = match strategy {
            Strategy::AllHard => hard[..k / 2].to_vec(),
            Strategy::AllEasy => sorted(&|s| s.entropy)[..k / 2].to_vec(),
            Strategy::AllMargin => sorted(&|s| -s.centroid_distance)[..k / 2].to_vec(),
            Strategy::AllCenter => sorted(&|s| s.centroid_distance)[..k / 2].to_vec(),
            Strategy::Random => {
                // keys are u64; compare them exactly
                let mut v: Vec<(u64, usize)> =
                    members.iter().map(|s| (keys[s.index], s.index)).collect();
                v.sort();
                v[..k / 2].iter().map(|&(_, i)| i).collect()
            }
            Strategy::Ours => {
                let center = sorted(&|s| s.centroid_distance);
                let mut set: BTreeSet<usize> = hard[..k / 4]
                    .iter()
                    .chain(&center[..k / 4])
                    .copied()
                    .collect();
                for &i in &hard[k / 4..] {
                    if set.len() == k / 2 {
                        break;
                    }
                    set.insert(i);
                }
                set.into_iter().collect()
            }
        };
        chosen.extend(picks);
    }
    chosen
}

fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> Vec<ScoredSample<f64>> {
    // few distinct values so ties are common
    let levels = [0.05, 0.2, 0.35, 0.5, std::f64::consts::LN_2];
    (0..n)
        .map(|index| ScoredSample {
            index,
            label: (index % 2) as u8,
            entropy: if rng.random_bool(0.5) {
                levels[rng.random_range(0..levels.len())]
            } else {
                rng.random_range(0.0..0.7)
            },
            centroid_distance: if rng.random_bool(0.5) {
                f64::from(rng.random_range(0..4u8))
            } else {
                rng.random_range(0.0..4.0)
            },
        })
        .collect()
}

fn replay_suite() -> Result<Vec<Check>, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4E9);
    let datasets: Vec<Vec<ScoredSample<f64>>> =
        (0..10).map(|_| random_scores(&mut rng, 40)).collect();
    let mut checks = Vec::new();
    for strategy in Strategy::ALL {
        let mut mismatches = 0usize;
        for (d, scores) in datasets.iter().enumerate() {
            for k in [4usize, 8, 16, 20] {
                let seed = (d * 100 + k) as u64;
                let got: BTreeSet<usize> = select_from_scores(scores, k, strategy, seed)?
                    .iter()
                    .map(|s| s.index)
                    .collect();
                if got != replay_reference(scores, k, strategy, seed) {
                    mismatches += 1;
                }
            }
        }
        checks.push(Check::exact(
            "replay",
            format!("{strategy:?} vs full-sort oracle (10 datasets x 4 sizes)"),
            mismatches == 0,
        ));
    }
    Ok(checks)
}

// ------------------------------------------------------------------ metrics

/// AUC by counting every positive/negative pair.
pub fn auc_pairwise(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// AUC as the trapezoid area under the ROC curve swept over thresholds.
pub fn auc_trapezoid(scores: &[f64], labels: &[u8]) -> f64 {
    let p = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n = labels.len() as f64 - p;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0.0, 0.0);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let (tpr, fpr) = (tp / p, fp / n);
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    area
}

fn metric_suite() -> Result<Vec<Check>, VerifyError> {
    let mut checks = Vec::new();
    checks.push(Check::within(
        "metrics",
        "H(0.5, 0.5) = ln 2",
        (entropy(&[0.5f64, 0.5])? - std::f64::consts::LN_2).abs(),
        1e-12,
    ));
    checks.push(Check::exact(
        "metrics",
        "H(1, 0) = 0",
        entropy(&[1.0f64, 0.0])? == 0.0,
    ));
    checks.push(Check::within(
        "metrics",
        "H(0.9, 0.1) = 0.325083",
        (entropy(&[0.9f64, 0.1])? - 0.325_083).abs(),
        1e-6,
    ));

    let names: Vec<String> = ["t1", "t2", "t3", "t4"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = vec![
        vec![95.53],
        vec![89.40, 79.14],
        vec![69.16, 43.58, 94.69],
        vec![66.34, 62.16, 73.56, 81.13],
    ];
    let m = AccuracyMatrix::from_rows(names, rows)?;
    checks.push(Check::within(
        "metrics",
        "AA(66.34, 62.16, 73.56, 81.13) = 70.79",
        (m.average_accuracy(4)? - 70.79).abs(),
        0.01,
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(0xA0C);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let n = rng.random_range(4..60);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if case % 2 == 0 {
                    // coarse grid: many ties
                    f64::from(rng.random_range(0..6u8)) / 5.0
                } else {
                    rng.random()
                }
            })
            .collect();
        let pair = auc_pairwise(&scores, &labels);
        let trap = auc_trapezoid(&scores, &labels);
        let lib = auc(&scores, &labels)?;
        worst = worst.max((pair - trap).abs()).max((lib - pair).abs());
    }
    checks.push(Check::within(
        "metrics",
        "auc pairwise vs trapezoid vs ranks (50 sets)",
        worst,
        1e-12,
    ));

    let separated = auc(&[0.1f64, 0.2, 0.3, 0.7, 0.8, 0.95], &[0, 0, 0, 1, 1, 1])?;
    checks.push(Check::exact(
        "metrics",
        "perfect separation gives auc 1",
        separated == 1.0,
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_suites_pass() {
        for suite in [Suite::Losses, Suite::Replay, Suite::Metrics] {
            for c in run(suite).unwrap() {
                assert!(c.passed, "{c}");
            }
        }
    }

    #[test]
    fn gradients_match_on_one_seed() {
        for target in GradTarget::ALL {
            let r = grad_case(target, 0).unwrap();
            assert!(r.max_relative_error < GRAD_TOLERANCE, "{target:?}: {r:?}");
        }
    }

    #[test]
    fn oracles_detect_disagreement() {
        // a wrong temperature must show up in the contrastive oracle
        let f = vec![
            vec![1.0, 0.0],
            vec![0.6, 0.8],
            vec![0.0, 1.0],
            vec![-1.0, 0.2],
        ];
        let labels = [0, 0, 1, 1];
        let got = loss_scl(&Tensor::from_rows(&f).unwrap(), &labels, 0.1)
            .unwrap()
            .value;
        assert!((got - scl_reference(&f, &labels, 0.1)).abs() < 1e-12);
        assert!((got - scl_reference(&f, &labels, 0.2)).abs() > 1e-3);

        let scores = [0.1, 0.4, 0.35, 0.8];
        let labels = [0u8, 0, 1, 1];
        assert_eq!(auc_pairwise(&scores, &labels), 0.75);
        assert_eq!(auc_trapezoid(&scores, &labels), 0.75);
    }

    #[test]
    fn suite_names_parse() {
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("everything".parse::<Suite>().is_err());
    }
}
