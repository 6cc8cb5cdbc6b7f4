//! Objective terms: cross-entropy, supervised contrastive, soft-label and
//! feature distillation, and their weighted sum.
//!
//! Each term has a tape form (`*_on_tape`) used for training and a value
//! form that builds a throwaway tape. Teacher quantities always enter the
//! tape as constants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Model, ModelError, Prediction, Recorded};
use crate::numkernel::{softmax_rows, KernelError, Tape, Tensor, Var};
use crate::Scalar;

/// Clamp applied to probabilities before any logarithm.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("feature vector {row} has zero norm; cosine similarity undefined")]
    ZeroNormFeature { row: usize },
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Where a batch row came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    NewTask,
    Replay { task: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    inputs: Tensor<T>,
    labels: Vec<u8>,
    sources: Vec<Source>,
}

impl<T: Scalar> Batch<T> {
    pub fn new(
        inputs: Tensor<T>,
        labels: Vec<u8>,
        sources: Vec<Source>,
    ) -> Result<Self, LossError> {
        if inputs.rank() != 2 || inputs.rows() != labels.len() || labels.len() != sources.len() {
            return Err(LossError::Parameter(format!(
                "batch of shape {:?} with {} labels and {} sources",
                inputs.shape(),
                labels.len(),
                sources.len()
            )));
        }
        check_labels(&labels)?;
        Ok(Self {
            inputs,
            labels,
            sources,
        })
    }

    /// All rows tagged as new-task samples.
    pub fn from_new_task(inputs: Tensor<T>, labels: Vec<u8>) -> Result<Self, LossError> {
        let sources = vec![Source::NewTask; labels.len()];
        Self::new(inputs, labels, sources)
    }

    pub fn inputs(&self) -> &Tensor<T> {
        &self.inputs
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Balancing factors and temperatures of the combined objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// Weight of the contrastive term.
    pub alpha: f64,
    /// Weight of soft-label distillation.
    pub beta: f64,
    /// Weight of feature distillation.
    pub gamma: f64,
    pub kd_temperature: f64,
    pub scl_temperature: f64,
    /// Divide the CE, KD and FD sums by the batch size.
    pub mean_reduction: bool,
    /// Multiply KD by `T²`.
    pub kd_t_squared: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            kd_temperature: 20.0,
            scl_temperature: 0.1,
            mean_reduction: false,
            kd_t_squared: false,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(LossError::Parameter(format!(
                    "{name} must be >= 0, got {w}"
                )));
            }
        }
        for (name, t) in [
            ("kd_temperature", self.kd_temperature),
            ("scl_temperature", self.scl_temperature),
        ] {
            if !(t > 0.0) || !t.is_finite() {
                return Err(LossError::Parameter(format!("{name} must be > 0, got {t}")));
            }
        }
        Ok(())
    }
}

fn check_labels(labels: &[u8]) -> Result<(), LossError> {
    if labels.is_empty() {
        return Err(LossError::Parameter("empty batch".into()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(LossError::Parameter(format!("label {bad} not in {{0, 1}}")));
    }
    Ok(())
}

/// Column mask over a `B × 2` matrix picking out class `class`.
fn class_column<T: Scalar>(rows: usize, class: usize) -> Tensor<T> {
    let mut m = Tensor::zeros(&[rows, 2]);
    for i in 0..rows {
        m.data_mut()[i * 2 + class] = T::one();
    }
    m
}

fn label_column<T: Scalar>(labels: &[u8], want: u8) -> Tensor<T> {
    let data = labels
        .iter()
        .map(|&y| if y == want { T::one() } else { T::zero() })
        .collect();
    Tensor::from_vec(vec![labels.len(), 1], data).expect("finite mask")
}

/// `Σᵢ −[(1−yᵢ)·log p₀ + yᵢ·log(1−p₀)]` with `p₀` the real-class
/// probability of `softmax(logits)`, clamped to `[ε, 1−ε]`.
pub fn ce_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    logits: Var,
    labels: &[u8],
) -> Result<Var, LossError> {
    check_labels(labels)?;
    let b = labels.len();
    if tape.value(logits).rows() != b || tape.value(logits).cols() != 2 {
        return Err(LossError::Parameter(format!(
            "logits {:?} for {b} labels",
            tape.value(logits).shape()
        )));
    }
    let probs = tape.softmax_rows(logits, T::one())?;
    let col0 = tape.constant(class_column(b, 0));
    let p0 = tape.mul(probs, col0)?;
    let p0 = tape.sum_rows(p0)?;
    let eps = T::lit(PROB_EPS);
    let p0 = tape.clamp(p0, eps, T::one() - eps)?;
    let log_real = tape.ln(p0)?;
    let not_p0 = tape.neg(p0)?;
    let not_p0 = tape.add_scalar(not_p0, T::one())?;
    let log_fake = tape.ln(not_p0)?;
    let real_mask = tape.constant(label_column(labels, 0));
    let fake_mask = tape.constant(label_column(labels, 1));
    let a = tape.mul(log_real, real_mask)?;
    let c = tape.mul(log_fake, fake_mask)?;
    let per_sample = tape.add(a, c)?;
    let total = tape.sum_all(per_sample)?;
    Ok(tape.neg(total)?)
}

/// Cross-entropy of already computed predictions, evaluated on their
/// temperature-1 probabilities.
pub fn loss_ce<T: Scalar>(preds: &[Prediction<T>], labels: &[u8]) -> Result<T, LossError> {
    check_labels(labels)?;
    if preds.len() != labels.len() {
        return Err(LossError::Parameter(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let eps = T::lit(PROB_EPS);
    let mut total = T::zero();
    for (p, &y) in preds.iter().zip(labels) {
        let p0 = p.probs.data()[0].max(eps).min(T::one() - eps);
        total = total
            - if y == 0 {
                p0.ln()
            } else {
                (T::one() - p0).ln()
            };
    }
    Ok(total)
}

/// Tape form of the supervised contrastive term.
#[derive(Clone, Copy, Debug)]
pub struct SclTerm {
    pub value: Var,
    /// No anchor had a negative: the batch holds a single class.
    pub single_class: bool,
}

/// Supervised contrastive loss over cosine similarities.
///
/// For anchor `i` and positive `j`, the denominator holds the anchor-positive
/// term plus every negative of `i`; positives are averaged, anchors summed.
/// Anchors without positives contribute nothing. All similarities are shifted
/// by the constant `1/τ` before exponentiation, which cancels in the ratio.
pub fn scl_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    features: Var,
    labels: &[u8],
    tau: T,
) -> Result<SclTerm, LossError> {
    check_labels(labels)?;
    let b = labels.len();
    if b < 2 {
        return Err(LossError::Parameter(
            "contrastive loss needs at least 2 samples".into(),
        ));
    }
    if !(tau > T::zero()) {
        return Err(LossError::Parameter(format!("tau must be > 0, got {tau}")));
    }
    let f = tape.value(features);
    if f.rows() != b {
        return Err(LossError::Parameter(format!(
            "features {:?} for {b} labels",
            f.shape()
        )));
    }
    for i in 0..b {
        if f.row(i).iter().all(|&v| v == T::zero()) {
            return Err(LossError::ZeroNormFeature { row: i });
        }
    }

    let mut pos_weight = Tensor::zeros(&[b, b]);
    let mut neg_mask = Tensor::zeros(&[b, b]);
    let mut any_negative = false;
    for i in 0..b {
        let positives = (0..b).filter(|&j| j != i && labels[j] == labels[i]).count();
        for j in 0..b {
            if labels[j] != labels[i] {
                neg_mask.data_mut()[i * b + j] = T::one();
                any_negative = true;
            } else if j != i {
                pos_weight.data_mut()[i * b + j] = T::one() / T::count(positives);
            }
        }
    }

    if !any_negative {
        // every ratio is exactly 1
        return Ok(SclTerm {
            value: tape.constant(Tensor::zeros(&[1, 1])),
            single_class: true,
        });
    }

    let sq = tape.square(features)?;
    let norms = tape.sum_rows(sq)?;
    let norms = tape.sqrt(norms)?;
    let unit = tape.div(features, norms)?;
    let unit_t = tape.transpose(unit)?;
    let sim = tape.matmul(unit, unit_t)?;
    let shifted = tape.add_scalar(sim, -T::one())?;
    let logits = tape.scale(shifted, T::one() / tau)?;
    let e = tape.exp(logits)?;
    let neg_mask = tape.constant(neg_mask);
    let e_neg = tape.mul(e, neg_mask)?;
    let neg_sum = tape.sum_rows(e_neg)?;
    let denom = tape.add(e, neg_sum)?;
    let log_denom = tape.ln(denom)?;
    let log_ratio = tape.sub(logits, log_denom)?;
    let w = tape.constant(pos_weight);
    let weighted = tape.mul(log_ratio, w)?;
    let total = tape.sum_all(weighted)?;
    Ok(SclTerm {
        value: tape.neg(total)?,
        single_class: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SclLoss<T> {
    pub value: T,
    pub single_class: bool,
}

pub fn loss_scl<T: Scalar>(
    features: &Tensor<T>,
    labels: &[u8],
    tau: T,
) -> Result<SclLoss<T>, LossError> {
    let mut tape = Tape::new();
    let f = tape.constant(features.clone());
    let term = scl_on_tape(&mut tape, f, labels, tau)?;
    Ok(SclLoss {
        value: tape.scalar(term.value),
        single_class: term.single_class,
    })
}

/// `−Σᵢ Σⱼ pᵗᵢⱼ · log pˢᵢⱼ` with both sides softened at temperature `t`.
pub fn kd_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    teacher_logits: &Tensor<T>,
    student_logits: Var,
    t: T,
) -> Result<Var, LossError> {
    if !(t > T::zero()) {
        return Err(LossError::Parameter(format!(
            "KD temperature must be > 0, got {t}"
        )));
    }
    if teacher_logits.shape() != tape.value(student_logits).shape() {
        return Err(KernelError::Shape {
            op: "loss_kd",
            left: teacher_logits.shape().to_vec(),
            right: tape.value(student_logits).shape().to_vec(),
        }
        .into());
    }
    let pt = tape.constant(softmax_rows(teacher_logits, t)?);
    let ps = tape.softmax_rows(student_logits, t)?;
    let eps = T::lit(PROB_EPS);
    let ps = tape.clamp(ps, eps, T::one() - eps)?;
    let log_ps = tape.ln(ps)?;
    let cross = tape.mul(pt, log_ps)?;
    let total = tape.sum_all(cross)?;
    Ok(tape.neg(total)?)
}

pub fn loss_kd<T: Scalar>(
    teacher_logits: &Tensor<T>,
    student_logits: &Tensor<T>,
    t: T,
) -> Result<T, LossError> {
    let mut tape = Tape::new();
    let s = tape.constant(student_logits.clone());
    let v = kd_on_tape(&mut tape, teacher_logits, s, t)?;
    Ok(tape.scalar(v))
}

/// `Σᵢ ‖rᵗᵢ − rˢᵢ‖²`.
pub fn fd_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    teacher_features: &Tensor<T>,
    student_features: Var,
) -> Result<Var, LossError> {
    if teacher_features.shape() != tape.value(student_features).shape() {
        return Err(KernelError::Shape {
            op: "loss_fd",
            left: teacher_features.shape().to_vec(),
            right: tape.value(student_features).shape().to_vec(),
        }
        .into());
    }
    let rt = tape.constant(teacher_features.clone());
    let d = tape.sub(rt, student_features)?;
    let sq = tape.square(d)?;
    Ok(tape.sum_all(sq)?)
}

pub fn loss_fd<T: Scalar>(
    teacher_features: &Tensor<T>,
    student_features: &Tensor<T>,
) -> Result<T, LossError> {
    let mut tape = Tape::new();
    let s = tape.constant(student_features.clone());
    let v = fd_on_tape(&mut tape, teacher_features, s)?;
    Ok(tape.scalar(v))
}

/// Which terms beyond cross-entropy enter the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermSet {
    pub scl: bool,
    pub kd: bool,
    pub fd: bool,
}

impl TermSet {
    pub const CE_ONLY: Self = Self {
        scl: false,
        kd: false,
        fd: false,
    };

    /// The full objective; distillation terms only once a teacher exists.
    pub fn dfil(is_first_task: bool) -> Self {
        Self {
            scl: true,
            kd: !is_first_task,
            fd: !is_first_task,
        }
    }

    pub fn needs_teacher(&self) -> bool {
        self.kd || self.fd
    }
}

/// Unweighted term values; absent terms are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub ce: f64,
    pub scl: Option<f64>,
    pub kd: Option<f64>,
    pub fd: Option<f64>,
    pub total: f64,
    /// The contrastive term saw a single-class batch.
    #[serde(default)]
    pub scl_single_class: bool,
}

impl Components {
    pub fn all_finite(&self) -> bool {
        [Some(self.ce), self.scl, self.kd, self.fd, Some(self.total)]
            .into_iter()
            .flatten()
            .all(f64::is_finite)
    }
}

/// A recorded objective ready for [`Tape::backward`].
pub struct Objective {
    pub forward: Recorded,
    pub total: Var,
    pub components: Components,
}

/// Records `L_CE + α·L_SCL + β·L_KD + γ·L_FD` (restricted to `terms`) for
/// the student on `batch`.
pub fn objective_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    batch: &Batch<T>,
    student: &Model<T>,
    teacher: Option<&Model<T>>,
    weights: &LossWeights,
    terms: TermSet,
) -> Result<Objective, LossError> {
    let x = tape.constant(batch.inputs().clone());
    let forward = student.record(tape, x)?;
    objective_from_forward(tape, batch, forward, teacher, weights, terms)
}

/// [`objective_on_tape`] with the student's parameters supplied as existing
/// tape leaves (in [`Model::params`] order), e.g. by a gradient checker.
pub fn objective_with_params<T: Scalar>(
    tape: &mut Tape<T>,
    batch: &Batch<T>,
    student: &Model<T>,
    params: &[Var],
    teacher: Option<&Model<T>>,
    weights: &LossWeights,
    terms: TermSet,
) -> Result<Objective, LossError> {
    let x = tape.constant(batch.inputs().clone());
    let forward = student.record_with(tape, params, x)?;
    objective_from_forward(tape, batch, forward, teacher, weights, terms)
}

fn objective_from_forward<T: Scalar>(
    tape: &mut Tape<T>,
    batch: &Batch<T>,
    forward: Recorded,
    teacher: Option<&Model<T>>,
    weights: &LossWeights,
    terms: TermSet,
) -> Result<Objective, LossError> {
    weights.validate()?;
    let teacher = match (terms.needs_teacher(), teacher) {
        (true, None) => {
            return Err(LossError::Protocol(
                "distillation terms requested without a teacher".into(),
            ))
        }
        (_, t) => t,
    };
    let b = T::count(batch.len());
    let reduce = |tape: &mut Tape<T>, v: Var| -> Result<Var, LossError> {
        if weights.mean_reduction {
            Ok(tape.scale(v, T::one() / b)?)
        } else {
            Ok(v)
        }
    };

    let ce = ce_on_tape(tape, forward.logits, batch.labels())?;
    let ce = reduce(tape, ce)?;
    let mut components = Components {
        ce: tape.scalar(ce).as_f64(),
        ..Default::default()
    };
    let mut total = ce;

    if terms.scl {
        let scl = scl_on_tape(
            tape,
            forward.features,
            batch.labels(),
            T::lit(weights.scl_temperature),
        )?;
        components.scl = Some(tape.scalar(scl.value).as_f64());
        components.scl_single_class = scl.single_class;
        let w = tape.scale(scl.value, T::lit(weights.alpha))?;
        total = tape.add(total, w)?;
    }
    if let Some(teacher) = teacher.filter(|_| terms.needs_teacher()) {
        let t_out = teacher.forward_batch(batch.inputs())?;
        if terms.kd {
            let temp = T::lit(weights.kd_temperature);
            let mut kd = kd_on_tape(tape, &t_out.logits, forward.logits, temp)?;
            if weights.kd_t_squared {
                kd = tape.scale(kd, temp * temp)?;
            }
            let kd = reduce(tape, kd)?;
            components.kd = Some(tape.scalar(kd).as_f64());
            let w = tape.scale(kd, T::lit(weights.beta))?;
            total = tape.add(total, w)?;
        }
        if terms.fd {
            let fd = fd_on_tape(tape, &t_out.features, forward.features)?;
            let fd = reduce(tape, fd)?;
            components.fd = Some(tape.scalar(fd).as_f64());
            let w = tape.scale(fd, T::lit(weights.gamma))?;
            total = tape.add(total, w)?;
        }
    }
    components.total = tape.scalar(total).as_f64();
    Ok(Objective {
        forward,
        total,
        components,
    })
}

/// The combined objective of one incremental step.
///
/// The first task is trained on `L_CE + α·L_SCL` without a teacher; later
/// tasks add both distillation terms and require one.
pub fn loss_dfil<T: Scalar>(
    batch: &Batch<T>,
    student: &Model<T>,
    teacher: Option<&Model<T>>,
    weights: &LossWeights,
    is_first_task: bool,
) -> Result<Components, LossError> {
    match (is_first_task, teacher.is_some()) {
        (false, false) => {
            return Err(LossError::Protocol(
                "teacher missing on a non-first task".into(),
            ))
        }
        (true, true) => return Err(LossError::Protocol("first task takes no teacher".into())),
        _ => {}
    }
    let mut tape = Tape::new();
    let obj = objective_on_tape(
        &mut tape,
        batch,
        student,
        teacher,
        weights,
        TermSet::dfil(is_first_task),
    )?;
    Ok(obj.components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pred_with_p0(p0: f64) -> Prediction<f64> {
        let probs = Tensor::vector(vec![p0, 1.0 - p0]).unwrap();
        Prediction {
            features: Tensor::vector(vec![1.0]).unwrap(),
            // only the probabilities are read by loss_ce
            logits: Tensor::vector(vec![0.0, 0.0]).unwrap(),
            probs,
        }
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_vec(
            vec![rows, cols],
            (0..rows * cols)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ce_perfect_and_uniform() {
        let preds = vec![pred_with_p0(1.0), pred_with_p0(0.0)];
        let ce = loss_ce(&preds, &[0, 1]).unwrap();
        assert!(ce < 1e-11, "{ce}");
        let preds: Vec<_> = (0..5).map(|_| pred_with_p0(0.5)).collect();
        let ce = loss_ce(&preds, &[0, 1, 1, 0, 1]).unwrap();
        assert!((ce - 5.0 * 2f64.ln()).abs() < 1e-12);
        assert!(loss_ce::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn ce_mixed_batch_hand_evaluation() {
        let logits: Tensor<f64> =
            Tensor::from_rows(&[vec![0.3, -0.2], vec![1.5, 2.0], vec![-1.0, 0.25]]).unwrap();
        let labels = [0u8, 1, 0];
        let mut tape = Tape::new();
        let z = tape.constant(logits.clone());
        let v = ce_on_tape(&mut tape, z, &labels).unwrap();
        let mut expected = 0.0f64;
        for (i, &y) in labels.iter().enumerate() {
            let (a, b) = (logits.get(i, 0), logits.get(i, 1));
            let p0 = a.exp() / (a.exp() + b.exp());
            expected -= if y == 0 { p0.ln() } else { (1.0 - p0).ln() };
        }
        assert!((tape.scalar(v) - expected).abs() < 1e-12);
    }

    #[test]
    fn scl_no_negatives_is_zero() {
        let f = Tensor::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let l = loss_scl(&f, &[1, 1], 0.1).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.single_class);
    }

    #[test]
    fn scl_rejects_zero_norm_and_bad_tau() {
        let f = Tensor::from_rows(&[vec![0.0, 0.0], vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            loss_scl(&f, &[0, 1], 0.1),
            Err(LossError::ZeroNormFeature { row: 0 })
        ));
        let f = Tensor::from_rows(&[vec![1.0, 0.0], vec![1.0, 2.0]]).unwrap();
        assert!(loss_scl(&f, &[0, 1], 0.0).is_err());
        assert!(loss_scl(&f.select_rows(&[0]), &[0], 0.1).is_err());
    }

    #[test]
    fn scl_is_scale_invariant() {
        let f = random_matrix(6, 4, 1);
        let labels = [0, 1, 1, 0, 0, 1];
        let base = loss_scl(&f, &labels, 0.1).unwrap().value;
        let mut scaled = f.clone();
        for i in 0..6 {
            for j in 0..4 {
                scaled.data_mut()[i * 4 + j] *= 0.5 + i as f64;
            }
        }
        let s = loss_scl(&scaled, &labels, 0.1).unwrap().value;
        assert!((base - s).abs() < 1e-10 * base.abs().max(1.0));
        assert!(base >= 0.0);
    }

    #[test]
    fn kd_self_distillation_equals_entropy_sum() {
        let z = random_matrix(5, 2, 2);
        let kd = loss_kd(&z, &z, 20.0).unwrap();
        let p = softmax_rows(&z, 20.0).unwrap();
        let h: f64 = p.data().iter().map(|&v| -v * v.ln()).sum();
        assert!((kd - h).abs() < 1e-10);
    }

    #[test]
    fn kd_uniform_teacher() {
        let teacher: Tensor<f64> = Tensor::from_rows(&[vec![0.7, 0.7]]).unwrap();
        let student: Tensor<f64> = Tensor::from_rows(&[vec![1.0, -2.0]]).unwrap();
        let ps = softmax_rows(&student, 2.0).unwrap();
        let expected = -0.5 * (ps.data()[0].ln() + ps.data()[1].ln());
        assert!((loss_kd(&teacher, &student, 2.0).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn kd_high_temperature_reference() {
        // teacher (2,0), student (0,2), T=20; 50-digit evaluation
        let t: Tensor<f64> = Tensor::from_rows(&[vec![2.0, 0.0]]).unwrap();
        let s = Tensor::from_rows(&[vec![0.0, 2.0]]).unwrap();
        let kd = loss_kd(&t, &s, 20.0).unwrap();
        assert!((kd - 0.696_894_578_821_464_9).abs() < 1e-14, "{kd}");
    }

    #[test]
    fn fd_cases() {
        let a = random_matrix(3, 16, 3);
        assert_eq!(loss_fd(&a, &a).unwrap(), 0.0);
        let zero = Tensor::zeros(&[1, 16]);
        let ones = Tensor::filled(&[1, 16], 1.0);
        assert_eq!(loss_fd(&zero, &ones).unwrap(), 16.0);
        let b = random_matrix(3, 16, 4);
        let expected: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        assert!((loss_fd(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((loss_fd(&a, &b).unwrap() - loss_fd(&b, &a).unwrap()).abs() < 1e-12);
        assert!(loss_fd(&a, &Tensor::zeros(&[3, 15])).is_err());
    }

    fn toy_batch(seed: u64) -> Batch<f64> {
        Batch::from_new_task(random_matrix(8, 4, seed), vec![0, 1, 0, 1, 1, 0, 0, 1]).unwrap()
    }

    fn toy_model(seed: u64) -> Model<f64> {
        Model::new(
            &Architecture {
                input_dim: 4,
                hidden: vec![6],
                feature_dim: 5,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn dfil_protocol_and_weight_zeroing() {
        let batch = toy_batch(5);
        let student = toy_model(1);
        let teacher = toy_model(2);
        let w = LossWeights::default();

        let first = loss_dfil(&batch, &student, None, &w, true).unwrap();
        assert!(first.kd.is_none() && first.fd.is_none());
        assert!(matches!(
            loss_dfil(&batch, &student, None, &w, false),
            Err(LossError::Protocol(_))
        ));

        let zero = LossWeights {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            ..w.clone()
        };
        let c = loss_dfil(&batch, &student, Some(&teacher), &zero, false).unwrap();
        assert_eq!(c.total, c.ce);

        let c = loss_dfil(&batch, &student, Some(&teacher), &w, false).unwrap();
        let out = student.forward_batch(batch.inputs()).unwrap();
        let t_out = teacher.forward_batch(batch.inputs()).unwrap();
        let preds: Vec<Prediction<f64>> = (0..8)
            .map(|i| {
                student
                    .forward(&Tensor::vector(batch.inputs().row(i).to_vec()).unwrap())
                    .unwrap()
            })
            .collect();
        let ce = loss_ce(&preds, batch.labels()).unwrap();
        let scl = loss_scl(&out.features, batch.labels(), 0.1).unwrap().value;
        let kd = loss_kd(&t_out.logits, &out.logits, 20.0).unwrap();
        let fd = loss_fd(&t_out.features, &out.features).unwrap();
        assert!((c.total - (ce + scl + kd + fd)).abs() < 1e-10);
    }

    #[test]
    fn fd_is_zero_against_own_snapshot() {
        let batch = toy_batch(6);
        let student = toy_model(3);
        let teacher = student.snapshot();
        let c = loss_dfil(
            &batch,
            &student,
            Some(&teacher),
            &LossWeights::default(),
            false,
        )
        .unwrap();
        assert_eq!(c.fd, Some(0.0));
    }

    #[test]
    fn mean_reduction_divides_by_batch() {
        let batch = toy_batch(7);
        let student = toy_model(4);
        let teacher = toy_model(5);
        let sum = loss_dfil(
            &batch,
            &student,
            Some(&teacher),
            &LossWeights::default(),
            false,
        )
        .unwrap();
        let mean_w = LossWeights {
            mean_reduction: true,
            ..Default::default()
        };
        let mean = loss_dfil(&batch, &student, Some(&teacher), &mean_w, false).unwrap();
        assert!((mean.ce * 8.0 - sum.ce).abs() < 1e-12);
        assert!((mean.fd.unwrap() * 8.0 - sum.fd.unwrap()).abs() < 1e-10);
        assert_eq!(mean.scl, sum.scl);
    }

    #[test]
    fn invalid_weights_rejected() {
        let w = LossWeights {
            beta: -1.0,
            ..Default::default()
        };
        assert!(w.validate().is_err());
        let w = LossWeights {
            scl_temperature: 0.0,
            ..Default::default()
        };
        assert!(w.validate().is_err());
    }

    proptest! {
        #[test]
        fn scl_is_permutation_invariant(seed in 0u64..500, shift in 1usize..6) {
            let f = random_matrix(6, 3, seed);
            let labels = [0u8, 1, 0, 1, 1, 0];
            let perm: Vec<usize> = (0..6).map(|i| (i + shift) % 6).collect();
            let pf = f.select_rows(&perm);
            let pl: Vec<u8> = perm.iter().map(|&i| labels[i]).collect();
            let a = loss_scl(&f, &labels, 0.2).unwrap().value;
            let b = loss_scl(&pf, &pl, 0.2).unwrap().value;
            prop_assert!((a - b).abs() < 1e-10);
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn kd_minimised_at_matching_student(seed in 0u64..500, d in -1.0f64..1.0) {
            prop_assume!(d.abs() > 1e-3);
            let t = random_matrix(3, 2, seed);
            let shifted = t.map(|v| v + 0.37).unwrap();
            let base = loss_kd(&t, &shifted, 2.0).unwrap();
            // move orthogonally to (1, 1)
            let mut moved = shifted.clone();
            for i in 0..3 {
                moved.data_mut()[2 * i] += d;
                moved.data_mut()[2 * i + 1] -= d;
            }
            prop_assert!(loss_kd(&t, &moved, 2.0).unwrap() > base);
        }
    }
}
