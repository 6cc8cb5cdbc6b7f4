//! The incremental training loop and its baselines.
//!
//! Every method shares one per-task loop: build the pool `Dᵢ ∪ R`, shuffle,
//! step Adam on mini-batches, optionally select replay samples, evaluate on
//! tasks `1..=i`, then snapshot the model as the next teacher. The methods
//! differ only in which loss terms are active and whether replay is kept.

mod adam;
mod record;

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use record::{
    epoch_curve, losses_from_csv, losses_to_csv, matrix_from_csv, matrix_to_csv, model_file,
    render_markdown, render_table, replay_file, EpochLoss, LossRow, RunRecord, RunSummary,
    SavedRun, CONFIG_FILE, LOSSES_FILE, MATRIX_FILE, SUMMARY_FILE,
};

use crate::datasets::DataError;
use crate::datasets::{Dataset, Split, TaskSequence};
use crate::losses::{
    objective_on_tape, Batch, Components, LossError, LossWeights, Source, TermSet,
};
use crate::metrics::{acc, AccuracyMatrix, MetricError};
use crate::model::{Architecture, Model, ModelError};
use crate::numkernel::{KernelError, Tape, Tensor};
use crate::replay::{select_replay, ReplayError, ReplaySet, Selected, Strategy};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at task {task}, epoch {epoch}, batch {batch}: {detail}")]
    NonFinite {
        task: usize,
        epoch: usize,
        batch: usize,
        detail: String,
    },
    #[error("task {task}, epoch {epoch}, batch {batch}: {source}")]
    Step {
        task: usize,
        epoch: usize,
        batch: usize,
        source: LossError,
    },
    #[error("optimizer: {0}")]
    Optimizer(String),
    #[error("run record: {0}")]
    Record(String),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dfil,
    #[serde(alias = "ft")]
    Finetune,
    #[serde(alias = "ol")]
    Offline,
    Er,
    Lwf,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Dfil,
        Method::Finetune,
        Method::Offline,
        Method::Er,
        Method::Lwf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dfil => "dfil",
            Method::Finetune => "finetune",
            Method::Offline => "offline",
            Method::Er => "er",
            Method::Lwf => "lwf",
        }
    }
}

impl FromStr for Method {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dfil" => Ok(Method::Dfil),
            "ft" | "finetune" => Ok(Method::Finetune),
            "offline" | "ol" => Ok(Method::Offline),
            "er" => Ok(Method::Er),
            "lwf" => Ok(Method::Lwf),
            other => Err(TrainError::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs_per_task: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplier applied every `lr_decay_every` epochs of a task.
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub adam: AdamConfig,
    pub weights: LossWeights,
    /// Replay samples added per finished task (`K`).
    pub replay_size: usize,
    /// Disables replay for replay-based methods (ablation).
    pub replay_enabled: bool,
    /// Overrides the method's default selection strategy.
    pub replay_strategy: Option<Strategy>,
    /// Keep Adam moments across task boundaries instead of resetting them.
    pub carry_optimizer_state: bool,
    pub architecture: Architecture,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Dfil,
            epochs_per_task: 20,
            batch_size: 32,
            learning_rate: 5e-4,
            lr_decay: 0.5,
            lr_decay_every: 5,
            adam: AdamConfig::default(),
            weights: LossWeights::default(),
            replay_size: 40,
            replay_enabled: true,
            replay_strategy: None,
            carry_optimizer_state: false,
            architecture: Architecture::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: String| Err(TrainError::Config(m));
        if self.epochs_per_task == 0 {
            return fail("epochs_per_task must be >= 1".into());
        }
        if self.batch_size < 2 {
            return fail(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return fail(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if !(self.lr_decay > 0.0) || self.lr_decay_every == 0 {
            return fail("lr_decay must be > 0 and lr_decay_every >= 1".into());
        }
        if self.uses_replay() && (self.replay_size == 0 || !self.replay_size.is_multiple_of(4)) {
            return fail(format!(
                "replay_size must be a positive multiple of 4, got {}",
                self.replay_size
            ));
        }
        self.adam.validate()?;
        self.weights
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        Ok(())
    }

    /// `η₀ · decay^⌊epoch / every⌋`, with `epoch` counted within a task.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let steps = i32::try_from(epoch / self.lr_decay_every).unwrap_or(i32::MAX);
        self.learning_rate * self.lr_decay.powi(steps)
    }

    pub fn uses_replay(&self) -> bool {
        self.replay_enabled && matches!(self.method, Method::Dfil | Method::Er)
    }

    pub fn strategy(&self) -> Strategy {
        self.replay_strategy.unwrap_or(match self.method {
            Method::Er => Strategy::Random,
            _ => Strategy::Ours,
        })
    }

    /// Active loss terms while training task `task` (0-based).
    pub fn terms(&self, task: usize) -> TermSet {
        match self.method {
            Method::Dfil => TermSet::dfil(task == 0),
            Method::Lwf => TermSet {
                scl: false,
                kd: task > 0,
                fd: false,
            },
            Method::Finetune | Method::Offline | Method::Er => TermSet::CE_ONLY,
        }
    }
}

/// Per-batch view handed to a [`TrainObserver`].
pub struct BatchEvent<'a, T> {
    /// 1-based task.
    pub task: usize,
    pub epoch: usize,
    pub batch: usize,
    pub lr: f64,
    pub student: &'a Model<T>,
    pub teacher: Option<&'a Model<T>>,
    pub components: &'a Components,
}

pub struct TaskEvent<'a, T> {
    pub task: usize,
    pub model: &'a Model<T>,
    pub replay: &'a ReplaySet<T>,
    pub accuracy_row: &'a [f64],
}

/// End-of-epoch view with the whole training pool `D′ᵢ` as one batch.
pub struct EpochEvent<'a, T> {
    pub task: usize,
    pub epoch: usize,
    pub student: &'a Model<T>,
    pub teacher: Option<&'a Model<T>>,
    pub pool: &'a Batch<T>,
    pub terms: TermSet,
    pub weights: &'a LossWeights,
}

/// Hooks for instrumentation; all default to no-ops.
pub trait TrainObserver<T> {
    fn on_batch(&mut self, _event: &BatchEvent<'_, T>) {}
    /// Only called when [`TrainObserver::wants_epochs`] returns true.
    fn on_epoch_end(&mut self, _event: &EpochEvent<'_, T>) {}
    fn wants_epochs(&self) -> bool {
        false
    }
    fn on_task_end(&mut self, _event: &TaskEvent<'_, T>) {}
}

impl<T> TrainObserver<T> for () {}

/// Test-set accuracy with argmax prediction (ties go to class 0).
pub fn evaluate<T: Scalar>(model: &Model<T>, data: &Dataset<T>) -> Result<f64, TrainError> {
    let out = model.forward_batch(data.inputs())?;
    Ok(acc(&out.classes(), data.labels())?)
}

fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn non_finite_op(e: &LossError) -> Option<&'static str> {
    match e {
        LossError::Kernel(KernelError::NonFinite { op })
        | LossError::Model(ModelError::Kernel(KernelError::NonFinite { op })) => Some(op),
        _ => None,
    }
}

/// Training pool for one task: new rows first, then replay rows.
struct Pool<T> {
    inputs: Tensor<T>,
    labels: Vec<u8>,
    sources: Vec<Source>,
}

impl<T: Scalar> Pool<T> {
    fn build(data: &Dataset<T>, replay: &ReplaySet<T>) -> Result<Self, TrainError> {
        let d = data.input_dim();
        let mut flat = data.inputs().data().to_vec();
        let mut labels = data.labels().to_vec();
        let mut sources = vec![Source::NewTask; labels.len()];
        for e in replay.entries() {
            flat.extend_from_slice(&e.input);
            labels.push(e.label);
            sources.push(Source::Replay { task: e.task });
        }
        Ok(Self {
            inputs: Tensor::from_vec(vec![labels.len(), d], flat)?,
            labels,
            sources,
        })
    }

    fn batch(&self, rows: &[usize]) -> Result<Batch<T>, LossError> {
        Batch::new(
            self.inputs.select_rows(rows),
            rows.iter().map(|&r| self.labels[r]).collect(),
            rows.iter().map(|&r| self.sources[r]).collect(),
        )
    }
}

/// Splits a shuffled order into mini-batches of `size`. A trailing batch with
/// fewer than 2 rows or a single class is merged into the one before it.
pub fn make_batches(order: &[usize], labels: &[u8], size: usize) -> Vec<Vec<usize>> {
    let mut batches: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    if batches.len() >= 2 {
        let last = batches.last().expect("non-empty");
        let single_class = last.iter().all(|&r| labels[r] == labels[last[0]]);
        if last.len() < 2 || single_class {
            let tail = batches.pop().expect("non-empty");
            batches.last_mut().expect("non-empty").extend(tail);
        }
    }
    batches
}

/// Mutable state threaded through the per-task loop.
struct Loop<'a, T, O> {
    cfg: &'a TrainConfig,
    model: Model<T>,
    adam: AdamState<T>,
    shuffle: ChaCha8Rng,
    losses: Vec<LossRow>,
    observer: &'a mut O,
}

impl<T: Scalar, O: TrainObserver<T>> Loop<'_, T, O> {
    fn train_task(
        &mut self,
        task: usize,
        pool: &Pool<T>,
        teacher: Option<&Model<T>>,
        terms: TermSet,
    ) -> Result<(), TrainError> {
        let cfg = self.cfg;
        if !cfg.carry_optimizer_state {
            self.adam = AdamState::for_params(&self.model.params());
        }
        let mut order: Vec<usize> = (0..pool.labels.len()).collect();
        for epoch in 0..cfg.epochs_per_task {
            let lr = cfg.lr_at(epoch);
            order.shuffle(&mut self.shuffle);
            for (b, rows) in make_batches(&order, &pool.labels, cfg.batch_size)
                .iter()
                .enumerate()
            {
                let at = |source| TrainError::Step {
                    task,
                    epoch,
                    batch: b,
                    source,
                };
                let non_finite = |detail: String| TrainError::NonFinite {
                    task,
                    epoch,
                    batch: b,
                    detail,
                };
                let batch = pool.batch(rows).map_err(at)?;
                let mut tape = Tape::new();
                let obj = match objective_on_tape(
                    &mut tape,
                    &batch,
                    &self.model,
                    teacher,
                    &cfg.weights,
                    terms,
                ) {
                    Ok(o) => o,
                    Err(e) => match non_finite_op(&e) {
                        Some(op) => {
                            return Err(non_finite(format!("{op} produced a non-finite value")))
                        }
                        None => return Err(at(e)),
                    },
                };
                if !obj.components.all_finite() {
                    return Err(non_finite(format!("{:?}", obj.components)));
                }
                self.observer.on_batch(&BatchEvent {
                    task,
                    epoch,
                    batch: b,
                    lr,
                    student: &self.model,
                    teacher,
                    components: &obj.components,
                });
                let grads = tape.backward(obj.total)?;
                let g: Vec<Tensor<T>> = obj.forward.params.iter().map(|&v| grads.wrt(v)).collect();
                adam_step(
                    &mut self.model.params_mut(),
                    &g,
                    &mut self.adam,
                    T::lit(lr),
                    &cfg.adam,
                )
                .map_err(|e| match e {
                    TrainError::Optimizer(m) => non_finite(m),
                    other => other,
                })?;
                self.losses.push(LossRow {
                    task,
                    epoch,
                    batch: b,
                    components: obj.components,
                });
            }
            if self.observer.wants_epochs() {
                let all = pool.batch(&order).map_err(|source| TrainError::Step {
                    task,
                    epoch,
                    batch: 0,
                    source,
                })?;
                self.observer.on_epoch_end(&EpochEvent {
                    task,
                    epoch,
                    student: &self.model,
                    teacher,
                    pool: &all,
                    terms,
                    weights: &cfg.weights,
                });
            }
        }
        Ok(())
    }
}

/// Runs `cfg.method` on `seq`, reporting progress to `observer`.
pub fn train_observed<T: Scalar, O: TrainObserver<T>>(
    seq: &TaskSequence<T>,
    cfg: &TrainConfig,
    observer: &mut O,
) -> Result<RunRecord<T>, TrainError> {
    cfg.validate()?;
    if cfg.architecture.input_dim != seq.input_dim() {
        return Err(TrainError::Config(format!(
            "architecture input_dim {} does not match data width {}",
            cfg.architecture.input_dim,
            seq.input_dim()
        )));
    }
    let model = Model::new(&cfg.architecture, cfg.seed)?;
    let adam = AdamState::for_params(&model.params());
    let mut state = Loop {
        cfg,
        model,
        adam,
        shuffle: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1)),
        losses: Vec::new(),
        observer,
    };
    let mut matrix = AccuracyMatrix::new(seq.names());
    let mut replay_audit = Vec::with_capacity(seq.len());
    let mut models = Vec::with_capacity(seq.len());

    if cfg.method == Method::Offline {
        let trains: Vec<&Dataset<T>> = seq.tasks().iter().map(|t| &t.train).collect();
        let union = Dataset::concat("union".into(), Split::Train, &trains)?;
        let pool = Pool::build(&union, &ReplaySet::new(cfg.replay_size))?;
        state.train_task(1, &pool, None, TermSet::CE_ONLY)?;
        let empty = ReplaySet::new(cfg.replay_size);
        for i in 0..seq.len() {
            let row = seq.tasks()[..=i]
                .iter()
                .map(|t| evaluate(&state.model, &t.test))
                .collect::<Result<Vec<_>, _>>()?;
            state.observer.on_task_end(&TaskEvent {
                task: i + 1,
                model: &state.model,
                replay: &empty,
                accuracy_row: &row,
            });
            matrix.push_row(row)?;
            replay_audit.push(Vec::new());
            models.push(state.model.snapshot());
        }
    } else {
        let mut replay = ReplaySet::new(cfg.replay_size);
        let mut teacher: Option<Model<T>> = None;
        for (i, task) in seq.tasks().iter().enumerate() {
            let terms = cfg.terms(i);
            let pool = Pool::build(&task.train, &replay)?;
            let t = if terms.needs_teacher() {
                teacher.as_ref()
            } else {
                None
            };
            state.train_task(i + 1, &pool, t, terms)?;

            let selected: Vec<Selected<T>> = if cfg.uses_replay() {
                let sel = select_replay(
                    &state.model,
                    &task.train,
                    cfg.replay_size,
                    cfg.strategy(),
                    derive_seed(cfg.seed, 100 + i as u64),
                )?;
                replay.add_task(i + 1, &task.train, &sel)?;
                sel
            } else {
                Vec::new()
            };

            let row = seq.tasks()[..=i]
                .iter()
                .map(|t| evaluate(&state.model, &t.test))
                .collect::<Result<Vec<_>, _>>()?;
            state.observer.on_task_end(&TaskEvent {
                task: i + 1,
                model: &state.model,
                replay: &replay,
                accuracy_row: &row,
            });
            matrix.push_row(row)?;
            replay_audit.push(selected);
            models.push(state.model.snapshot());
            teacher = Some(state.model.snapshot());
        }
    }

    Ok(RunRecord {
        config: cfg.clone(),
        matrix,
        losses: state.losses,
        replay: replay_audit,
        models,
    })
}

pub fn train<T: Scalar>(
    seq: &TaskSequence<T>,
    cfg: &TrainConfig,
) -> Result<RunRecord<T>, TrainError> {
    train_observed(seq, cfg, &mut ())
}

/// The full method: every loss term, Ours replay unless disabled.
pub fn run_dfil<T: Scalar>(
    seq: &TaskSequence<T>,
    cfg: &TrainConfig,
) -> Result<RunRecord<T>, TrainError> {
    if cfg.method != Method::Dfil {
        return Err(TrainError::Config(format!(
            "run_dfil called with method {}",
            cfg.method.as_str()
        )));
    }
    train(seq, cfg)
}

/// Finetune, Offline, ER or LwF.
pub fn run_baseline<T: Scalar>(
    seq: &TaskSequence<T>,
    cfg: &TrainConfig,
) -> Result<RunRecord<T>, TrainError> {
    if cfg.method == Method::Dfil {
        return Err(TrainError::Config(
            "run_baseline called with method dfil".into(),
        ));
    }
    train(seq, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_stream, preset, Task};
    use std::collections::HashSet;

    fn small_config(method: Method, seed: u64) -> TrainConfig {
        TrainConfig {
            method,
            epochs_per_task: 3,
            seed,
            ..TrainConfig::default()
        }
    }

    fn stream(seed: u64) -> TaskSequence<f64> {
        generate_stream(&preset("four-domain").unwrap(), seed).unwrap()
    }

    #[test]
    fn lr_schedule_resets_per_task_epoch() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at(0), 5e-4);
        assert_eq!(cfg.lr_at(4), 5e-4);
        assert_eq!(cfg.lr_at(5), 2.5e-4);
        assert_eq!(cfg.lr_at(19), 5e-4 * 0.125);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                epochs_per_task: 0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 1,
                ..Default::default()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            TrainConfig {
                replay_size: 6,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(TrainError::Config(_))));
        }
        // replay size is irrelevant without replay
        let ft = TrainConfig {
            method: Method::Finetune,
            replay_size: 6,
            ..Default::default()
        };
        assert!(ft.validate().is_ok());
        let json = r#"{"method": "er", "epochs_per_task": 2, "bogus": 1}"#;
        assert!(serde_json::from_str::<TrainConfig>(json).is_err());
        let json = r#"{"method": "er", "epochs_per_task": 2}"#;
        let cfg: TrainConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.strategy(), Strategy::Random);
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!("ft".parse::<Method>().unwrap(), Method::Finetune);
        assert!("sgd".parse::<Method>().is_err());
    }

    #[test]
    fn batching_merges_degenerate_tail() {
        let labels = [0u8, 1, 0, 1, 0, 1, 1];
        let order: Vec<usize> = (0..7).collect();
        // tail of one sample
        let b = make_batches(&order, &labels, 3);
        assert_eq!(b, vec![vec![0, 1, 2], vec![3, 4, 5, 6]]);
        // tail of two same-class samples
        let b = make_batches(&order, &labels, 5);
        assert_eq!(b, vec![order.clone()]);
        let b = make_batches(&order[..6], &labels, 2);
        assert_eq!(b.len(), 3);
    }

    struct Audit {
        teacher_hashes: Vec<(usize, u64)>,
        replay_sizes: Vec<usize>,
        rows: usize,
    }

    impl TrainObserver<f64> for Audit {
        fn on_batch(&mut self, e: &BatchEvent<'_, f64>) {
            if let Some(t) = e.teacher {
                self.teacher_hashes.push((e.task, t.fingerprint()));
            }
        }
        fn on_task_end(&mut self, e: &TaskEvent<'_, f64>) {
            self.replay_sizes.push(e.replay.len());
            self.rows += 1;
        }
    }

    #[test]
    fn teacher_is_frozen_and_replay_accumulates() {
        let seq = stream(2);
        let cfg = small_config(Method::Dfil, 2);
        let mut audit = Audit {
            teacher_hashes: Vec::new(),
            replay_sizes: Vec::new(),
            rows: 0,
        };
        let rec = train_observed(&seq, &cfg, &mut audit).unwrap();
        assert_eq!(audit.replay_sizes, vec![40, 80, 120, 160]);
        assert_eq!(audit.rows, 4);
        for task in 2..=4 {
            let hashes: HashSet<u64> = audit
                .teacher_hashes
                .iter()
                .filter(|(t, _)| *t == task)
                .map(|&(_, h)| h)
                .collect();
            assert_eq!(hashes.len(), 1, "task {task}");
            // the teacher is the model saved after the previous task
            assert!(hashes.contains(&rec.models[task - 2].fingerprint()));
        }
        assert!(rec.matrix.is_complete());
        assert!(rec.losses.iter().all(|r| r.components.all_finite()));
        // distillation terms only after the first task
        assert!(rec
            .losses
            .iter()
            .all(|r| (r.task == 1) == r.components.kd.is_none()));
    }

    #[test]
    fn runs_are_reproducible() {
        let seq = stream(4);
        for method in [Method::Dfil, Method::Er] {
            let a = train(&seq, &small_config(method, 9)).unwrap();
            let b = train(&seq, &small_config(method, 9)).unwrap();
            assert_eq!(a, b);
            let c = train(&seq, &small_config(method, 10)).unwrap();
            assert_ne!(a.models, c.models);
        }
    }

    #[test]
    fn offline_and_finetune_coincide_on_one_task() {
        let seq = generate_stream::<f64>(&preset("single-domain").unwrap(), 6).unwrap();
        let ft = train(&seq, &small_config(Method::Finetune, 1)).unwrap();
        let ol = train(&seq, &small_config(Method::Offline, 1)).unwrap();
        assert_eq!(ft.models, ol.models);
        assert_eq!(ft.matrix, ol.matrix);
    }

    #[test]
    fn offline_has_no_forgetting() {
        let seq = stream(3);
        let rec = train(&seq, &small_config(Method::Offline, 3)).unwrap();
        assert_eq!(rec.final_af(), Some(0.0));
        assert_eq!(rec.models.len(), 4);
    }

    #[test]
    fn baselines_respect_their_term_sets() {
        let seq = stream(5);
        let lwf = train(&seq, &small_config(Method::Lwf, 5)).unwrap();
        assert!(lwf
            .losses
            .iter()
            .all(|r| r.components.scl.is_none() && r.components.fd.is_none()));
        assert!(lwf.losses.iter().any(|r| r.components.kd.is_some()));
        assert!(lwf.replay.iter().all(Vec::is_empty));
        let er = train(&seq, &small_config(Method::Er, 5)).unwrap();
        assert!(er
            .losses
            .iter()
            .all(|r| r.components.scl.is_none() && r.components.kd.is_none()));
        assert!(er.replay.iter().all(|s| s.len() == 40));
        assert!(run_dfil(&seq, &small_config(Method::Er, 5)).is_err());
        assert!(run_baseline(&seq, &small_config(Method::Dfil, 5)).is_err());
    }

    #[test]
    fn repeated_domain_is_not_forgotten() {
        let seq = generate_stream::<f64>(&preset("single-domain").unwrap(), 8).unwrap();
        let t = seq.tasks()[0].clone();
        let twice = TaskSequence::new(vec![
            t.clone(),
            Task {
                name: "again".into(),
                ..t
            },
        ])
        .unwrap();
        let rec = train(&twice, &small_config(Method::Dfil, 8)).unwrap();
        let first = rec.matrix.get(1, 1).unwrap();
        let later = rec.matrix.get(2, 1).unwrap();
        assert!(later >= first - 2.0, "{first} -> {later}");
    }

    #[test]
    fn non_finite_loss_aborts_with_location() {
        let seq = stream(1);
        let mut cfg = small_config(Method::Finetune, 1);
        cfg.learning_rate = 1e300;
        match train(&seq, &cfg) {
            Err(TrainError::NonFinite { task, .. }) => assert_eq!(task, 1),
            other => panic!(
                "expected a non-finite abort, got {:?}",
                other.map(|r| r.matrix)
            ),
        }
    }

    #[test]
    fn record_round_trips_through_disk() {
        let seq = stream(7);
        let rec = train(&seq, &small_config(Method::Dfil, 7)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        rec.save(dir.path()).unwrap();
        for name in [CONFIG_FILE, MATRIX_FILE, LOSSES_FILE, SUMMARY_FILE] {
            assert!(dir.path().join(name).is_file(), "{name}");
        }
        for i in 1..=4 {
            assert!(dir.path().join(replay_file(i)).is_file());
            let m = Model::<f64>::load(&dir.path().join(model_file(i))).unwrap();
            assert_eq!(m, rec.models[i - 1]);
        }
        let saved = SavedRun::load(dir.path()).unwrap();
        assert_eq!(saved.config, rec.config);
        assert_eq!(saved.matrix, rec.matrix);
        assert_eq!(saved.summary(), rec.summary());
    }
}
