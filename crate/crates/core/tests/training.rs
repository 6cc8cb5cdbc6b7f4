//! End-to-end properties of the training loop on the synthetic stream.

use dfil_core::datasets::{generate_stream, preset};
use dfil_core::losses::objective_on_tape;
use dfil_core::numkernel::Tape;
use dfil_core::trainer::{
    train, train_observed, EpochEvent, Method, SavedRun, TrainConfig, TrainObserver,
};

/// Full objective on the whole pool `D′ᵢ` after every epoch, grouped by task.
#[derive(Default)]
struct PoolLoss {
    curves: Vec<(usize, Vec<f64>)>,
}

impl TrainObserver<f64> for PoolLoss {
    fn wants_epochs(&self) -> bool {
        true
    }

    fn on_epoch_end(&mut self, e: &EpochEvent<'_, f64>) {
        let mut tape = Tape::new();
        let obj = objective_on_tape(&mut tape, e.pool, e.student, e.teacher, e.weights, e.terms)
            .expect("pool objective");
        let total = tape.value(obj.total).data()[0];
        if self.curves.last().map(|c| c.0) != Some(e.task) {
            self.curves.push((e.task, Vec::new()));
        }
        self.curves.last_mut().expect("pushed").1.push(total);
    }
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

#[test]
fn pool_loss_is_non_increasing_in_most_runs() {
    let spec = preset("four-domain").unwrap();
    for method in [Method::Dfil, Method::Finetune] {
        let seeds = 0..10u64;
        let mut monotone = 0;
        for seed in seeds.clone() {
            let seq = generate_stream::<f64>(&spec, seed).unwrap();
            let cfg = TrainConfig {
                method,
                seed,
                ..Default::default()
            };
            let mut probe = PoolLoss::default();
            train_observed(&seq, &cfg, &mut probe).unwrap();
            assert_eq!(probe.curves.len(), seq.len());
            assert!(probe
                .curves
                .iter()
                .all(|(_, v)| v.len() == cfg.epochs_per_task));
            if probe.curves.iter().all(|(_, v)| non_increasing(v)) {
                monotone += 1;
            }
        }
        let runs = seeds.count();
        assert!(
            monotone * 10 >= runs * 9,
            "{method:?}: {monotone}/{runs} runs non-increasing"
        );
    }
}

#[test]
fn f32_training_runs_end_to_end() {
    let spec = preset("four-domain").unwrap();
    let seq = generate_stream::<f32>(&spec, 2).unwrap();
    let cfg = TrainConfig {
        epochs_per_task: 3,
        seed: 2,
        ..Default::default()
    };
    let record = train(&seq, &cfg).unwrap();
    assert_eq!(record.matrix.rows().len(), 4);
    assert!(record.final_aa().unwrap().is_finite());
    assert!(record.losses.iter().all(|r| r.components.all_finite()));

    let dir = tempfile::tempdir().unwrap();
    record.save(dir.path()).unwrap();
    let saved = SavedRun::load(dir.path()).unwrap();
    assert_eq!(saved.matrix, record.matrix);
}
