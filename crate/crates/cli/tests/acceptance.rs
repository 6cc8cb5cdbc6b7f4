//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dfil_core::datasets::{generate_stream, preset};
use dfil_core::trainer::{
    train, train_observed, BatchEvent, Method, TaskEvent, TrainConfig, TrainObserver,
};
use dfil_core::verify::{self, Check, Suite};
use dfil_core::TaskSequence;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn worst(checks: &[&Check]) -> String {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.to_string())
        .collect();
    if !failed.is_empty() {
        return failed.join("; ");
    }
    checks
        .iter()
        .map(|c| format!("{} err {:.2e}", c.name, c.max_error))
        .collect::<Vec<_>>()
        .join(", ")
}

fn suite_outcome(checks: &[&Check], extra: &str) -> Outcome {
    let ok = !checks.is_empty() && checks.iter().all(|c| c.passed);
    outcome(
        ok,
        format!("{} checks; {}{extra}", checks.len(), worst(checks)),
    )
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let checks = match verify::run(Suite::Grad) {
        Ok(c) => c,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let mut o = suite_outcome(
        &checks.iter().collect::<Vec<_>>(),
        &format!("; {elapsed:.2?}"),
    );
    o.passed &= elapsed < Duration::from_secs(30);
    o
}

fn suite(s: Suite, filter: impl Fn(&Check) -> bool) -> Outcome {
    match verify::run(s) {
        Ok(c) => suite_outcome(&c.iter().filter(|c| filter(c)).collect::<Vec<_>>(), ""),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

struct Trend {
    aa: Vec<f64>,
    af: Vec<f64>,
}

fn runs(streams: &[TaskSequence], method: Method, replay: bool) -> Result<Trend, String> {
    let mut t = Trend {
        aa: vec![],
        af: vec![],
    };
    for (seq, seed) in streams.iter().zip(SEEDS) {
        let cfg = TrainConfig {
            method,
            seed,
            replay_enabled: replay,
            ..Default::default()
        };
        let r = train(seq, &cfg).map_err(|e| e.to_string())?;
        t.aa.push(r.final_aa().ok_or("missing AA")?);
        t.af.push(r.final_af().ok_or("missing AF")?);
    }
    Ok(t)
}

fn trends(streams: &[TaskSequence]) -> Result<(Outcome, Outcome), String> {
    let start = Instant::now();
    let dfil = runs(streams, Method::Dfil, true)?;
    let er = runs(streams, Method::Er, true)?;
    let ft = runs(streams, Method::Finetune, true)?;
    let elapsed = start.elapsed();
    let (af_d, af_e, af_f) = (median(dfil.af.clone()), median(er.af), median(ft.af));
    let (aa_d, aa_f) = (median(dfil.aa), median(ft.aa));
    let c6 = outcome(
        af_f > 10.0 && af_d < af_e && af_e < af_f && aa_d - aa_f >= 5.0 && elapsed < Duration::from_secs(300),
        format!(
            "median AF dfil {af_d:.2} < er {af_e:.2} < ft {af_f:.2} (ft > 10); median AA dfil {aa_d:.2} vs ft {aa_f:.2} (gap {:.2} >= 5); {elapsed:.2?}",
            aa_d - aa_f
        ),
    );
    let norep = runs(streams, Method::Dfil, false)?;
    let af_n = median(norep.af);
    let c7 = outcome(
        af_n > af_d,
        format!("median AF without replay {af_n:.2} > with replay {af_d:.2}"),
    );
    Ok((c6, c7))
}

fn dfil_cmd(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_dfil"))
        .args(args)
        .env_remove("DFIL_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?} exited {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        ))
    }
}

fn determinism() -> Result<Outcome, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    dfil_cmd(&[
        "generate",
        "--preset",
        "four-domain",
        "--seed",
        "11",
        "--out",
        &p("data"),
    ])?;
    for run in ["a", "b"] {
        dfil_cmd(&[
            "train",
            "--data",
            &p("data"),
            "--method",
            "dfil",
            "--seed",
            "11",
            "--out",
            &p(run),
        ])?;
    }
    let read = |run: &str| {
        std::fs::read(Path::new(&p(run)).join("accuracy_matrix.csv")).map_err(|e| e.to_string())
    };
    let (a, b) = (read("a")?, read("b")?);
    Ok(outcome(
        a == b && !a.is_empty(),
        format!(
            "accuracy_matrix.csv {} vs {} bytes, identical: {}",
            a.len(),
            b.len(),
            a == b
        ),
    ))
}

#[derive(Default)]
struct FreezeProbe {
    task: usize,
    hash: Option<u64>,
    student_at_end: Option<u64>,
    batches: usize,
    violations: Vec<String>,
    sizes: Vec<usize>,
    k: usize,
}

impl TrainObserver<f64> for FreezeProbe {
    fn on_batch(&mut self, e: &BatchEvent<'_, f64>) {
        self.batches += 1;
        if e.task != self.task {
            self.task = e.task;
            self.hash = e.teacher.map(|t| t.fingerprint());
            if e.task > 1 && self.hash != self.student_at_end {
                self.violations
                    .push(format!("task {} teacher is not the previous model", e.task));
            }
        }
        let now = e.teacher.map(|t| t.fingerprint());
        if e.task > 1 && now.is_none() {
            self.violations
                .push(format!("task {} has no teacher", e.task));
        }
        if now != self.hash {
            self.violations.push(format!(
                "teacher changed in task {} epoch {} batch {}",
                e.task, e.epoch, e.batch
            ));
        }
    }

    fn on_task_end(&mut self, e: &TaskEvent<'_, f64>) {
        self.student_at_end = Some(e.model.fingerprint());
        self.sizes.push(e.replay.len());
        if e.replay.len() != e.task * self.k {
            self.violations.push(format!(
                "replay size {} after task {}",
                e.replay.len(),
                e.task
            ));
        }
    }
}

fn teacher_freeze(seq: &TaskSequence) -> Result<Outcome, String> {
    let cfg = TrainConfig {
        seed: 3,
        ..Default::default()
    };
    let mut probe = FreezeProbe {
        k: cfg.replay_size,
        ..Default::default()
    };
    train_observed(seq, &cfg, &mut probe).map_err(|e| e.to_string())?;
    let ok = probe.violations.is_empty() && probe.sizes.len() == seq.len() && probe.batches > 0;
    let detail = if probe.violations.is_empty() {
        format!(
            "{} batches checked; replay sizes {:?} (K = {})",
            probe.batches, probe.sizes, probe.k
        )
    } else {
        probe.violations.join("; ")
    };
    Ok(outcome(ok, detail))
}

fn report(n: usize, title: &str, result: Result<Outcome, String>) -> bool {
    let o = result.unwrap_or_else(|e| outcome(false, format!("error: {e}")));
    println!(
        "{} criterion {n}: {title}: {}",
        if o.passed { "PASS" } else { "FAIL" },
        o.detail
    );
    o.passed
}

fn main() {
    let mut all = true;
    all &= report(1, "gradient correctness", Ok(gradients()));
    all &= report(
        2,
        "loss-formula oracles",
        Ok(suite(Suite::Losses, |_| true)),
    );
    all &= report(
        3,
        "replay-selection oracle",
        Ok(suite(Suite::Replay, |_| true)),
    );
    all &= report(
        4,
        "entropy values",
        Ok(suite(Suite::Metrics, |c| c.name.starts_with("H("))),
    );
    all &= report(
        5,
        "metric formulas",
        Ok(suite(Suite::Metrics, |c| !c.name.starts_with("H("))),
    );

    let streams: Result<Vec<TaskSequence>, String> = preset("four-domain")
        .map_err(|e| e.to_string())
        .and_then(|spec| {
            SEEDS
                .iter()
                .map(|&s| generate_stream(&spec, s).map_err(|e| e.to_string()))
                .collect()
        });
    match streams.and_then(|s| trends(&s).map(|t| (s, t))) {
        Ok((streams, (c6, c7))) => {
            all &= report(6, "forgetting trend", Ok(c6));
            all &= report(7, "replay ablation", Ok(c7));
            all &= report(8, "determinism", determinism());
            all &= report(
                9,
                "teacher freeze and replay growth",
                teacher_freeze(&streams[0]),
            );
        }
        Err(e) => {
            for (n, t) in [(6, "forgetting trend"), (7, "replay ablation")] {
                all &= report(n, t, Err(e.clone()));
            }
            all &= report(8, "determinism", determinism());
            all &= report(9, "teacher freeze and replay growth", Err(e));
        }
    }
    if !all {
        std::process::exit(1);
    }
}
