//! Persisted run artifacts.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainError};
use crate::losses::Components;
use crate::metrics::AccuracyMatrix;
use crate::model::Model;
use crate::replay::{write_selection_csv, Selected};
use crate::Scalar;

pub const CONFIG_FILE: &str = "config.json";
pub const MATRIX_FILE: &str = "accuracy_matrix.csv";
pub const LOSSES_FILE: &str = "losses.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn replay_file(task: usize) -> String {
    format!("replay_task{task}.csv")
}

pub fn model_file(task: usize) -> String {
    format!("model_task{task}.dfil")
}

/// Loss components of one optimizer step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    /// 1-based task.
    pub task: usize,
    /// 0-based epoch within the task.
    pub epoch: usize,
    pub batch: usize,
    pub components: Components,
}

/// Everything a training run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord<T> {
    pub config: TrainConfig,
    pub matrix: AccuracyMatrix,
    pub losses: Vec<LossRow>,
    /// Replay selection made after each task; empty when replay is off.
    pub replay: Vec<Vec<Selected<T>>>,
    /// The model evaluated for each row of the matrix.
    pub models: Vec<Model<T>>,
}

/// Per-boundary averages stored as `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub task_names: Vec<String>,
    pub accuracy: Vec<Vec<f64>>,
    pub average_accuracy: Vec<f64>,
    /// `None` after the first task.
    pub average_forgetting: Vec<Option<f64>>,
}

impl RunSummary {
    pub fn from_matrix(method: &str, seed: u64, matrix: &AccuracyMatrix) -> Self {
        let (aa, af) = matrix.trajectory().into_iter().unzip();
        Self {
            method: method.to_string(),
            seed,
            task_names: matrix.task_names.clone(),
            accuracy: matrix.rows().to_vec(),
            average_accuracy: aa,
            average_forgetting: af,
        }
    }

    pub fn final_aa(&self) -> Option<f64> {
        self.average_accuracy.last().copied()
    }

    pub fn final_af(&self) -> Option<f64> {
        self.average_forgetting.last().copied().flatten()
    }
}

impl<T: Scalar> RunRecord<T> {
    pub fn summary(&self) -> RunSummary {
        RunSummary::from_matrix(self.config.method.as_str(), self.config.seed, &self.matrix)
    }

    pub fn final_aa(&self) -> Option<f64> {
        self.summary().final_aa()
    }

    pub fn final_af(&self) -> Option<f64> {
        self.summary().final_af()
    }

    /// Writes every artifact into `dir`, which must exist.
    pub fn save(&self, dir: &Path) -> Result<(), TrainError> {
        std::fs::write(
            dir.join(CONFIG_FILE),
            serde_json::to_string_pretty(&self.config)? + "\n",
        )?;
        std::fs::write(dir.join(MATRIX_FILE), matrix_to_csv(&self.matrix))?;
        std::fs::write(dir.join(LOSSES_FILE), losses_to_csv(&self.losses))?;
        std::fs::write(
            dir.join(SUMMARY_FILE),
            serde_json::to_string_pretty(&self.summary())? + "\n",
        )?;
        for (i, sel) in self.replay.iter().enumerate() {
            if !sel.is_empty() {
                write_selection_csv(&dir.join(replay_file(i + 1)), i + 1, sel)?;
            }
        }
        for (i, m) in self.models.iter().enumerate() {
            m.save(&dir.join(model_file(i + 1)))?;
        }
        Ok(())
    }
}

/// Wide CSV: `after_task,<task names>`, upper triangle left empty.
pub fn matrix_to_csv(m: &AccuracyMatrix) -> String {
    let mut s = String::from("after_task");
    for name in &m.task_names {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (i, row) in m.rows().iter().enumerate() {
        write!(s, "{}", i + 1).expect("write to String");
        for j in 0..m.num_tasks() {
            s.push(',');
            if let Some(v) = row.get(j) {
                write!(s, "{v}").expect("write to String");
            }
        }
        s.push('\n');
    }
    s
}

pub fn matrix_from_csv(text: &str) -> Result<AccuracyMatrix, TrainError> {
    let bad = |line: usize, m: &str| TrainError::Record(format!("{MATRIX_FILE}:{line}: {m}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let mut cols = header.split(',');
    if cols.next() != Some("after_task") {
        return Err(bad(1, "first column must be after_task"));
    }
    let names: Vec<String> = cols.map(str::to_string).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() + 1 {
            return Err(bad(k + 2, "wrong number of fields"));
        }
        let row: Result<Vec<f64>, _> = fields[1..]
            .iter()
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<f64>())
            .collect();
        rows.push(row.map_err(|e| bad(k + 2, &e.to_string()))?);
    }
    AccuracyMatrix::from_rows(names, rows).map_err(|e| TrainError::Record(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn losses_to_csv(rows: &[LossRow]) -> String {
    let mut s = String::from("task,epoch,batch,ce,scl,kd,fd,total\n");
    for r in rows {
        let c = &r.components;
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.task,
            r.epoch,
            r.batch,
            c.ce,
            opt(c.scl),
            opt(c.kd),
            opt(c.fd),
            c.total
        )
        .expect("write to String");
    }
    s
}

pub fn losses_from_csv(text: &str) -> Result<Vec<LossRow>, TrainError> {
    let bad = |line: usize, m: String| TrainError::Record(format!("{LOSSES_FILE}:{line}: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some("task,epoch,batch,ce,scl,kd,fd,total") {
        return Err(bad(1, "unexpected header".into()));
    }
    let num = |line: usize, f: &str| {
        f.parse::<f64>()
            .map_err(|e| bad(line, format!("{f:?}: {e}")))
    };
    let int = |line: usize, f: &str| {
        f.parse::<usize>()
            .map_err(|e| bad(line, format!("{f:?}: {e}")))
    };
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let n = k + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(n, format!("expected 8 fields, got {}", f.len())));
        }
        let maybe = |s: &str| {
            if s.is_empty() {
                Ok(None)
            } else {
                num(n, s).map(Some)
            }
        };
        rows.push(LossRow {
            task: int(n, f[0])?,
            epoch: int(n, f[1])?,
            batch: int(n, f[2])?,
            components: Components {
                ce: num(n, f[3])?,
                scl: maybe(f[4])?,
                kd: maybe(f[5])?,
                fd: maybe(f[6])?,
                total: num(n, f[7])?,
                scl_single_class: false,
            },
        });
    }
    Ok(rows)
}

/// Mean loss components over the batches of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub task: usize,
    pub epoch: usize,
    pub ce: f64,
    pub scl: Option<f64>,
    pub kd: Option<f64>,
    pub fd: Option<f64>,
    pub total: f64,
}

pub fn epoch_curve(rows: &[LossRow]) -> Vec<EpochLoss> {
    let mut out: Vec<EpochLoss> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let (task, epoch) = (rows[start].task, rows[start].epoch);
        let end = start
            + rows[start..]
                .iter()
                .take_while(|r| r.task == task && r.epoch == epoch)
                .count();
        let group = &rows[start..end];
        let n = group.len() as f64;
        let mean = |f: &dyn Fn(&Components) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = group.iter().filter_map(|r| f(&r.components)).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        out.push(EpochLoss {
            task,
            epoch,
            ce: group.iter().map(|r| r.components.ce).sum::<f64>() / n,
            scl: mean(&|c| c.scl),
            kd: mean(&|c| c.kd),
            fd: mean(&|c| c.fd),
            total: group.iter().map(|r| r.components.total).sum::<f64>() / n,
        });
        start = end;
    }
    out
}

/// The parts of a saved run needed for reporting.
#[derive(Clone, Debug, PartialEq)]
pub struct SavedRun {
    pub config: TrainConfig,
    pub matrix: AccuracyMatrix,
    pub matrix_csv: String,
    pub losses: Vec<LossRow>,
}

impl SavedRun {
    pub fn load(dir: &Path) -> Result<Self, TrainError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| TrainError::Record(format!("{}: {e}", dir.join(name).display())))
        };
        let config: TrainConfig = serde_json::from_str(&read(CONFIG_FILE)?)?;
        let matrix_csv = read(MATRIX_FILE)?;
        let matrix = matrix_from_csv(&matrix_csv)?;
        if !matrix.is_complete() {
            return Err(TrainError::Record(format!(
                "accuracy matrix has {} of {} rows",
                matrix.completed(),
                matrix.num_tasks()
            )));
        }
        for i in 1..=matrix.num_tasks() {
            let p = dir.join(model_file(i));
            if !p.is_file() {
                return Err(TrainError::Record(format!("missing {}", p.display())));
            }
        }
        let losses = losses_from_csv(&read(LOSSES_FILE)?)?;
        Ok(Self {
            config,
            matrix,
            matrix_csv,
            losses,
        })
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary::from_matrix(self.config.method.as_str(), self.config.seed, &self.matrix)
    }
}

/// Plain-text accuracy table: one row per trained task, one column per
/// evaluated task, then AA and AF.
pub fn render_table(m: &AccuracyMatrix) -> String {
    let width = m
        .task_names
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max(7);
    let mut s = format!("{:<width$}", "trained");
    for name in &m.task_names {
        write!(s, "  {name:>width$}").expect("write to String");
    }
    writeln!(s, "  {:>7}  {:>7}", "AA", "AF").expect("write to String");
    for (i, (aa, af)) in m.trajectory().into_iter().enumerate() {
        write!(s, "{:<width$}", m.task_names[i]).expect("write to String");
        let row = &m.rows()[i];
        for j in 0..m.num_tasks() {
            match row.get(j) {
                Some(v) => write!(s, "  {v:>width$.2}"),
                None => write!(s, "  {:>width$}", "-"),
            }
            .expect("write to String");
        }
        let af = af.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        writeln!(s, "  {aa:>7.2}  {af:>7}").expect("write to String");
    }
    s
}

/// Markdown rendering of the same table.
pub fn render_markdown(m: &AccuracyMatrix) -> String {
    let mut s = String::from("| trained |");
    for name in &m.task_names {
        write!(s, " {name} |").expect("write to String");
    }
    s.push_str(" AA | AF |\n|---|");
    s.push_str(&"---|".repeat(m.num_tasks() + 2));
    s.push('\n');
    for (i, (aa, af)) in m.trajectory().into_iter().enumerate() {
        write!(s, "| {} |", m.task_names[i]).expect("write to String");
        for j in 0..m.num_tasks() {
            match m.rows()[i].get(j) {
                Some(v) => write!(s, " {v:.2} |"),
                None => write!(s, " |"),
            }
            .expect("write to String");
        }
        let af = af.map(|v| format!("{v:.2}")).unwrap_or_default();
        writeln!(s, " {aa:.2} | {af} |").expect("write to String");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AccuracyMatrix {
        AccuracyMatrix::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![90.0], vec![80.5, 70.25], vec![60.0, 65.0, 99.125]],
        )
        .unwrap()
    }

    #[test]
    fn matrix_csv_round_trip() {
        let m = sample();
        let text = matrix_to_csv(&m);
        assert_eq!(text.lines().next(), Some("after_task,a,b,c"));
        assert_eq!(text.lines().nth(1), Some("1,90,,"));
        assert_eq!(matrix_from_csv(&text).unwrap(), m);
        assert!(matrix_from_csv("task,a\n1,2\n").is_err());
        assert!(matrix_from_csv("after_task,a,b\n1,2\n").is_err());
    }

    #[test]
    fn markdown_has_one_row_per_task() {
        let md = render_markdown(&sample());
        let body: Vec<&str> = md.lines().skip(2).collect();
        assert_eq!(body.len(), 3);
        assert!(body[2].contains("74.71"));
        let table = render_table(&sample());
        assert_eq!(table.lines().count(), 4);
    }

    #[test]
    fn loss_csv_leaves_absent_terms_blank() {
        let rows = [LossRow {
            task: 1,
            epoch: 0,
            batch: 2,
            components: Components {
                ce: 1.5,
                scl: Some(0.25),
                kd: None,
                fd: None,
                total: 1.75,
                scl_single_class: false,
            },
        }];
        let text = losses_to_csv(&rows);
        assert_eq!(
            text,
            "task,epoch,batch,ce,scl,kd,fd,total\n1,0,2,1.5,0.25,,,1.75\n"
        );
        assert_eq!(losses_from_csv(&text).unwrap(), rows);
        assert!(losses_from_csv("task,epoch\n").is_err());
    }

    #[test]
    fn epoch_curve_averages_present_terms() {
        let row = |epoch, batch, ce, kd| LossRow {
            task: 2,
            epoch,
            batch,
            components: Components {
                ce,
                kd,
                total: ce + kd.unwrap_or(0.0),
                ..Default::default()
            },
        };
        let rows = [
            row(0, 0, 1.0, Some(2.0)),
            row(0, 1, 3.0, None),
            row(1, 0, 0.5, None),
        ];
        let curve = epoch_curve(&rows);
        assert_eq!(curve.len(), 2);
        assert_eq!(curve[0].ce, 2.0);
        assert_eq!(curve[0].kd, Some(2.0));
        assert_eq!(curve[0].total, 3.0);
        assert_eq!(curve[1].kd, None);
    }
}
