//! Accuracy, average accuracy, average forgetting and ROC AUC.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("row {row} of the accuracy matrix is incomplete")]
    IncompleteRow { row: usize },
    #[error("AUC needs both classes; got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
}

/// Percentage of predictions equal to their labels.
pub fn acc(preds: &[u8], labels: &[u8]) -> Result<f64, MetricError> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(MetricError::Parameter(format!(
            "need equal non-zero lengths, got {} predictions and {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * correct as f64 / preds.len() as f64)
}

/// Lower-triangular record: `acc[i][j]` is the accuracy on task `j` after
/// training through task `i` (both 1-based in the accessors).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    pub task_names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(task_names: Vec<String>) -> Self {
        Self {
            task_names,
            rows: Vec::new(),
        }
    }

    /// Rebuilds a matrix from stored rows, checking the triangular shape.
    pub fn from_rows(task_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let mut m = Self::new(task_names);
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    pub fn num_tasks(&self) -> usize {
        self.task_names.len()
    }

    /// Number of rows recorded so far.
    pub fn completed(&self) -> usize {
        self.rows.len()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() == self.task_names.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Appends the evaluation after the next task; row `i` needs `i` entries.
    pub fn push_row(&mut self, row: Vec<f64>) -> Result<(), MetricError> {
        let i = self.rows.len() + 1;
        if i > self.task_names.len() {
            return Err(MetricError::Parameter(format!(
                "matrix already holds {} rows",
                self.task_names.len()
            )));
        }
        if row.len() != i {
            return Err(MetricError::IncompleteRow { row: i });
        }
        if let Some(bad) = row.iter().find(|v| !(0.0..=100.0).contains(*v)) {
            return Err(MetricError::Parameter(format!(
                "accuracy {bad} outside [0, 100]"
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn get(&self, after_task: usize, task: usize) -> Option<f64> {
        self.rows
            .get(after_task.checked_sub(1)?)
            .and_then(|r| r.get(task.checked_sub(1)?))
            .copied()
    }

    fn row(&self, after_task: usize) -> Result<&[f64], MetricError> {
        if after_task == 0 {
            return Err(MetricError::Parameter("tasks are 1-based".into()));
        }
        self.rows
            .get(after_task - 1)
            .map(Vec::as_slice)
            .ok_or(MetricError::IncompleteRow { row: after_task })
    }

    pub fn average_accuracy(&self, after_task: usize) -> Result<f64, MetricError> {
        let row = self.row(after_task)?;
        Ok(row.iter().sum::<f64>() / row.len() as f64)
    }

    /// Mean first-minus-current accuracy over the tasks before `after_task`.
    /// Negative values (backward transfer) are kept.
    pub fn average_forgetting(&self, after_task: usize) -> Result<f64, MetricError> {
        if after_task < 2 {
            return Err(MetricError::Parameter(format!(
                "forgetting needs at least 2 tasks, got {after_task}"
            )));
        }
        let row = self.row(after_task)?;
        let drops: f64 = (1..after_task)
            .map(|j| self.rows[j - 1][j - 1] - row[j - 1])
            .sum();
        Ok(drops / (after_task - 1) as f64)
    }

    /// `(AA, AF)` after every completed task; AF is `None` for the first.
    pub fn trajectory(&self) -> Vec<(f64, Option<f64>)> {
        (1..=self.completed())
            .map(|i| {
                (
                    self.average_accuracy(i).expect("row exists"),
                    (i >= 2).then(|| self.average_forgetting(i).expect("row exists")),
                )
            })
            .collect()
    }
}

/// ROC AUC as the normalised Mann-Whitney statistic, ties counted as ½.
///
/// Computed from average ranks of the pooled scores; `labels` use 1 for the
/// positive (fake) class.
pub fn auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::Parameter(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::Parameter("non-finite score".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass {
            positives,
            negatives,
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Sum of 1-based average ranks of the positives, doubled to stay integral.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share (start + 1 + end) / 2
        let twice_avg = (start + 1 + end) as u128;
        let pos_in_group = order[start..end]
            .iter()
            .filter(|&&i| labels[i] == 1)
            .count() as u128;
        twice_rank_sum += twice_avg * pos_in_group;
        start = end;
    }
    let p = positives as u128;
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2.0 * positives as f64 * negatives as f64))
}
