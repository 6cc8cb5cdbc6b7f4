//! Synthetic domain streams and CSV interchange.
//!
//! Every domain shares one "real" Gaussian mixture; its "fake" class is the
//! same mixture translated by a domain-specific shift and widened along a
//! few axes. Later domains can be capped to a few-shot training budget.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::{KernelError, Tensor};
use crate::Scalar;

const PRESETS_JSON: &str = include_str!("../presets.json");
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("generation: {0}")]
    Generation(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("validation: {0}")]
    Validation(String),
    #[error("unknown preset {name:?} (available: {available})")]
    UnknownPreset { name: String, available: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Labeled samples of one domain and split; both classes always present.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    domain: String,
    split: Split,
    inputs: Tensor<T>,
    labels: Vec<u8>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        domain: String,
        split: Split,
        inputs: Tensor<T>,
        labels: Vec<u8>,
    ) -> Result<Self, DataError> {
        if inputs.rank() != 2 || inputs.rows() != labels.len() {
            return Err(DataError::Validation(format!(
                "inputs {:?} for {} labels",
                inputs.shape(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(DataError::Validation(format!(
                "label {bad} not in {{0, 1}}"
            )));
        }
        for class in 0..2u8 {
            if !labels.contains(&class) {
                return Err(DataError::Validation(format!(
                    "{domain} ({split:?}) has no samples of class {class}"
                )));
            }
        }
        Ok(Self {
            domain,
            split,
            inputs,
            labels,
        })
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn inputs(&self) -> &Tensor<T> {
        &self.inputs
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn class_count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&y| y == class).count()
    }

    /// Concatenates datasets of equal width in order.
    pub fn concat(domain: String, split: Split, parts: &[&Dataset<T>]) -> Result<Self, DataError> {
        let first = parts
            .first()
            .ok_or_else(|| DataError::Validation("nothing to concatenate".into()))?;
        let cols = first.input_dim();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.input_dim() != cols {
                return Err(DataError::Validation(format!(
                    "width {} != {cols}",
                    p.input_dim()
                )));
            }
            data.extend_from_slice(p.inputs.data());
            labels.extend_from_slice(&p.labels);
        }
        let inputs = Tensor::from_vec(vec![labels.len(), cols], data)?;
        Self::new(domain, split, inputs, labels)
    }

    pub fn to_csv_string(&self) -> String {
        let d = self.input_dim();
        let mut s = String::with_capacity(self.len() * d * 20);
        let header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        s.push_str(&header.join(","));
        s.push_str(",label\n");
        for i in 0..self.len() {
            for v in self.inputs.row(i) {
                write!(s, "{},", v.as_f64()).expect("write to String");
            }
            writeln!(s, "{}", self.labels[i]).expect("write to String");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Reads `x0,...,x{d-1},label` rows. The domain tag is the file stem.
pub fn load_csv<T: Scalar>(path: &Path, split: Split) -> Result<Dataset<T>, DataError> {
    let shown = path.display().to_string();
    let parse_err = |line: u64, message: String| DataError::Parse {
        path: shown.clone(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let d = headers.len().saturating_sub(1);
    let expected: Vec<String> = (0..d)
        .map(|j| format!("x{j}"))
        .chain(["label".to_string()])
        .collect();
    if d == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(parse_err(
            1,
            format!("header must be x0,...,x{{d-1}},label; got {headers:?}"),
        ));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != d + 1 {
            return Err(parse_err(
                line,
                format!("expected {} fields, got {}", d + 1, record.len()),
            ));
        }
        for field in record.iter().take(d) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value {field:?}")));
            }
            data.push(T::lit(v));
        }
        let label: u8 = record[d]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad label {:?}", &record[d])))?;
        if label > 1 {
            return Err(DataError::Validation(format!(
                "{shown}:{line}: label {label} not in {{0, 1}}"
            )));
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(DataError::Validation(format!("{shown}: no rows")));
    }
    let inputs = Tensor::from_vec(vec![labels.len(), d], data)?;
    let domain = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(domain, split, inputs, labels)
}

/// One incremental task: a domain's training and test data.
#[derive(Clone, Debug, PartialEq)]
pub struct Task<T> {
    pub name: String,
    pub train: Dataset<T>,
    pub test: Dataset<T>,
}

/// Ordered, non-empty sequence of tasks sharing one input width.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSequence<T> {
    tasks: Vec<Task<T>>,
}

impl<T: Scalar> TaskSequence<T> {
    pub fn new(tasks: Vec<Task<T>>) -> Result<Self, DataError> {
        let first = tasks
            .first()
            .ok_or_else(|| DataError::Validation("task sequence is empty".into()))?;
        let d = first.train.input_dim();
        for t in &tasks {
            if t.train.input_dim() != d || t.test.input_dim() != d {
                return Err(DataError::Validation(format!(
                    "task {} has width {} / {}, expected {d}",
                    t.name,
                    t.train.input_dim(),
                    t.test.input_dim()
                )));
            }
        }
        Ok(Self { tasks })
    }

    pub fn tasks(&self) -> &[Task<T>] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.tasks[0].train.input_dim()
    }

    pub fn names(&self) -> Vec<String> {
        self.tasks.iter().map(|t| t.name.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    /// Per-axis standard deviations (diagonal covariance).
    pub scale: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mixture {
    pub components: Vec<GaussianComponent>,
}

/// The fake class of a domain relative to the shared real mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FakeShift {
    pub shift: Vec<f64>,
    pub scale_factor: f64,
    pub scaled_axes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub name: String,
    pub input_dim: usize,
    pub real: Mixture,
    pub fake: FakeShift,
    /// Training samples per class before any few-shot cap.
    pub n_train: usize,
    /// Test samples per class.
    pub n_test: usize,
    pub seed_offset: u64,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let err = |m: String| Err(DataError::Generation(format!("{}: {m}", self.name)));
        let d = self.input_dim;
        if d == 0 {
            return err("input_dim must be positive".into());
        }
        if self.n_train < 4 || self.n_test < 4 {
            return err(format!(
                "need >= 4 samples per class, got train {} / test {}",
                self.n_train, self.n_test
            ));
        }
        if self.real.components.is_empty() {
            return err("real mixture has no components".into());
        }
        let total: f64 = self.real.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return err(format!("mixture weights sum to {total}"));
        }
        for c in &self.real.components {
            if c.mean.len() != d || c.scale.len() != d {
                return err("component dimension mismatch".into());
            }
            if !(c.weight > 0.0) {
                return err(format!("component weight {} must be > 0", c.weight));
            }
            if c.scale.iter().chain(&c.mean).any(|v| !v.is_finite())
                || c.scale.iter().any(|&s| s <= 0.0)
            {
                return err("scales must be finite and > 0".into());
            }
        }
        if self.fake.shift.len() != d || self.fake.shift.iter().any(|v| !v.is_finite()) {
            return err("shift dimension mismatch".into());
        }
        if !(self.fake.scale_factor > 0.0) || !self.fake.scale_factor.is_finite() {
            return err("scale_factor must be > 0".into());
        }
        if let Some(a) = self.fake.scaled_axes.iter().find(|&&a| a >= d) {
            return err(format!("scaled axis {a} out of range"));
        }
        Ok(())
    }
}

/// A named list of domains plus the training cap applied after the first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub name: String,
    /// Total training samples kept for every domain after the first.
    #[serde(default)]
    pub few_shot_cap: Option<usize>,
    pub domains: Vec<DomainSpec>,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.domains.is_empty() {
            return Err(DataError::Generation("stream has no domains".into()));
        }
        let d = self.domains[0].input_dim;
        for spec in &self.domains {
            spec.validate()?;
            if spec.input_dim != d {
                return Err(DataError::Generation(format!(
                    "{}: input_dim {} differs from {d}",
                    spec.name, spec.input_dim
                )));
            }
        }
        if let Some(cap) = self.few_shot_cap {
            if cap < 8 || cap % 2 != 0 {
                return Err(DataError::Generation(format!(
                    "few_shot_cap must be even and >= 8, got {cap}"
                )));
            }
        }
        Ok(())
    }
}

/// The built-in preset catalog.
pub fn presets() -> BTreeMap<String, StreamSpec> {
    serde_json::from_str(PRESETS_JSON).expect("bundled presets.json is valid")
}

pub fn preset(name: &str) -> Result<StreamSpec, DataError> {
    let mut all = presets();
    all.remove(name).ok_or_else(|| DataError::UnknownPreset {
        name: name.to_string(),
        available: presets().keys().cloned().collect::<Vec<_>>().join(", "),
    })
}

fn draw<R: Rng>(rng: &mut R, mixture: &Mixture, shift: Option<&FakeShift>) -> Vec<f64> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut comp = mixture.components.last().expect("validated non-empty");
    for c in &mixture.components {
        acc += c.weight;
        if u < acc {
            comp = c;
            break;
        }
    }
    (0..comp.mean.len())
        .map(|j| {
            let z: f64 = StandardNormal.sample(rng);
            match shift {
                None => comp.mean[j] + comp.scale[j] * z,
                Some(f) => {
                    let widen = if f.scaled_axes.contains(&j) {
                        f.scale_factor
                    } else {
                        1.0
                    };
                    comp.mean[j] + f.shift[j] + comp.scale[j] * widen * z
                }
            }
        })
        .collect()
}

/// Samples `per_class` rows of each class, interleaved real/fake.
fn sample_split<T: Scalar>(
    spec: &DomainSpec,
    real_rng: &mut ChaCha8Rng,
    fake_rng: &mut ChaCha8Rng,
    per_class: usize,
    split: Split,
) -> Result<Dataset<T>, DataError> {
    let mut data = Vec::with_capacity(2 * per_class * spec.input_dim);
    let mut labels = Vec::with_capacity(2 * per_class);
    for _ in 0..per_class {
        data.extend(draw(real_rng, &spec.real, None));
        labels.push(0);
        data.extend(draw(fake_rng, &spec.real, Some(&spec.fake)));
        labels.push(1);
    }
    let inputs = Tensor::from_vec(
        vec![labels.len(), spec.input_dim],
        data.into_iter().map(T::lit).collect(),
    )?;
    Dataset::new(spec.name.clone(), split, inputs, labels)
}

/// Deterministically samples every domain of `stream`.
///
/// Each domain draws from two ChaCha8 streams (real and fake) keyed by
/// `seed` and its `seed_offset`; training rows come first, then test rows,
/// so the cap never changes the test set.
pub fn generate_stream<T: Scalar>(
    stream: &StreamSpec,
    seed: u64,
) -> Result<TaskSequence<T>, DataError> {
    stream.validate()?;
    let mut tasks = Vec::with_capacity(stream.domains.len());
    for (i, spec) in stream.domains.iter().enumerate() {
        let mut real_rng = ChaCha8Rng::seed_from_u64(seed);
        real_rng.set_stream(2 * spec.seed_offset);
        let mut fake_rng = ChaCha8Rng::seed_from_u64(seed);
        fake_rng.set_stream(2 * spec.seed_offset + 1);

        let train_per_class = match stream.few_shot_cap {
            Some(cap) if i > 0 => (cap / 2).min(spec.n_train),
            _ => spec.n_train,
        };
        let train = sample_split(
            spec,
            &mut real_rng,
            &mut fake_rng,
            spec.n_train,
            Split::Train,
        )?;
        let test = sample_split(spec, &mut real_rng, &mut fake_rng, spec.n_test, Split::Test)?;
        let keep: Vec<usize> = (0..2 * train_per_class).collect();
        let train = Dataset::new(
            spec.name.clone(),
            Split::Train,
            train.inputs.select_rows(&keep),
            train.labels[..keep.len()].to_vec(),
        )?;
        tasks.push(Task {
            name: spec.name.clone(),
            train,
            test,
        });
    }
    TaskSequence::new(tasks)
}

/// On-disk index of a generated stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamManifest {
    pub stream: String,
    pub seed: u64,
    pub input_dim: usize,
    pub tasks: Vec<TaskFiles>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskFiles {
    pub name: String,
    pub train: String,
    pub test: String,
    pub n_train: usize,
    pub n_test: usize,
}

/// Writes `task<i>_<name>_{train,test}.csv` plus `manifest.json`.
pub fn write_stream<T: Scalar>(
    seq: &TaskSequence<T>,
    stream_name: &str,
    seed: u64,
    dir: &Path,
) -> Result<StreamManifest, DataError> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(seq.len());
    for (i, task) in seq.tasks().iter().enumerate() {
        let stem = format!("task{}_{}", i + 1, sanitize(&task.name));
        let train = format!("{stem}_train.csv");
        let test = format!("{stem}_test.csv");
        task.train.write_csv(&dir.join(&train))?;
        task.test.write_csv(&dir.join(&test))?;
        files.push(TaskFiles {
            name: task.name.clone(),
            train,
            test,
            n_train: task.train.len(),
            n_test: task.test.len(),
        });
    }
    let manifest = StreamManifest {
        stream: stream_name.to_string(),
        seed,
        input_dim: seq.input_dim(),
        tasks: files,
    };
    std::fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}

/// Loads a directory written by [`write_stream`].
pub fn read_stream<T: Scalar>(dir: &Path) -> Result<(StreamManifest, TaskSequence<T>), DataError> {
    let manifest_path: PathBuf = dir.join(MANIFEST_FILE);
    let manifest: StreamManifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    for t in &manifest.tasks {
        let mut train = load_csv::<T>(&dir.join(&t.train), Split::Train)?;
        let mut test = load_csv::<T>(&dir.join(&t.test), Split::Test)?;
        train.domain = t.name.clone();
        test.domain = t.name.clone();
        tasks.push(Task {
            name: t.name.clone(),
            train,
            test,
        });
    }
    Ok((manifest, TaskSequence::new(tasks)?))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn minimal_csv_loads() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "tiny.csv",
            "x0,x1,label\n0.5,1.5,0\n-2,3e-1,1\n",
        );
        let d = load_csv::<f64>(&p, Split::Train).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.domain(), "tiny");
        assert_eq!(d.inputs().row(1), &[-2.0, 0.3]);
        assert_eq!(d.labels(), &[0, 1]);
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "bad_label.csv", "x0,label\n0.5,0\n1.0,2\n");
        assert!(matches!(
            load_csv::<f64>(&p, Split::Train),
            Err(DataError::Validation(_))
        ));

        let p = write(dir.path(), "one_class.csv", "x0,label\n0.5,0\n1.0,0\n");
        assert!(matches!(
            load_csv::<f64>(&p, Split::Train),
            Err(DataError::Validation(_))
        ));

        let p = write(dir.path(), "bad_num.csv", "x0,label\n0.5,0\nabc,1\n");
        match load_csv::<f64>(&p, Split::Train) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }

        let p = write(dir.path(), "short.csv", "x0,x1,label\n0.5,0,1\n1.0,1\n");
        assert!(matches!(
            load_csv::<f64>(&p, Split::Train),
            Err(DataError::Parse { line: 3, .. })
        ));

        let p = write(dir.path(), "header.csv", "a,b,label\n0.5,0,1\n");
        assert!(matches!(
            load_csv::<f64>(&p, Split::Train),
            Err(DataError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let seq = generate_stream::<f64>(&preset("four-domain").unwrap(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let task = &seq.tasks()[1];
        let p = dir.path().join("x.csv");
        task.test.write_csv(&p).unwrap();
        let mut back = load_csv::<f64>(&p, Split::Test).unwrap();
        back.domain = task.test.domain.clone();
        assert_eq!(back, task.test);
    }

    #[test]
    fn generation_is_deterministic_and_capped() {
        let spec = preset("four-domain").unwrap();
        let a = generate_stream::<f64>(&spec, 7).unwrap();
        let b = generate_stream::<f64>(&spec, 7).unwrap();
        let c = generate_stream::<f64>(&spec, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 4);
        assert_eq!(a.tasks()[0].train.len(), 800);
        assert_eq!(a.tasks()[0].test.len(), 400);
        for t in &a.tasks()[1..] {
            assert_eq!(t.train.len(), 200);
            assert_eq!(t.train.class_count(0), 100);
            assert_eq!(t.test.len(), 400);
        }
        // the cap only truncates: uncapped train shares its prefix
        let uncapped = generate_stream::<f64>(
            &StreamSpec {
                few_shot_cap: None,
                ..spec
            },
            7,
        )
        .unwrap();
        assert_eq!(uncapped.tasks()[1].test, a.tasks()[1].test);
        assert_eq!(
            uncapped.tasks()[1].train.inputs().row(5),
            a.tasks()[1].train.inputs().row(5)
        );
    }

    #[test]
    fn single_domain_gives_single_task() {
        let seq = generate_stream::<f64>(&preset("single-domain").unwrap(), 1).unwrap();
        assert_eq!(seq.len(), 1);
    }

    #[test]
    fn real_class_marginal_matches_across_domains() {
        let spec = preset("four-domain").unwrap();
        let seq = generate_stream::<f64>(&spec, 11).unwrap();
        // per-axis real-class means of the test sets agree within 3σ/√n
        let mean_of = |d: &Dataset<f64>| -> Vec<f64> {
            let rows: Vec<usize> = (0..d.len()).filter(|&i| d.labels()[i] == 0).collect();
            let n = rows.len() as f64;
            (0..d.input_dim())
                .map(|j| rows.iter().map(|&i| d.inputs().get(i, j)).sum::<f64>() / n)
                .collect()
        };
        let base = mean_of(&seq.tasks()[0].test);
        let n = seq.tasks()[0].test.class_count(0) as f64;
        let comps = &spec.domains[0].real.components;
        for t in &seq.tasks()[1..] {
            let m = mean_of(&t.test);
            for j in 0..m.len() {
                // mixture std along axis j
                let mu: f64 = comps.iter().map(|c| c.weight * c.mean[j]).sum();
                let var: f64 = comps
                    .iter()
                    .map(|c| c.weight * (c.scale[j].powi(2) + (c.mean[j] - mu).powi(2)))
                    .sum();
                // difference of two independent means
                let bound = 3.0 * (2.0 * var).sqrt() / n.sqrt();
                assert!(
                    (m[j] - base[j]).abs() < bound,
                    "axis {j}: {} vs {}",
                    m[j],
                    base[j]
                );
            }
        }
    }

    #[test]
    fn degenerate_specs_rejected() {
        let mut spec = preset("four-domain").unwrap();
        spec.domains[0].real.components[0].weight = 0.9;
        assert!(matches!(
            generate_stream::<f64>(&spec, 1),
            Err(DataError::Generation(_))
        ));
        let mut spec = preset("four-domain").unwrap();
        spec.domains[1].real.components[0].scale[0] = 0.0;
        assert!(generate_stream::<f64>(&spec, 1).is_err());
        let mut spec = preset("four-domain").unwrap();
        spec.domains[0].n_train = 3;
        assert!(generate_stream::<f64>(&spec, 1).is_err());
        assert!(matches!(
            preset("nope"),
            Err(DataError::UnknownPreset { .. })
        ));
    }

    #[test]
    fn stream_directory_round_trip() {
        let seq = generate_stream::<f64>(&preset("four-domain").unwrap(), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_stream(&seq, "four-domain", 5, dir.path()).unwrap();
        assert_eq!(manifest.tasks.len(), 4);
        let (m2, back) = read_stream::<f64>(dir.path()).unwrap();
        assert_eq!(m2, manifest);
        assert_eq!(back, seq);
    }
}
