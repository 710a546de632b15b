//! Task streams: synthetic Gaussian class blobs or CSV files.
//!
//! Synthetic classes get template means spread on a circle of radius
//! `class_separation` in the first two feature coordinates (on a line when
//! `dim == 1`). Task `t` then shifts every coordinate of its class means by
//! `drift[t]`, and flips a `label_noise[t]` fraction of its training labels
//! to another class of the same task. Each class gets `samples_per_class`
//! training samples plus a disjoint test split with the same distribution
//! making up `test_fraction` of the class total.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::seeds::{named_rng, RngStream};
use crate::error::{Error, Result};
use crate::models::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamSource {
    SyntheticGaussian,
    Csv { train: PathBuf, test: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub source: StreamSource,
    pub num_tasks: usize,
    pub classes_per_task: usize,
    pub samples_per_class: usize,
    pub dim: usize,
    pub batch_size: usize,
    /// Per-task offset added to every coordinate of the class means.
    pub drift: Vec<f64>,
    /// Per-task probability of flipping a training label.
    pub label_noise: Vec<f64>,
    pub class_separation: f64,
    pub cluster_std: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for StreamSpec {
    fn default() -> Self {
        StreamSpec {
            source: StreamSource::SyntheticGaussian,
            num_tasks: 5,
            classes_per_task: 2,
            samples_per_class: 100,
            dim: 2,
            batch_size: 10,
            drift: Vec::new(),
            label_noise: Vec::new(),
            class_separation: 3.0,
            cluster_std: 1.0,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if let StreamSource::SyntheticGaussian = self.source {
            if self.num_tasks < 2 {
                return Err(Error::invalid("a stream needs at least 2 tasks"));
            }
            if self.classes_per_task == 0 || self.samples_per_class == 0 || self.dim == 0 {
                return Err(Error::invalid(
                    "classes_per_task, samples_per_class and dim must be >= 1",
                ));
            }
            if !(0.0..1.0).contains(&self.test_fraction) {
                return Err(Error::invalid("test_fraction must lie in [0, 1)"));
            }
            if !(self.cluster_std > 0.0) {
                return Err(Error::invalid("cluster_std must be > 0"));
            }
            if self.label_noise.iter().any(|r| !(0.0..=1.0).contains(r)) {
                return Err(Error::invalid("label_noise rates must lie in [0, 1]"));
            }
            if self.drift.iter().any(|d| !d.is_finite()) {
                return Err(Error::invalid("drift offsets must be finite"));
            }
        }
        Ok(())
    }

    pub fn drift_for(&self, task: usize) -> f64 {
        self.drift.get(task).copied().unwrap_or(0.0)
    }

    pub fn noise_for(&self, task: usize) -> f64 {
        self.label_noise.get(task).copied().unwrap_or(0.0)
    }

    /// Test samples generated per class.
    pub fn test_per_class(&self) -> usize {
        if self.test_fraction == 0.0 {
            return 0;
        }
        let n = self.samples_per_class as f64 * self.test_fraction / (1.0 - self.test_fraction);
        (n.round() as usize).max(1)
    }

    /// Template mean of global class `class` before drift.
    pub fn template_mean(&self, class: usize) -> Vec<f64> {
        let total = self.num_tasks * self.classes_per_task;
        let mut mean = vec![0.0; self.dim];
        if self.dim == 1 {
            mean[0] = self.class_separation * (class as f64 - (total as f64 - 1.0) / 2.0);
        } else {
            let angle = 2.0 * std::f64::consts::PI * class as f64 / total as f64;
            mean[0] = self.class_separation * angle.cos();
            mean[1] = self.class_separation * angle.sin();
        }
        mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: usize,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
    pub dim: usize,
    pub num_classes: usize,
    pub batch_size: usize,
}

impl TaskStream {
    pub fn train_len(&self) -> usize {
        self.tasks.iter().map(|t| t.train.len()).sum()
    }

    /// Training samples of task `t` in stream order, cut into batches.
    pub fn batches(&self, task: usize) -> Vec<&[Sample]> {
        self.tasks[task].train.chunks(self.batch_size).collect()
    }
}

pub fn make_stream(spec: &StreamSpec) -> Result<TaskStream> {
    spec.validate()?;
    match &spec.source {
        StreamSource::SyntheticGaussian => Ok(synthetic(spec)),
        StreamSource::Csv { train, test } => load_csv_stream(train, test, spec.batch_size),
    }
}

fn synthetic(spec: &StreamSpec) -> TaskStream {
    let mut rng = named_rng(spec.seed, RngStream::Data);
    let noise = Normal::new(0.0, spec.cluster_std).expect("std validated");
    let total_classes = spec.num_tasks * spec.classes_per_task;
    let test_per_class = spec.test_per_class();
    let train_total = spec.num_tasks * spec.classes_per_task * spec.samples_per_class;

    let mut next_train_id = 0u64;
    let mut next_test_id = train_total as u64;
    let mut tasks = Vec::with_capacity(spec.num_tasks);
    for t in 0..spec.num_tasks {
        let offset = spec.drift_for(t);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for k in 0..spec.classes_per_task {
            let class = t * spec.classes_per_task + k;
            let mean: Vec<f64> = spec.template_mean(class).iter().map(|m| m + offset).collect();
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                mean.iter().map(|m| m + noise.sample(rng)).collect()
            };
            for _ in 0..spec.samples_per_class {
                let features = draw(&mut rng);
                let mut label = class;
                if spec.classes_per_task > 1 && rng.random::<f64>() < spec.noise_for(t) {
                    let other = rng.random_range(0..spec.classes_per_task - 1);
                    let other = if other >= k { other + 1 } else { other };
                    label = t * spec.classes_per_task + other;
                }
                train.push(Sample::new(next_train_id, t, label, features));
                next_train_id += 1;
            }
            for _ in 0..test_per_class {
                test.push(Sample::new(next_test_id, t, class, draw(&mut rng)));
                next_test_id += 1;
            }
        }
        train.shuffle(&mut rng);
        tasks.push(Task { id: t, train, test });
    }
    debug_assert!(tasks.iter().all(|t| t.train.iter().all(|s| s.label < total_classes)));
    TaskStream {
        tasks,
        dim: spec.dim,
        num_classes: total_classes,
        batch_size: spec.batch_size,
    }
}

/// Reads `id,task,label,f0,...,f{d-1}` rows.
pub fn read_samples_csv(path: &Path) -> Result<(Vec<Sample>, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| csv_error(1, "header", e.to_string()))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    for (i, expected) in ["id", "task", "label"].iter().enumerate() {
        if cols.get(i) != Some(expected) {
            return Err(csv_error(1, expected, format!("expected header column {i} to be `{expected}`")));
        }
    }
    let dim = cols.len() - 3;
    if dim == 0 {
        return Err(csv_error(1, "f0", "no feature columns".into()));
    }
    for (j, name) in cols[3..].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(csv_error(1, name, format!("expected feature column `f{j}`")));
        }
    }

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(line, "record", e.to_string()))?;
        if record.len() != cols.len() {
            return Err(csv_error(
                line,
                "record",
                format!("expected {} fields, found {}", cols.len(), record.len()),
            ));
        }
        let int = |idx: usize| -> Result<u64> {
            record[idx]
                .parse::<u64>()
                .map_err(|_| csv_error(line, cols[idx], format!("`{}` is not a nonnegative integer", &record[idx])))
        };
        let id = int(0)?;
        let task = int(1)? as usize;
        let label = int(2)? as usize;
        let mut features = Vec::with_capacity(dim);
        for j in 0..dim {
            let raw = &record[3 + j];
            let v: f64 = raw
                .parse()
                .map_err(|_| csv_error(line, cols[3 + j], format!("`{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(csv_error(line, cols[3 + j], "non-finite value".into()));
            }
            features.push(v);
        }
        samples.push(Sample::new(id, task, label, features));
    }
    Ok((samples, dim))
}

fn csv_error(row: usize, column: &str, message: String) -> Error {
    Error::Csv {
        row,
        column: column.to_string(),
        message,
    }
}

/// Writes samples in the `id,task,label,f0,...` layout.
pub fn write_samples_csv(path: &Path, samples: &[Sample]) -> Result<()> {
    let dim = samples.first().map_or(0, |s| s.features.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let mut header = vec!["id".to_string(), "task".into(), "label".into()];
    header.extend((0..dim).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for s in samples {
        let mut row = vec![s.id.to_string(), s.task_id.to_string(), s.label.to_string()];
        row.extend(s.features.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn load_csv_stream(train_path: &Path, test_path: &Path, batch_size: usize) -> Result<TaskStream> {
    let (train, dim) = read_samples_csv(train_path)?;
    let (test, test_dim) = read_samples_csv(test_path)?;
    if test_dim != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: test_dim,
        });
    }
    let mut ids = std::collections::HashSet::new();
    for s in train.iter().chain(&test) {
        if !ids.insert(s.id) {
            return Err(Error::invalid(format!("duplicate sample id {} across csv files", s.id)));
        }
    }
    let num_classes = train.iter().chain(&test).map(|s| s.label + 1).max().unwrap_or(0);

    let mut by_task: BTreeMap<usize, Task> = BTreeMap::new();
    for s in train {
        by_task
            .entry(s.task_id)
            .or_insert_with(|| Task { id: s.task_id, train: vec![], test: vec![] })
            .train
            .push(s);
    }
    for s in test {
        let task = by_task
            .get_mut(&s.task_id)
            .ok_or_else(|| Error::invalid(format!("test sample {} belongs to unknown task {}", s.id, s.task_id)))?;
        task.test.push(s);
    }
    let tasks: Vec<Task> = by_task.into_values().collect();
    if tasks.len() < 2 {
        return Err(Error::invalid("a stream needs at least 2 tasks"));
    }
    if let Some(t) = tasks.iter().find(|t| t.test.is_empty()) {
        return Err(Error::invalid(format!("task {} has no test samples", t.id)));
    }
    // tasks are renumbered to stream positions
    let tasks = tasks
        .into_iter()
        .enumerate()
        .map(|(pos, mut t)| {
            t.id = pos;
            for s in t.train.iter_mut().chain(t.test.iter_mut()) {
                s.task_id = pos;
            }
            t
        })
        .collect();
    Ok(TaskStream {
        tasks,
        dim,
        num_classes,
        batch_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn small() -> StreamSpec {
        StreamSpec {
            num_tasks: 2,
            classes_per_task: 2,
            samples_per_class: 50,
            seed: 7,
            ..StreamSpec::default()
        }
    }

    #[test]
    fn counts_and_disjoint_labels() {
        let s = make_stream(&small()).unwrap();
        assert_eq!(s.train_len(), 200);
        assert_eq!(s.tasks[0].train.len(), 100);
        assert_eq!(s.tasks[1].train.len(), 100);
        assert!(s.tasks[0].train.iter().all(|x| x.label < 2));
        assert!(s.tasks[1].train.iter().all(|x| (2..4).contains(&x.label)));
        // test split is 20% of the class total
        assert_eq!(s.tasks[0].test.len(), 2 * 13);
        let mut ids: Vec<u64> = s.tasks.iter().flat_map(|t| t.train.iter().chain(&t.test)).map(|x| x.id).collect();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), n);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(make_stream(&small()).unwrap(), make_stream(&small()).unwrap());
        let other = StreamSpec { seed: 8, ..small() };
        assert_ne!(make_stream(&small()).unwrap(), make_stream(&other).unwrap());
    }

    #[test]
    fn drift_shifts_class_means() {
        let spec = StreamSpec {
            samples_per_class: 400,
            drift: vec![0.0, 2.0],
            ..small()
        };
        let s = make_stream(&spec).unwrap();
        let n = spec.samples_per_class as f64;
        let tol = 3.0 * spec.cluster_std / n.sqrt();
        for k in 0..2 {
            let class = 2 + k;
            let members: Vec<&Sample> = s.tasks[1].train.iter().filter(|x| x.label == class).collect();
            let template = spec.template_mean(class);
            for (j, t) in template.iter().enumerate() {
                let mean = members.iter().map(|x| x.features[j]).sum::<f64>() / members.len() as f64;
                assert!((mean - (t + 2.0)).abs() < tol, "class {class} coord {j}: {mean}");
            }
        }
    }

    #[test]
    fn full_label_noise_swaps_classes_within_task() {
        let spec = StreamSpec {
            samples_per_class: 400,
            label_noise: vec![0.0, 1.0],
            ..small()
        };
        let s = make_stream(&spec).unwrap();
        assert!(s.tasks[1].train.iter().all(|x| (2..4).contains(&x.label)));
        // every label flipped, so samples tagged 2 were drawn around class 3
        let members: Vec<&Sample> = s.tasks[1].train.iter().filter(|x| x.label == 2).collect();
        assert_eq!(members.len(), 400);
        let mean0 = members.iter().map(|x| x.features[0]).sum::<f64>() / 400.0;
        assert!((mean0 - spec.template_mean(3)[0]).abs() < 0.15);
        // test labels stay clean
        assert!(s.tasks[1].test.iter().filter(|x| x.label == 2).count() > 0);
    }

    #[test]
    fn rejects_single_task() {
        assert!(make_stream(&StreamSpec { num_tasks: 1, ..small() }).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let s = make_stream(&small()).unwrap();
        let train: Vec<Sample> = s.tasks.iter().flat_map(|t| t.train.clone()).collect();
        let test: Vec<Sample> = s.tasks.iter().flat_map(|t| t.test.clone()).collect();
        let tp = dir.path().join("train.csv");
        let ep = dir.path().join("test.csv");
        write_samples_csv(&tp, &train).unwrap();
        write_samples_csv(&ep, &test).unwrap();
        let spec = StreamSpec {
            source: StreamSource::Csv { train: tp.clone(), test: ep.clone() },
            ..small()
        };
        let loaded = make_stream(&spec).unwrap();
        assert_eq!(loaded.tasks.len(), 2);
        assert_eq!(loaded.tasks[1].train, s.tasks[1].train);
        assert_eq!(loaded.num_classes, 4);

        let bad = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&bad).unwrap();
        writeln!(f, "id,task,label,f0,f1").unwrap();
        writeln!(f, "0,0,1,0.5,0.25").unwrap();
        writeln!(f, "1,0,1,oops,0.25").unwrap();
        drop(f);
        match read_samples_csv(&bad) {
            Err(Error::Csv { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "f0");
            }
            other => panic!("unexpected {other:?}"),
        }

        let bad_header = dir.path().join("bad_header.csv");
        std::fs::write(&bad_header, "id,label,task,f0\n0,0,0,1.0\n").unwrap();
        assert!(matches!(read_samples_csv(&bad_header), Err(Error::Csv { row: 1, .. })));
    }
}
