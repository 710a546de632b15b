//! Flat `key=value` run configuration with dotted keys.
//!
//! Blank lines and lines starting with `#` are ignored. Unset keys take the
//! defaults of [`RunConfig::default`]; see the README for the key table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{make_stream, run_continual, HarnessConfig, Reweight, RunReport, StreamSource, StreamSpec, TaskStream};
use crate::influence::CriterionConfig;
use crate::models::ModelSpec;
use crate::selection::{HessianRefresh, SelectorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Quad1d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// `None` takes the class count of the stream.
    pub num_classes: Option<usize>,
    /// `None` takes the feature dimension of the stream.
    pub dim: Option<usize>,
    pub l2_strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub stream: StreamSpec,
    /// `None` uses the root seed for data generation.
    pub stream_seed: Option<u64>,
    pub model: ModelConfig,
    /// Everything but the model; its `seed` mirrors the root seed.
    pub harness: HarnessConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig {
            kind: ModelKind::Logistic,
            num_classes: None,
            dim: None,
            l2_strength: 0.1,
        };
        let harness = HarnessConfig::new(ModelSpec::Quad1d, SelectorKind::Ours, CriterionConfig::with_budget(50));
        RunConfig {
            seed: 0,
            out_dir: None,
            stream: StreamSpec::default(),
            stream_seed: None,
            model,
            harness,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{raw}`: {e}")))
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|v| parse_value(key, v.trim())).collect()
}

fn parse_auto(key: &str, raw: &str) -> Result<Option<usize>> {
    if raw == "auto" {
        Ok(None)
    } else {
        parse_value(key, raw).map(Some)
    }
}

fn format_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{raw}`"))),
    }
}

/// Splits config text into ordered pairs, rejecting duplicates.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(format!("line {}", n + 1), format!("expected key=value, got `{line}`")));
        };
        let key = key.trim().to_string();
        if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::config(key, "set more than once"));
        }
    }
    Ok(pairs)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_pairs(&parse_pairs(text)?)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let h = &mut self.harness;
        let s = &mut self.stream;
        match key {
            "seed" => self.seed = parse_value(key, raw)?,
            "out_dir" => self.out_dir = (!raw.is_empty()).then(|| PathBuf::from(raw)),
            "stream.source" => {
                s.source = match raw {
                    "synthetic_gaussian" => StreamSource::SyntheticGaussian,
                    "csv" => match &s.source {
                        StreamSource::Csv { .. } => s.source.clone(),
                        StreamSource::SyntheticGaussian => StreamSource::Csv {
                            train: PathBuf::new(),
                            test: PathBuf::new(),
                        },
                    },
                    _ => return Err(Error::config(key, format!("unknown source `{raw}`"))),
                }
            }
            "stream.train_csv" | "stream.test_csv" => {
                let (mut train, mut test) = match &s.source {
                    StreamSource::Csv { train, test } => (train.clone(), test.clone()),
                    StreamSource::SyntheticGaussian => (PathBuf::new(), PathBuf::new()),
                };
                if key == "stream.train_csv" {
                    train = PathBuf::from(raw);
                } else {
                    test = PathBuf::from(raw);
                }
                s.source = StreamSource::Csv { train, test };
            }
            "stream.num_tasks" => s.num_tasks = parse_value(key, raw)?,
            "stream.classes_per_task" => s.classes_per_task = parse_value(key, raw)?,
            "stream.samples_per_class" => s.samples_per_class = parse_value(key, raw)?,
            "stream.dim" => s.dim = parse_value(key, raw)?,
            "stream.batch_size" => s.batch_size = parse_value(key, raw)?,
            "stream.drift" => s.drift = parse_list(key, raw)?,
            "stream.label_noise" => s.label_noise = parse_list(key, raw)?,
            "stream.class_separation" => s.class_separation = parse_value(key, raw)?,
            "stream.cluster_std" => s.cluster_std = parse_value(key, raw)?,
            "stream.test_fraction" => s.test_fraction = parse_value(key, raw)?,
            "stream.seed" => self.stream_seed = Some(parse_value(key, raw)?),
            "model.kind" => {
                self.model.kind = match raw {
                    "logistic" => ModelKind::Logistic,
                    "quad1d" => ModelKind::Quad1d,
                    _ => return Err(Error::config(key, format!("unknown model `{raw}`"))),
                }
            }
            "model.num_classes" => self.model.num_classes = parse_auto(key, raw)?,
            "model.dim" => self.model.dim = parse_auto(key, raw)?,
            "model.l2" => self.model.l2_strength = parse_value(key, raw)?,
            "selector" => h.selector = parse_value(key, raw)?,
            "criterion.mu" => h.criterion.mu = parse_value(key, raw)?,
            "criterion.nu" => h.criterion.nu = parse_value(key, raw)?,
            "criterion.m" => h.criterion.budget = parse_value(key, raw)?,
            "train.learning_rate" => h.train.learning_rate = parse_value(key, raw)?,
            "train.epochs" => h.train.epochs = parse_value(key, raw)?,
            "train.replay_batch_size" => h.train.replay_batch_size = parse_value(key, raw)?,
            "train.init_scale" => h.train.init_scale = parse_value(key, raw)?,
            "fit.grad_tolerance" => h.fit.grad_tolerance = parse_value(key, raw)?,
            "fit.max_steps" => h.fit.max_steps = parse_value(key, raw)?,
            "oracle.enabled" => h.oracle.enabled = parse_bool(key, raw)?,
            "oracle.epsilon" => h.oracle.epsilon = parse_value(key, raw)?,
            "oracle.buffer_multiplier" => h.oracle.buffer_multiplier = parse_value(key, raw)?,
            "oracle.min_overlap" => h.oracle.min_overlap = parse_value(key, raw)?,
            "damping" => h.damping = parse_value(key, raw)?,
            "cg.rel_tolerance" => h.cg_rel_tolerance = parse_value(key, raw)?,
            "selection.refit" => h.refit_at_selection = parse_bool(key, raw)?,
            "selection.reweight" => {
                h.reweight = if raw == "balanced" {
                    Reweight::Balanced
                } else {
                    Reweight::Constant(parse_value(key, raw)?)
                }
            }
            "selection.hessian_refresh" => {
                h.greedy.hessian_refresh = match raw {
                    "fixed" => HessianRefresh::Fixed,
                    "per_drop" => HessianRefresh::PerDrop,
                    _ => return Err(Error::config(key, format!("expected fixed or per_drop, got `{raw}`"))),
                }
            }
            "selection.matching_weight" => h.greedy.matching_weight = parse_value(key, raw)?,
            "selection.diversity_weight" => h.greedy.diversity_weight = parse_value(key, raw)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks value ranges and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        let c = &self.harness.criterion;
        if !(0.0..=1.0).contains(&c.mu) {
            return Err(Error::config("criterion.mu", format!("must lie in [0, 1], got {}", c.mu)));
        }
        if !(c.nu >= 0.0) || !c.nu.is_finite() {
            return Err(Error::config("criterion.nu", format!("must be >= 0, got {}", c.nu)));
        }
        if c.budget == 0 {
            return Err(Error::config("criterion.m", "must be >= 1"));
        }
        if self.stream.batch_size == 0 {
            return Err(Error::config("stream.batch_size", "must be >= 1"));
        }
        if let StreamSource::Csv { train, test } = &self.stream.source {
            for (key, path) in [("stream.train_csv", train), ("stream.test_csv", test)] {
                if !path.is_file() {
                    return Err(Error::config(key, format!("file `{}` does not exist", path.display())));
                }
            }
        } else if self.stream.num_tasks < 2 {
            return Err(Error::config("stream.num_tasks", "must be >= 2"));
        }
        if !(self.model.l2_strength >= 0.0) {
            return Err(Error::config("model.l2", "must be >= 0"));
        }
        let mut probe = self.harness.clone();
        probe.criterion = CriterionConfig::with_budget(c.budget);
        probe.validate()
    }

    /// The config as `key=value` pairs; reparses to an equal config.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let h = &self.harness;
        let s = &self.stream;
        let mut out = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            out.insert(k.to_string(), v);
        };
        put("seed", self.seed.to_string());
        if let Some(dir) = &self.out_dir {
            put("out_dir", dir.display().to_string());
        }
        match &s.source {
            StreamSource::SyntheticGaussian => put("stream.source", "synthetic_gaussian".into()),
            StreamSource::Csv { train, test } => {
                put("stream.source", "csv".into());
                put("stream.train_csv", train.display().to_string());
                put("stream.test_csv", test.display().to_string());
            }
        }
        put("stream.num_tasks", s.num_tasks.to_string());
        put("stream.classes_per_task", s.classes_per_task.to_string());
        put("stream.samples_per_class", s.samples_per_class.to_string());
        put("stream.dim", s.dim.to_string());
        put("stream.batch_size", s.batch_size.to_string());
        put("stream.drift", format_list(&s.drift));
        put("stream.label_noise", format_list(&s.label_noise));
        put("stream.class_separation", s.class_separation.to_string());
        put("stream.cluster_std", s.cluster_std.to_string());
        put("stream.test_fraction", s.test_fraction.to_string());
        if let Some(seed) = self.stream_seed {
            put("stream.seed", seed.to_string());
        }
        let auto = |v: Option<usize>| v.map_or("auto".to_string(), |n| n.to_string());
        put(
            "model.kind",
            match self.model.kind {
                ModelKind::Logistic => "logistic".into(),
                ModelKind::Quad1d => "quad1d".into(),
            },
        );
        put("model.num_classes", auto(self.model.num_classes));
        put("model.dim", auto(self.model.dim));
        put("model.l2", self.model.l2_strength.to_string());
        put("selector", h.selector.to_string());
        put("criterion.mu", h.criterion.mu.to_string());
        put("criterion.nu", h.criterion.nu.to_string());
        put("criterion.m", h.criterion.budget.to_string());
        put("train.learning_rate", h.train.learning_rate.to_string());
        put("train.epochs", h.train.epochs.to_string());
        put("train.replay_batch_size", h.train.replay_batch_size.to_string());
        put("train.init_scale", h.train.init_scale.to_string());
        put("fit.grad_tolerance", h.fit.grad_tolerance.to_string());
        put("fit.max_steps", h.fit.max_steps.to_string());
        put("oracle.enabled", h.oracle.enabled.to_string());
        put("oracle.epsilon", h.oracle.epsilon.to_string());
        put("oracle.buffer_multiplier", h.oracle.buffer_multiplier.to_string());
        put("oracle.min_overlap", h.oracle.min_overlap.to_string());
        put("damping", h.damping.to_string());
        put("cg.rel_tolerance", h.cg_rel_tolerance.to_string());
        put("selection.refit", h.refit_at_selection.to_string());
        put(
            "selection.reweight",
            match h.reweight {
                Reweight::Balanced => "balanced".into(),
                Reweight::Constant(c) => c.to_string(),
            },
        );
        put(
            "selection.hessian_refresh",
            match h.greedy.hessian_refresh {
                HessianRefresh::Fixed => "fixed".into(),
                HessianRefresh::PerDrop => "per_drop".into(),
            },
        );
        put("selection.matching_weight", h.greedy.matching_weight.to_string());
        put("selection.diversity_weight", h.greedy.diversity_weight.to_string());
        out
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn stream_spec(&self) -> StreamSpec {
        StreamSpec {
            seed: self.stream_seed.unwrap_or(self.seed),
            ..self.stream.clone()
        }
    }

    pub fn harness_config(&self, stream: &TaskStream) -> Result<HarnessConfig> {
        let model = match self.model.kind {
            ModelKind::Quad1d => ModelSpec::Quad1d,
            ModelKind::Logistic => ModelSpec::logistic(
                self.model.num_classes.unwrap_or(stream.num_classes),
                self.model.dim.unwrap_or(stream.dim),
                self.model.l2_strength,
            )
            .map_err(|e| Error::config("model", e.to_string()))?,
        };
        Ok(HarnessConfig {
            model,
            seed: self.seed,
            ..self.harness.clone()
        })
    }

    /// Builds the stream, runs it and attaches the config echo.
    pub fn execute(&self) -> Result<RunReport> {
        let stream = make_stream(&self.stream_spec()).map_err(|e| e.at("building the stream"))?;
        let harness = self.harness_config(&stream)?;
        let mut report = run_continual(&stream, &harness)?;
        report.config = self.to_pairs();
        Ok(report)
    }
}
