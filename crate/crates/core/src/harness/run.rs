use std::collections::{BTreeMap, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::metrics::{acc_bwt, kendall_tau, AccuracyMatrix};
use super::oracles::OracleConfig;
use super::seeds::{named_rng, RngStream};
use super::stream::TaskStream;
use crate::error::{Error, Result};
use crate::influence::{build_context, build_context_weighted, CriterionConfig, InfluenceContext};
use crate::models::{self, FitConfig, ModelSpec, Params, Sample};
use crate::numkit::{CgConfig, DEFAULT_DAMPING, DEFAULT_REL_TOLERANCE};
use crate::selection::{
    select_greedy_with, select_reservoir, select_ring, GreedyOptions, ReplayBuffer, SelectorKind,
};

/// Plain SGD settings for the training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Replay samples drawn from the buffer per step.
    pub replay_batch_size: usize,
    /// Standard deviation of the random parameter initialization.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 3,
            replay_batch_size: 10,
            init_scale: 0.01,
        }
    }
}

/// Weight given to current-batch candidates during selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reweight {
    /// `|buffer| / |batch|`, or 1 while the buffer is empty.
    #[default]
    Balanced,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub model: ModelSpec,
    pub selector: SelectorKind,
    pub criterion: CriterionConfig,
    pub train: TrainConfig,
    /// Used when `refit_at_selection` is set.
    pub fit: FitConfig,
    pub oracle: OracleConfig,
    pub damping: f64,
    pub cg_rel_tolerance: f64,
    pub refit_at_selection: bool,
    pub reweight: Reweight,
    pub greedy: GreedyOptions,
    pub seed: u64,
}

impl HarnessConfig {
    pub fn new(model: ModelSpec, selector: SelectorKind, criterion: CriterionConfig) -> Self {
        HarnessConfig {
            model,
            selector,
            criterion,
            train: TrainConfig::default(),
            fit: FitConfig::newton(),
            oracle: OracleConfig::default(),
            damping: DEFAULT_DAMPING,
            cg_rel_tolerance: DEFAULT_REL_TOLERANCE,
            refit_at_selection: false,
            reweight: Reweight::Balanced,
            greedy: GreedyOptions::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.criterion.validate()?;
        self.oracle.validate()?;
        self.fit.validate()?;
        if !(self.train.learning_rate > 0.0) {
            return Err(Error::config("train.learning_rate", "must be > 0"));
        }
        if self.train.epochs == 0 {
            return Err(Error::config("train.epochs", "must be >= 1"));
        }
        if !(self.train.init_scale >= 0.0) {
            return Err(Error::config("train.init_scale", "must be >= 0"));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::config("damping", "must be >= 0"));
        }
        if !(self.cg_rel_tolerance > 0.0) {
            return Err(Error::config("cg.rel_tolerance", "must be > 0"));
        }
        if let Reweight::Constant(c) = self.reweight {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::config("selection.reweight", "constant must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: usize,
    pub task: usize,
    pub tau: Option<f64>,
    pub buffer_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauPoint {
    pub step: usize,
    pub task: usize,
    pub tau: f64,
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferSnapshot {
    pub step: usize,
    pub task: usize,
    pub ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub acc_matrix: AccuracyMatrix,
    pub acc: f64,
    pub bwt: f64,
    pub tau_series: Vec<TauPoint>,
    pub buffer_trace: Vec<BufferSnapshot>,
    pub metrics: Vec<MetricRow>,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
}

impl RunReport {
    pub fn mean_tau(&self) -> Option<f64> {
        if self.tau_series.is_empty() {
            return None;
        }
        Some(self.tau_series.iter().map(|p| p.tau).sum::<f64>() / self.tau_series.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

struct RunState {
    params: Params,
    buffer: ReplayBuffer,
    seen: u64,
    oracle_buffer: ReplayBuffer,
    oracle_seen: u64,
    train_rng: ChaCha8Rng,
    reservoir_rng: ChaCha8Rng,
    oracle_rng: ChaCha8Rng,
}

/// Continual training with replay, updating the buffer after every batch of
/// each task's last epoch and evaluating all seen tasks after each task.
pub fn run_continual(stream: &TaskStream, cfg: &HarnessConfig) -> Result<RunReport> {
    cfg.validate()?;
    check_compatible(stream, cfg)?;
    let m = cfg.criterion.budget;

    let mut init_rng = named_rng(cfg.seed, RngStream::Init);
    let init = Normal::new(0.0, cfg.train.init_scale).map_err(|e| Error::config("train.init_scale", e.to_string()))?;
    let theta: Vec<f64> = (0..cfg.model.param_dim()).map(|_| init.sample(&mut init_rng)).collect();
    let mut state = RunState {
        params: Params::from_slice(&theta)?,
        buffer: ReplayBuffer::new(m)?,
        seen: 0,
        oracle_buffer: ReplayBuffer::new(m * cfg.oracle.buffer_multiplier)?,
        oracle_seen: 0,
        train_rng: named_rng(cfg.seed, RngStream::Train),
        reservoir_rng: named_rng(cfg.seed, RngStream::Reservoir),
        oracle_rng: named_rng(cfg.seed, RngStream::Oracle),
    };

    let mut acc_matrix = AccuracyMatrix::new();
    let mut tau_series = Vec::new();
    let mut buffer_trace = Vec::new();
    let mut metrics = Vec::new();
    let mut step = 0usize;

    for (t, task) in stream.tasks.iter().enumerate() {
        let mut order: Vec<&Sample> = task.train.iter().collect();
        for epoch in 0..cfg.train.epochs {
            order.shuffle(&mut state.train_rng);
            let last_epoch = epoch + 1 == cfg.train.epochs;
            for (b, chunk) in order.chunks(stream.batch_size).enumerate() {
                let context = || format!("task {t}, epoch {epoch}, batch {b}");
                let batch: Vec<Sample> = chunk.iter().map(|s| (*s).clone()).collect();
                sgd_step(&mut state, &batch, cfg).map_err(|e| e.at(context()))?;
                if !last_epoch {
                    continue;
                }
                let tau = update_buffer(&mut state, &batch, stream, cfg).map_err(|e| e.at(context()))?;
                state.buffer.check().map_err(|e| e.at(context()))?;
                if state.buffer.len() > m {
                    return Err(Error::invalid(format!("buffer holds {} > {m} samples", state.buffer.len())).at(context()));
                }
                if let Some((tau, overlap)) = tau {
                    tau_series.push(TauPoint { step, task: t, tau, overlap });
                }
                metrics.push(MetricRow {
                    step,
                    task: t,
                    tau: tau.map(|p| p.0),
                    buffer_size: state.buffer.len(),
                });
                buffer_trace.push(BufferSnapshot {
                    step,
                    task: t,
                    ids: state.buffer.ids(),
                });
                step += 1;
            }
        }
        let row = stream.tasks[..=t]
            .iter()
            .map(|seen| models::accuracy(&cfg.model, &state.params, &seen.test))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at(format!("evaluating after task {t}")))?;
        acc_matrix.push_row(row)?;
    }

    let (acc, bwt) = acc_bwt(&acc_matrix)?;
    Ok(RunReport {
        acc_matrix,
        acc,
        bwt,
        tau_series,
        buffer_trace,
        metrics,
        config: BTreeMap::new(),
        seed: cfg.seed,
    })
}

fn check_compatible(stream: &TaskStream, cfg: &HarnessConfig) -> Result<()> {
    let ModelSpec::Logistic { num_classes, dim, .. } = cfg.model else {
        return Err(Error::config("model.kind", "the continual harness needs a classifier (logistic)"));
    };
    if dim != stream.dim {
        return Err(Error::config("model.dim", format!("model dim {dim} but stream dim {}", stream.dim)));
    }
    if num_classes < stream.num_classes {
        return Err(Error::config(
            "model.num_classes",
            format!("model has {num_classes} classes but the stream uses {}", stream.num_classes),
        ));
    }
    if stream.tasks.len() < 2 {
        return Err(Error::invalid("a stream needs at least 2 tasks"));
    }
    if cfg.criterion.budget > stream.train_len() {
        return Err(Error::config(
            "criterion.m",
            format!("buffer capacity {} exceeds the stream size {}", cfg.criterion.budget, stream.train_len()),
        ));
    }
    Ok(())
}

fn sgd_step(state: &mut RunState, batch: &[Sample], cfg: &HarnessConfig) -> Result<()> {
    let k = cfg.train.replay_batch_size.min(state.buffer.len());
    let mut joint: Vec<Sample> = batch.to_vec();
    joint.extend(state.buffer.samples().choose_multiple(&mut state.train_rng, k).cloned());
    let g = models::total_grad(&cfg.model, &state.params, &joint)?;
    let step = -cfg.train.learning_rate / joint.len() as f64;
    state.params = Params::new(state.params.theta.add_scaled(step, &g));
    Ok(())
}

/// Runs the configured selector and returns the Kendall tau point, if any.
fn update_buffer(
    state: &mut RunState,
    batch: &[Sample],
    stream: &TaskStream,
    cfg: &HarnessConfig,
) -> Result<Option<(f64, usize)>> {
    (state.oracle_buffer, state.oracle_seen) =
        select_reservoir(&state.oracle_buffer, batch, state.oracle_seen, &mut state.oracle_rng);

    match cfg.selector {
        SelectorKind::Reservoir => {
            (state.buffer, state.seen) = select_reservoir(&state.buffer, batch, state.seen, &mut state.reservoir_rng);
            Ok(None)
        }
        SelectorKind::Ring => {
            state.buffer = select_ring(&state.buffer, batch, stream.num_classes)?;
            Ok(None)
        }
        kind => {
            let (candidates, outer) = selection_candidates(&state.buffer, batch, cfg.reweight);
            let params = if cfg.refit_at_selection {
                models::fit_from(&cfg.model, &candidates, &cfg.fit, &state.params)
                    .map_err(|e| e.at("refitting at selection"))?
            } else {
                state.params.clone()
            };
            let cg = cg_config(cfg)?;
            let ctx = build_context_weighted(&cfg.model, &params, &candidates, &outer, &candidates, cfg.damping, &cg)?;
            let tau = if cfg.oracle.enabled {
                oracle_tau(&ctx, &state.oracle_buffer, cfg)?
            } else {
                None
            };
            let (selected, _) = select_greedy_with(&ctx, &cfg.criterion, kind, &cfg.greedy)?;
            state.buffer = selected;
            Ok(tau)
        }
    }
}

/// Buffer followed by the batch, with the outer-sum weight of each: batch
/// samples carry the balancing constant.
fn selection_candidates(buffer: &ReplayBuffer, batch: &[Sample], reweight: Reweight) -> (Vec<Sample>, Vec<f64>) {
    let c = match reweight {
        Reweight::Constant(c) => c,
        Reweight::Balanced if buffer.is_empty() => 1.0,
        Reweight::Balanced => buffer.len() as f64 / batch.len() as f64,
    };
    let mut samples: Vec<Sample> = buffer.samples().to_vec();
    let mut weights = vec![1.0; samples.len()];
    for s in batch {
        if !buffer.contains(s.id) {
            samples.push(s.clone());
            weights.push(c);
        }
    }
    (samples, weights)
}

fn cg_config(cfg: &HarnessConfig) -> Result<CgConfig> {
    CgConfig::new(cfg.cg_rel_tolerance, 2 * cfg.model.param_dim())
}

/// Kendall tau between the method's and the oracle reservoir's first-order
/// scores over the samples both hold.
fn oracle_tau(ctx: &InfluenceContext, oracle_buffer: &ReplayBuffer, cfg: &HarnessConfig) -> Result<Option<(f64, usize)>> {
    let oracle_ids: HashSet<u64> = oracle_buffer.ids().into_iter().collect();
    let shared: Vec<usize> = (0..ctx.len())
        .filter(|&i| oracle_ids.contains(&ctx.candidates()[i].id))
        .collect();
    if shared.len() < cfg.oracle.min_overlap {
        return Ok(None);
    }
    let oracle_ctx = build_context(
        &cfg.model,
        ctx.params(),
        oracle_buffer.samples(),
        oracle_buffer.samples(),
        cfg.damping,
        ctx.cg_config(),
    )
    .map_err(|e| e.at("building the oracle context"))?;
    let method_scores = ctx.candidate_influences();
    let oracle_scores = oracle_ctx.candidate_influences();
    let mut a = Vec::with_capacity(shared.len());
    let mut b = Vec::with_capacity(shared.len());
    for &i in &shared {
        let id = ctx.candidates()[i].id;
        a.push(method_scores[i]);
        b.push(oracle_scores[oracle_ctx.index_of(id)?]);
    }
    Ok(Some((kendall_tau(&a, &b)?, shared.len())))
}
