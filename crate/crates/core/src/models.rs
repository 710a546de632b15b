//! Convex models with per-sample loss, gradient and Hessian-vector products.
//!
//! Two models are provided:
//!
//! * `Quad1d`: `L(z, θ) = ½ (θ − x)² · weight` on one-dimensional features.
//!   Labels are ignored and every per-sample Hessian is `weight`.
//! * `Logistic`: multinomial softmax regression without bias, parameters
//!   flattened class-major (`theta[c * dim + j]` multiplies feature `j` for
//!   class `c`). The L2 penalty is charged per sample as
//!   `l2_strength · ‖θ‖² / 2 · weight`, so set sums equal the regularized
//!   empirical risk.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{self, axpy, cg_solve, dot, CgConfig, LinearOperator, SpdOperator, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub task_id: usize,
    pub label: usize,
    pub features: Vec<f64>,
    pub weight: f64,
}

impl Sample {
    pub fn new(id: u64, task_id: usize, label: usize, features: Vec<f64>) -> Self {
        Sample {
            id,
            task_id,
            label,
            features,
            weight: 1.0,
        }
    }

    /// One-dimensional sample for the quadratic model.
    pub fn scalar(id: u64, x: f64) -> Self {
        Sample::new(id, 0, 0, vec![x])
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub dim: usize,
    pub num_classes: usize,
}

impl Dataset {
    /// Checks unique ids, constant feature dimension, label range and
    /// positive finite weights.
    pub fn new(samples: Vec<Sample>, dim: usize, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("num_classes must be positive"));
        }
        let mut seen = std::collections::HashSet::with_capacity(samples.len());
        for s in &samples {
            if !seen.insert(s.id) {
                return Err(Error::invalid(format!("duplicate sample id {}", s.id)));
            }
            if s.features.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: s.features.len(),
                });
            }
            if s.label >= num_classes {
                return Err(Error::invalid(format!(
                    "sample {} label {} out of range [0, {num_classes})",
                    s.id, s.label
                )));
            }
            check_weight(s)?;
        }
        Ok(Dataset {
            samples,
            dim,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn check_weight(s: &Sample) -> Result<()> {
    if !(s.weight > 0.0 && s.weight.is_finite()) {
        return Err(Error::invalid(format!(
            "sample {} weight must be positive, got {}",
            s.id, s.weight
        )));
    }
    if s.features.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("sample {} has non-finite features", s.id)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Quad1d,
    Logistic {
        num_classes: usize,
        dim: usize,
        l2_strength: f64,
    },
}

impl ModelSpec {
    pub fn logistic(num_classes: usize, dim: usize, l2_strength: f64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid("logistic model needs at least 2 classes"));
        }
        if dim == 0 {
            return Err(Error::invalid("logistic model needs dim >= 1"));
        }
        if !(l2_strength >= 0.0 && l2_strength.is_finite()) {
            return Err(Error::invalid("l2_strength must be >= 0"));
        }
        Ok(ModelSpec::Logistic {
            num_classes,
            dim,
            l2_strength,
        })
    }

    /// Number of parameters.
    pub fn param_dim(&self) -> usize {
        match *self {
            ModelSpec::Quad1d => 1,
            ModelSpec::Logistic {
                num_classes, dim, ..
            } => num_classes * dim,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match *self {
            ModelSpec::Quad1d => 1,
            ModelSpec::Logistic { dim, .. } => dim,
        }
    }

    fn check(&self, params: &Params, sample: &Sample) -> Result<()> {
        params.theta.check_dim(self.param_dim())?;
        if sample.features.len() != self.feature_dim() {
            return Err(Error::Dimension {
                expected: self.feature_dim(),
                got: sample.features.len(),
            });
        }
        if let ModelSpec::Logistic { num_classes, .. } = *self {
            if sample.label >= num_classes {
                return Err(Error::invalid(format!(
                    "sample {} label {} out of range [0, {num_classes})",
                    sample.id, sample.label
                )));
            }
        }
        check_weight(sample)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub theta: Vector,
}

impl Params {
    pub fn new(theta: Vector) -> Self {
        Params { theta }
    }

    pub fn zeros(spec: &ModelSpec) -> Self {
        Params {
            theta: Vector::zeros(spec.param_dim()),
        }
    }

    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        Ok(Params {
            theta: Vector::from_slice(theta)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    ClosedForm,
    Newton,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub method: FitMethod,
    pub grad_tolerance: f64,
    pub max_steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            method: FitMethod::Newton,
            grad_tolerance: 1e-10,
            max_steps: 100,
            learning_rate: 0.1,
            batch_size: 32,
            epochs: 5,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn newton() -> Self {
        FitConfig::default()
    }

    pub fn closed_form() -> Self {
        FitConfig {
            method: FitMethod::ClosedForm,
            ..FitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tolerance > 0.0) {
            return Err(Error::invalid("grad_tolerance must be > 0"));
        }
        if self.method == FitMethod::Sgd {
            if !(self.learning_rate > 0.0) {
                return Err(Error::invalid("sgd learning_rate must be > 0"));
            }
            if self.batch_size == 0 {
                return Err(Error::invalid("sgd batch_size must be >= 1"));
            }
        }
        Ok(())
    }
}

/// Class probabilities `softmax(θ x)` for the logistic model.
fn softmax_probs(theta: &[f64], x: &[f64], num_classes: usize, dim: usize) -> Vec<f64> {
    let logits: Vec<f64> = (0..num_classes)
        .map(|c| dot(&theta[c * dim..(c + 1) * dim], x))
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn loss(spec: &ModelSpec, params: &Params, sample: &Sample) -> Result<f64> {
    spec.check(params, sample)?;
    let theta = params.theta.as_slice();
    let x = &sample.features;
    let value = match *spec {
        ModelSpec::Quad1d => 0.5 * (theta[0] - x[0]).powi(2),
        ModelSpec::Logistic {
            num_classes,
            dim,
            l2_strength,
        } => {
            let logits: Vec<f64> = (0..num_classes)
                .map(|c| dot(&theta[c * dim..(c + 1) * dim], x))
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            lse - logits[sample.label] + 0.5 * l2_strength * dot(theta, theta)
        }
    };
    Ok(value * sample.weight)
}

pub fn grad(spec: &ModelSpec, params: &Params, sample: &Sample) -> Result<Vector> {
    spec.check(params, sample)?;
    let theta = params.theta.as_slice();
    let x = &sample.features;
    let w = sample.weight;
    let g = match *spec {
        ModelSpec::Quad1d => vec![(theta[0] - x[0]) * w],
        ModelSpec::Logistic {
            num_classes,
            dim,
            l2_strength,
        } => {
            let p = softmax_probs(theta, x, num_classes, dim);
            let mut g = vec![0.0; num_classes * dim];
            for c in 0..num_classes {
                let residual = p[c] - if c == sample.label { 1.0 } else { 0.0 };
                for j in 0..dim {
                    g[c * dim + j] = w * (residual * x[j] + l2_strength * theta[c * dim + j]);
                }
            }
            g
        }
    };
    Ok(Vector::from_raw(g))
}

/// Per-sample Hessian action `∇²L(z, θ) v`.
pub fn sample_hvp(spec: &ModelSpec, params: &Params, sample: &Sample, v: &[f64]) -> Result<Vector> {
    spec.check(params, sample)?;
    if v.len() != spec.param_dim() {
        return Err(Error::Dimension {
            expected: spec.param_dim(),
            got: v.len(),
        });
    }
    Ok(Vector::from_raw(hvp_unchecked(spec, &params.theta, sample, v)))
}

fn hvp_unchecked(spec: &ModelSpec, theta: &[f64], sample: &Sample, v: &[f64]) -> Vec<f64> {
    let w = sample.weight;
    match *spec {
        ModelSpec::Quad1d => vec![v[0] * w],
        ModelSpec::Logistic {
            num_classes,
            dim,
            l2_strength,
        } => {
            let x = &sample.features;
            let p = softmax_probs(theta, x, num_classes, dim);
            // u = V x with V the (class x feature) reshaping of v
            let u: Vec<f64> = (0..num_classes)
                .map(|c| dot(&v[c * dim..(c + 1) * dim], x))
                .collect();
            let pu = dot(&p, &u);
            let mut out = vec![0.0; num_classes * dim];
            for c in 0..num_classes {
                let coef = p[c] * (u[c] - pu);
                for j in 0..dim {
                    out[c * dim + j] = w * (coef * x[j] + l2_strength * v[c * dim + j]);
                }
            }
            out
        }
    }
}

/// Hessian action summed over `samples`, accumulated in list order.
pub fn set_hvp(spec: &ModelSpec, params: &Params, samples: &[Sample], v: &[f64]) -> Result<Vector> {
    if samples.is_empty() {
        return Err(Error::invalid("Hessian of an empty sample set is undefined"));
    }
    let mut acc = Vector::zeros(spec.param_dim());
    for s in samples {
        let h = sample_hvp(spec, params, s, v)?;
        acc.axpy_in_place(1.0, &h);
    }
    Ok(acc)
}

/// Summed Hessian over a fixed sample set, as a matrix-free operator.
#[derive(Debug, Clone)]
pub struct SetHessian {
    spec: ModelSpec,
    params: Params,
    samples: Vec<Sample>,
}

impl SetHessian {
    pub fn new(spec: ModelSpec, params: Params, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("Hessian of an empty sample set is undefined"));
        }
        for s in &samples {
            spec.check(&params, s)?;
        }
        Ok(SetHessian {
            spec,
            params,
            samples,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
}

impl LinearOperator for SetHessian {
    fn dim(&self) -> usize {
        self.spec.param_dim()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; x.len()];
        for s in &self.samples {
            let h = hvp_unchecked(&self.spec, &self.params.theta, s, x);
            axpy(1.0, &h, &mut acc);
        }
        acc
    }
}

/// Damped Hessian operator `Σ_{samples} ∇²L + damping · I`.
pub fn hessian_operator(
    spec: &ModelSpec,
    params: &Params,
    samples: &[Sample],
    damping: f64,
) -> Result<SpdOperator<SetHessian>> {
    SpdOperator::new(SetHessian::new(*spec, params.clone(), samples.to_vec())?, damping)
}

pub fn total_loss(spec: &ModelSpec, params: &Params, samples: &[Sample]) -> Result<f64> {
    let mut acc = 0.0;
    for s in samples {
        acc += loss(spec, params, s)?;
    }
    Ok(acc)
}

pub fn total_grad(spec: &ModelSpec, params: &Params, samples: &[Sample]) -> Result<Vector> {
    let grads = samples
        .iter()
        .map(|s| grad(spec, params, s))
        .collect::<Result<Vec<_>>>()?;
    numkit::deterministic_sum(spec.param_dim(), &grads)
}

pub fn fit(spec: &ModelSpec, samples: &[Sample], cfg: &FitConfig) -> Result<Params> {
    fit_from(spec, samples, cfg, &Params::zeros(spec))
}

/// Fits starting from `init` (ignored by the closed-form path).
pub fn fit_from(spec: &ModelSpec, samples: &[Sample], cfg: &FitConfig, init: &Params) -> Result<Params> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("cannot fit on an empty sample set"));
    }
    init.theta.check_dim(spec.param_dim())?;
    match cfg.method {
        FitMethod::ClosedForm => {
            if *spec != ModelSpec::Quad1d {
                return Err(Error::invalid("closed_form fitting requires the quad1d model"));
            }
            for s in samples {
                spec.check(init, s)?;
            }
            let total_w: f64 = samples.iter().map(|s| s.weight).sum();
            let mean = samples.iter().map(|s| s.weight * s.features[0]).sum::<f64>() / total_w;
            Params::from_slice(&[mean])
        }
        FitMethod::Newton => newton(spec, samples, cfg, init.clone()),
        FitMethod::Sgd => sgd(spec, samples, cfg, init.clone()),
    }
}

fn newton(spec: &ModelSpec, samples: &[Sample], cfg: &FitConfig, mut params: Params) -> Result<Params> {
    let p = spec.param_dim();
    let mut g = total_grad(spec, &params, samples)?;
    let mut f = total_loss(spec, &params, samples)?;
    for _ in 0..cfg.max_steps {
        if g.norm() <= cfg.grad_tolerance {
            return Ok(params);
        }
        let op = hessian_operator(spec, &params, samples, 0.0)?;
        let cg = CgConfig::new(1e-12, 10 * p.max(1))?;
        let mut res = cg_solve(&op, &g, &cg)?;
        if !res.solution.iter().all(|v| v.is_finite()) || res.solution.dot(&g) <= 0.0 {
            // Hessian numerically singular: fall back to a lightly damped step
            let damped = hessian_operator(spec, &params, samples, 1e-8 * g.norm().max(1.0))?;
            res = cg_solve(&damped, &g, &cg)?;
        }
        let direction = res.solution;
        let slope = direction.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate = Params::new(params.theta.add_scaled(-step, &direction));
            let fc = total_loss(spec, &candidate, samples)?;
            if fc <= f - 1e-4 * step * slope + 1e-13 * f.abs().max(1.0) {
                accepted = Some((candidate, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((next, fc)) = accepted else {
            break;
        };
        params = next;
        f = fc;
        g = total_grad(spec, &params, samples)?;
    }
    if g.norm() <= cfg.grad_tolerance {
        Ok(params)
    } else {
        Err(Error::FitNotConverged {
            steps: cfg.max_steps,
            grad_norm: g.norm(),
        })
    }
}

/// Minibatch SGD with the batch-mean gradient; no optimality guarantee.
fn sgd(spec: &ModelSpec, samples: &[Sample], cfg: &FitConfig, mut params: Params) -> Result<Params> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let g = total_grad(spec, &params, &batch)?;
            params = Params::new(params.theta.add_scaled(-cfg.learning_rate / batch.len() as f64, &g));
        }
    }
    Ok(params)
}

/// Predicted class: argmax of the logits, ties toward the lowest index.
pub fn predict(spec: &ModelSpec, params: &Params, features: &[f64]) -> Result<usize> {
    match *spec {
        ModelSpec::Quad1d => Err(Error::invalid("quad1d is not a classifier")),
        ModelSpec::Logistic {
            num_classes, dim, ..
        } => {
            params.theta.check_dim(spec.param_dim())?;
            if features.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: features.len(),
                });
            }
            let theta = params.theta.as_slice();
            let mut best = 0;
            let mut best_logit = f64::NEG_INFINITY;
            for c in 0..num_classes {
                let l = dot(&theta[c * dim..(c + 1) * dim], features);
                if l > best_logit {
                    best = c;
                    best_logit = l;
                }
            }
            Ok(best)
        }
    }
}

/// Fraction of samples whose predicted class equals the label.
pub fn accuracy(spec: &ModelSpec, params: &Params, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("accuracy of an empty sample set"));
    }
    let mut correct = 0usize;
    for s in samples {
        if predict(spec, params, &s.features)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_params(t: f64) -> Params {
        Params::from_slice(&[t]).unwrap()
    }

    fn binary1d() -> ModelSpec {
        ModelSpec::logistic(2, 1, 0.0).unwrap()
    }

    #[test]
    fn quad_loss_values() {
        let spec = ModelSpec::Quad1d;
        assert_eq!(loss(&spec, &quad_params(1.0), &Sample::scalar(0, 1.0)).unwrap(), 0.0);
        assert_eq!(loss(&spec, &quad_params(1.0), &Sample::scalar(0, 3.0)).unwrap(), 2.0);
    }

    #[test]
    fn logistic_loss_at_zero_is_ln2() {
        let spec = ModelSpec::logistic(2, 3, 0.0).unwrap();
        let s = Sample::new(0, 0, 1, vec![0.3, -2.0, 5.0]);
        let l = loss(&spec, &Params::zeros(&spec), &s).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn label_out_of_range() {
        let spec = binary1d();
        let s = Sample::new(0, 0, 2, vec![1.0]);
        assert!(loss(&spec, &Params::zeros(&spec), &s).is_err());
        assert!(grad(&spec, &Params::zeros(&spec), &s).is_err());
    }

    #[test]
    fn quad_gradients() {
        let spec = ModelSpec::Quad1d;
        assert_eq!(grad(&spec, &quad_params(1.0), &Sample::scalar(0, 0.0)).unwrap()[0], 1.0);
        assert_eq!(grad(&spec, &quad_params(1.0), &Sample::scalar(0, 1.0)).unwrap()[0], 0.0);
    }

    #[test]
    fn logistic_gradient_at_zero() {
        let spec = binary1d();
        let g = grad(&spec, &Params::zeros(&spec), &Sample::new(0, 0, 0, vec![1.0])).unwrap();
        assert_eq!(g.as_slice(), &[-0.5, 0.5]);
    }

    #[test]
    fn hvp_examples() {
        let q = ModelSpec::Quad1d;
        assert_eq!(
            sample_hvp(&q, &quad_params(-4.0), &Sample::scalar(0, 9.0), &[3.0]).unwrap()[0],
            3.0
        );
        let spec = binary1d();
        let s = Sample::new(0, 0, 0, vec![1.0]);
        // class-difference direction: p(1-p) = 1/4 per unit of logit gap
        let h = sample_hvp(&spec, &Params::zeros(&spec), &s, &[-1.0, 1.0]).unwrap();
        assert_eq!(h.as_slice(), &[-0.5, 0.5]);
        let z = sample_hvp(&spec, &Params::zeros(&spec), &s, &[0.0, 0.0]).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn set_hvp_examples() {
        let q = ModelSpec::Quad1d;
        let set = [Sample::scalar(0, 0.0), Sample::scalar(1, 2.0)];
        assert_eq!(set_hvp(&q, &quad_params(1.0), &set, &[1.0]).unwrap()[0], 2.0);
        assert!(set_hvp(&q, &quad_params(1.0), &[], &[1.0]).is_err());

        let spec = ModelSpec::logistic(3, 2, 0.1).unwrap();
        let params = Params::from_slice(&[0.1, -0.2, 0.3, 0.0, -0.5, 0.4]).unwrap();
        let a = Sample::new(0, 0, 1, vec![1.0, 2.0]);
        let b = Sample::new(1, 0, 2, vec![-0.5, 0.7]);
        let v = [1.0, 0.5, -0.3, 0.2, 0.0, 0.9];
        assert_eq!(
            set_hvp(&spec, &params, std::slice::from_ref(&a), &v).unwrap(),
            sample_hvp(&spec, &params, &a, &v).unwrap()
        );
        let doubled = set_hvp(&spec, &params, &[a.clone().with_weight(2.0), b.clone()], &v).unwrap();
        let duplicated = set_hvp(&spec, &params, &[a.clone(), a, b], &v).unwrap();
        for (x, y) in doubled.iter().zip(duplicated.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_fits() {
        let q = ModelSpec::Quad1d;
        let set = [Sample::scalar(0, 0.0), Sample::scalar(1, 2.0)];
        assert_eq!(fit(&q, &set, &FitConfig::closed_form()).unwrap().theta[0], 1.0);
        assert_eq!(
            fit(&q, &[Sample::scalar(0, 5.0)], &FitConfig::closed_form()).unwrap().theta[0],
            5.0
        );
        let spec = binary1d();
        assert!(fit(&spec, &[Sample::new(0, 0, 0, vec![1.0])], &FitConfig::closed_form()).is_err());
        assert!(fit(&q, &[], &FitConfig::closed_form()).is_err());
    }

    #[test]
    fn newton_on_quadratic_is_exact() {
        let q = ModelSpec::Quad1d;
        let set = [Sample::scalar(0, 0.0), Sample::scalar(1, 2.0), Sample::scalar(2, 7.0).with_weight(2.0)];
        let p = fit(&q, &set, &FitConfig::newton()).unwrap();
        assert!((p.theta[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn newton_reports_non_convergence() {
        let spec = ModelSpec::logistic(2, 2, 0.0).unwrap();
        // separable without regularization: no finite optimum
        let set: Vec<Sample> = (0..10)
            .map(|i| {
                let label = i % 2;
                let sign = if label == 0 { -1.0 } else { 1.0 };
                Sample::new(i as u64, 0, label, vec![sign * (1.0 + i as f64 * 0.1), 0.5])
            })
            .collect();
        let cfg = FitConfig {
            max_steps: 5,
            ..FitConfig::newton()
        };
        assert!(matches!(fit(&spec, &set, &cfg), Err(Error::FitNotConverged { steps: 5, .. })));
    }

    #[test]
    fn accuracy_counts() {
        let spec = binary1d();
        // class 1 logit = x, class 0 logit = -x
        let params = Params::from_slice(&[-1.0, 1.0]).unwrap();
        let samples = vec![
            Sample::new(0, 0, 1, vec![1.0]),
            Sample::new(1, 0, 0, vec![-1.0]),
            Sample::new(2, 0, 1, vec![2.0]),
            Sample::new(3, 0, 1, vec![-3.0]),
        ];
        assert_eq!(accuracy(&spec, &params, &samples).unwrap(), 0.75);
        assert_eq!(accuracy(&spec, &params, &samples[..3]).unwrap(), 1.0);
        let flipped: Vec<Sample> = samples[..3]
            .iter()
            .map(|s| Sample { label: 1 - s.label, ..s.clone() })
            .collect();
        assert_eq!(accuracy(&spec, &params, &flipped).unwrap(), 0.0);
        // tie at x = 0 goes to class 0
        assert_eq!(predict(&spec, &params, &[0.0]).unwrap(), 0);
    }

    #[test]
    fn dataset_validation() {
        let ok = Dataset::new(vec![Sample::new(1, 0, 0, vec![1.0]), Sample::new(2, 0, 1, vec![2.0])], 1, 2);
        assert!(ok.is_ok());
        assert!(Dataset::new(vec![Sample::new(1, 0, 0, vec![1.0]), Sample::new(1, 0, 1, vec![2.0])], 1, 2).is_err());
        assert!(Dataset::new(vec![Sample::new(1, 0, 2, vec![1.0])], 1, 2).is_err());
        assert!(Dataset::new(vec![Sample::new(1, 0, 0, vec![1.0, 2.0])], 1, 2).is_err());
        assert!(Dataset::new(vec![Sample::new(1, 0, 0, vec![1.0]).with_weight(0.0)], 1, 2).is_err());
    }
}
