//! Influence-function quantities for one selection round.
//!
//! An [`InfluenceContext`] freezes the parameters, the candidate set (with its
//! balancing weights already applied), the damped Hessian over a designated
//! Hessian set, and
//!
//! ```text
//! s = (H + λI)⁻¹ Σ_{candidates} ∇L(z_i)
//! ```
//!
//! Every score below is a function of that frozen state. Per-candidate
//! gradients `∇L(z_i)` and curvature terms `H_{z_i} s` are computed once at
//! construction; the regularizer direction for a given `mu` is
//! `d_i = ∇L(z_i) − mu · H_{z_i} s`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{self, hessian_operator, ModelSpec, Params, Sample, SetHessian};
use crate::numkit::{cg_solve, deterministic_sum, CgConfig, SpdOperator, Vector};

/// Default weight of the Hessian-related term.
pub const DEFAULT_MU: f64 = 0.5;
/// Default weight of the regularizer in the selection criterion.
pub const DEFAULT_NU: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondOrderCase {
    /// The earlier sample is only a test point in the later round.
    Excluded,
    /// Both samples are optimized jointly in the later round.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionConfig {
    pub mu: f64,
    pub nu: f64,
    pub budget: usize,
}

impl CriterionConfig {
    pub fn new(mu: f64, nu: f64, budget: usize) -> Result<Self> {
        let cfg = CriterionConfig { mu, nu, budget };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_budget(budget: usize) -> Self {
        CriterionConfig {
            mu: DEFAULT_MU,
            nu: DEFAULT_NU,
            budget,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::invalid(format!("mu must lie in [0, 1], got {}", self.mu)));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::invalid(format!("nu must be >= 0, got {}", self.nu)));
        }
        if self.budget == 0 {
            return Err(Error::invalid("budget m must be >= 1"));
        }
        Ok(())
    }
}

/// Relaxed membership weights over the candidates; 1 keeps, 0 discards.
///
/// Selection only ever uses 0/1 entries. Fractional entries are accepted so
/// that the regularizer can be differentiated along a single coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionWeights {
    w: Vec<f64>,
}

impl SelectionWeights {
    pub fn all_kept(n: usize) -> Self {
        SelectionWeights { w: vec![1.0; n] }
    }

    pub fn from_flags(kept: &[bool]) -> Self {
        SelectionWeights {
            w: kept.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Weights keeping exactly the candidates whose ids appear in `ids`.
    pub fn from_kept_ids(ctx: &InfluenceContext, ids: &[u64]) -> Result<Self> {
        for id in ids {
            ctx.index_of(*id)?;
        }
        Ok(SelectionWeights::from_flags(
            &ctx.candidates.iter().map(|c| ids.contains(&c.id)).collect::<Vec<_>>(),
        ))
    }

    pub fn relaxed(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("selection weights must be finite"));
        }
        Ok(SelectionWeights { w })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn is_kept(&self, i: usize) -> bool {
        self.w[i] == 1.0
    }

    pub fn kept_count(&self) -> usize {
        self.w.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn discarded_count(&self) -> usize {
        self.w.iter().filter(|&&v| v == 0.0).count()
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        (0..self.w.len()).filter(|&i| self.is_kept(i)).collect()
    }

    /// Sets candidate `i` to discarded. Refuses to empty the selection.
    pub fn drop_index(&mut self, i: usize) -> Result<()> {
        if i >= self.w.len() {
            return Err(Error::invalid(format!("index {i} out of range")));
        }
        if self.is_kept(i) && self.kept_count() == 1 {
            return Err(Error::invalid("cannot drop the last kept sample"));
        }
        self.w[i] = 0.0;
        Ok(())
    }

    pub fn set(&mut self, i: usize, value: f64) {
        self.w[i] = value;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorGradResult {
    pub beta: Vector,
    pub grad_w: Vec<f64>,
    pub r_value: f64,
}

/// Split of `R_i² − R_o²` into its constant and diversity parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityTerms {
    pub constant: f64,
    pub diversity: f64,
}

pub struct InfluenceContext {
    spec: ModelSpec,
    params: Params,
    candidates: Vec<Sample>,
    outer_weights: Option<Vec<f64>>,
    grads: Vec<Vector>,
    hvp_s: Vec<Vector>,
    grad_sum: Vector,
    s: Vector,
    hessian: SpdOperator<SetHessian>,
    cg: CgConfig,
    solve_cache: Mutex<HashMap<Vec<u64>, Vector>>,
}

impl std::fmt::Debug for InfluenceContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InfluenceContext")
            .field("spec", &self.spec)
            .field("candidates", &self.candidates.len())
            .field("hessian_set", &self.hessian.inner().samples().len())
            .field("damping", &self.hessian.damping())
            .field("s", &self.s)
            .finish()
    }
}

/// Builds the frozen selection-time state.
///
/// `s` solves `(Σ_{hessian_set} ∇²L + damping · I) s = Σ_{candidates} ∇L`.
pub fn build_context(
    spec: &ModelSpec,
    params: &Params,
    candidates: &[Sample],
    hessian_set: &[Sample],
    damping: f64,
    cg: &CgConfig,
) -> Result<InfluenceContext> {
    build(spec, params, candidates, None, hessian_set, damping, cg)
}

/// Like [`build_context`], but candidate `i` enters the outer sum behind `s`
/// with weight `outer_weights[i]`. Per-candidate gradients stay unscaled.
pub fn build_context_weighted(
    spec: &ModelSpec,
    params: &Params,
    candidates: &[Sample],
    outer_weights: &[f64],
    hessian_set: &[Sample],
    damping: f64,
    cg: &CgConfig,
) -> Result<InfluenceContext> {
    if outer_weights.len() != candidates.len() {
        return Err(Error::Dimension {
            expected: candidates.len(),
            got: outer_weights.len(),
        });
    }
    if outer_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("outer weights must be finite and nonnegative"));
    }
    build(spec, params, candidates, Some(outer_weights), hessian_set, damping, cg)
}

fn build(
    spec: &ModelSpec,
    params: &Params,
    candidates: &[Sample],
    outer_weights: Option<&[f64]>,
    hessian_set: &[Sample],
    damping: f64,
    cg: &CgConfig,
) -> Result<InfluenceContext> {
    if candidates.is_empty() {
        return Err(Error::invalid("influence context needs at least one candidate"));
    }
    let mut ids = std::collections::HashSet::new();
    for c in candidates {
        if !ids.insert(c.id) {
            return Err(Error::invalid(format!("duplicate candidate id {}", c.id)));
        }
    }
    let hessian = hessian_operator(spec, params, hessian_set, damping)?;
    let grads = candidates
        .iter()
        .map(|z| models::grad(spec, params, z))
        .collect::<Result<Vec<_>>>()?;
    let grad_sum = match outer_weights {
        None => deterministic_sum(spec.param_dim(), &grads)?,
        Some(w) => {
            let scaled: Vec<Vector> = grads.iter().zip(w).map(|(g, c)| g.scale(*c)).collect();
            deterministic_sum(spec.param_dim(), &scaled)?
        }
    };
    let solved = cg_solve(&hessian, &grad_sum, cg)?;
    let s = solved
        .into_converged(cg, grad_sum.norm())
        .map_err(|e| e.at("solving for s"))?;
    let hvp_s = candidates
        .iter()
        .map(|z| models::sample_hvp(spec, params, z, &s))
        .collect::<Result<Vec<_>>>()?;
    Ok(InfluenceContext {
        spec: *spec,
        params: params.clone(),
        candidates: candidates.to_vec(),
        outer_weights: outer_weights.map(<[f64]>::to_vec),
        grads,
        hvp_s,
        grad_sum,
        s,
        hessian,
        cg: *cg,
        solve_cache: Mutex::new(HashMap::new()),
    })
}

impl InfluenceContext {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn candidates(&self) -> &[Sample] {
        &self.candidates
    }

    pub fn hessian_set(&self) -> &[Sample] {
        self.hessian.inner().samples()
    }

    pub fn hessian(&self) -> &SpdOperator<SetHessian> {
        &self.hessian
    }

    pub fn damping(&self) -> f64 {
        self.hessian.damping()
    }

    pub fn cg_config(&self) -> &CgConfig {
        &self.cg
    }

    /// `s = (H + λI)⁻¹ Σ_{candidates} ∇L`.
    pub fn s(&self) -> &Vector {
        &self.s
    }

    pub fn grad_sum(&self) -> &Vector {
        &self.grad_sum
    }

    pub fn candidate_grad(&self, i: usize) -> &Vector {
        &self.grads[i]
    }

    /// `H_{z_i} s` for candidate `i`.
    pub fn candidate_hvp_s(&self, i: usize) -> &Vector {
        &self.hvp_s[i]
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn index_of(&self, id: u64) -> Result<usize> {
        self.candidates
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::invalid(format!("sample {id} is not a candidate")))
    }

    /// Same candidates and parameters with a different Hessian set.
    pub fn with_hessian_set(&self, hessian_set: &[Sample]) -> Result<InfluenceContext> {
        build(
            &self.spec,
            &self.params,
            &self.candidates,
            self.outer_weights.as_deref(),
            hessian_set,
            self.damping(),
            &self.cg,
        )
    }

    /// `(H + λI)⁻¹ rhs`, cached by the bit pattern of `rhs`.
    pub fn solve(&self, rhs: &Vector) -> Result<Vector> {
        let key: Vec<u64> = rhs.iter().map(|v| v.to_bits()).collect();
        if let Some(hit) = self.solve_cache.lock().expect("solve cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let res = cg_solve(&self.hessian, rhs, &self.cg)?;
        let sol = res.into_converged(&self.cg, rhs.norm())?;
        self.solve_cache
            .lock()
            .expect("solve cache poisoned")
            .insert(key, sol.clone());
        Ok(sol)
    }

    /// First-order influence of every candidate, in candidate order.
    pub fn candidate_influences(&self) -> Vec<f64> {
        self.grads.iter().map(|g| -self.s.dot(g)).collect()
    }

    /// `d_i = ∇L(z_i) − mu · H_{z_i} s` for candidate `i`.
    pub fn direction(&self, i: usize, mu: f64) -> Vector {
        self.grads[i].add_scaled(-mu, &self.hvp_s[i])
    }

    fn check_weights(&self, w: &SelectionWeights) -> Result<()> {
        if w.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: w.len(),
            });
        }
        Ok(())
    }

    /// `Σ_i (1 − w_i) d_i`
    fn discarded_direction_sum(&self, w: &SelectionWeights, mu: f64) -> Vector {
        let mut acc = Vector::zeros(self.spec.param_dim());
        for (i, wi) in w.values().iter().enumerate() {
            let coef = 1.0 - wi;
            if coef != 0.0 {
                acc.axpy_in_place(coef, &self.direction(i, mu));
            }
        }
        acc
    }

    /// `Σ_i w_i ∇L(z_i)`
    fn kept_grad_sum(&self, w: &SelectionWeights) -> Vector {
        let mut acc = Vector::zeros(self.spec.param_dim());
        for (i, wi) in w.values().iter().enumerate() {
            if *wi != 0.0 {
                acc.axpy_in_place(*wi, &self.grads[i]);
            }
        }
        acc
    }
}

/// `−sᵀ ∇L(z)`; more negative means more valuable to keep.
pub fn first_order_influence(ctx: &InfluenceContext, z: &Sample) -> Result<f64> {
    let g = models::grad(&ctx.spec, &ctx.params, z)?;
    Ok(-ctx.s.dot(&g))
}

/// Effect of upweighting `z` on the influence score of `zp`.
///
/// Excluded: `−∇L(z)ᵀ (H+λI)⁻¹ ∇L(zp)`.
/// Joint: `−(∇L(z) − H_z s)ᵀ (H+λI)⁻¹ ∇L(zp)`.
pub fn second_order_influence(
    ctx: &InfluenceContext,
    z: &Sample,
    zp: &Sample,
    case: SecondOrderCase,
) -> Result<f64> {
    let g_z = models::grad(&ctx.spec, &ctx.params, z)?;
    let g_zp = models::grad(&ctx.spec, &ctx.params, zp)?;
    let u = ctx.solve(&g_zp)?;
    let left = match case {
        SecondOrderCase::Excluded => g_z,
        SecondOrderCase::Joint => {
            let h_s = models::sample_hvp(&ctx.spec, &ctx.params, z, &ctx.s)?;
            g_z.sub(&h_s)
        }
    };
    Ok(-left.dot(&u))
}

/// Total interference of discarding `discarded` on the influence of `zp`:
/// `Σ_{z ∈ discarded} (∇L(z) − mu H_z s)ᵀ (H+λI)⁻¹ ∇L(zp)`.
pub fn total_interference(
    ctx: &InfluenceContext,
    discarded: &[Sample],
    zp: &Sample,
    mu: f64,
) -> Result<f64> {
    let indices = discarded
        .iter()
        .map(|z| ctx.index_of(z.id))
        .collect::<Result<Vec<_>>>()?;
    if indices.is_empty() {
        return Ok(0.0);
    }
    let g_zp = models::grad(&ctx.spec, &ctx.params, zp)?;
    let u = ctx.solve(&g_zp)?;
    Ok(indices.iter().map(|&i| ctx.direction(i, mu).dot(&u)).sum())
}

/// `R(w) = ‖Σ_i (1 − w_i)(∇L(z_i) − mu H_{z_i} s)‖`.
pub fn regularizer(ctx: &InfluenceContext, w: &SelectionWeights, mu: f64) -> Result<f64> {
    ctx.check_weights(w)?;
    Ok(ctx.discarded_direction_sum(w, mu).norm())
}

/// Below this value of `R(w)` the Taylor direction is undefined.
pub fn degenerate_tolerance(candidate_count: usize) -> f64 {
    1e-12 * candidate_count as f64
}

/// Linearization of `R` around `w`.
///
/// `β = Σ_i (1 − w_i) d_i / R(w)` and `grad_w_i = −βᵀ d_i`, which is the
/// exact partial derivative of `R` in `w_i` wherever `R(w) > 0`. When `R(w)`
/// is below [`degenerate_tolerance`] the gradient is all zeros.
pub fn regularizer_taylor_grad(
    ctx: &InfluenceContext,
    w: &SelectionWeights,
    mu: f64,
) -> Result<TaylorGradResult> {
    ctx.check_weights(w)?;
    let total = ctx.discarded_direction_sum(w, mu);
    let r_value = total.norm();
    if r_value <= degenerate_tolerance(ctx.len()) {
        return Ok(TaylorGradResult {
            beta: Vector::zeros(ctx.spec.param_dim()),
            grad_w: vec![0.0; ctx.len()],
            r_value,
        });
    }
    let beta = total.scale(1.0 / r_value);
    let grad_w = (0..ctx.len()).map(|i| -beta.dot(&ctx.direction(i, mu))).collect();
    Ok(TaylorGradResult {
        beta,
        grad_w,
        r_value,
    })
}

/// Norm of the kept-set gradient, `‖Σ_i w_i ∇L(z_i)‖`.
pub fn coreset_gradient_norm(ctx: &InfluenceContext, w: &SelectionWeights) -> Result<f64> {
    ctx.check_weights(w)?;
    Ok(ctx.kept_grad_sum(w).norm())
}

/// Linearization of [`coreset_gradient_norm`]: `grad_w_i = βᵀ ∇L(z_i)` with
/// `β` the unit kept-gradient direction, zeros when degenerate.
pub fn coreset_gradient_norm_grad(
    ctx: &InfluenceContext,
    w: &SelectionWeights,
) -> Result<TaylorGradResult> {
    ctx.check_weights(w)?;
    let total = ctx.kept_grad_sum(w);
    let r_value = total.norm();
    if r_value <= degenerate_tolerance(ctx.len()) {
        return Ok(TaylorGradResult {
            beta: Vector::zeros(ctx.spec.param_dim()),
            grad_w: vec![0.0; ctx.len()],
            r_value,
        });
    }
    let beta = total.scale(1.0 / r_value);
    let grad_w = ctx.grads.iter().map(|g| beta.dot(g)).collect();
    Ok(TaylorGradResult {
        beta,
        grad_w,
        r_value,
    })
}

/// `‖Σ_{all} ∇L − Σ_{kept} ∇L‖`.
pub fn gradient_matching_distance(ctx: &InfluenceContext, w: &SelectionWeights) -> Result<f64> {
    ctx.check_weights(w)?;
    Ok(ctx.grad_sum.sub(&ctx.kept_grad_sum(w)).norm())
}

/// `‖(1 − alpha · mu) Σ_{all} ∇L − Σ_{kept} ∇L‖`, the regularizer under
/// identical per-sample Hessians.
pub fn identical_hessian_form(
    ctx: &InfluenceContext,
    w: &SelectionWeights,
    mu: f64,
    alpha: f64,
) -> Result<f64> {
    ctx.check_weights(w)?;
    Ok(ctx
        .grad_sum
        .scale(1.0 - alpha * mu)
        .sub(&ctx.kept_grad_sum(w))
        .norm())
}

/// `|discarded| / |kept|`: the coefficient that makes
/// [`identical_hessian_form`] equal [`regularizer`] when every per-sample
/// Hessian is the same and the Hessian set is the kept set (undamped).
pub fn identical_hessian_alpha(w: &SelectionWeights) -> Result<f64> {
    let kept = w.kept_count();
    if kept == 0 {
        return Err(Error::invalid("alpha undefined with nothing kept"));
    }
    Ok(w.discarded_count() as f64 / kept as f64)
}

/// Constant and diversity parts of
/// `identical_hessian_form² − gradient_matching_distance²`:
/// `(α²μ² − 2αμ)‖Σ_all ∇L‖²` and `2αμ (Σ_all ∇L)ᵀ(Σ_kept ∇L)`.
pub fn diversity_decomposition(
    ctx: &InfluenceContext,
    w: &SelectionWeights,
    mu: f64,
    alpha: f64,
) -> Result<DiversityTerms> {
    ctx.check_weights(w)?;
    let am = alpha * mu;
    let total = &ctx.grad_sum;
    Ok(DiversityTerms {
        constant: (am * am - 2.0 * am) * total.dot(total),
        diversity: 2.0 * am * total.dot(&ctx.kept_grad_sum(w)),
    })
}

/// Selection objective `Σ_{kept} I(z) + nu · R(w)`.
pub fn criterion_value(ctx: &InfluenceContext, w: &SelectionWeights, mu: f64, nu: f64) -> Result<f64> {
    ctx.check_weights(w)?;
    let influences = ctx.candidate_influences();
    let kept: f64 = w
        .values()
        .iter()
        .zip(&influences)
        .map(|(wi, inf)| wi * inf)
        .sum();
    Ok(kept + nu * regularizer(ctx, w, mu)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_setup(damping: f64) -> InfluenceContext {
        // candidates {0, 2, 4}, Hessian over {0, 2}: θ̂ = 1, H = 2, Σ∇ = −3
        let candidates = [Sample::scalar(0, 0.0), Sample::scalar(1, 2.0), Sample::scalar(2, 4.0)];
        let hessian_set = [Sample::scalar(10, 0.0), Sample::scalar(11, 2.0)];
        build_context(
            &ModelSpec::Quad1d,
            &Params::from_slice(&[1.0]).unwrap(),
            &candidates,
            &hessian_set,
            damping,
            &CgConfig::new(1e-12, 10).unwrap(),
        )
        .unwrap()
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn s_closed_form() {
        close(quad_setup(0.0).s()[0], -1.5);
    }

    #[test]
    fn outer_weights_scale_only_the_sum() {
        let candidates = [Sample::scalar(0, 0.0), Sample::scalar(1, 2.0), Sample::scalar(2, 4.0)];
        let hessian_set = [Sample::scalar(10, 0.0), Sample::scalar(11, 2.0)];
        let build = |w: &[f64]| {
            build_context_weighted(
                &ModelSpec::Quad1d,
                &Params::from_slice(&[1.0]).unwrap(),
                &candidates,
                w,
                &hessian_set,
                0.0,
                &CgConfig::new(1e-12, 10).unwrap(),
            )
        };
        let ctx = build(&[2.0, 0.0, 1.0]).unwrap();
        close(ctx.grad_sum()[0], -1.0);
        close(ctx.s()[0], -0.5);
        close(ctx.candidate_grad(0)[0], 1.0);
        close(ctx.candidate_grad(2)[0], -3.0);
        let unit = build(&[1.0; 3]).unwrap();
        close(unit.s()[0], quad_setup(0.0).s()[0]);
        assert!(build(&[1.0; 2]).is_err());
        assert!(build(&[1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_gradient_sum_gives_zero_s() {
        let c = [Sample::scalar(0, 0.0), Sample::scalar(1, 2.0)];
        let ctx = build_context(
            &ModelSpec::Quad1d,
            &Params::from_slice(&[1.0]).unwrap(),
            &c,
            &c,
            0.0,
            &CgConfig::for_dim(1),
        )
        .unwrap();
        assert_eq!(ctx.s()[0], 0.0);
    }

    #[test]
    fn s_shrinks_with_damping() {
        let mut last = f64::INFINITY;
        for lambda in [0.0, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let norm = quad_setup(lambda).s().norm();
            assert!(norm < last);
            last = norm;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn first_order_examples() {
        let ctx = quad_setup(0.0);
        close(first_order_influence(&ctx, &Sample::scalar(0, 0.0)).unwrap(), 1.5);
        close(first_order_influence(&ctx, &Sample::scalar(5, 1.0)).unwrap(), 0.0);
        close(first_order_influence(&ctx, &Sample::scalar(1, 2.0)).unwrap(), -1.5);
    }

    #[test]
    fn second_order_examples() {
        let ctx = quad_setup(0.0);
        let z = Sample::scalar(0, 0.0);
        let zp = Sample::scalar(7, 3.0);
        close(second_order_influence(&ctx, &z, &zp, SecondOrderCase::Excluded).unwrap(), 1.0);
        close(second_order_influence(&ctx, &z, &zp, SecondOrderCase::Joint).unwrap(), 2.5);
        let flat = Sample::scalar(8, 1.0);
        close(second_order_influence(&ctx, &z, &flat, SecondOrderCase::Excluded).unwrap(), 0.0);
        close(second_order_influence(&ctx, &z, &flat, SecondOrderCase::Joint).unwrap(), 0.0);
    }

    #[test]
    fn interference_examples() {
        let ctx = quad_setup(0.0);
        let zp = Sample::scalar(7, 3.0);
        let dropped = [Sample::scalar(0, 0.0)];
        close(total_interference(&ctx, &dropped, &zp, 1.0).unwrap(), -2.5);
        close(total_interference(&ctx, &dropped, &zp, 0.0).unwrap(), -1.0);
        close(total_interference(&ctx, &[], &zp, 0.5).unwrap(), 0.0);
        assert!(total_interference(&ctx, &[Sample::scalar(99, 0.0)], &zp, 0.5).is_err());
    }

    #[test]
    fn regularizer_examples() {
        let ctx = quad_setup(0.0);
        let w = SelectionWeights::from_flags(&[false, true, true]);
        close(regularizer(&ctx, &w, 0.0).unwrap(), 1.0);
        close(regularizer(&ctx, &w, 1.0).unwrap(), 2.5);
        close(regularizer(&ctx, &SelectionWeights::all_kept(3), 0.5).unwrap(), 0.0);
        assert!(regularizer(&ctx, &SelectionWeights::all_kept(2), 0.5).is_err());
    }

    #[test]
    fn taylor_examples() {
        let ctx = quad_setup(0.0);
        let w = SelectionWeights::from_flags(&[false, true, true]);
        let t = regularizer_taylor_grad(&ctx, &w, 0.0).unwrap();
        close(t.beta[0], 1.0);
        close(t.grad_w[1], 1.0);
        close(t.grad_w[0], -1.0);
        let none = regularizer_taylor_grad(&ctx, &SelectionWeights::all_kept(3), 0.5).unwrap();
        assert!(none.grad_w.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matching_examples() {
        let ctx = quad_setup(0.0);
        let keep_middle = SelectionWeights::from_flags(&[false, true, false]);
        close(gradient_matching_distance(&ctx, &keep_middle).unwrap(), 2.0);
        close(gradient_matching_distance(&ctx, &SelectionWeights::all_kept(3)).unwrap(), 0.0);
        close(
            gradient_matching_distance(&ctx, &keep_middle).unwrap(),
            regularizer(&ctx, &keep_middle, 0.0).unwrap(),
        );
    }

    #[test]
    fn identical_hessian_collapses_at_mu_zero() {
        let ctx = quad_setup(0.0);
        let w = SelectionWeights::from_flags(&[true, false, true]);
        close(
            identical_hessian_form(&ctx, &w, 0.0, 0.7).unwrap(),
            gradient_matching_distance(&ctx, &w).unwrap(),
        );
    }

    #[test]
    fn weights_bookkeeping() {
        let mut w = SelectionWeights::all_kept(3);
        w.drop_index(1).unwrap();
        assert_eq!(w.kept_count(), 2);
        assert_eq!(w.kept_indices(), vec![0, 2]);
        w.drop_index(0).unwrap();
        assert!(w.drop_index(2).is_err());
        assert_eq!(identical_hessian_alpha(&w).unwrap(), 2.0);
    }

    #[test]
    fn criterion_config_validation() {
        assert!(CriterionConfig::new(1.5, 0.0, 1).is_err());
        assert!(CriterionConfig::new(0.5, -0.1, 1).is_err());
        assert!(CriterionConfig::new(0.5, 0.1, 0).is_err());
        let d = CriterionConfig::with_budget(3);
        assert_eq!((d.mu, d.nu), (0.5, 0.01));
    }
}
