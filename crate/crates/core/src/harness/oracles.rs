//! Ground-truth oracles the influence estimates are validated against.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::{InfluenceContext, SecondOrderCase};
use crate::models::{self, FitConfig, ModelSpec, Sample};
use crate::numkit::{dense, FnOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Emit a Kendall tau point at every selection step.
    pub enabled: bool,
    pub epsilon: f64,
    /// Oracle reservoir capacity as a multiple of the buffer capacity.
    pub buffer_multiplier: usize,
    /// Minimum overlap between method candidates and oracle reservoir for a tau point.
    pub min_overlap: usize,
    pub refit: FitConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            enabled: true,
            epsilon: 1e-4,
            buffer_multiplier: 4,
            min_overlap: 10,
            refit: FitConfig::newton(),
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::config("oracle.epsilon", "must be > 0"));
        }
        if self.buffer_multiplier == 0 {
            return Err(Error::config("oracle.buffer_multiplier", "must be >= 1"));
        }
        if self.min_overlap < 2 {
            return Err(Error::config("oracle.min_overlap", "must be >= 2"));
        }
        self.refit.validate()
    }
}

/// Exact leave-one-out effect on the test loss.
///
/// Fits `coreset` to optimality, refits without `z_id` starting from that
/// optimum, and returns `test_loss(without) − test_loss(with)`.
pub fn loo_retrain_delta(
    spec: &ModelSpec,
    coreset: &[Sample],
    test: &[Sample],
    z_id: u64,
    cfg: &FitConfig,
) -> Result<f64> {
    if coreset.len() < 2 {
        return Err(Error::invalid("leave-one-out needs a coreset of at least 2 samples"));
    }
    if !coreset.iter().any(|s| s.id == z_id) {
        return Err(Error::invalid(format!("sample {z_id} is not in the coreset")));
    }
    let full = models::fit(spec, coreset, cfg).map_err(|e| e.at("fitting the full coreset"))?;
    let reduced: Vec<Sample> = coreset.iter().filter(|s| s.id != z_id).cloned().collect();
    let loo = models::fit_from(spec, &reduced, cfg, &full)
        .map_err(|e| e.at(format!("refitting without sample {z_id}")))?;
    Ok(models::total_loss(spec, &loo, test)? - models::total_loss(spec, &full, test)?)
}

fn sample_hessian(ctx: &InfluenceContext, z: &Sample) -> Result<DMatrix<f64>> {
    let spec = *ctx.spec();
    let params = ctx.params().clone();
    let sample = z.clone();
    let op = FnOperator::new(spec.param_dim(), move |v: &[f64]| {
        models::sample_hvp(&spec, &params, &sample, v)
            .map(|r| r.into_inner())
            .unwrap_or_else(|_| vec![f64::NAN; v.len()])
    });
    let h = dense::materialize(&op)?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("sample {} does not match the model", z.id)));
    }
    Ok(h)
}

/// Difference quotient `(I_{ε,z}(z′) − I(z′)) / ε` with exact dense inverses.
///
/// `I_{ε,z}(z′) = −(Σ∇L + ε∇L(z))ᵀ (H + λI + ε H_z)⁻¹ ∇L(z′)` for the joint
/// case. In the excluded case the Hessian is left unperturbed.
pub fn finite_eps_second_order(
    ctx: &InfluenceContext,
    z: &Sample,
    zp: &Sample,
    case: SecondOrderCase,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("epsilon must be positive, got {eps}")));
    }
    let a = dense::materialize(ctx.hessian())?;
    let g_z = models::grad(ctx.spec(), ctx.params(), z)?;
    let g_zp = models::grad(ctx.spec(), ctx.params(), zp)?;
    let total = ctx.grad_sum();
    let perturbed_total = total.add_scaled(eps, &g_z);

    let u = dense::solve(&a, &g_zp)?;
    let base = -total.dot(&u);
    let perturbed = match case {
        SecondOrderCase::Excluded => -perturbed_total.dot(&u),
        SecondOrderCase::Joint => {
            let h_z = sample_hessian(ctx, z)?;
            let a_eps = &a + h_z * eps;
            let u_eps = dense::solve(&a_eps, &g_zp)?;
            -perturbed_total.dot(&u_eps)
        }
    };
    Ok((perturbed - base) / eps)
}
