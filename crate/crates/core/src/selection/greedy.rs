use serde::{Deserialize, Serialize};

use super::{ReplayBuffer, SelectionTrace, SelectorKind};
use crate::error::{Error, Result};
use crate::influence::{
    coreset_gradient_norm, coreset_gradient_norm_grad, regularizer, regularizer_taylor_grad,
    CriterionConfig, InfluenceContext, SelectionWeights,
};

/// When the Hessian behind `s` is rebuilt during a greedy round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianRefresh {
    /// Keep the context's Hessian for the whole round.
    #[default]
    Fixed,
    /// Rebuild the Hessian over the kept candidates after every drop, and
    /// with it `s` and the first-order scores.
    PerDrop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyOptions {
    pub hessian_refresh: HessianRefresh,
    /// Weight of the gradient-matching term for `if_both`.
    pub matching_weight: f64,
    /// Weight of the kept-gradient-norm term for `if_both`.
    pub diversity_weight: f64,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        GreedyOptions {
            hessian_refresh: HessianRefresh::Fixed,
            matching_weight: 1.0,
            diversity_weight: 1.0,
        }
    }
}

pub fn select_greedy(
    ctx: &InfluenceContext,
    cfg: &CriterionConfig,
    kind: SelectorKind,
) -> Result<(ReplayBuffer, SelectionTrace)> {
    select_greedy_with(ctx, cfg, kind, &GreedyOptions::default())
}

/// Greedy backward elimination from the full candidate set.
///
/// Each iteration scores every kept candidate by `I(z_i) + nu · g_i`, where
/// `g_i` is the linearized regularizer gradient at the current weights, and
/// drops the highest score (lowest id on ties) until at most `budget`
/// candidates remain. The first-order scores and `s` stay fixed for the round
/// unless [`HessianRefresh::PerDrop`] is requested.
pub fn select_greedy_with(
    ctx: &InfluenceContext,
    cfg: &CriterionConfig,
    kind: SelectorKind,
    opts: &GreedyOptions,
) -> Result<(ReplayBuffer, SelectionTrace)> {
    cfg.validate()?;
    if !kind.is_influence_based() {
        return Err(Error::invalid(format!("selector `{kind}` is not a greedy influence selector")));
    }
    let n = ctx.len();
    if n == 0 {
        return Err(Error::invalid("no candidates to select from"));
    }
    if cfg.budget >= n {
        let buffer = ReplayBuffer::from_samples(ctx.candidates().to_vec(), cfg.budget)?;
        return Ok((buffer, SelectionTrace::default()));
    }

    let (mu, nu) = match kind {
        SelectorKind::VanillaIf => (cfg.mu, 0.0),
        SelectorKind::IfGradMatch => (0.0, cfg.nu),
        _ => (cfg.mu, cfg.nu),
    };

    let mut refreshed: Option<InfluenceContext> = None;
    let mut influences = ctx.candidate_influences();
    let mut w = SelectionWeights::all_kept(n);
    let mut trace = SelectionTrace::default();

    while w.kept_count() > cfg.budget {
        let current = refreshed.as_ref().unwrap_or(ctx);
        let (r_value, grad_w) = regularizer_linearization(current, &w, kind, mu, opts)?;
        trace.r_values.push(r_value);

        let mut best: Option<(usize, f64)> = None;
        for i in w.kept_indices() {
            let score = influences[i] + nu * grad_w[i];
            let better = match best {
                None => true,
                Some((b, best_score)) => {
                    score > best_score
                        || (score == best_score && ctx.candidates()[i].id < ctx.candidates()[b].id)
                }
            };
            if better {
                best = Some((i, score));
            }
        }
        let (drop, score) = best.expect("kept set is non-empty");
        trace.drop_order.push((ctx.candidates()[drop].id, score));
        w.drop_index(drop)?;

        if opts.hessian_refresh == HessianRefresh::PerDrop && w.kept_count() > cfg.budget {
            let kept: Vec<_> = w
                .kept_indices()
                .into_iter()
                .map(|i| ctx.candidates()[i].clone())
                .collect();
            let rebuilt = ctx.with_hessian_set(&kept)?;
            influences = rebuilt.candidate_influences();
            refreshed = Some(rebuilt);
        }
    }

    let influence_sum: f64 = w.kept_indices().iter().map(|&i| influences[i]).sum();
    let final_r = regularizer_value(refreshed.as_ref().unwrap_or(ctx), &w, kind, mu, opts)?;
    trace.final_criterion = influence_sum + nu * final_r;

    let kept = w
        .kept_indices()
        .into_iter()
        .map(|i| ctx.candidates()[i].clone())
        .collect();
    Ok((ReplayBuffer::from_samples(kept, cfg.budget)?, trace))
}

fn regularizer_linearization(
    ctx: &InfluenceContext,
    w: &SelectionWeights,
    kind: SelectorKind,
    mu: f64,
    opts: &GreedyOptions,
) -> Result<(f64, Vec<f64>)> {
    match kind {
        SelectorKind::IfDiversity => {
            let t = coreset_gradient_norm_grad(ctx, w)?;
            Ok((t.r_value, t.grad_w))
        }
        SelectorKind::IfBoth => {
            let matching = regularizer_taylor_grad(ctx, w, 0.0)?;
            let diversity = coreset_gradient_norm_grad(ctx, w)?;
            let grad = matching
                .grad_w
                .iter()
                .zip(&diversity.grad_w)
                .map(|(m, d)| opts.matching_weight * m + opts.diversity_weight * d)
                .collect();
            Ok((
                opts.matching_weight * matching.r_value + opts.diversity_weight * diversity.r_value,
                grad,
            ))
        }
        _ => {
            let t = regularizer_taylor_grad(ctx, w, mu)?;
            Ok((t.r_value, t.grad_w))
        }
    }
}

fn regularizer_value(
    ctx: &InfluenceContext,
    w: &SelectionWeights,
    kind: SelectorKind,
    mu: f64,
    opts: &GreedyOptions,
) -> Result<f64> {
    match kind {
        SelectorKind::IfDiversity => coreset_gradient_norm(ctx, w),
        SelectorKind::IfBoth => Ok(opts.matching_weight * regularizer(ctx, w, 0.0)?
            + opts.diversity_weight * coreset_gradient_norm(ctx, w)?),
        _ => regularizer(ctx, w, mu),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::build_context;
    use crate::models::{ModelSpec, Params, Sample};
    use crate::numkit::CgConfig;

    fn quad_ctx(xs: &[f64], theta: f64) -> InfluenceContext {
        let c: Vec<Sample> = xs.iter().enumerate().map(|(i, &x)| Sample::scalar(i as u64, x)).collect();
        build_context(
            &ModelSpec::Quad1d,
            &Params::from_slice(&[theta]).unwrap(),
            &c,
            &c,
            0.0,
            &CgConfig::new(1e-12, 10).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn non_binding_budget_keeps_everything() {
        let ctx = quad_ctx(&[0.0, 1.0, 2.0], 1.0);
        let (buf, trace) = select_greedy(&ctx, &CriterionConfig::new(0.5, 0.01, 3).unwrap(), SelectorKind::Ours).unwrap();
        assert_eq!(buf.ids(), vec![0, 1, 2]);
        assert!(trace.drop_order.is_empty());
    }

    #[test]
    fn all_zero_scores_drop_lowest_id() {
        // θ̂ = 1 is the optimum of {0, 1, 2}, so s = 0 and every score is 0
        let ctx = quad_ctx(&[0.0, 1.0, 2.0], 1.0);
        assert_eq!(ctx.s()[0], 0.0);
        let (buf, trace) = select_greedy(&ctx, &CriterionConfig::new(0.5, 0.0, 2).unwrap(), SelectorKind::VanillaIf).unwrap();
        assert_eq!(trace.drop_order, vec![(0, 0.0)]);
        assert_eq!(buf.ids(), vec![1, 2]);
    }

    #[test]
    fn drops_largest_influence_first() {
        // θ = 0 with candidates {1, 2, 5}: s = −8/3 and I(z) = −8z/3, so small z goes first
        let ctx = quad_ctx(&[1.0, 2.0, 5.0], 0.0);
        let (buf, trace) = select_greedy(&ctx, &CriterionConfig::new(0.5, 0.0, 1).unwrap(), SelectorKind::VanillaIf).unwrap();
        assert_eq!(trace.drop_order.iter().map(|d| d.0).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(buf.ids(), vec![2]);
        assert_eq!(trace.r_values.len(), 2);
    }

    #[test]
    fn sampling_kinds_are_rejected() {
        let ctx = quad_ctx(&[0.0, 1.0], 0.5);
        let cfg = CriterionConfig::new(0.5, 0.01, 1).unwrap();
        assert!(select_greedy(&ctx, &cfg, SelectorKind::Reservoir).is_err());
        assert!(select_greedy(&ctx, &cfg, SelectorKind::Ring).is_err());
    }

    #[test]
    fn per_drop_refresh_respects_budget() {
        let ctx = quad_ctx(&[0.0, 1.0, 3.0, 4.0, 9.0], -1.0);
        let opts = GreedyOptions {
            hessian_refresh: HessianRefresh::PerDrop,
            ..GreedyOptions::default()
        };
        let (buf, trace) = select_greedy_with(&ctx, &CriterionConfig::new(0.5, 0.1, 2).unwrap(), SelectorKind::Ours, &opts).unwrap();
        assert_eq!(buf.len(), 2);
        assert_eq!(trace.drop_order.len(), 3);
    }
}
