//! Oracle suites behind `coreset validate` and the acceptance tests.

use std::time::{Duration, Instant};

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::RunConfig;
use crate::error::Result;
use crate::harness::{acc_bwt, finite_eps_second_order, kendall_tau, loo_retrain_delta, pearson, AccuracyMatrix};
use crate::influence::{
    build_context, criterion_value, diversity_decomposition, first_order_influence, gradient_matching_distance,
    identical_hessian_alpha, identical_hessian_form, regularizer, regularizer_taylor_grad, second_order_influence,
    CriterionConfig, InfluenceContext, SecondOrderCase, SelectionWeights,
};
use crate::models::{self, FitConfig, ModelSpec, Params, Sample};
use crate::numkit::{dense, CgConfig};
use crate::selection::{select_exhaustive_with, select_greedy, SelectorKind, SubsetSize};

/// Fault injections used to check that the suites catch real bugs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Mutations {
    /// Flip the sign of the `H_z s` term in the joint second-order influence.
    pub joint_sign: bool,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub criterion: usize,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

type SuiteFn = fn(&Mutations) -> Result<Vec<Check>>;

pub const SUITES: [(&str, usize, SuiteFn); 10] = [
    ("quad_loo", 1, quad_loo),
    ("logistic_loo", 2, logistic_loo),
    ("second_order", 3, second_order),
    ("neumann", 4, neumann),
    ("regularizer", 5, regularizer_identities),
    ("equivalence", 6, selector_equivalence),
    ("greedy_quality", 7, greedy_quality),
    ("metrics", 8, metrics),
    ("trend", 9, trend),
    ("determinism", 10, determinism),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

/// Runs every suite whose name contains `filter`.
pub fn run_suites(filter: Option<&str>, mutations: &Mutations) -> Vec<SuiteReport> {
    SUITES
        .iter()
        .filter(|(name, _, _)| filter.is_none_or(|f| name.contains(f)))
        .map(|&(name, criterion, suite)| run_suite(name, criterion, suite, mutations))
        .collect()
}

fn run_suite(name: &'static str, criterion: usize, suite: SuiteFn, mutations: &Mutations) -> SuiteReport {
    let start = Instant::now();
    let checks = match suite(mutations) {
        Ok(checks) => checks,
        Err(e) => vec![Check {
            name: format!("{name}.run"),
            passed: false,
            detail: format!("error: {e}"),
        }],
    };
    SuiteReport {
        name,
        criterion,
        checks,
        elapsed: start.elapsed(),
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian class blobs with class means drawn at scale `spread`, shifted by `shift`.
pub fn logistic_samples(
    rng: &mut ChaCha8Rng,
    n: usize,
    dim: usize,
    num_classes: usize,
    spread: f64,
    shift: f64,
    first_id: u64,
) -> Vec<Sample> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let means: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| (0..dim).map(|_| spread * normal.sample(rng)).collect())
        .collect();
    (0..n)
        .map(|i| {
            let label = rng.random_range(0..num_classes);
            let x = means[label].iter().map(|m| m + shift + normal.sample(rng)).collect();
            Sample::new(first_id + i as u64, 0, label, x)
        })
        .collect()
}

fn tight_cg(spec: &ModelSpec) -> CgConfig {
    CgConfig::new(1e-12, 20 * spec.param_dim()).expect("valid cg config")
}

fn newton() -> FitConfig {
    FitConfig {
        grad_tolerance: 1e-10,
        max_steps: 200,
        ..FitConfig::newton()
    }
}

/// A random logistic context whose parameters were fit on a shifted set, so
/// `s` is generic.
fn random_context(seed: u64, n: usize, dim: usize, classes: usize, damping: f64) -> Result<InfluenceContext> {
    let mut r = rng(seed);
    let spec = ModelSpec::logistic(classes, dim, 0.1)?;
    let candidates = logistic_samples(&mut r, n, dim, classes, 1.5, 0.0, 0);
    let fit_set = logistic_samples(&mut r, n, dim, classes, 1.5, 0.7, 1000);
    let params = models::fit(&spec, &fit_set, &newton())?;
    build_context(&spec, &params, &candidates, &candidates, damping, &tight_cg(&spec))
}

fn quad_loo(_: &Mutations) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let coreset = [Sample::scalar(0, 0.0), Sample::scalar(1, 2.0)];
    let test = [Sample::scalar(10, 0.0), Sample::scalar(11, 2.0), Sample::scalar(12, 4.0)];
    let spec = ModelSpec::Quad1d;
    let params = models::fit(&spec, &coreset, &FitConfig::closed_form())?;
    let ctx = build_context(&spec, &params, &test, &coreset, 0.0, &tight_cg(&spec))?;
    let delta = loo_retrain_delta(&spec, &coreset, &test, 0, &FitConfig::closed_form())?;
    let inf = first_order_influence(&ctx, &coreset[0])?;
    checks.push(check(
        "quad_loo.hand_case",
        (delta + 1.5).abs() <= 1e-9 && (delta + inf).abs() <= 1e-9,
        format!("delta {delta}, -I {}", -inf),
    ));

    // Removing a sample is a finite step; the influence is the exact
    // derivative of the retrained test loss in the sample's weight.
    let mut worst: f64 = 0.0;
    let normal = Normal::new(0.0, 2.0).expect("normal");
    for seed in 0..50 {
        let mut r = rng(seed);
        let n = r.random_range(2..12);
        let coreset: Vec<Sample> = (0..n)
            .map(|i| Sample::scalar(i as u64, normal.sample(&mut r)).with_weight(r.random_range(0.5..2.0)))
            .collect();
        let test: Vec<Sample> = (0..r.random_range(1..10))
            .map(|i| Sample::scalar(100 + i as u64, normal.sample(&mut r)))
            .collect();
        let params = models::fit(&spec, &coreset, &FitConfig::closed_form())?;
        let ctx = build_context(&spec, &params, &test, &coreset, 0.0, &tight_cg(&spec))?;
        for (k, z) in coreset.iter().enumerate() {
            // upweighting adds ε·L(z) on top of the sample's own weight
            let inf = first_order_influence(&ctx, &z.clone().with_weight(1.0))?;
            let retrained_loss = |eps: f64| -> Result<f64> {
                let mut up = coreset.clone();
                up[k].weight += eps;
                let p = models::fit(&spec, &up, &FitConfig::closed_form())?;
                models::total_loss(&spec, &p, &test)
            };
            let h = 1e-3;
            let d = (8.0 * (retrained_loss(h)? - retrained_loss(-h)?) - (retrained_loss(2.0 * h)? - retrained_loss(-2.0 * h)?))
                / (12.0 * h);
            worst = worst.max((d - inf).abs() / inf.abs().max(1.0));
        }
    }
    checks.push(check(
        "quad_loo.upweight_derivative",
        worst <= 1e-9,
        format!("max relative gap {worst:.2e} over 50 instances"),
    ));
    Ok(checks)
}

fn logistic_loo(_: &Mutations) -> Result<Vec<Check>> {
    let spec = ModelSpec::logistic(2, 10, 0.1)?;
    let mut worst = f64::INFINITY;
    let mut all_ok = true;
    for seed in 0..20u64 {
        let mut r = rng(100 + seed);
        let train = logistic_samples(&mut r, 200, 10, 2, 0.6, 0.0, 0);
        let test = logistic_samples(&mut r, 200, 10, 2, 0.6, 0.0, 10_000);
        let cfg = newton();
        let params = models::fit(&spec, &train, &cfg)?;
        let ctx = build_context(&spec, &params, &test, &train, 0.0, &tight_cg(&spec))?;
        let mut deltas = Vec::with_capacity(train.len());
        let mut predicted = Vec::with_capacity(train.len());
        for z in &train {
            deltas.push(loo_retrain_delta(&spec, &train, &test, z.id, &cfg)?);
            predicted.push(-first_order_influence(&ctx, z)?);
        }
        let rho = pearson(&deltas, &predicted)?;
        worst = worst.min(rho);
        all_ok &= rho >= 0.95;
    }
    Ok(vec![check(
        "logistic_loo.pearson",
        all_ok,
        format!("min pearson {worst:.4} over 20 instances"),
    )])
}

fn joint_influence(ctx: &InfluenceContext, z: &Sample, zp: &Sample, m: &Mutations) -> Result<f64> {
    let joint = second_order_influence(ctx, z, zp, SecondOrderCase::Joint)?;
    if m.joint_sign {
        let excluded = second_order_influence(ctx, z, zp, SecondOrderCase::Excluded)?;
        return Ok(2.0 * excluded - joint);
    }
    Ok(joint)
}

fn second_order(m: &Mutations) -> Result<Vec<Check>> {
    let mut excluded_worst: f64 = 0.0;
    let mut joint_worst: f64 = 0.0;
    let mut ratio_range = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..20u64 {
        let ctx = random_context(200 + seed, 30, 3, 3, 0.01)?;
        let mut r = rng(300 + seed);
        let z = ctx.candidates()[r.random_range(0..ctx.len())].clone();
        let zp = ctx.candidates()[r.random_range(0..ctx.len())].clone();

        let excluded = second_order_influence(&ctx, &z, &zp, SecondOrderCase::Excluded)?;
        for eps in [1.0, 1e-2, 1e-4] {
            let q = finite_eps_second_order(&ctx, &z, &zp, SecondOrderCase::Excluded, eps)?;
            excluded_worst = excluded_worst.max((q - excluded).abs() / excluded.abs().max(1.0));
        }

        let joint = joint_influence(&ctx, &z, &zp, m)?;
        let q = finite_eps_second_order(&ctx, &z, &zp, SecondOrderCase::Joint, 1e-4)?;
        joint_worst = joint_worst.max((q - joint).abs() / joint.abs());

        let e1 = finite_eps_second_order(&ctx, &z, &zp, SecondOrderCase::Joint, 1e-2)? - joint;
        let e2 = finite_eps_second_order(&ctx, &z, &zp, SecondOrderCase::Joint, 5e-3)? - joint;
        let ratio = e1 / e2;
        ratio_range = (ratio_range.0.min(ratio), ratio_range.1.max(ratio));
    }
    Ok(vec![
        check(
            "second_order.excluded",
            excluded_worst <= 1e-9,
            format!("max relative gap {excluded_worst:.2e} over 20 instances"),
        ),
        check(
            "second_order.joint",
            joint_worst <= 1e-3,
            format!("max relative error {joint_worst:.2e} at eps=1e-4"),
        ),
        check(
            "second_order.joint_rate",
            ratio_range.0 >= 1.8 && ratio_range.1 <= 2.2,
            format!("error ratio on halving eps in [{:.3}, {:.3}]", ratio_range.0, ratio_range.1),
        ),
    ])
}

fn neumann(_: &Mutations) -> Result<Vec<Check>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..20u64 {
        let mut r = rng(400 + seed);
        let g = nalgebra::DMatrix::from_fn(10, 10, |_, _| normal.sample(&mut r));
        let a = &g * g.transpose() + nalgebra::DMatrix::identity(10, 10) * 10.0;
        let c = nalgebra::DMatrix::from_fn(10, 10, |_, _| normal.sample(&mut r));
        let b = &c + c.transpose();
        let ratio = dense::neumann_error(&a, &b, 1e-2)? / dense::neumann_error(&a, &b, 5e-3)?;
        range = (range.0.min(ratio), range.1.max(ratio));
    }
    Ok(vec![check(
        "neumann.ratio",
        range.0 >= 3.5 && range.1 <= 4.5,
        format!("error ratio in [{:.3}, {:.3}] over 20 pairs", range.0, range.1),
    )])
}

fn random_flags(r: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    loop {
        let flags: Vec<bool> = (0..n).map(|_| r.random_bool(0.6)).collect();
        let kept = flags.iter().filter(|f| **f).count();
        if kept > 0 && kept < n {
            return flags;
        }
    }
}

fn regularizer_identities(_: &Mutations) -> Result<Vec<Check>> {
    let (mut mu0, mut ident, mut decomp, mut taylor) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let normal = Normal::new(0.0, 2.0).expect("normal");
    for seed in 0..30u64 {
        let ctx = random_context(500 + seed, 15, 3, 3, 0.01)?;
        let mut r = rng(600 + seed);
        let w = SelectionWeights::from_flags(&random_flags(&mut r, ctx.len()));
        let a = regularizer(&ctx, &w, 0.0)?;
        let b = gradient_matching_distance(&ctx, &w)?;
        mu0 = mu0.max((a - b).abs() / a.abs().max(1.0));

        // relaxed weights away from the degenerate all-kept point
        let relaxed: Vec<f64> = (0..ctx.len()).map(|_| r.random_range(0.0..1.0)).collect();
        let mu = r.random_range(0.0..1.0);
        let wr = SelectionWeights::relaxed(relaxed.clone())?;
        let grad = regularizer_taylor_grad(&ctx, &wr, mu)?;
        let h = 1e-5;
        for i in 0..ctx.len() {
            let mut plus = relaxed.clone();
            plus[i] += h;
            let mut minus = relaxed.clone();
            minus[i] -= h;
            let fd = (regularizer(&ctx, &SelectionWeights::relaxed(plus)?, mu)?
                - regularizer(&ctx, &SelectionWeights::relaxed(minus)?, mu)?)
                / (2.0 * h);
            taylor = taylor.max((fd - grad.grad_w[i]).abs() / grad.grad_w[i].abs().max(1.0));
        }

        // identical Hessians: unit-weight quadratic with the kept set as Hessian set
        let n = r.random_range(3..12);
        let samples: Vec<Sample> = (0..n).map(|i| Sample::scalar(i as u64, normal.sample(&mut r))).collect();
        let flags = random_flags(&mut r, n);
        let kept: Vec<Sample> = samples.iter().zip(&flags).filter(|(_, k)| **k).map(|(s, _)| s.clone()).collect();
        let theta = Params::from_slice(&[normal.sample(&mut r)])?;
        let qctx = build_context(&ModelSpec::Quad1d, &theta, &samples, &kept, 0.0, &tight_cg(&ModelSpec::Quad1d))?;
        let qw = SelectionWeights::from_flags(&flags);
        let alpha = identical_hessian_alpha(&qw)?;
        let form = identical_hessian_form(&qctx, &qw, mu, alpha)?;
        let reg = regularizer(&qctx, &qw, mu)?;
        ident = ident.max((form - reg).abs() / reg.abs().max(1.0));
        let gmd = gradient_matching_distance(&qctx, &qw)?;
        let terms = diversity_decomposition(&qctx, &qw, mu, alpha)?;
        let lhs = form * form - gmd * gmd;
        let rhs = terms.constant + terms.diversity;
        decomp = decomp.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    Ok(vec![
        check("regularizer.mu_zero", mu0 <= 1e-12, format!("max relative gap {mu0:.2e}")),
        check("regularizer.identical_hessian", ident <= 1e-9, format!("max relative gap {ident:.2e}")),
        check("regularizer.decomposition", decomp <= 1e-9, format!("max relative gap {decomp:.2e}")),
        check("regularizer.taylor_fd", taylor <= 1e-8, format!("max relative gap {taylor:.2e}")),
    ])
}

fn selector_equivalence(_: &Mutations) -> Result<Vec<Check>> {
    let (mut nu_mismatch, mut mu_mismatch) = (0, 0);
    for seed in 0..50u64 {
        let ctx = random_context(700 + seed, 20, 3, 3, 0.01)?;
        let mut r = rng(800 + seed);
        let m = r.random_range(3..15);
        let mu = r.random_range(0.0..1.0);
        let nu = r.random_range(0.01..2.0);
        let ours = |mu: f64, nu: f64| select_greedy(&ctx, &CriterionConfig::new(mu, nu, m)?, SelectorKind::Ours);
        let (a, _) = ours(mu, 0.0)?;
        let (b, _) = select_greedy(&ctx, &CriterionConfig::new(mu, nu, m)?, SelectorKind::VanillaIf)?;
        nu_mismatch += usize::from(a.ids() != b.ids());
        let (c, _) = ours(0.0, nu)?;
        let (d, _) = select_greedy(&ctx, &CriterionConfig::new(mu, nu, m)?, SelectorKind::IfGradMatch)?;
        mu_mismatch += usize::from(c.ids() != d.ids());
    }
    Ok(vec![
        check("equivalence.nu_zero_is_vanilla", nu_mismatch == 0, format!("{nu_mismatch}/50 mismatches")),
        check("equivalence.mu_zero_is_grad_match", mu_mismatch == 0, format!("{mu_mismatch}/50 mismatches")),
    ])
}

/// `ν` for the greedy-quality instances, large enough that the regularizer
/// competes with the first-order scores.
pub const QUALITY_NU: f64 = 1.0;

fn greedy_quality(_: &Mutations) -> Result<Vec<Check>> {
    let (n, m) = (12, 6);
    let mut at_or_below_median = 0;
    let mut beats_exhaustive = 0;
    for seed in 0..100u64 {
        let ctx = random_context(900 + seed, n, 3, 3, 0.01)?;
        let cfg = CriterionConfig::new(0.5, QUALITY_NU, m)?;
        let (buffer, _) = select_greedy(&ctx, &cfg, SelectorKind::Ours)?;
        let greedy = criterion_value(&ctx, &SelectionWeights::from_kept_ids(&ctx, &buffer.ids())?, cfg.mu, cfg.nu)?;

        let mut r = rng(1000 + seed);
        let mut values = Vec::with_capacity(1000);
        for _ in 0..1000 {
            let mut flags = vec![false; n];
            for i in sample_indices(&mut r, n, m) {
                flags[i] = true;
            }
            values.push(criterion_value(&ctx, &SelectionWeights::from_flags(&flags), cfg.mu, cfg.nu)?);
        }
        values.sort_by(f64::total_cmp);
        let median = 0.5 * (values[499] + values[500]);
        at_or_below_median += usize::from(greedy <= median);

        let (_, best) = select_exhaustive_with(&ctx, &cfg, SubsetSize::Exact)?;
        beats_exhaustive += usize::from(greedy < best - 1e-9 * best.abs().max(1.0));
    }
    Ok(vec![
        check(
            "greedy_quality.median",
            at_or_below_median >= 95,
            format!("greedy <= random-subset median in {at_or_below_median}/100 instances"),
        ),
        check(
            "greedy_quality.exhaustive",
            beats_exhaustive == 0,
            format!("greedy below the exhaustive optimum in {beats_exhaustive}/100 instances"),
        ),
    ])
}

fn metrics(_: &Mutations) -> Result<Vec<Check>> {
    let m = AccuracyMatrix::from_rows(vec![vec![0.9], vec![0.85, 0.9], vec![0.7, 0.8, 0.9]])?;
    let (acc, bwt) = acc_bwt(&m)?;
    let ones = AccuracyMatrix::from_rows(vec![vec![1.0], vec![1.0; 2], vec![1.0; 3]])?;
    let (acc1, bwt1) = acc_bwt(&ones)?;
    let taus = [
        kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])?,
        kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0])?,
        kendall_tau(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0])?,
    ];
    Ok(vec![
        check(
            "metrics.acc_bwt",
            (acc - 0.8).abs() < 1e-12 && (bwt + 0.15).abs() < 1e-12 && acc1 == 1.0 && bwt1 == 0.0,
            format!("ACC {acc}, BWT {bwt}"),
        ),
        check(
            "metrics.kendall",
            taus[0] == 1.0 && taus[1] == -1.0 && (taus[2] - 1.0 / 3.0).abs() < 1e-15,
            format!("tau {taus:?}"),
        ),
    ])
}

/// Drift stream used for the tau trend comparison: shifted class means plus
/// per-task label noise, one training epoch per task, and a regularizer
/// weight large enough to matter against the summed-loss influence scores.
pub const TREND_CONFIG: &str = "\
stream.num_tasks=5
stream.classes_per_task=2
stream.samples_per_class=50
stream.dim=2
stream.class_separation=4
stream.drift=0,0.5,1,1.5,2
stream.label_noise=0.2,0.2,0.2,0.2,0.2
train.epochs=1
criterion.m=50
criterion.nu=10
";

pub fn trend_config(selector: SelectorKind, seed: u64) -> Result<RunConfig> {
    RunConfig::parse(&format!("{TREND_CONFIG}selector={selector}\nseed={seed}\n"))
}

fn trend(_: &Mutations) -> Result<Vec<Check>> {
    let mut tau = [0.0; 2];
    let mut acc = [0.0; 2];
    for seed in 0..10 {
        for (k, kind) in [SelectorKind::Ours, SelectorKind::VanillaIf].into_iter().enumerate() {
            let report = trend_config(kind, seed)?.execute()?;
            tau[k] += report.mean_tau().unwrap_or(0.0) / 10.0;
            if kind == SelectorKind::Ours {
                acc[0] += report.acc / 10.0;
            }
        }
        acc[1] += trend_config(SelectorKind::Reservoir, seed)?.execute()?.acc / 10.0;
    }
    Ok(vec![
        check(
            "trend.tau",
            tau[0] > tau[1],
            format!("mean tau ours {:.4} vs vanilla_if {:.4}", tau[0], tau[1]),
        ),
        check(
            "trend.acc",
            acc[0] >= acc[1] - 0.01,
            format!("mean ACC ours {:.4} vs reservoir {:.4}", acc[0], acc[1]),
        ),
    ])
}

fn determinism(_: &Mutations) -> Result<Vec<Check>> {
    let cfg = RunConfig::parse(
        "stream.num_tasks=3\nstream.samples_per_class=30\nstream.drift=0,1,2\ncriterion.m=20\nseed=7\n",
    )?;
    let a = cfg.execute()?.to_json()?;
    let b = cfg.execute()?.to_json()?;
    Ok(vec![check(
        "determinism.report_json",
        a == b,
        format!("{} bytes, identical: {}", a.len(), a == b),
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut names = suite_names();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), SUITES.len());
    }

    #[test]
    fn filter_selects_one_suite() {
        let reports = run_suites(Some("neumann"), &Mutations::default());
        assert_eq!(reports.len(), 1);
        assert!(reports[0].passed(), "{:?}", reports[0].checks);
    }

    #[test]
    fn mutation_breaks_joint_check() {
        let reports = run_suites(Some("second_order"), &Mutations { joint_sign: true });
        let failed: Vec<_> = reports[0].failed_checks().iter().map(|c| c.name.clone()).collect();
        assert!(failed.contains(&"second_order.joint".to_string()), "{failed:?}");
    }
}
