//! Subcommand implementations. Every command fans seeds out over the rayon
//! pool, sorts results by seed and writes deterministic files; wall time goes
//! to a separate `timing.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use irlc_core::classify::{plan_tabular, PlanMode};
use irlc_core::classify::{run_caty, Branch, CatyConfig, CatyInput, LabeledReward, RewardSampler};
use irlc_core::expert::{
    empirical_feature_expectation, empirical_occupancy, feature_expectation, sample_expert_dataset,
    ExpertDataset, ExpertEstimate,
};
use irlc_core::exploration::{explore_reward_free_tabular, ExploreConfig};
use irlc_core::linear::{cube_grid, degeneracy_check, stage_feasibility_scan};
use irlc_core::mdp::{occupancy_measure, policy_evaluation, value_iteration, Policy, RewardSpec};
use irlc_core::sampler::ForwardSampler;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    build_packing, tree_params, ExpertSource, HardnessKind, LoadedConfig, RatesKind, RewardSource,
};
use crate::error::{CliError, CliResult};
use crate::format::{self, Histogram, Instance, SweepRow};

/// Shared run options.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub library_version: String,
}

impl Provenance {
    pub fn new(command: &str, loaded: &LoadedConfig) -> Self {
        Self {
            command: command.into(),
            config_hash: loaded.hash.clone(),
            seeds: sorted_seeds(loaded),
            library_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub files: Vec<PathBuf>,
    /// Budget exhausted or other non-fatal condition worth reporting.
    pub flags: Vec<String>,
    pub summary: serde_json::Value,
}

fn sorted_seeds(loaded: &LoadedConfig) -> Vec<u64> {
    let mut seeds = loaded.config.replication.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    seeds
}

fn per_seed<T: Send>(
    loaded: &LoadedConfig,
    f: impl Fn(u64) -> CliResult<T> + Sync,
) -> CliResult<Vec<(u64, T)>> {
    sorted_seeds(loaded)
        .into_par_iter()
        .map(|seed| f(seed).map(|r| (seed, r)))
        .collect()
}

fn write_timing(dir: &Path, start: Instant, files: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join("timing.json");
    format::write_json(
        &path,
        &serde_json::json!({ "wall_time_seconds": start.elapsed().as_secs_f64() }),
    )?;
    files.push(path);
    Ok(())
}

fn expert_policy<'a>(loaded: &LoadedConfig, inst: &'a Instance) -> Option<&'a Policy> {
    inst.policy(&loaded.config.expert.policy)
}

fn expert_data(loaded: &LoadedConfig, inst: &Instance, seed: u64) -> CliResult<ExpertDataset> {
    let dims = inst.mdp.dims();
    match loaded.config.expert.source {
        ExpertSource::Instance => {
            let pi = expert_policy(loaded, inst).ok_or_else(|| {
                CliError::Config(format!(
                    "instance has no policy named `{}`",
                    loaded.config.expert.policy
                ))
            })?;
            Ok(sample_expert_dataset(
                &inst.mdp,
                pi,
                loaded.config.expert.tau_e,
                seed,
            )?)
        }
        ExpertSource::Dataset => {
            let path = loaded.resolve(loaded.config.expert.dataset.as_ref().expect("validated"));
            Ok(ExpertDataset::new(
                dims,
                format::read_episodes(&path, dims)?,
            )?)
        }
    }
}

fn rewards(loaded: &LoadedConfig, inst: &Instance, seed: u64) -> CliResult<Vec<LabeledReward>> {
    let c = &loaded.config.rewards;
    match c.source {
        RewardSource::Instance => {
            if inst.rewards.is_empty() {
                return Err(CliError::Config(
                    "rewards.source = \"instance\" but the instance has no rewards".into(),
                ));
            }
            Ok(inst
                .rewards
                .iter()
                .map(|(id, reward)| LabeledReward {
                    id: id.clone(),
                    reward: reward.clone(),
                })
                .collect())
        }
        RewardSource::Random => {
            let sampler = if c.linear {
                let f = inst.features.as_ref().ok_or_else(|| {
                    CliError::Config("linear rewards need an instance with features".into())
                })?;
                RewardSampler::Linear {
                    dim: f.dim(),
                    horizon: inst.mdp.dims().horizon,
                }
            } else {
                RewardSampler::Dense(inst.mdp.dims())
            };
            Ok(sampler.sample(c.count, seed)?)
        }
    }
}

fn caty_config(loaded: &LoadedConfig, seed: u64) -> CatyConfig {
    let a = &loaded.config.algorithm;
    let mut cfg = CatyConfig::new(
        a.structure.into(),
        a.epsilon,
        a.delta,
        a.threshold,
        a.max_episodes,
    );
    cfg.bonus_constant = a.bonus_constant;
    cfg.beta_constant = a.beta_constant;
    cfg.plan_mode = a.plan_mode.map(Into::into);
    cfg.small_set_threshold = a.small_set_threshold;
    cfg.seed = seed;
    cfg
}

/// Per-seed outcome of a classification run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifySeed {
    pub seed: u64,
    pub branch: String,
    pub tau_e: usize,
    pub tau: usize,
    pub budget_exhausted: bool,
    pub sup_error: Option<f64>,
    pub mislabeled_fraction: Option<f64>,
    pub estimation_event: Option<bool>,
    pub sandwich: Option<bool>,
    pub inner: Vec<String>,
    pub mid_true: Option<Vec<String>>,
    pub outer: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<SweepRow>,
    pub histogram: Histogram,
}

fn branch_name(b: Branch) -> String {
    match b {
        Branch::RewardFree => "reward_free",
        Branch::PerReward => "per_reward",
        Branch::Linear => "linear",
    }
    .into()
}

pub fn classify_seed(loaded: &LoadedConfig, seed: u64, oracle: bool) -> CliResult<ClassifySeed> {
    let inst = loaded.build_instance(seed)?;
    let data = expert_data(loaded, &inst, seed)?;
    let rewards = rewards(loaded, &inst, seed)?;
    let cfg = caty_config(loaded, seed);
    let oracle_expert = if oracle {
        expert_policy(loaded, &inst)
    } else {
        None
    };
    let run = run_caty(
        &CatyInput {
            mdp: &inst.mdp,
            features: inst.features.as_ref(),
            expert_data: &data,
            rewards: &rewards,
            oracle_expert,
        },
        &cfg,
    )?;
    let sweep = &run.sweep;
    let estimation_event = sweep.estimation_event();
    let sandwich = sweep.sandwich_holds();
    // |C̄ − Ĉ| ≤ ε for every reward forces inner ⊆ mid ⊆ outer
    if estimation_event == Some(true) && sandwich != Some(true) {
        return Err(CliError::Invariant(format!(
            "seed {seed}: sandwich fails under the estimation event"
        )));
    }
    Ok(ClassifySeed {
        seed,
        branch: branch_name(run.branch),
        tau_e: run.expert_episodes,
        tau: run.exploration_episodes,
        budget_exhausted: run.stops.iter().any(|s| s.budget_exhausted),
        sup_error: sweep.sup_error(),
        mislabeled_fraction: sweep.mislabeled_fraction(),
        estimation_event,
        sandwich,
        inner: sweep.inner.clone(),
        mid_true: sweep.mid_true.clone(),
        outer: sweep.outer.clone(),
        rows: sweep
            .reports
            .iter()
            .map(|r| SweepRow::new(seed, r))
            .collect(),
        histogram: Histogram::new(sweep, 20),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifySummary {
    pub provenance: Provenance,
    pub epsilon: f64,
    pub delta: f64,
    pub threshold: f64,
    pub seeds: usize,
    /// Fraction of seeds with `sup |C̄ − Ĉ| ≤ ε` (oracle mode).
    pub pac_success_rate: Option<f64>,
    pub max_sup_error: Option<f64>,
    pub mean_mislabeled_fraction: Option<f64>,
    pub budget_exhausted: bool,
    pub per_seed: Vec<ClassifySeed>,
}

pub fn cmd_classify(loaded: &LoadedConfig, opts: &RunOptions) -> CliResult<CommandOutcome> {
    let start = Instant::now();
    let results: Vec<ClassifySeed> =
        per_seed(loaded, |seed| classify_seed(loaded, seed, opts.oracle))?
            .into_iter()
            .map(|(_, r)| r)
            .collect();
    let n = results.len() as f64;
    let oracle = results.iter().all(|r| r.sup_error.is_some());
    let summary = ClassifySummary {
        provenance: Provenance::new("classify", loaded),
        epsilon: loaded.config.algorithm.epsilon,
        delta: loaded.config.algorithm.delta,
        threshold: loaded.config.algorithm.threshold,
        seeds: results.len(),
        pac_success_rate: oracle.then(|| {
            results
                .iter()
                .filter(|r| r.estimation_event == Some(true))
                .count() as f64
                / n
        }),
        max_sup_error: oracle.then(|| {
            results
                .iter()
                .filter_map(|r| r.sup_error)
                .fold(0.0, f64::max)
        }),
        mean_mislabeled_fraction: oracle.then(|| {
            results
                .iter()
                .filter_map(|r| r.mislabeled_fraction)
                .sum::<f64>()
                / n
        }),
        budget_exhausted: results.iter().any(|r| r.budget_exhausted),
        per_seed: results,
    };
    let dir = &opts.out_dir;
    let rows: Vec<SweepRow> = summary
        .per_seed
        .iter()
        .flat_map(|r| r.rows.clone())
        .collect();
    let mut files = vec![dir.join("sweep.csv"), dir.join("summary.json")];
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    format::write_csv(&files[0], &rows)?;
    format::write_json(&files[1], &summary)?;
    write_timing(dir, start, &mut files)?;
    let flags = if summary.budget_exhausted {
        vec!["budget_exhausted".into()]
    } else {
        Vec::new()
    };
    Ok(CommandOutcome {
        files,
        flags,
        summary: serde_json::to_value(&summary).expect("serializable"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub seed: u64,
    pub budget: usize,
    pub metric: String,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub metric: String,
    /// Least-squares slope of `ln(mean error)` on `ln(budget)`; `None` with
    /// fewer than two budgets.
    pub slope: Option<f64>,
    pub budgets: Vec<usize>,
    pub mean_errors: Vec<f64>,
    pub median_errors: Vec<f64>,
    /// Medians never increase with the budget.
    pub nonincreasing: bool,
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn fit_rates(points: &[RatePoint]) -> Vec<RateFit> {
    let mut metrics: Vec<String> = points.iter().map(|p| p.metric.clone()).collect();
    metrics.sort();
    metrics.dedup();
    metrics
        .into_iter()
        .map(|metric| {
            let mut budgets: Vec<usize> = points
                .iter()
                .filter(|p| p.metric == metric)
                .map(|p| p.budget)
                .collect();
            budgets.sort_unstable();
            budgets.dedup();
            let errors_at = |b: usize| -> Vec<f64> {
                points
                    .iter()
                    .filter(|p| p.metric == metric && p.budget == b)
                    .map(|p| p.error)
                    .collect()
            };
            let mean_errors: Vec<f64> = budgets
                .iter()
                .map(|&b| {
                    let e = errors_at(b);
                    e.iter().sum::<f64>() / e.len() as f64
                })
                .collect();
            let median_errors: Vec<f64> = budgets.iter().map(|&b| median(errors_at(b))).collect();
            let lx: Vec<f64> = budgets.iter().map(|&b| (b as f64).ln()).collect();
            let ly: Vec<f64> = mean_errors
                .iter()
                .map(|e| e.max(f64::MIN_POSITIVE).ln())
                .collect();
            RateFit {
                slope: ols_slope(&lx, &ly),
                nonincreasing: median_errors.windows(2).all(|w| w[1] <= w[0] + 1e-12),
                metric,
                budgets,
                mean_errors,
                median_errors,
            }
        })
        .collect()
}

/// Expert estimator errors `Σ_h ‖d̂_h − d_h‖₁` and, with features,
/// `Σ_h ‖ψ̂_h − ψ_h‖₂` at every budget (nested prefixes of one dataset).
pub fn expert_rate_points(
    inst: &Instance,
    expert: &Policy,
    budgets: &[usize],
    seed: u64,
) -> CliResult<Vec<RatePoint>> {
    let exact = occupancy_measure(&inst.mdp, expert)?;
    let psi = inst
        .features
        .as_ref()
        .map(|f| feature_expectation(&exact, f))
        .transpose()?;
    let max = budgets.iter().copied().max().unwrap_or(0);
    let data = sample_expert_dataset(&inst.mdp, expert, max, seed)?;
    let mut out = Vec::new();
    for &b in budgets {
        let prefix = data.prefix(b);
        let ExpertEstimate::Occupancy(occ) = empirical_occupancy(&prefix)? else {
            unreachable!("tabular estimator returns an occupancy")
        };
        out.push(RatePoint {
            seed,
            budget: b,
            metric: "occupancy_l1".into(),
            error: occ.l1_distance(&exact)?,
        });
        if let (Some(f), Some(psi)) = (&inst.features, &psi) {
            let ExpertEstimate::FeatureExpectation(hat) =
                empirical_feature_expectation(&prefix, f)?
            else {
                unreachable!("linear estimator returns feature expectations")
            };
            let error = hat
                .iter()
                .zip(psi)
                .map(|(x, y)| {
                    x.iter()
                        .zip(y)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum();
            out.push(RatePoint {
                seed,
                budget: b,
                metric: "feature_expectation_l2".into(),
                error,
            });
        }
    }
    Ok(out)
}

fn exploration_rate_points(
    loaded: &LoadedConfig,
    inst: &Instance,
    seed: u64,
) -> CliResult<Vec<RatePoint>> {
    let rewards = rewards(loaded, inst, seed)?;
    let tables = rewards
        .iter()
        .map(|r| r.reward.resolve(inst.features.as_ref(), false))
        .collect::<irlc_core::Result<Vec<_>>>()?;
    let exact = tables
        .iter()
        .map(|t| value_iteration(&inst.mdp, t).map(|v| v.j))
        .collect::<irlc_core::Result<Vec<_>>>()?;
    let a = &loaded.config.algorithm;
    let mut out = Vec::new();
    for &b in &loaded.config.rates.budgets {
        let mut cfg = ExploreConfig::new(a.epsilon, a.delta, b)?;
        cfg.bonus_constant = a.bonus_constant;
        let mut sampler = ForwardSampler::new(&inst.mdp, seed);
        let data = explore_reward_free_tabular(&mut sampler, &cfg)?.dataset;
        let mut sup: f64 = 0.0;
        for (t, j) in tables.iter().zip(&exact) {
            sup = sup.max((plan_tabular(&data, t, PlanMode::Plain, &cfg)? - j).abs());
        }
        out.push(RatePoint {
            seed,
            budget: b,
            metric: "planning_sup_error".into(),
            error: sup,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesSummary {
    pub provenance: Provenance,
    pub kind: RatesKind,
    pub fits: Vec<RateFit>,
    /// Set when the grid has a single budget.
    pub single_budget: bool,
}

pub fn cmd_rates(loaded: &LoadedConfig, opts: &RunOptions) -> CliResult<CommandOutcome> {
    let start = Instant::now();
    let kind = loaded.config.rates.kind;
    let points: Vec<RatePoint> = per_seed(loaded, |seed| {
        let inst = loaded.build_instance(seed)?;
        match kind {
            RatesKind::Expert => {
                let pi = expert_policy(loaded, &inst)
                    .ok_or_else(|| CliError::Config("expert rates need an expert policy".into()))?;
                expert_rate_points(&inst, pi, &loaded.config.rates.budgets, seed)
            }
            RatesKind::Exploration => exploration_rate_points(loaded, &inst, seed),
        }
    })?
    .into_iter()
    .flat_map(|(_, p)| p)
    .collect();
    let mut budgets = loaded.config.rates.budgets.clone();
    budgets.sort_unstable();
    budgets.dedup();
    let summary = RatesSummary {
        provenance: Provenance::new("rates", loaded),
        kind,
        fits: fit_rates(&points),
        single_budget: budgets.len() < 2,
    };
    let dir = &opts.out_dir;
    let mut files = vec![dir.join("rates.csv"), dir.join("rates.json")];
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    format::write_csv(&files[0], &points)?;
    format::write_json(&files[1], &summary)?;
    write_timing(dir, start, &mut files)?;
    let flags = if summary.single_budget {
        vec!["single_budget".into()]
    } else {
        Vec::new()
    };
    Ok(CommandOutcome {
        files,
        flags,
        summary: serde_json::to_value(&summary).expect("serializable"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeHardnessSeed {
    pub seed: u64,
    pub c_hat_reference: f64,
    pub c_hat_hidden: f64,
    pub label_reference: bool,
    pub label_hidden: bool,
    /// True labels are `true` on the reference and `false` on the hidden
    /// instance.
    pub misclassified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeHardness {
    pub provenance: Provenance,
    /// Set when no hidden triple is configured: no distinguishing reward.
    pub trivial: bool,
    pub j_star_reference: f64,
    pub j_star_hidden: Option<f64>,
    pub gap: Option<f64>,
    pub threshold: Option<f64>,
    pub budget: usize,
    pub misclassification_rate: Option<f64>,
    pub per_seed: Vec<TreeHardnessSeed>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingHardnessSeed {
    pub seed: u64,
    pub packing_sup_error: f64,
    pub random_sup_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingHardness {
    pub provenance: Provenance,
    pub budget: usize,
    pub states: usize,
    /// Fraction of seeds where the packing instance has the larger error.
    pub packing_harder_fraction: f64,
    pub per_seed: Vec<PackingHardnessSeed>,
}

fn single_reward_caty(
    loaded: &LoadedConfig,
    inst: &Instance,
    reward: &LabeledReward,
    threshold: f64,
    budget: usize,
    seed: u64,
) -> CliResult<f64> {
    let pi = expert_policy(loaded, inst)
        .ok_or_else(|| CliError::Config("instance has no expert".into()))?;
    let data = sample_expert_dataset(&inst.mdp, pi, loaded.config.expert.tau_e, seed)?;
    let mut cfg = caty_config(loaded, seed);
    cfg.max_episodes = budget;
    cfg.threshold = threshold;
    let run = run_caty(
        &CatyInput {
            mdp: &inst.mdp,
            features: None,
            expert_data: &data,
            rewards: std::slice::from_ref(reward),
            oracle_expert: None,
        },
        &cfg,
    )?;
    Ok(run.sweep.reports[0].c_hat)
}

fn tree_hardness(loaded: &LoadedConfig) -> CliResult<TreeHardness> {
    let c = &loaded.config.instance;
    let budget = loaded.config.hardness.budget;
    let mut reference_cfg = c.clone();
    reference_cfg.hidden = None;
    let reference = crate::config::build_instance(&reference_cfg, &loaded.base, 0)?;
    let reward_of = |inst: &Instance| LabeledReward {
        id: "tree".into(),
        reward: inst.rewards[0].1.clone(),
    };
    let table = reward_of(&reference).reward.resolve(None, true)?;
    let j0 = value_iteration(&reference.mdp, &table)?.j;
    let closed =
        irlc_core::instances::TreeInstance::closed_form_optimum(&tree_params(&reference_cfg));
    if (j0 - closed).abs() > 1e-9 {
        return Err(CliError::Invariant(format!(
            "tree optimum {j0} differs from closed form {closed}"
        )));
    }
    let expert = reference
        .policy("expert")
        .expect("tree instances carry an expert");
    let j_expert = policy_evaluation(&reference.mdp, &table, expert)?.j;
    let provenance = Provenance::new("hardness", loaded);
    if c.hidden.is_none() {
        return Ok(TreeHardness {
            provenance,
            trivial: true,
            j_star_reference: j0,
            j_star_hidden: None,
            gap: None,
            threshold: None,
            budget,
            misclassification_rate: None,
            per_seed: Vec::new(),
        });
    }
    let hidden = crate::config::build_instance(c, &loaded.base, 0)?;
    let j1 = value_iteration(&hidden.mdp, &table)?.j;
    // Δ halfway between the two true noncompatibilities
    let threshold = (j0 + j1) / 2.0 - j_expert;
    let per_seed: Vec<TreeHardnessSeed> = per_seed(loaded, |seed| {
        let c0 = single_reward_caty(
            loaded,
            &reference,
            &reward_of(&reference),
            threshold,
            budget,
            seed,
        )?;
        let c1 = single_reward_caty(
            loaded,
            &hidden,
            &reward_of(&hidden),
            threshold,
            budget,
            seed,
        )?;
        let (l0, l1) = (c0 <= threshold, c1 <= threshold);
        Ok(TreeHardnessSeed {
            seed,
            c_hat_reference: c0,
            c_hat_hidden: c1,
            label_reference: l0,
            label_hidden: l1,
            misclassified: !l0 || l1,
        })
    })?
    .into_iter()
    .map(|(_, r)| r)
    .collect();
    let rate = per_seed.iter().filter(|r| r.misclassified).count() as f64 / per_seed.len() as f64;
    Ok(TreeHardness {
        provenance,
        trivial: false,
        j_star_reference: j0,
        j_star_hidden: Some(j1),
        gap: Some(j1 - j0),
        threshold: Some(threshold),
        budget,
        misclassification_rate: Some(rate),
        per_seed,
    })
}

fn sup_error(
    loaded: &LoadedConfig,
    inst: &Instance,
    rewards: &[LabeledReward],
    budget: usize,
    seed: u64,
) -> CliResult<f64> {
    let pi = expert_policy(loaded, inst)
        .ok_or_else(|| CliError::Config("instance has no expert".into()))?;
    let data = sample_expert_dataset(&inst.mdp, pi, loaded.config.expert.tau_e, seed)?;
    let mut cfg = caty_config(loaded, seed);
    cfg.max_episodes = budget;
    let run = run_caty(
        &CatyInput {
            mdp: &inst.mdp,
            features: None,
            expert_data: &data,
            rewards,
            oracle_expert: Some(pi),
        },
        &cfg,
    )?;
    Ok(run.sweep.sup_error().expect("oracle mode"))
}

fn packing_hardness(loaded: &LoadedConfig) -> CliResult<PackingHardness> {
    let c = &loaded.config.instance;
    let budget = loaded.config.hardness.budget;
    let per_seed: Vec<PackingHardnessSeed> = per_seed(loaded, |seed| {
        let (packing, _) = build_packing(c, seed)?;
        let dims = packing.mdp.dims();
        let r = irlc_core::instances::random_instance(
            dims.states,
            dims.actions,
            dims.horizon,
            irlc_core::instances::RandomStructure::Tabular,
            seed,
        )?;
        let mut random = Instance::new(r.mdp);
        random.policies = vec![("expert".into(), r.expert)];
        let mut rewards =
            RewardSampler::Dense(dims).sample(loaded.config.hardness.random_rewards, seed)?;
        let mut packing_rewards = rewards.clone();
        packing_rewards.push(LabeledReward {
            id: "distinguished".into(),
            reward: packing.rewards[0].1.clone(),
        });
        if let RewardSpec::Dense(t) = &packing.rewards[0].1 {
            // same reward table on the random instance keeps the sets paired
            rewards.push(LabeledReward {
                id: "distinguished".into(),
                reward: RewardSpec::Dense(t.clone()),
            });
        }
        Ok(PackingHardnessSeed {
            seed,
            packing_sup_error: sup_error(loaded, &packing, &packing_rewards, budget, seed)?,
            random_sup_error: sup_error(loaded, &random, &rewards, budget, seed)?,
        })
    })?
    .into_iter()
    .map(|(_, r)| r)
    .collect();
    let states = build_packing(c, 0)?.0.mdp.dims().states;
    let harder = per_seed
        .iter()
        .filter(|r| r.packing_sup_error > r.random_sup_error)
        .count();
    Ok(PackingHardness {
        provenance: Provenance::new("hardness", loaded),
        budget,
        states,
        packing_harder_fraction: harder as f64 / per_seed.len() as f64,
        per_seed,
    })
}

pub fn cmd_hardness(loaded: &LoadedConfig, opts: &RunOptions) -> CliResult<CommandOutcome> {
    let start = Instant::now();
    let dir = &opts.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join("hardness.json");
    let (summary, flags) = match loaded.config.hardness.kind {
        HardnessKind::Tree => {
            let report = tree_hardness(loaded)?;
            let flags = if report.trivial {
                vec!["trivial_no_hidden_triple".into()]
            } else {
                Vec::new()
            };
            (serde_json::to_value(&report).expect("serializable"), flags)
        }
        HardnessKind::Packing => (
            serde_json::to_value(packing_hardness(loaded)?).expect("serializable"),
            Vec::new(),
        ),
    };
    format::write_json(&path, &summary)?;
    let mut files = vec![path];
    write_timing(dir, start, &mut files)?;
    Ok(CommandOutcome {
        files,
        flags,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyStage {
    pub stage: usize,
    pub separable: bool,
    pub boundary: bool,
    pub margin: Option<f64>,
    pub witness: Option<Vec<f64>>,
    pub per_state_separable: bool,
    pub per_state_margin: Option<f64>,
    pub grid_points: usize,
    pub grid_proper_feasible: usize,
    pub grid_max_feasible_norm: f64,
    /// Per-state verdict equals "grid finds a proper feasible θ".
    pub grid_agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracySeed {
    pub seed: u64,
    pub degenerate: bool,
    pub stages: Vec<DegeneracyStage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracySummary {
    pub provenance: Provenance,
    pub all_agree: bool,
    pub per_seed: Vec<DegeneracySeed>,
}

/// Grid points per axis giving roughly `total` points in dimension `d`;
/// always odd so that the origin is on the grid.
pub fn per_axis(total: usize, d: usize) -> usize {
    let k = (total as f64).powf(1.0 / d as f64).round().max(2.0) as usize;
    k | 1
}

pub fn degeneracy_seed(
    loaded: &LoadedConfig,
    inst: &Instance,
    seed: u64,
) -> CliResult<DegeneracySeed> {
    let features = inst
        .features
        .as_ref()
        .ok_or_else(|| CliError::Config("degeneracy needs an instance with features".into()))?;
    let expert = expert_policy(loaded, inst)
        .ok_or_else(|| CliError::Config("degeneracy needs an expert policy".into()))?;
    let report = degeneracy_check(&inst.mdp, expert, features)?;
    let c = &loaded.config.degeneracy;
    let grid = cube_grid(
        features.dim(),
        per_axis(c.grid_points, features.dim()),
        c.radius,
    );
    let finite = |x: f64| x.is_finite().then_some(x);
    let stages = report
        .stages
        .iter()
        .map(|cert| {
            let scan = stage_feasibility_scan(&inst.mdp, expert, features, cert.stage, &grid)?;
            Ok(DegeneracyStage {
                stage: cert.stage,
                separable: cert.separable,
                boundary: cert.boundary,
                margin: finite(cert.margin),
                witness: cert.witness.clone(),
                per_state_separable: cert.per_state_separable,
                per_state_margin: finite(cert.per_state_margin),
                grid_points: scan.points,
                grid_proper_feasible: scan.proper_feasible,
                grid_max_feasible_norm: scan.max_feasible_norm,
                grid_agrees: cert.per_state_separable == (scan.proper_feasible > 0),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(DegeneracySeed {
        seed,
        degenerate: report.degenerate(),
        stages,
    })
}

pub fn cmd_degeneracy(loaded: &LoadedConfig, opts: &RunOptions) -> CliResult<CommandOutcome> {
    let start = Instant::now();
    let per_seed: Vec<DegeneracySeed> = per_seed(loaded, |seed| {
        let inst = loaded.build_instance(seed)?;
        degeneracy_seed(loaded, &inst, seed)
    })?
    .into_iter()
    .map(|(_, r)| r)
    .collect();
    let summary = DegeneracySummary {
        provenance: Provenance::new("degeneracy", loaded),
        all_agree: per_seed
            .iter()
            .all(|s| s.stages.iter().all(|c| c.grid_agrees)),
        per_seed,
    };
    let dir = &opts.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join("degeneracy.json");
    format::write_json(&path, &summary)?;
    let mut files = vec![path];
    write_timing(dir, start, &mut files)?;
    let flags = if summary.all_agree {
        Vec::new()
    } else {
        vec!["grid_disagreement".into()]
    };
    Ok(CommandOutcome {
        files,
        flags,
        summary: serde_json::to_value(&summary).expect("serializable"),
    })
}

/// Writes `instance.json` (with provenance) for the first configured seed
/// and, when the instance has an expert, `expert.jsonl` with `tau_e`
/// demonstrations.
pub fn cmd_gen_instance(loaded: &LoadedConfig, opts: &RunOptions) -> CliResult<CommandOutcome> {
    let seed = sorted_seeds(loaded)[0];
    let inst = loaded.build_instance(seed)?;
    let dir = &opts.out_dir;
    let mut files = vec![dir.join("instance.json")];
    inst.write(&files[0])?;
    if let Some(pi) = expert_policy(loaded, &inst) {
        let data = sample_expert_dataset(&inst.mdp, pi, loaded.config.expert.tau_e, seed)?;
        let path = dir.join("expert.jsonl");
        format::write_episodes(&path, data.episodes())?;
        files.push(path);
    }
    let dims = inst.mdp.dims();
    Ok(CommandOutcome {
        files,
        flags: Vec::new(),
        summary: serde_json::json!({
            "S": dims.states, "A": dims.actions, "H": dims.horizon, "seed": seed,
            "provenance": inst.provenance,
        }),
    })
}

/// Checks an instance file and optionally a JSONL episode file against it.
pub fn cmd_validate(instance: &Path, episodes: Option<&Path>) -> CliResult<CommandOutcome> {
    let inst = Instance::read(instance)?;
    let dims = inst.mdp.dims();
    let mut summary = serde_json::json!({
        "instance": instance.display().to_string(),
        "S": dims.states, "A": dims.actions, "H": dims.horizon,
        "rewards": inst.rewards.len(), "policies": inst.policies.len(),
        "linear": inst.features.is_some(),
    });
    if let Some(path) = episodes {
        let eps = format::read_episodes(path, dims)?;
        summary["episodes"] = serde_json::json!(eps.len());
    }
    Ok(CommandOutcome {
        files: Vec::new(),
        flags: Vec::new(),
        summary,
    })
}
