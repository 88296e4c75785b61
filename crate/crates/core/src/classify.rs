//! The classification phase and the end-to-end pipeline.
//!
//! A reward `r` is labeled compatible when `Ĉ(r) = Ĵ*(r) − Ĵ^E(r) ≤ Δ`. The
//! optimal utility is estimated from exploration data, the expert's utility
//! from demonstrations; the two estimates never share samples.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::expert::{self, ExpertDataset, ExpertEstimate};
use crate::exploration::{
    self, ExplorationDataset, ExploreConfig, LinearExploreConfig, StopReport, ValueBounds,
};
use crate::linear::{self, FeatureMap, LsviEstimate};
use crate::math;
use crate::mdp::{self, Dims, LinearReward, Policy, RewardSpec, RewardTable, TabularMdp};
use crate::rng;
use crate::sampler::ForwardSampler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlanMode {
    /// Dynamic programming on the estimated model.
    Plain,
    /// Adds the confidence bonus to the reward before planning.
    Optimistic,
    /// Midpoint of the optimistic and pessimistic bounds.
    Midpoint,
}

/// Problem structure `ι`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Structure {
    Tabular,
    /// Tabular dynamics, rewards linear in known features.
    LinearRewards,
    LinearMdp,
}

/// `Ĵ*(r)` from tabular exploration data. `cfg` supplies the confidence
/// bonus for the optimistic and midpoint modes. Values are clipped to
/// `±(H − h)·max(1, max|r|)`.
pub fn plan_tabular(
    dataset: &ExplorationDataset,
    reward: &RewardTable,
    mode: PlanMode,
    cfg: &ExploreConfig,
) -> Result<f64> {
    let dims = dataset.dims();
    dims.check_same(&reward.dims())?;
    let d0 = dataset.empirical_initial();
    let bonus = cfg.hoeffding(dims);
    if mode == PlanMode::Midpoint {
        let bounds = ValueBounds::compute(dataset, reward, &bonus)?;
        return Ok(0.5 * (bounds.upper_root(&d0) + bounds.lower_root(&d0)));
    }
    let (n_s, n_a, n_h) = (dims.states, dims.actions, dims.horizon);
    let r_max = reward.max_abs().max(1.0);
    let mut next = vec![0.0; n_s];
    let mut this = vec![0.0; n_s];
    for h in (0..n_h).rev() {
        let cap = (n_h - h) as f64 * r_max;
        for s in 0..n_s {
            let mut best = f64::NEG_INFINITY;
            for a in 0..n_a {
                let mut q = reward.get(h, s, a);
                if h + 1 < n_h {
                    q += dataset.empirical_expectation(h, s, a, &next);
                }
                if mode == PlanMode::Optimistic {
                    q += bonus.value(dataset.visits(h, s, a));
                }
                best = best.max(q.clamp(-cap, cap));
            }
            this[s] = best;
        }
        core::mem::swap(&mut next, &mut this);
    }
    Ok(math::dot(&d0, &next))
}

/// `Ĵ*(r)` by backward LSVI on `μ̂`; the optimistic mode adds the elliptical
/// bonus `min(β‖φ‖_{Λ⁻¹}, H)`.
pub fn plan_linear(
    estimate: &LsviEstimate,
    features: &FeatureMap,
    reward: &LinearReward,
    beta: f64,
    mode: PlanMode,
) -> Result<f64> {
    check_dim("reward horizon", estimate.horizon(), reward.horizon())?;
    let table = reward.to_table(features, false)?;
    let cap = table.max_abs().max(1.0);
    match mode {
        PlanMode::Plain => Ok(linear::lsvi_plan(estimate, features, &table, None, cap)?.root),
        PlanMode::Optimistic => {
            let u = linear::elliptical_bonus(estimate, features, beta)?;
            Ok(linear::lsvi_plan(estimate, features, &table, Some(&u), cap)?.root)
        }
        PlanMode::Midpoint => Err(Error::VariantMismatch(
            "midpoint planning is only defined for tabular bounds",
        )),
    }
}

/// `Ĉ ≤ Δ`; the boundary is inclusive and `Δ` may be negative.
pub fn classify(c_hat: f64, threshold: f64) -> bool {
    c_hat <= threshold
}

/// A reward with a stable identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledReward {
    pub id: String,
    pub reward: RewardSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub reward_id: String,
    pub j_star_hat: f64,
    pub j_expert_hat: f64,
    pub c_hat: f64,
    pub threshold: f64,
    pub label: bool,
    pub exact: Option<ExactColumns>,
}

/// Ground truth for a report, available on synthetic instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactColumns {
    pub j_star: f64,
    pub j_expert: f64,
    pub c: f64,
}

impl CompatibilityReport {
    pub fn new(reward_id: String, j_star_hat: f64, j_expert_hat: f64, threshold: f64) -> Self {
        let c_hat = j_star_hat - j_expert_hat;
        Self {
            reward_id,
            j_star_hat,
            j_expert_hat,
            c_hat,
            threshold,
            label: classify(c_hat, threshold),
            exact: None,
        }
    }

    /// `|C̄ − Ĉ|`
    pub fn error(&self) -> Option<f64> {
        self.exact.map(|e| math::abs(e.c - self.c_hat))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationSweep {
    pub reports: Vec<CompatibilityReport>,
    pub epsilon: f64,
    pub threshold: f64,
    /// Ids with `Ĉ ≤ Δ − ε`.
    pub inner: Vec<String>,
    /// Ids with exact `C̄ ≤ Δ` (oracle mode only).
    pub mid_true: Option<Vec<String>>,
    /// Ids with `Ĉ ≤ Δ + ε`.
    pub outer: Vec<String>,
}

impl ClassificationSweep {
    pub fn new(reports: Vec<CompatibilityReport>, epsilon: f64, threshold: f64) -> Self {
        let ids = |pred: &dyn Fn(&CompatibilityReport) -> bool| -> Vec<String> {
            reports
                .iter()
                .filter(|r| pred(r))
                .map(|r| r.reward_id.clone())
                .collect()
        };
        let inner = ids(&|r| r.c_hat <= threshold - epsilon);
        let outer = ids(&|r| r.c_hat <= threshold + epsilon);
        let mid_true = if reports.iter().all(|r| r.exact.is_some()) && !reports.is_empty() {
            Some(ids(&|r| r.exact.is_some_and(|e| e.c <= threshold)))
        } else {
            None
        };
        Self {
            reports,
            epsilon,
            threshold,
            inner,
            mid_true,
            outer,
        }
    }

    /// `sup_r |C̄(r) − Ĉ(r)|` in oracle mode.
    pub fn sup_error(&self) -> Option<f64> {
        self.reports
            .iter()
            .map(CompatibilityReport::error)
            .try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e)))
    }

    /// The estimation event `sup |C̄ − Ĉ| ≤ ε`.
    pub fn estimation_event(&self) -> Option<bool> {
        self.sup_error().map(|e| e <= self.epsilon)
    }

    /// `inner ⊆ mid_true ⊆ outer` in oracle mode.
    pub fn sandwich_holds(&self) -> Option<bool> {
        let mid = self.mid_true.as_ref()?;
        let subset = |a: &[String], b: &[String]| a.iter().all(|x| b.contains(x));
        Some(subset(&self.inner, mid) && subset(mid, &self.outer))
    }

    /// Fraction of labels that disagree with `C̄ ≤ Δ`.
    pub fn mislabeled_fraction(&self) -> Option<f64> {
        if self.reports.is_empty() {
            return Some(0.0);
        }
        let mut wrong = 0usize;
        for r in &self.reports {
            let truth = r.exact?.c <= self.threshold;
            if truth != r.label {
                wrong += 1;
            }
        }
        Some(wrong as f64 / self.reports.len() as f64)
    }
}

/// How rewards are drawn for a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardSampler {
    /// Entries uniform in `[-1, 1]`.
    Dense(Dims),
    /// `θ_h` uniform on the ball of radius `√d`.
    Linear { dim: usize, horizon: usize },
}

impl RewardSampler {
    /// `n` rewards with ids `r0, r1, ...`; reward `i` uses stream `i`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<LabeledReward>> {
        (0..n)
            .map(|i| {
                let mut g = rng::stream(seed, rng::tag::REWARDS, i as u64);
                let reward = match *self {
                    RewardSampler::Dense(dims) => RewardSpec::Dense(RewardTable::new(
                        dims,
                        (0..dims.sah())
                            .map(|_| 2.0 * rng::uniform(&mut g) - 1.0)
                            .collect(),
                    )?),
                    RewardSampler::Linear { dim, horizon } => {
                        let radius = math::sqrt(dim as f64);
                        RewardSpec::Linear(LinearReward::new(
                            (0..horizon)
                                .map(|_| rng::uniform_ball(&mut g, dim, radius))
                                .collect(),
                        )?)
                    }
                };
                Ok(LabeledReward {
                    id: alloc::format!("r{i}"),
                    reward,
                })
            })
            .collect()
    }
}

/// `|R| ≤ max(1, ⌊S / ln A⌋)` selects per-reward exploration.
pub fn small_reward_set_threshold(states: usize, actions: usize) -> usize {
    if actions <= 1 {
        return usize::MAX;
    }
    let t = math::floor(states as f64 / math::ln(actions as f64));
    (t as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatyConfig {
    pub structure: Structure,
    pub epsilon: f64,
    pub delta: f64,
    /// Classification threshold `Δ`.
    pub threshold: f64,
    /// Exploration budget (per reward in the per-reward branch).
    pub max_episodes: usize,
    pub bonus_constant: f64,
    pub beta_constant: f64,
    /// Overrides `max(1, ⌊S / ln A⌋)`.
    pub small_set_threshold: Option<usize>,
    /// Overrides the default planner (plain after reward-free exploration,
    /// midpoint after per-reward exploration).
    pub plan_mode: Option<PlanMode>,
    pub seed: u64,
}

impl CatyConfig {
    pub fn new(
        structure: Structure,
        epsilon: f64,
        delta: f64,
        threshold: f64,
        max_episodes: usize,
    ) -> Self {
        Self {
            structure,
            epsilon,
            delta,
            threshold,
            max_episodes,
            bonus_constant: 1.0,
            beta_constant: 1.0,
            small_set_threshold: None,
            plan_mode: None,
            seed: 0,
        }
    }

    fn explore_config(&self) -> Result<ExploreConfig> {
        let mut cfg = ExploreConfig::new(self.epsilon, self.delta, self.max_episodes)?;
        cfg.bonus_constant = self.bonus_constant;
        Ok(cfg)
    }
}

/// Everything the pipeline consumes. The environment is only accessed
/// through a forward sampler; `oracle_expert` enables the exact columns.
#[derive(Debug, Clone, Copy)]
pub struct CatyInput<'a> {
    pub mdp: &'a TabularMdp,
    pub features: Option<&'a FeatureMap>,
    pub expert_data: &'a ExpertDataset,
    pub rewards: &'a [LabeledReward],
    pub oracle_expert: Option<&'a Policy>,
}

/// Which exploration branch ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    RewardFree,
    PerReward,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatyRun {
    pub sweep: ClassificationSweep,
    pub branch: Branch,
    /// Total exploration episodes `τ`.
    pub exploration_episodes: usize,
    /// One report per exploration run (one per reward in the per-reward
    /// branch).
    pub stops: Vec<StopReport>,
    pub expert_episodes: usize,
}

/// Exploration followed by classification of every reward.
pub fn run_caty(input: &CatyInput<'_>, cfg: &CatyConfig) -> Result<CatyRun> {
    let dims = input.mdp.dims();
    dims.check_same(&input.expert_data.dims())?;
    let explore = cfg.explore_config()?;
    let needs_features = cfg.structure != Structure::Tabular
        || input
            .rewards
            .iter()
            .any(|r| matches!(r.reward, RewardSpec::Linear(_)));
    if needs_features && input.features.is_none() {
        return Err(Error::VariantMismatch(
            "linear rewards require a feature map",
        ));
    }
    let expert_estimate = match cfg.structure {
        Structure::Tabular => expert::empirical_occupancy(input.expert_data)?,
        _ => expert::empirical_feature_expectation(
            input.expert_data,
            input.features.expect("checked above"),
        )?,
    };
    let tables: Vec<RewardTable> = input
        .rewards
        .iter()
        .map(|r| r.reward.resolve(input.features, false))
        .collect::<Result<_>>()?;

    let (j_star_hats, branch, tau, stops) = match cfg.structure {
        Structure::LinearMdp => {
            let features = input.features.expect("checked above");
            let mut lin_cfg = LinearExploreConfig::new(explore);
            lin_cfg.beta_constant = cfg.beta_constant;
            let mut sampler = ForwardSampler::new(input.mdp, cfg.seed);
            let out = exploration::explore_linear(&mut sampler, features, &lin_cfg)?;
            let mode = cfg.plan_mode.unwrap_or(PlanMode::Plain);
            let hats = input
                .rewards
                .iter()
                .map(|r| match &r.reward {
                    RewardSpec::Linear(lin) => {
                        plan_linear(&out.estimate, features, lin, out.beta, mode)
                    }
                    RewardSpec::Dense(_) => Err(Error::VariantMismatch(
                        "Linear MDP classification needs linear rewards",
                    )),
                })
                .collect::<Result<Vec<_>>>()?;
            (hats, Branch::Linear, out.dataset.len(), vec![out.report])
        }
        _ => {
            let limit = cfg
                .small_set_threshold
                .unwrap_or_else(|| small_reward_set_threshold(dims.states, dims.actions));
            if input.rewards.len() <= limit {
                let mut union = ExplorationDataset::new(dims);
                let mut stops = Vec::with_capacity(tables.len());
                for (i, table) in tables.iter().enumerate() {
                    let seed = rng::derive_seed(cfg.seed, i as u64 + 1);
                    let mut sampler = ForwardSampler::new(input.mdp, seed);
                    let out = exploration::explore_bpi_tabular(&mut sampler, table, &explore)?;
                    union.merge(&out.dataset)?;
                    stops.push(out.report);
                }
                let mode = cfg.plan_mode.unwrap_or(PlanMode::Midpoint);
                let hats = tables
                    .iter()
                    .map(|t| plan_tabular(&union, t, mode, &explore))
                    .collect::<Result<Vec<_>>>()?;
                (hats, Branch::PerReward, union.len(), stops)
            } else {
                let mut sampler = ForwardSampler::new(input.mdp, cfg.seed);
                let out = exploration::explore_reward_free_tabular(&mut sampler, &explore)?;
                let mode = cfg.plan_mode.unwrap_or(PlanMode::Plain);
                let hats = tables
                    .iter()
                    .map(|t| plan_tabular(&out.dataset, t, mode, &explore))
                    .collect::<Result<Vec<_>>>()?;
                (
                    hats,
                    Branch::RewardFree,
                    out.dataset.len(),
                    vec![out.report],
                )
            }
        }
    };

    let mut reports = Vec::with_capacity(input.rewards.len());
    for ((labeled, table), j_star_hat) in input.rewards.iter().zip(&tables).zip(j_star_hats) {
        let j_expert_hat = match (&expert_estimate, &labeled.reward) {
            (ExpertEstimate::FeatureExpectation(_), RewardSpec::Dense(_)) => {
                return Err(Error::VariantMismatch(
                    "linear structures need linear rewards",
                ))
            }
            _ => expert::estimate_expert_return(&expert_estimate, &labeled.reward, input.features)?,
        };
        let mut report =
            CompatibilityReport::new(labeled.id.clone(), j_star_hat, j_expert_hat, cfg.threshold);
        if let Some(pi) = input.oracle_expert {
            let j_star = mdp::value_iteration(input.mdp, table)?.j;
            let j_expert = mdp::policy_evaluation(input.mdp, table, pi)?.j;
            report.exact = Some(ExactColumns {
                j_star,
                j_expert,
                c: j_star - j_expert,
            });
        }
        reports.push(report);
    }
    Ok(CatyRun {
        sweep: ClassificationSweep::new(reports, cfg.epsilon, cfg.threshold),
        branch,
        exploration_episodes: tau,
        stops,
        expert_episodes: input.expert_data.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::make_named_example;

    #[test]
    fn classify_boundaries() {
        assert!(classify(0.0, 0.0));
        assert!(!classify(2.0, 0.01));
        assert!(classify(0.01, 0.01));
        assert!(classify(-0.5, -0.25));
    }

    #[test]
    fn report_decomposition() {
        let r = CompatibilityReport::new("x".into(), 0.75, 0.5, 0.2);
        assert_eq!(r.c_hat, 0.75 - 0.5);
        assert!(!r.label);
    }

    #[test]
    fn exact_model_plain_planning_is_exact() {
        // deterministic two-state MDP where every triple is observed once
        let dims = Dims::new(2, 2, 2).unwrap();
        let mdp = TabularMdp::from_fn(dims, vec![1.0, 0.0], |_, s, a| {
            let mut row = vec![0.0; 2];
            row[(s + a) % 2] = 1.0;
            row
        })
        .unwrap();
        let mut data = ExplorationDataset::new(dims);
        for (s0, a0, a1) in [(0, 0, 0), (0, 1, 0), (0, 0, 1), (0, 1, 1)] {
            let s1 = (s0 + a0) % 2;
            data.push(crate::sampler::Trajectory {
                states: vec![s0, s1, (s1 + a1) % 2],
                actions: vec![a0, a1],
            })
            .unwrap();
        }
        let r = RewardTable::new(dims, vec![0.1, -0.2, 0.9, 0.4, 0.3, 0.7, -1.0, 0.5]).unwrap();
        let cfg = ExploreConfig::new(0.1, 0.1, 10).unwrap();
        let plain = plan_tabular(&data, &r, PlanMode::Plain, &cfg).unwrap();
        let exact = mdp::value_iteration(&mdp, &r).unwrap().j;
        assert!((plain - exact).abs() < 1e-9);
    }

    #[test]
    fn optimistic_planning_without_data_hits_the_ceiling() {
        let dims = Dims::new(2, 2, 3).unwrap();
        let data = ExplorationDataset::new(dims);
        let r = RewardTable::zeros(dims);
        let cfg = ExploreConfig::new(0.1, 0.1, 10).unwrap();
        let v = plan_tabular(&data, &r, PlanMode::Optimistic, &cfg).unwrap();
        assert_eq!(v, 3.0);
    }

    #[test]
    fn empty_linear_estimate_plans_immediate_reward() {
        let ex = make_named_example("nondegenerate_phi1").unwrap();
        let features = ex.features.as_ref().unwrap();
        let est = linear::LsviAccumulator::new(features, 1)
            .estimate()
            .unwrap();
        let theta = LinearReward::new(vec![vec![0.7]]).unwrap();
        let v = plan_linear(&est, features, &theta, 1.0, PlanMode::Plain).unwrap();
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn muffin_pipeline_labels() {
        let ex = make_named_example("muffin").unwrap();
        let data = expert::sample_expert_dataset(&ex.mdp, &ex.expert, 10, 3).unwrap();
        let rewards: Vec<LabeledReward> = ["r_E", "r_g", "r_b", "r_b_prime"]
            .iter()
            .map(|n| LabeledReward {
                id: (*n).into(),
                reward: ex.reward(n).unwrap().clone(),
            })
            .collect();
        let input = CatyInput {
            mdp: &ex.mdp,
            features: None,
            expert_data: &data,
            rewards: &rewards,
            oracle_expert: Some(&ex.expert),
        };
        let cfg = CatyConfig::new(Structure::Tabular, 0.02, 0.1, 0.02, 1000);
        let run = run_caty(&input, &cfg).unwrap();
        let labels: Vec<bool> = run.sweep.reports.iter().map(|r| r.label).collect();
        assert_eq!(labels, vec![true, true, false, true]);
        assert_eq!(run.sweep.sup_error(), Some(0.0));
        assert_eq!(run.sweep.sandwich_holds(), Some(true));
    }

    #[test]
    fn reward_samplers_respect_bounds() {
        let dims = Dims::new(3, 2, 2).unwrap();
        let dense = RewardSampler::Dense(dims).sample(20, 1).unwrap();
        assert_eq!(dense.len(), 20);
        assert_eq!(dense, RewardSampler::Dense(dims).sample(20, 1).unwrap());
        let lin = RewardSampler::Linear { dim: 3, horizon: 2 }
            .sample(50, 2)
            .unwrap();
        for r in lin {
            match r.reward {
                RewardSpec::Linear(l) => assert!(l
                    .theta
                    .iter()
                    .all(|t| math::norm2(t) <= 3f64.sqrt() + 1e-12)),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn small_set_switch() {
        assert_eq!(small_reward_set_threshold(1, 3), 1);
        assert_eq!(small_reward_set_threshold(10, 2), 14);
        assert_eq!(small_reward_set_threshold(5, 3), 4);
    }
}
