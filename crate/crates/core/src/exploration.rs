//! The exploration phase.
//!
//! Three explorers share the same episode loop: each episode is played with
//! the greedy policy of an optimistic model built from the data so far.
//!
//! - [`explore_reward_free_tabular`]: the uncertainty recursion
//!   `U_h(s, a) = min(H, b(n) + p̂ᵀ max_a' U_{h+1})`, stopping once
//!   `Σ_s d̂0(s) max_a U_1(s, a) ≤ ε/2`.
//! - [`explore_bpi_tabular`]: upper and lower value bounds for one known
//!   reward, stopping once they are `ε/2` apart at the root.
//! - [`explore_linear`]: LSVI on the elliptical bonus.
//!
//! Budgets are mandatory; running out is reported, never an error.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linear::{self, FeatureMap, LsviAccumulator, LsviEstimate};
use crate::math;
use crate::mdp::{Dims, Policy, RewardTable, TabularMdp};
use crate::sampler::{ForwardSampler, Trajectory};

/// Episodes plus visit counts `n_h(s, a, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationDataset {
    dims: Dims,
    episodes: Vec<Trajectory>,
    /// Flat `(h, s, a, s')`.
    transitions: Vec<u64>,
    /// Flat `(h, s, a)`.
    visits: Vec<u64>,
    initial: Vec<u64>,
}

impl ExplorationDataset {
    pub fn new(dims: Dims) -> Self {
        Self {
            dims,
            episodes: Vec::new(),
            transitions: vec![0; dims.sah() * dims.states],
            visits: vec![0; dims.sah()],
            initial: vec![0; dims.states],
        }
    }

    pub fn from_episodes(dims: Dims, episodes: Vec<Trajectory>) -> Result<Self> {
        let mut data = Self::new(dims);
        for e in episodes {
            data.push(e)?;
        }
        Ok(data)
    }

    /// Adds one episode with all `H + 1` states.
    pub fn push(&mut self, episode: Trajectory) -> Result<()> {
        let dims = self.dims;
        episode.validate(dims.states, dims.actions, dims.horizon)?;
        check_dim("episode states", dims.horizon + 1, episode.states.len())?;
        for h in 0..dims.horizon {
            let (s, a, next) = (episode.states[h], episode.actions[h], episode.states[h + 1]);
            let i = dims.hsa_index(h, s, a);
            self.visits[i] += 1;
            self.transitions[i * dims.states + next] += 1;
        }
        self.initial[episode.states[0]] += 1;
        self.episodes.push(episode);
        Ok(())
    }

    /// Union of two datasets. Counts add, episodes concatenate.
    pub fn merge(&mut self, other: &ExplorationDataset) -> Result<()> {
        self.dims.check_same(&other.dims)?;
        self.episodes.extend_from_slice(&other.episodes);
        for (x, y) in self.transitions.iter_mut().zip(&other.transitions) {
            *x += y;
        }
        for (x, y) in self.visits.iter_mut().zip(&other.visits) {
            *x += y;
        }
        for (x, y) in self.initial.iter_mut().zip(&other.initial) {
            *x += y;
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn episodes(&self) -> &[Trajectory] {
        &self.episodes
    }

    /// `τ`
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// `n_h(s, a)`
    #[inline]
    pub fn visits(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visits[self.dims.hsa_index(h, s, a)]
    }

    /// `n_h(s, a, ·)`
    pub fn transition_counts(&self, h: usize, s: usize, a: usize) -> &[u64] {
        let n = self.dims.states;
        let start = self.dims.hsa_index(h, s, a) * n;
        &self.transitions[start..start + n]
    }

    pub fn initial_counts(&self) -> &[u64] {
        &self.initial
    }

    /// Checks `Σ_{s'} n_h(s, a, s') = n_h(s, a)` and `Σ_{s,a} n_h(s, a) = τ`.
    pub fn counts_consistent(&self) -> bool {
        let dims = self.dims;
        let tau = self.episodes.len() as u64;
        let rows = self
            .transitions
            .chunks(dims.states)
            .zip(&self.visits)
            .all(|(row, &n)| row.iter().sum::<u64>() == n);
        let stages = self
            .visits
            .chunks(dims.states * dims.actions)
            .all(|stage| stage.iter().sum::<u64>() == tau);
        rows && stages && self.initial.iter().sum::<u64>() == tau
    }

    /// `p̂_h(·|s, a) = n_h(s, a, ·) / n_h(s, a)`, uniform when unvisited.
    pub fn empirical_row(&self, h: usize, s: usize, a: usize) -> Vec<f64> {
        let n = self.visits(h, s, a);
        let counts = self.transition_counts(h, s, a);
        if n == 0 {
            vec![1.0 / self.dims.states as f64; self.dims.states]
        } else {
            counts.iter().map(|&c| c as f64 / n as f64).collect()
        }
    }

    /// Empirical initial distribution, uniform before any episode.
    pub fn empirical_initial(&self) -> Vec<f64> {
        let tau = self.episodes.len();
        if tau == 0 {
            vec![1.0 / self.dims.states as f64; self.dims.states]
        } else {
            self.initial
                .iter()
                .map(|&c| c as f64 / tau as f64)
                .collect()
        }
    }

    /// The empirical model `(d̂0, p̂)`.
    pub fn empirical_mdp(&self) -> Result<TabularMdp> {
        TabularMdp::from_fn(self.dims, self.empirical_initial(), |h, s, a| {
            self.empirical_row(h, s, a)
        })
    }

    /// `Σ_{s'} p̂_h(s'|s, a) v(s')` without allocating.
    #[inline]
    pub(crate) fn empirical_expectation(&self, h: usize, s: usize, a: usize, v: &[f64]) -> f64 {
        let n = self.visits(h, s, a);
        if n == 0 {
            v.iter().sum::<f64>() / v.len() as f64
        } else {
            let counts = self.transition_counts(h, s, a);
            let mut acc = 0.0;
            for (c, x) in counts.iter().zip(v) {
                if *c != 0 {
                    acc += *c as f64 * x;
                }
            }
            acc / n as f64
        }
    }
}

/// Shared exploration parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploreConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub max_episodes: usize,
    /// Multiplies every confidence bonus.
    pub bonus_constant: f64,
    /// Episodes played before the stopping rule is checked.
    pub warmup_episodes: usize,
}

impl ExploreConfig {
    pub fn new(epsilon: f64, delta: f64, max_episodes: usize) -> Result<Self> {
        let cfg = Self {
            epsilon,
            delta,
            max_episodes,
            bonus_constant: 1.0,
            warmup_episodes: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param("epsilon", "must lie in (0, 1)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", "must lie in (0, 1)"));
        }
        if self.max_episodes == 0 {
            return Err(Error::param("max_episodes", "must be at least 1"));
        }
        if !(self.bonus_constant >= 0.0) {
            return Err(Error::param("bonus_constant", "must be nonnegative"));
        }
        Ok(())
    }

    /// Hoeffding bonus `c H √(2 ln(2SAH·t_max/δ) / max(1, n))`.
    pub fn hoeffding(&self, dims: Dims) -> HoeffdingBonus {
        let log_term = math::ln(2.0 * dims.sah() as f64 * self.max_episodes as f64 / self.delta);
        HoeffdingBonus {
            scale: self.bonus_constant * math::sqrt(2.0 * log_term),
            horizon: dims.horizon as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoeffdingBonus {
    scale: f64,
    horizon: f64,
}

impl HoeffdingBonus {
    /// Bonus for a value range of `H`.
    #[inline]
    pub fn value(&self, n: u64) -> f64 {
        self.with_range(n, self.horizon)
    }

    /// Bonus for a value range of `range`.
    #[inline]
    pub fn with_range(&self, n: u64, range: f64) -> f64 {
        range * self.scale / math::sqrt(n.max(1) as f64)
    }
}

/// How an exploration run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopReport {
    pub episodes: usize,
    pub stopped_by_criterion: bool,
    pub budget_exhausted: bool,
    /// Last value of the stopping statistic.
    pub final_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationOutcome {
    pub dataset: ExplorationDataset,
    pub report: StopReport,
}

/// Reward-free uncertainty `U_h(s, a)`, flat `(h, s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Uncertainty {
    dims: Dims,
    values: Vec<f64>,
}

impl Uncertainty {
    pub fn new(dims: Dims) -> Self {
        Self {
            dims,
            values: vec![dims.horizon as f64; dims.sah()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Recomputes `U` from the counts, keeping the entrywise minimum with the
    /// previous value so that `U` never increases.
    pub fn update(&mut self, data: &ExplorationDataset, bonus: &HoeffdingBonus) {
        let dims = self.dims;
        let (n_s, n_a) = (dims.states, dims.actions);
        let cap = dims.horizon as f64;
        let mut next_max = vec![0.0; n_s];
        let mut this_max = vec![0.0; n_s];
        for h in (0..dims.horizon).rev() {
            for s in 0..n_s {
                let mut best = f64::NEG_INFINITY;
                for a in 0..n_a {
                    let future = if h + 1 < dims.horizon {
                        data.empirical_expectation(h, s, a, &next_max)
                    } else {
                        0.0
                    };
                    let fresh = (bonus.value(data.visits(h, s, a)) + future).min(cap);
                    let i = dims.hsa_index(h, s, a);
                    self.values[i] = self.values[i].min(fresh);
                    best = best.max(self.values[i]);
                }
                this_max[s] = best;
            }
            core::mem::swap(&mut next_max, &mut this_max);
        }
    }

    /// `Σ_s d0(s) max_a U_1(s, a)`
    pub fn root(&self, initial: &[f64]) -> f64 {
        let n_a = self.dims.actions;
        (0..self.dims.states)
            .map(|s| initial[s] * math::max(&self.values[s * n_a..(s + 1) * n_a]))
            .sum()
    }

    #[inline]
    fn greedy(&self, h: usize, s: usize) -> usize {
        let start = self.dims.hsa_index(h, s, 0);
        math::argmax(&self.values[start..start + self.dims.actions])
    }
}

fn check_sampler(sampler: &ForwardSampler<'_>, cfg: &ExploreConfig) -> Result<Dims> {
    cfg.validate()?;
    Ok(sampler.mdp().dims())
}

fn finish(dataset: ExplorationDataset, stopped: bool, bound: f64) -> ExplorationOutcome {
    ExplorationOutcome {
        report: StopReport {
            episodes: dataset.len(),
            stopped_by_criterion: stopped,
            budget_exhausted: !stopped,
            final_bound: bound,
        },
        dataset,
    }
}

/// Reward-free exploration for tabular MDPs.
pub fn explore_reward_free_tabular(
    sampler: &mut ForwardSampler<'_>,
    cfg: &ExploreConfig,
) -> Result<ExplorationOutcome> {
    let dims = check_sampler(sampler, cfg)?;
    let bonus = cfg.hoeffding(dims);
    let mut data = ExplorationDataset::new(dims);
    let mut u = Uncertainty::new(dims);
    let mut bound = u.root(&data.empirical_initial());
    while data.len() < cfg.max_episodes {
        let episode = sampler.episode(|h, s, _| u.greedy(h, s));
        data.push(episode)?;
        u.update(&data, &bonus);
        bound = u.root(&data.empirical_initial());
        if data.len() >= cfg.warmup_episodes && bound <= cfg.epsilon / 2.0 {
            return Ok(finish(data, true, bound));
        }
    }
    Ok(finish(data, false, bound))
}

/// Upper and lower value bounds for one reward.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueBounds {
    dims: Dims,
    upper_q: Vec<f64>,
    upper_v: Vec<f64>,
    lower_v: Vec<f64>,
}

impl ValueBounds {
    /// Bounds from the counts in `data`. The bonus scales with the spread of
    /// the next-stage bounds, so a reward with no reachable variation gets
    /// no bonus at all.
    pub fn compute(
        data: &ExplorationDataset,
        reward: &RewardTable,
        bonus: &HoeffdingBonus,
    ) -> Result<Self> {
        let dims = data.dims();
        dims.check_same(&reward.dims())?;
        let (n_s, n_a, n_h) = (dims.states, dims.actions, dims.horizon);
        let r_max = reward.max_abs();
        let mut upper_q = vec![0.0; dims.sah()];
        let mut upper_v = vec![0.0; n_h * n_s];
        let mut lower_v = vec![0.0; n_h * n_s];
        for h in (0..n_h).rev() {
            let cap = (n_h - h) as f64 * r_max;
            let (next_up, next_low, spread) = if h + 1 < n_h {
                let up = &upper_v[(h + 1) * n_s..(h + 2) * n_s];
                let low = &lower_v[(h + 1) * n_s..(h + 2) * n_s];
                let spread = math::max(up) + math::max(&low.iter().map(|x| -x).collect::<Vec<_>>());
                (Some(up.to_vec()), Some(low.to_vec()), spread.max(0.0))
            } else {
                (None, None, 0.0)
            };
            for s in 0..n_s {
                let mut best_up = f64::NEG_INFINITY;
                let mut best_low = f64::NEG_INFINITY;
                for a in 0..n_a {
                    let r = reward.get(h, s, a);
                    let b = bonus.with_range(data.visits(h, s, a), spread);
                    let (up, low) = match (&next_up, &next_low) {
                        (Some(vu), Some(vl)) => (
                            r + data.empirical_expectation(h, s, a, vu) + b,
                            r + data.empirical_expectation(h, s, a, vl) - b,
                        ),
                        _ => (r, r),
                    };
                    let up = up.clamp(-cap, cap);
                    let low = low.clamp(-cap, cap);
                    upper_q[dims.hsa_index(h, s, a)] = up;
                    best_up = best_up.max(up);
                    best_low = best_low.max(low);
                }
                upper_v[h * n_s + s] = best_up;
                lower_v[h * n_s + s] = best_low;
            }
        }
        Ok(Self {
            dims,
            upper_q,
            upper_v,
            lower_v,
        })
    }

    pub fn upper_root(&self, initial: &[f64]) -> f64 {
        math::dot(initial, &self.upper_v[..self.dims.states])
    }

    pub fn lower_root(&self, initial: &[f64]) -> f64 {
        math::dot(initial, &self.lower_v[..self.dims.states])
    }

    #[inline]
    fn greedy(&self, h: usize, s: usize) -> usize {
        let start = self.dims.hsa_index(h, s, 0);
        math::argmax(&self.upper_q[start..start + self.dims.actions])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpiOutcome {
    pub dataset: ExplorationDataset,
    pub report: StopReport,
    pub upper: f64,
    pub lower: f64,
}

impl BpiOutcome {
    /// Midpoint of the final bounds.
    pub fn estimate(&self) -> f64 {
        0.5 * (self.upper + self.lower)
    }
}

/// Per-reward (best-policy identification) exploration.
pub fn explore_bpi_tabular(
    sampler: &mut ForwardSampler<'_>,
    reward: &RewardTable,
    cfg: &ExploreConfig,
) -> Result<BpiOutcome> {
    let dims = check_sampler(sampler, cfg)?;
    dims.check_same(&reward.dims())?;
    let bonus = cfg.hoeffding(dims);
    let mut data = ExplorationDataset::new(dims);
    let mut bounds = ValueBounds::compute(&data, reward, &bonus)?;
    let (mut upper, mut lower);
    loop {
        let episode = sampler.episode(|h, s, _| bounds.greedy(h, s));
        data.push(episode)?;
        bounds = ValueBounds::compute(&data, reward, &bonus)?;
        let d0 = data.empirical_initial();
        upper = bounds.upper_root(&d0);
        lower = bounds.lower_root(&d0);
        let stop = data.len() >= cfg.warmup_episodes && upper - lower <= cfg.epsilon / 2.0;
        if stop || data.len() >= cfg.max_episodes {
            let outcome = finish(data, stop, upper - lower);
            return Ok(BpiOutcome {
                dataset: outcome.dataset,
                report: outcome.report,
                upper,
                lower,
            });
        }
    }
}

/// Parameters specific to linear exploration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearExploreConfig {
    pub base: ExploreConfig,
    /// Constant `c` in `β`.
    pub beta_constant: f64,
    /// Stop once the planned bonus value is at most `stop_factor · ε`.
    pub stop_factor: f64,
}

impl LinearExploreConfig {
    pub fn new(base: ExploreConfig) -> Self {
        Self {
            base,
            beta_constant: 1.0,
            stop_factor: 0.5,
        }
    }

    /// `β` evaluated at the full budget, so the bonus schedule is fixed for
    /// the whole run.
    pub fn beta(&self, d: usize, horizon: usize) -> Result<f64> {
        linear::default_beta(
            d,
            horizon,
            self.base.max_episodes,
            self.base.delta,
            self.beta_constant,
        )
    }
}

#[derive(Debug, Clone)]
pub struct LinearExplorationOutcome {
    pub dataset: ExplorationDataset,
    pub report: StopReport,
    pub estimate: LsviEstimate,
    pub beta: f64,
}

/// Elliptical-bonus exploration: each episode follows the greedy policy of
/// LSVI with reward `u/H` and bonus `u`.
pub fn explore_linear(
    sampler: &mut ForwardSampler<'_>,
    features: &FeatureMap,
    cfg: &LinearExploreConfig,
) -> Result<LinearExplorationOutcome> {
    let dims = check_sampler(sampler, &cfg.base)?;
    check_dim("feature states", dims.states, features.states())?;
    check_dim("feature actions", dims.actions, features.actions())?;
    let beta = cfg.beta(features.dim(), dims.horizon)?;
    let h = dims.horizon as f64;
    let mut acc = LsviAccumulator::new(features, dims.horizon);
    let mut data = ExplorationDataset::new(dims);
    let mut estimate = acc.estimate()?;
    let (mut policy, mut bound) = bonus_plan(&estimate, features, beta, h)?;
    while data.len() < cfg.base.max_episodes {
        let episode = sampler.episode(|h, s, _| policy.action(h, s));
        acc.push(features, &episode)?;
        data.push(episode)?;
        estimate = acc.estimate()?;
        (policy, bound) = bonus_plan(&estimate, features, beta, h)?;
        if data.len() >= cfg.base.warmup_episodes && bound <= cfg.stop_factor * cfg.base.epsilon {
            let outcome = finish(data, true, bound);
            return Ok(LinearExplorationOutcome {
                dataset: outcome.dataset,
                report: outcome.report,
                estimate,
                beta,
            });
        }
    }
    let outcome = finish(data, false, bound);
    Ok(LinearExplorationOutcome {
        dataset: outcome.dataset,
        report: outcome.report,
        estimate,
        beta,
    })
}

fn bonus_plan(
    estimate: &LsviEstimate,
    features: &FeatureMap,
    beta: f64,
    horizon: f64,
) -> Result<(Policy, f64)> {
    let u = linear::elliptical_bonus(estimate, features, beta)?;
    let reward = u.affine(1.0 / horizon, 0.0);
    let plan = linear::lsvi_plan(estimate, features, &reward, Some(&u), 1.0)?;
    Ok((plan.policy, plan.root))
}
