//! Exact finite-horizon dynamic programming.
//!
//! Everything here is exact (up to floating point): optimal and on-policy
//! values by backward induction, occupancy measures by forward recursion,
//! the additive (non)compatibility `J*(r) - J^πE(r)`, its multiplicative
//! counterpart and feasible-set membership. The stochastic estimators in the
//! other modules are all tested against these functions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linear::FeatureMap;
use crate::math;
use crate::{DEFAULT_TOL, SUPPORT_EPS};

/// Sizes of a finite-horizon problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
}

impl Dims {
    pub fn new(states: usize, actions: usize, horizon: usize) -> Result<Self> {
        if states == 0 {
            return Err(Error::param("states", "must be positive"));
        }
        if actions == 0 {
            return Err(Error::param("actions", "must be positive"));
        }
        if horizon == 0 {
            return Err(Error::param("horizon", "must be positive"));
        }
        Ok(Self {
            states,
            actions,
            horizon,
        })
    }

    /// Number of `(h, s, a)` triples.
    pub fn sah(&self) -> usize {
        self.states * self.actions * self.horizon
    }

    #[inline]
    pub fn sa_index(&self, s: usize, a: usize) -> usize {
        s * self.actions + a
    }

    #[inline]
    pub fn hsa_index(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    #[inline]
    pub fn hs_index(&self, h: usize, s: usize) -> usize {
        h * self.states + s
    }

    pub(crate) fn check_same(&self, other: &Dims) -> Result<()> {
        check_dim("states", self.states, other.states)?;
        check_dim("actions", self.actions, other.actions)?;
        check_dim("horizon", self.horizon, other.horizon)
    }
}

pub(crate) fn check_distribution(what: &str, v: &[f64], tol: f64) -> Result<()> {
    if let Some((i, x)) = v
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_finite() || **x < -tol)
    {
        return Err(Error::InvalidDistribution(format!(
            "{what}: entry {i} is {x}"
        )));
    }
    let total: f64 = v.iter().sum();
    if math::abs(total - 1.0) > tol {
        return Err(Error::InvalidDistribution(format!(
            "{what}: sums to {total}"
        )));
    }
    Ok(())
}

/// Finite-horizon MDP without reward `⟨S, A, H, d0, p⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    dims: Dims,
    initial: Vec<f64>,
    /// Flat `(h, s, a, s')`.
    transitions: Vec<f64>,
}

impl TabularMdp {
    /// Builds an MDP from a flat `(h, s, a, s')` transition tensor. Rows and
    /// the initial distribution must be probability vectors within `1e-9`.
    pub fn new(dims: Dims, initial: Vec<f64>, transitions: Vec<f64>) -> Result<Self> {
        check_dim("initial distribution", dims.states, initial.len())?;
        check_dim(
            "transition tensor",
            dims.sah() * dims.states,
            transitions.len(),
        )?;
        check_distribution("initial distribution", &initial, DEFAULT_TOL)?;
        let mdp = Self {
            dims,
            initial,
            transitions,
        };
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    check_distribution(
                        &format!("transition row (h={h}, s={s}, a={a})"),
                        mdp.row(h, s, a),
                        DEFAULT_TOL,
                    )?;
                }
            }
        }
        Ok(mdp)
    }

    /// Builds an MDP from a closure giving each row.
    pub fn from_fn(
        dims: Dims,
        initial: Vec<f64>,
        mut row: impl FnMut(usize, usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut transitions = Vec::with_capacity(dims.sah() * dims.states);
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    let r = row(h, s, a);
                    check_dim("transition row", dims.states, r.len())?;
                    transitions.extend_from_slice(&r);
                }
            }
        }
        Self::new(dims, initial, transitions)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// `p_h(· | s, a)`
    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let n = self.dims.states;
        let start = self.dims.hsa_index(h, s, a) * n;
        &self.transitions[start..start + n]
    }

    /// True when every row and the initial distribution are point masses.
    pub fn is_deterministic(&self) -> bool {
        let point = |v: &[f64]| v.iter().filter(|&&x| x > 0.0).count() == 1;
        point(&self.initial) && self.transitions.chunks(self.dims.states).all(point)
    }
}

/// Dense stagewise reward table `r_h(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    dims: Dims,
    values: Vec<f64>,
}

impl RewardTable {
    /// Reward in the bounded set `[-1, 1]^{S×A×H}`.
    pub fn new(dims: Dims, values: Vec<f64>) -> Result<Self> {
        let table = Self::unbounded(dims, values)?;
        if let Some((i, x)) = table
            .values
            .iter()
            .enumerate()
            .find(|(_, x)| **x < -1.0 || **x > 1.0)
        {
            return Err(Error::Domain(format!(
                "reward entry {i} is {x}, outside [-1, 1]"
            )));
        }
        Ok(table)
    }

    /// Reward with arbitrary finite entries (bonuses, linear rewards).
    pub fn unbounded(dims: Dims, values: Vec<f64>) -> Result<Self> {
        check_dim("reward table", dims.sah(), values.len())?;
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("reward entries must be finite".into()));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            values: vec![0.0; dims.sah()],
        }
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(dims.sah());
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    values.push(f(h, s, a));
                }
            }
        }
        Self::unbounded(dims, values)
    }

    /// Stationary `(s, a)` reward replicated over all stages.
    pub fn stationary(dims: Dims, per_sa: &[f64]) -> Result<Self> {
        check_dim(
            "stationary reward",
            dims.states * dims.actions,
            per_sa.len(),
        )?;
        Self::new(dims, per_sa.repeat(dims.horizon))
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[self.dims.hsa_index(h, s, a)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stage(&self, h: usize) -> &[f64] {
        let n = self.dims.states * self.dims.actions;
        &self.values[h * n..(h + 1) * n]
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .map(|x| math::abs(*x))
            .fold(0.0, f64::max)
    }

    pub fn is_bounded(&self) -> bool {
        self.values.iter().all(|x| (-1.0..=1.0).contains(x))
    }

    /// `α r + β`, entrywise. The result is unbounded-checked only.
    pub fn affine(&self, alpha: f64, beta: f64) -> Self {
        Self {
            dims: self.dims,
            values: self.values.iter().map(|x| alpha * x + beta).collect(),
        }
    }
}

/// Linear reward `r_h(s, a) = ⟨φ(s, a), θ_h⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReward {
    /// One parameter vector per stage.
    pub theta: Vec<Vec<f64>>,
}

impl LinearReward {
    pub fn new(theta: Vec<Vec<f64>>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::param("theta", "needs at least one stage"));
        }
        let d = theta[0].len();
        for stage in &theta {
            check_dim("theta", d, stage.len())?;
        }
        Ok(Self { theta })
    }

    pub fn dim(&self) -> usize {
        self.theta[0].len()
    }

    pub fn horizon(&self) -> usize {
        self.theta.len()
    }

    /// Induced dense table. With `strict` set, entries outside `[-1, 1]` are
    /// rejected; otherwise the table is unbounded.
    pub fn to_table(&self, features: &FeatureMap, strict: bool) -> Result<RewardTable> {
        check_dim("feature dimension", features.dim(), self.dim())?;
        let dims = Dims::new(features.states(), features.actions(), self.horizon())?;
        let table = RewardTable::from_fn(dims, |h, s, a| {
            math::dot(features.phi(s, a), &self.theta[h])
        })?;
        if strict && !table.is_bounded() {
            return Err(Error::Domain(
                "linear reward induces entries outside [-1, 1]".into(),
            ));
        }
        Ok(table)
    }
}

/// A reward given either densely or through a feature map.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardSpec {
    Dense(RewardTable),
    Linear(LinearReward),
}

impl RewardSpec {
    /// Dense table for DP. Linear rewards need the feature map.
    pub fn resolve(&self, features: Option<&FeatureMap>, strict: bool) -> Result<RewardTable> {
        match self {
            RewardSpec::Dense(t) => Ok(t.clone()),
            RewardSpec::Linear(lin) => {
                let phi = features.ok_or(Error::VariantMismatch(
                    "linear reward requires a feature map",
                ))?;
                lin.to_table(phi, strict)
            }
        }
    }
}

/// Stagewise stochastic policy `π_h(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    dims: Dims,
    probs: Vec<f64>,
}

impl Policy {
    /// From a flat `(h, s, a)` probability tensor.
    pub fn new(dims: Dims, probs: Vec<f64>) -> Result<Self> {
        check_dim("policy tensor", dims.sah(), probs.len())?;
        for (i, row) in probs.chunks(dims.actions).enumerate() {
            check_distribution(
                &format!("policy row (h={}, s={})", i / dims.states, i % dims.states),
                row,
                DEFAULT_TOL,
            )?;
        }
        Ok(Self { dims, probs })
    }

    /// Deterministic policy from `actions[h][s]`.
    pub fn deterministic(dims: Dims, actions: &[Vec<usize>]) -> Result<Self> {
        check_dim("policy stages", dims.horizon, actions.len())?;
        let mut probs = vec![0.0; dims.sah()];
        for (h, stage) in actions.iter().enumerate() {
            check_dim("policy states", dims.states, stage.len())?;
            for (s, &a) in stage.iter().enumerate() {
                if a >= dims.actions {
                    return Err(Error::param("action", format!("{a} out of range")));
                }
                probs[dims.hsa_index(h, s, a)] = 1.0;
            }
        }
        Ok(Self { dims, probs })
    }

    /// The same action everywhere.
    pub fn constant(dims: Dims, action: usize) -> Result<Self> {
        Self::deterministic(dims, &vec![vec![action; dims.states]; dims.horizon])
    }

    pub fn uniform(dims: Dims) -> Self {
        Self {
            dims,
            probs: vec![1.0 / dims.actions as f64; dims.sah()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `π_h(· | s)`
    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.dims.hs_index(h, s) * self.dims.actions;
        &self.probs[start..start + self.dims.actions]
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs
            .chunks(self.dims.actions)
            .all(|row| row.iter().filter(|&&p| p > 0.0).count() == 1)
    }

    /// The action of a deterministic row (first action with positive mass).
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.row(h, s).iter().position(|&p| p > 0.0).unwrap_or(0)
    }

    /// `A^E_h(s) = {a : π_h(a|s) > eps}`
    pub fn support_actions(
        &self,
        h: usize,
        s: usize,
        eps: f64,
    ) -> impl Iterator<Item = usize> + '_ {
        self.row(h, s)
            .iter()
            .enumerate()
            .filter(move |(_, &p)| p > eps)
            .map(|(a, _)| a)
    }
}

/// Q, V and the utility `J = Σ_s d0(s) V_1(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    dims: Dims,
    q: Vec<f64>,
    v: Vec<f64>,
    pub j: f64,
}

impl ValueSolution {
    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.dims.hsa_index(h, s, a)]
    }

    pub fn q_row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.dims.hs_index(h, s) * self.dims.actions;
        &self.q[start..start + self.dims.actions]
    }

    /// `V_h(s)`; `V_H ≡ 0` is implicit.
    #[inline]
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[self.dims.hs_index(h, s)]
    }

    pub fn v_stage(&self, h: usize) -> &[f64] {
        &self.v[h * self.dims.states..(h + 1) * self.dims.states]
    }

    /// Greedy deterministic policy; ties go to the lowest action index.
    pub fn greedy_policy(&self) -> Policy {
        let dims = self.dims;
        let mut probs = vec![0.0; dims.sah()];
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                let a = math::argmax(self.q_row(h, s));
                probs[dims.hsa_index(h, s, a)] = 1.0;
            }
        }
        Policy { dims, probs }
    }
}

fn expected_next(row: &[f64], next_v: Option<&[f64]>) -> f64 {
    match next_v {
        Some(v) => math::dot(row, v),
        None => 0.0,
    }
}

/// Optimal `Q*`, `V*` and `J*(r; p)` by backward induction.
pub fn value_iteration(mdp: &TabularMdp, reward: &RewardTable) -> Result<ValueSolution> {
    let dims = mdp.dims();
    dims.check_same(&reward.dims())?;
    let (n_s, n_a, n_h) = (dims.states, dims.actions, dims.horizon);
    let mut q = vec![0.0; dims.sah()];
    let mut v = vec![0.0; n_h * n_s];
    for h in (0..n_h).rev() {
        let (head, tail) = v.split_at_mut((h + 1) * n_s);
        let next = if h + 1 < n_h {
            Some(&tail[..n_s])
        } else {
            None
        };
        for s in 0..n_s {
            let mut best = f64::NEG_INFINITY;
            for a in 0..n_a {
                let i = dims.hsa_index(h, s, a);
                q[i] = reward.get(h, s, a) + expected_next(mdp.row(h, s, a), next);
                best = best.max(q[i]);
            }
            head[h * n_s + s] = best;
        }
    }
    let j = math::dot(mdp.initial(), &v[..n_s]);
    Ok(ValueSolution { dims, q, v, j })
}

/// On-policy `Q^π`, `V^π` and `J^π(r; p)`.
pub fn policy_evaluation(
    mdp: &TabularMdp,
    reward: &RewardTable,
    policy: &Policy,
) -> Result<ValueSolution> {
    let dims = mdp.dims();
    dims.check_same(&reward.dims())?;
    dims.check_same(&policy.dims())?;
    let (n_s, n_a, n_h) = (dims.states, dims.actions, dims.horizon);
    let mut q = vec![0.0; dims.sah()];
    let mut v = vec![0.0; n_h * n_s];
    for h in (0..n_h).rev() {
        let (head, tail) = v.split_at_mut((h + 1) * n_s);
        let next = if h + 1 < n_h {
            Some(&tail[..n_s])
        } else {
            None
        };
        for s in 0..n_s {
            let mut value = 0.0;
            let pi = policy.row(h, s);
            for a in 0..n_a {
                let i = dims.hsa_index(h, s, a);
                q[i] = reward.get(h, s, a) + expected_next(mdp.row(h, s, a), next);
                value += pi[a] * q[i];
            }
            head[h * n_s + s] = value;
        }
    }
    let j = math::dot(mdp.initial(), &v[..n_s]);
    Ok(ValueSolution { dims, q, v, j })
}

/// Stagewise state-action distribution `d_h(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    dims: Dims,
    values: Vec<f64>,
}

impl Occupancy {
    pub fn new(dims: Dims, values: Vec<f64>) -> Result<Self> {
        check_dim("occupancy tensor", dims.sah(), values.len())?;
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[self.dims.hsa_index(h, s, a)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stage(&self, h: usize) -> &[f64] {
        let n = self.dims.states * self.dims.actions;
        &self.values[h * n..(h + 1) * n]
    }

    /// State marginal `Σ_a d_h(s, a)`.
    pub fn state_mass(&self, h: usize, s: usize) -> f64 {
        (0..self.dims.actions).map(|a| self.get(h, s, a)).sum()
    }

    /// `Σ_h ⟨d_h, r_h⟩`
    pub fn contract(&self, reward: &RewardTable) -> Result<f64> {
        self.dims.check_same(&reward.dims())?;
        Ok(math::dot(&self.values, reward.values()))
    }

    /// `Σ_h ‖d_h − d'_h‖₁`
    pub fn l1_distance(&self, other: &Occupancy) -> Result<f64> {
        self.dims.check_same(&other.dims)?;
        Ok(math::l1_distance(&self.values, &other.values))
    }

    /// Support `{(h, s) : Σ_a d_h(s, a) > eps}`.
    pub fn support(&self, eps: f64) -> Support {
        let mut mask = vec![false; self.dims.horizon * self.dims.states];
        for h in 0..self.dims.horizon {
            for s in 0..self.dims.states {
                mask[self.dims.hs_index(h, s)] = self.state_mass(h, s) > eps;
            }
        }
        Support {
            states: self.dims.states,
            horizon: self.dims.horizon,
            mask,
        }
    }
}

/// Occupancy measure of `policy` by forward recursion.
pub fn occupancy_measure(mdp: &TabularMdp, policy: &Policy) -> Result<Occupancy> {
    let dims = mdp.dims();
    dims.check_same(&policy.dims())?;
    let (n_s, n_a) = (dims.states, dims.actions);
    let mut values = vec![0.0; dims.sah()];
    let mut state_dist = mdp.initial().to_vec();
    for h in 0..dims.horizon {
        let mut next = vec![0.0; n_s];
        for s in 0..n_s {
            if state_dist[s] == 0.0 {
                continue;
            }
            let pi = policy.row(h, s);
            for a in 0..n_a {
                let mass = state_dist[s] * pi[a];
                values[dims.hsa_index(h, s, a)] = mass;
                if mass != 0.0 {
                    for (n, p) in next.iter_mut().zip(mdp.row(h, s, a)) {
                        *n += mass * p;
                    }
                }
            }
        }
        state_dist = next;
    }
    Ok(Occupancy { dims, values })
}

/// Set of `(h, s)` pairs, typically the expert's visited states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    states: usize,
    horizon: usize,
    mask: Vec<bool>,
}

impl Support {
    pub fn empty(states: usize, horizon: usize) -> Self {
        Self {
            states,
            horizon,
            mask: vec![false; states * horizon],
        }
    }

    pub fn full(states: usize, horizon: usize) -> Self {
        Self {
            states,
            horizon,
            mask: vec![true; states * horizon],
        }
    }

    pub fn from_pairs(
        states: usize,
        horizon: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut support = Self::empty(states, horizon);
        for (h, s) in pairs {
            support.insert(h, s)?;
        }
        Ok(support)
    }

    pub fn insert(&mut self, h: usize, s: usize) -> Result<()> {
        if h >= self.horizon || s >= self.states {
            return Err(Error::param(
                "support",
                format!("pair (h={h}, s={s}) out of range"),
            ));
        }
        self.mask[h * self.states + s] = true;
        Ok(())
    }

    #[inline]
    pub fn contains(&self, h: usize, s: usize) -> bool {
        self.mask[h * self.states + s]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(move |(i, _)| (i / self.states, i % self.states))
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Support of the occupancy of `policy`, thresholded at [`SUPPORT_EPS`].
pub fn policy_support(mdp: &TabularMdp, policy: &Policy) -> Result<Support> {
    Ok(occupancy_measure(mdp, policy)?.support(SUPPORT_EPS))
}

/// `C̄(r) = J*(r; p) − J^πE(r; p)`
pub fn exact_noncompatibility(
    mdp: &TabularMdp,
    expert: &Policy,
    reward: &RewardTable,
) -> Result<f64> {
    let optimal = value_iteration(mdp, reward)?;
    let on_policy = policy_evaluation(mdp, reward, expert)?;
    Ok(optimal.j - on_policy.j)
}

/// `F(r) = J^πE(r; p) / J*(r; p)` for nonnegative rewards, with `F = 0`
/// when `J* = 0`.
pub fn multiplicative_compatibility(
    mdp: &TabularMdp,
    expert: &Policy,
    reward: &RewardTable,
) -> Result<f64> {
    if let Some(x) = reward.values().iter().find(|x| **x < 0.0) {
        return Err(Error::Domain(format!(
            "multiplicative compatibility needs nonnegative rewards, found {x}"
        )));
    }
    let optimal = value_iteration(mdp, reward)?.j;
    if optimal <= 0.0 {
        return Ok(0.0);
    }
    let on_policy = policy_evaluation(mdp, reward, expert)?.j;
    Ok((on_policy / optimal).clamp(0.0, 1.0))
}

/// Feasible-set membership: for every `(h, s)` in `support` and every `a`,
/// `E_{a'∼πE} Q*_h(s, a') ≥ Q*_h(s, a) − tol`.
pub fn feasible_membership(
    mdp: &TabularMdp,
    expert: &Policy,
    support: &Support,
    reward: &RewardTable,
    tol: f64,
) -> Result<bool> {
    let dims = mdp.dims();
    dims.check_same(&expert.dims())?;
    check_dim("support states", dims.states, support.states)?;
    check_dim("support horizon", dims.horizon, support.horizon)?;
    if !(tol >= 0.0) {
        return Err(Error::param("tol", "must be nonnegative"));
    }
    let optimal = value_iteration(mdp, reward)?;
    for (h, s) in support.iter() {
        let q = optimal.q_row(h, s);
        let expert_value = math::dot(expert.row(h, s), q);
        if q.iter().any(|&qa| expert_value < qa - tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{make_named_example, NamedExample};

    fn muffin() -> NamedExample {
        make_named_example("muffin").unwrap()
    }

    fn reward(ex: &NamedExample, name: &str) -> RewardTable {
        ex.reward(name).unwrap().resolve(None, true).unwrap()
    }

    #[test]
    fn muffin_optimal_value_is_one() {
        let ex = muffin();
        let sol = value_iteration(&ex.mdp, &reward(&ex, "r_E")).unwrap();
        assert_eq!(sol.j, 1.0);
        assert_eq!(sol.greedy_policy().action(0, 0), 0);
    }

    #[test]
    fn muffin_expert_under_bad_reward() {
        let ex = muffin();
        let sol = policy_evaluation(&ex.mdp, &reward(&ex, "r_b"), &ex.expert).unwrap();
        assert_eq!(sol.j, -1.0);
    }

    #[test]
    fn muffin_noncompatibility_values() {
        let ex = muffin();
        for (name, expected) in [
            ("r_E", 0.0),
            ("r_g", 0.01),
            ("r_b", 2.0),
            ("r_b_prime", 0.01),
        ] {
            let c = exact_noncompatibility(&ex.mdp, &ex.expert, &reward(&ex, name)).unwrap();
            assert!((c - expected).abs() < 1e-12, "{name}: {c}");
        }
    }

    #[test]
    fn zero_reward_gives_zero_everything() {
        let ex = muffin();
        let zero = RewardTable::zeros(ex.mdp.dims());
        assert_eq!(value_iteration(&ex.mdp, &zero).unwrap().j, 0.0);
        let uniform = Policy::uniform(ex.mdp.dims());
        assert_eq!(policy_evaluation(&ex.mdp, &zero, &uniform).unwrap().j, 0.0);
        assert_eq!(
            exact_noncompatibility(&ex.mdp, &ex.expert, &zero).unwrap(),
            0.0
        );
        assert_eq!(
            multiplicative_compatibility(&ex.mdp, &ex.expert, &zero).unwrap(),
            0.0
        );
        let support = policy_support(&ex.mdp, &ex.expert).unwrap();
        assert!(feasible_membership(&ex.mdp, &ex.expert, &support, &zero, 0.0).unwrap());
    }

    #[test]
    fn muffin_occupancy_is_point_mass() {
        let ex = muffin();
        let d = occupancy_measure(&ex.mdp, &ex.expert).unwrap();
        assert_eq!(d.values(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn single_state_occupancy_equals_policy() {
        let dims = Dims::new(1, 3, 1).unwrap();
        let mdp = TabularMdp::new(dims, vec![1.0], vec![1.0; 3]).unwrap();
        let pi = Policy::new(dims, vec![0.2, 0.5, 0.3]).unwrap();
        let d = occupancy_measure(&mdp, &pi).unwrap();
        assert_eq!(d.values(), pi.probs());
    }

    #[test]
    fn muffin_good_reward_is_infeasible() {
        let ex = muffin();
        let support = policy_support(&ex.mdp, &ex.expert).unwrap();
        let rg = reward(&ex, "r_g");
        assert!(!feasible_membership(&ex.mdp, &ex.expert, &support, &rg, 0.0).unwrap());
        // the gap is 0.01, so a slack of 0.01 admits it
        assert!(feasible_membership(&ex.mdp, &ex.expert, &support, &rg, 0.011).unwrap());
        assert!(
            feasible_membership(&ex.mdp, &ex.expert, &support, &reward(&ex, "r_E"), 0.0).unwrap()
        );
    }

    #[test]
    fn multiplicative_compatibility_of_optimal_expert_is_one() {
        let ex = muffin();
        let nonneg = RewardTable::new(ex.mdp.dims(), vec![1.0, 0.5, 0.0]).unwrap();
        assert_eq!(
            multiplicative_compatibility(&ex.mdp, &ex.expert, &nonneg).unwrap(),
            1.0
        );
        let worse = RewardTable::new(ex.mdp.dims(), vec![0.25, 1.0, 0.0]).unwrap();
        assert_eq!(
            multiplicative_compatibility(&ex.mdp, &ex.expert, &worse).unwrap(),
            0.25
        );
    }

    #[test]
    fn multiplicative_compatibility_rejects_negative_rewards() {
        let ex = muffin();
        let err = multiplicative_compatibility(&ex.mdp, &ex.expert, &reward(&ex, "r_E"));
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ex = muffin();
        let other = RewardTable::zeros(Dims::new(2, 3, 1).unwrap());
        assert!(matches!(
            value_iteration(&ex.mdp, &other),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn construction_validates_rows() {
        let dims = Dims::new(2, 1, 1).unwrap();
        assert!(TabularMdp::new(dims, vec![0.5, 0.5], vec![0.5, 0.6, 1.0, 0.0]).is_err());
        assert!(TabularMdp::new(dims, vec![0.5, 0.6], vec![0.5, 0.5, 1.0, 0.0]).is_err());
        assert!(TabularMdp::new(dims, vec![0.5, 0.5], vec![-0.1, 1.1, 1.0, 0.0]).is_err());
        assert!(Dims::new(0, 1, 1).is_err());
        assert!(RewardTable::new(Dims::new(1, 1, 1).unwrap(), vec![1.5]).is_err());
    }

    #[test]
    fn greedy_ties_pick_lowest_action() {
        let dims = Dims::new(1, 3, 1).unwrap();
        let mdp = TabularMdp::new(dims, vec![1.0], vec![1.0; 3]).unwrap();
        let r = RewardTable::new(dims, vec![0.5, 0.7, 0.7]).unwrap();
        let pi = value_iteration(&mdp, &r).unwrap().greedy_policy();
        assert_eq!(pi.action(0, 0), 1);
    }
}
