//! Linear MDPs: `p_h(·|s, a) = ⟨φ(s, a), μ_h(·)⟩`.
//!
//! Covers materialization to tabular form, the ridge least-squares estimate
//! `μ̂_h = Λ_h⁻¹ Σ φ e_{s'}ᵀ`, elliptical bonuses, LSVI planning and the
//! separating-hyperplane degeneracy certificate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::exploration::ExplorationDataset;
use crate::linalg::{Cholesky, Matrix};
use crate::lp::{self, LpOutcome};
use crate::math;
use crate::mdp::{self, Dims, Policy, RewardTable, TabularMdp};
use crate::sampler::Trajectory;
use crate::SUPPORT_EPS;

const NORM_SLACK: f64 = 1e-9;
const ROW_TOL: f64 = 1e-6;
/// Margins within this distance of zero are reported as boundary cases.
pub const MARGIN_TOL: f64 = 1e-9;

/// Feature map `φ : S × A → R^d` with `‖φ(s, a)‖₂ ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    dim: usize,
    states: usize,
    actions: usize,
    /// Flat `(s, a, k)`.
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(dim: usize, states: usize, actions: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("d", "must be positive"));
        }
        Dims::new(states, actions, 1)?;
        check_dim("feature table", states * actions * dim, values.len())?;
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("features must be finite".into()));
        }
        for (i, phi) in values.chunks(dim).enumerate() {
            let norm = math::norm2(phi);
            if norm > 1.0 + NORM_SLACK {
                return Err(Error::Domain(format!(
                    "‖φ(s={}, a={})‖₂ = {norm} exceeds 1",
                    i / actions,
                    i % actions
                )));
            }
        }
        Ok(Self {
            dim,
            states,
            actions,
            values,
        })
    }

    /// From nested `phi[s][a]` vectors.
    pub fn from_nested(phi: &[Vec<Vec<f64>>]) -> Result<Self> {
        let states = phi.len();
        let actions = phi.first().map_or(0, Vec::len);
        let dim = phi.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let mut values = Vec::with_capacity(states * actions * dim);
        for row in phi {
            check_dim("feature actions", actions, row.len())?;
            for v in row {
                check_dim("feature dimension", dim, v.len())?;
                values.extend_from_slice(v);
            }
        }
        Self::new(dim, states, actions, values)
    }

    /// Tabular embedding `φ(s, a) = e_{(s, a)}` with `d = S·A`.
    pub fn one_hot(states: usize, actions: usize) -> Result<Self> {
        let d = states * actions;
        let mut values = vec![0.0; d * d];
        for i in 0..d {
            values[i * d + i] = 1.0;
        }
        Self::new(d, states, actions, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn phi(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.actions + a) * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Induced stagewise values `⟨φ(s, a), θ⟩`, flat `(s, a)`.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        self.values
            .chunks(self.dim)
            .map(|phi| math::dot(phi, theta))
            .collect()
    }
}

/// Linear MDP: features, per-stage `d × S` measures `μ_h`, initial
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMdpSpec {
    features: FeatureMap,
    mu: Vec<Matrix>,
    initial: Vec<f64>,
}

impl LinearMdpSpec {
    pub fn new(features: FeatureMap, mu: Vec<Matrix>, initial: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::param("horizon", "must be positive"));
        }
        let (d, n_s) = (features.dim(), features.states());
        check_dim("initial distribution", n_s, initial.len())?;
        mdp::check_distribution("initial distribution", &initial, crate::DEFAULT_TOL)?;
        let bound = math::sqrt(d as f64) * (1.0 + NORM_SLACK);
        for (h, m) in mu.iter().enumerate() {
            check_dim("μ rows", d, m.rows())?;
            check_dim("μ columns", n_s, m.cols())?;
            let total_variation: Vec<f64> = (0..d)
                .map(|k| m.row(k).iter().map(|x| math::abs(*x)).sum())
                .collect();
            let norm = math::norm2(&total_variation);
            if norm > bound {
                return Err(Error::Domain(format!("‖|μ_{h}|(S)‖₂ = {norm} exceeds √d")));
            }
        }
        let spec = Self {
            features,
            mu,
            initial,
        };
        spec.transition_rows()?;
        Ok(spec)
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn mu(&self) -> &[Matrix] {
        &self.mu
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn dims(&self) -> Dims {
        Dims {
            states: self.features.states(),
            actions: self.features.actions(),
            horizon: self.mu.len(),
        }
    }

    /// `⟨φ(s, a), μ_h(s')⟩` for every `s'`.
    pub fn row(&self, h: usize, s: usize, a: usize) -> Vec<f64> {
        linear_row(self.features.phi(s, a), &self.mu[h])
    }

    fn transition_rows(&self) -> Result<Vec<f64>> {
        let dims = self.dims();
        let mut out = Vec::with_capacity(dims.sah() * dims.states);
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    let mut row = self.row(h, s, a);
                    let total: f64 = row.iter().sum();
                    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
                    if min < -ROW_TOL || math::abs(total - 1.0) > ROW_TOL {
                        return Err(Error::InvalidDistribution(format!(
                            "linear transition row (h={h}, s={s}, a={a}) has sum {total} and minimum {min}"
                        )));
                    }
                    clean_row(&mut row);
                    out.extend_from_slice(&row);
                }
            }
        }
        Ok(out)
    }

    /// Dense tabular MDP with `p[h, s, a, s'] = ⟨φ(s, a), μ_h(s')⟩`.
    pub fn materialize(&self) -> Result<TabularMdp> {
        TabularMdp::new(self.dims(), self.initial.clone(), self.transition_rows()?)
    }

    /// Embeds a tabular MDP with one-hot features.
    pub fn from_tabular(mdp: &TabularMdp) -> Result<Self> {
        let dims = mdp.dims();
        let features = FeatureMap::one_hot(dims.states, dims.actions)?;
        let d = features.dim();
        let mu = (0..dims.horizon)
            .map(|h| {
                let mut m = Matrix::zeros(d, dims.states);
                for s in 0..dims.states {
                    for a in 0..dims.actions {
                        for (sp, p) in mdp.row(h, s, a).iter().enumerate() {
                            m.set(dims.sa_index(s, a), sp, *p);
                        }
                    }
                }
                m
            })
            .collect();
        Self::new(features, mu, mdp.initial().to_vec())
    }
}

fn linear_row(phi: &[f64], mu: &Matrix) -> Vec<f64> {
    let mut row = vec![0.0; mu.cols()];
    for (k, &f) in phi.iter().enumerate() {
        if f != 0.0 {
            for (r, m) in row.iter_mut().zip(mu.row(k)) {
                *r += f * m;
            }
        }
    }
    row
}

/// Clamps rounding negatives to zero and renormalizes.
fn clean_row(row: &mut [f64]) {
    row.iter_mut().for_each(|x| *x = x.max(0.0));
    let total: f64 = row.iter().sum();
    if total > 0.0 {
        row.iter_mut().for_each(|x| *x /= total);
    } else {
        let n = row.len() as f64;
        row.iter_mut().for_each(|x| *x = 1.0 / n);
    }
}

/// Ridge least-squares transition estimate.
#[derive(Debug, Clone)]
pub struct LsviEstimate {
    dim: usize,
    states: usize,
    gram: Vec<Matrix>,
    factors: Vec<Cholesky>,
    mu_hat: Vec<Matrix>,
    episodes: usize,
    initial: Vec<f64>,
}

impl LsviEstimate {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn horizon(&self) -> usize {
        self.gram.len()
    }

    /// `Λ_h = I + Σ_k φφᵀ`
    pub fn gram(&self) -> &[Matrix] {
        &self.gram
    }

    /// `μ̂_h`, shape `d × S`.
    pub fn mu_hat(&self) -> &[Matrix] {
        &self.mu_hat
    }

    /// Episode count `τ`.
    pub fn episodes(&self) -> usize {
        self.episodes
    }

    /// Empirical initial distribution (uniform before any episode).
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Replaces the empirical initial distribution with a known one.
    pub fn with_initial(mut self, initial: Vec<f64>) -> Result<Self> {
        check_dim("initial distribution", self.states, initial.len())?;
        mdp::check_distribution("initial distribution", &initial, crate::DEFAULT_TOL)?;
        self.initial = initial;
        Ok(self)
    }

    /// `‖φ‖_{Λ_h⁻¹}`
    pub fn elliptical_norm(&self, h: usize, phi: &[f64]) -> f64 {
        math::sqrt(self.factors[h].inverse_quadratic(phi).max(0.0))
    }

    /// Estimated row `⟨φ(s, a), μ̂_h⟩`. The raw estimate is a signed
    /// quasi-distribution; `project` clips negatives and renormalizes.
    pub fn transition_row(&self, h: usize, phi: &[f64], project: bool) -> Vec<f64> {
        let mut row = linear_row(phi, &self.mu_hat[h]);
        if project {
            clean_row(&mut row);
        }
        row
    }

    /// `Λ_h⁻¹ μ̃_h v` where `μ̃_h = Σ φ e_{s'}ᵀ`, i.e. `μ̂_h v`.
    fn backup(&self, h: usize, v: &[f64]) -> Vec<f64> {
        self.mu_hat[h].mul_vec(v)
    }
}

/// Online accumulator for [`LsviEstimate`].
#[derive(Debug, Clone)]
pub struct LsviAccumulator {
    dim: usize,
    states: usize,
    gram: Vec<Matrix>,
    targets: Vec<Matrix>,
    initial_counts: Vec<u64>,
    episodes: usize,
}

impl LsviAccumulator {
    pub fn new(features: &FeatureMap, horizon: usize) -> Self {
        let d = features.dim();
        Self {
            dim: d,
            states: features.states(),
            gram: vec![Matrix::identity(d); horizon],
            targets: vec![Matrix::zeros(d, features.states()); horizon],
            initial_counts: vec![0; features.states()],
            episodes: 0,
        }
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    /// Adds one episode; it needs all `H + 1` states.
    pub fn push(&mut self, features: &FeatureMap, episode: &Trajectory) -> Result<()> {
        let horizon = self.gram.len();
        episode.validate(features.states(), features.actions(), horizon)?;
        check_dim("episode states", horizon + 1, episode.states.len())?;
        for h in 0..horizon {
            let phi = features.phi(episode.states[h], episode.actions[h]);
            self.gram[h].add_outer(phi);
            self.targets[h].add_to_column(episode.states[h + 1], phi);
        }
        self.initial_counts[episode.states[0]] += 1;
        self.episodes += 1;
        Ok(())
    }

    pub fn estimate(&self) -> Result<LsviEstimate> {
        let mut factors = Vec::with_capacity(self.gram.len());
        let mut mu_hat = Vec::with_capacity(self.gram.len());
        for (gram, target) in self.gram.iter().zip(&self.targets) {
            let chol = Cholesky::new(gram)?;
            let mut m = Matrix::zeros(self.dim, self.states);
            let mut column = vec![0.0; self.dim];
            for sp in 0..self.states {
                for k in 0..self.dim {
                    column[k] = target.get(k, sp);
                }
                if column.iter().any(|x| *x != 0.0) {
                    for (k, x) in chol.solve(&column).into_iter().enumerate() {
                        m.set(k, sp, x);
                    }
                }
            }
            factors.push(chol);
            mu_hat.push(m);
        }
        let initial = if self.episodes == 0 {
            vec![1.0 / self.states as f64; self.states]
        } else {
            self.initial_counts
                .iter()
                .map(|&c| c as f64 / self.episodes as f64)
                .collect()
        };
        Ok(LsviEstimate {
            dim: self.dim,
            states: self.states,
            gram: self.gram.clone(),
            factors,
            mu_hat,
            episodes: self.episodes,
            initial,
        })
    }
}

/// Fits `Λ_h` and `μ̂_h` on every episode of `dataset`.
pub fn lsvi_fit(dataset: &ExplorationDataset, features: &FeatureMap) -> Result<LsviEstimate> {
    let dims = dataset.dims();
    check_dim("feature states", features.states(), dims.states)?;
    check_dim("feature actions", features.actions(), dims.actions)?;
    let mut acc = LsviAccumulator::new(features, dims.horizon);
    for episode in dataset.episodes() {
        acc.push(features, episode)?;
    }
    acc.estimate()
}

/// `u_h(s, a) = min(β ‖φ(s, a)‖_{Λ_h⁻¹}, H)`
pub fn elliptical_bonus(
    estimate: &LsviEstimate,
    features: &FeatureMap,
    beta: f64,
) -> Result<RewardTable> {
    check_dim("feature dimension", estimate.dim(), features.dim())?;
    check_dim("feature states", estimate.states(), features.states())?;
    if !(beta >= 0.0) {
        return Err(Error::param("beta", "must be nonnegative"));
    }
    let horizon = estimate.horizon();
    let dims = Dims::new(features.states(), features.actions(), horizon)?;
    let cap = horizon as f64;
    RewardTable::from_fn(dims, |h, s, a| {
        (beta * estimate.elliptical_norm(h, features.phi(s, a))).min(cap)
    })
}

/// `β = c H √(d ln(1 + τ) + ln(H / δ))`
pub fn default_beta(d: usize, horizon: usize, tau: usize, delta: f64, c: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1)"));
    }
    if !(c >= 0.0) {
        return Err(Error::param("c", "must be nonnegative"));
    }
    let h = horizon as f64;
    Ok(c * h * math::sqrt(d as f64 * math::ln(1.0 + tau as f64) + math::ln(h / delta)))
}

/// Result of backward LSVI planning.
#[derive(Debug, Clone, PartialEq)]
pub struct LsviPlan {
    /// Flat `(h, s)`.
    pub values: Vec<f64>,
    pub policy: Policy,
    /// `Σ_s d0(s) V_1(s)` against the estimate's initial distribution.
    pub root: f64,
}

/// Backward LSVI: `Q_h = r_h + ⟨φ, μ̂_h V_{h+1}⟩ + bonus_h`, `V_h = max_a Q_h`
/// clipped to `±(H − h)·cap`.
pub fn lsvi_plan(
    estimate: &LsviEstimate,
    features: &FeatureMap,
    reward: &RewardTable,
    bonus: Option<&RewardTable>,
    cap: f64,
) -> Result<LsviPlan> {
    let dims = reward.dims();
    check_dim("feature dimension", estimate.dim(), features.dim())?;
    check_dim("reward states", features.states(), dims.states)?;
    check_dim("reward actions", features.actions(), dims.actions)?;
    check_dim("reward horizon", estimate.horizon(), dims.horizon)?;
    if let Some(b) = bonus {
        dims.check_same(&b.dims())?;
    }
    let (n_s, n_a, n_h) = (dims.states, dims.actions, dims.horizon);
    let mut values = vec![0.0; n_h * n_s];
    let mut probs = vec![0.0; dims.sah()];
    let mut q = vec![0.0; n_a];
    for h in (0..n_h).rev() {
        let w = if h + 1 < n_h {
            estimate.backup(h, &values[(h + 1) * n_s..(h + 2) * n_s])
        } else {
            vec![0.0; features.dim()]
        };
        let limit = (n_h - h) as f64 * cap;
        for s in 0..n_s {
            for (a, qa) in q.iter_mut().enumerate() {
                *qa = reward.get(h, s, a)
                    + math::dot(features.phi(s, a), &w)
                    + bonus.map_or(0.0, |b| b.get(h, s, a));
            }
            let best = math::argmax(&q);
            probs[dims.hsa_index(h, s, best)] = 1.0;
            values[h * n_s + s] = q[best].clamp(-limit, limit);
        }
    }
    let root = math::dot(estimate.initial(), &values[..n_s]);
    Ok(LsviPlan {
        values,
        policy: Policy::new(dims, probs)?,
        root,
    })
}

/// Separation verdict for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCertificate {
    pub stage: usize,
    /// `t > MARGIN_TOL` for the global pairs `Φ^E_h × Φ̄_h`.
    pub separable: bool,
    /// `|t| ≤ MARGIN_TOL`; counted as non-separable.
    pub boundary: bool,
    /// Optimal margin `t` (with `‖w‖_∞ ≤ 1`); infinite when `Φ̄_h` is empty.
    pub margin: f64,
    /// Separating direction with `‖w‖₂ = 1` when separable.
    pub witness: Option<Vec<f64>>,
    pub expert_features: usize,
    pub non_expert_features: usize,
    /// Same certificate restricted to pairs at a common state.
    pub per_state_separable: bool,
    pub per_state_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyReport {
    pub stages: Vec<StageCertificate>,
}

impl DegeneracyReport {
    /// No stage admits a separating hyperplane; the linear feasible set is
    /// then `{0}`.
    pub fn degenerate(&self) -> bool {
        self.stages.iter().all(|c| !c.separable)
    }
}

fn push_unique(set: &mut Vec<Vec<f64>>, v: &[f64]) {
    if !set.iter().any(|u| u.as_slice() == v) {
        set.push(v.to_vec());
    }
}

/// Maximizes `t` s.t. `wᵀg ≥ t` for every difference `g`, `‖w‖_∞ ≤ 1`.
/// Returns `(t, w)`, or `None` without constraints.
fn margin_lp(diffs: &[Vec<f64>], d: usize) -> Result<Option<(f64, Vec<f64>)>> {
    if diffs.is_empty() {
        return Ok(None);
    }
    // u = w + 1 ∈ [0, 2]^d and T = t + K ≥ 0 keep the right-hand side
    // nonnegative, so the origin is a feasible basis.
    let k = diffs
        .iter()
        .map(|g| g.iter().map(|x| math::abs(*x)).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let n = d + 1;
    let mut rows = Vec::with_capacity(diffs.len() + n);
    let mut rhs = Vec::with_capacity(diffs.len() + n);
    for g in diffs {
        let mut row = vec![0.0; n];
        for i in 0..d {
            row[i] = -g[i];
        }
        row[d] = 1.0;
        rows.push(row);
        rhs.push(k - g.iter().sum::<f64>());
    }
    for i in 0..d {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        rows.push(row);
        rhs.push(2.0);
    }
    let mut row = vec![0.0; n];
    row[d] = 1.0;
    rows.push(row);
    rhs.push(2.0 * k);
    let mut c = vec![0.0; n];
    c[d] = 1.0;
    match lp::maximize(&c, &rows, &rhs)? {
        LpOutcome::Optimal { x, .. } => {
            let w: Vec<f64> = x[..d].iter().map(|u| u - 1.0).collect();
            // recompute from w so the margin is exact for the returned point
            let t = diffs
                .iter()
                .map(|g| math::dot(&w, g))
                .fold(f64::INFINITY, f64::min);
            Ok(Some((t, w)))
        }
        LpOutcome::Unbounded => Err(Error::Solver("margin program reported unbounded".into())),
    }
}

/// Per-stage separating-hyperplane certificate between expert features
/// `Φ^E_h = {φ(s, a) : a ∈ A^E_h(s)}` and non-expert features
/// `Φ̄_h = {φ(s, a) : a ∉ A^E_h(s)}` over the states the expert visits.
pub fn degeneracy_check(
    mdp: &TabularMdp,
    expert: &Policy,
    features: &FeatureMap,
) -> Result<DegeneracyReport> {
    let dims = mdp.dims();
    check_dim("feature states", dims.states, features.states())?;
    check_dim("feature actions", dims.actions, features.actions())?;
    let d = features.dim();
    let occupancy = mdp::occupancy_measure(mdp, expert)?;
    let mut stages = Vec::with_capacity(dims.horizon);
    for h in 0..dims.horizon {
        let mut expert_set: Vec<Vec<f64>> = Vec::new();
        let mut other_set: Vec<Vec<f64>> = Vec::new();
        let mut local: Vec<Vec<f64>> = Vec::new();
        for s in 0..dims.states {
            if occupancy.state_mass(h, s) <= SUPPORT_EPS {
                continue;
            }
            let row = expert.row(h, s);
            let (ins, outs): (Vec<usize>, Vec<usize>) =
                (0..dims.actions).partition(|&a| row[a] > SUPPORT_EPS);
            for &a in &ins {
                push_unique(&mut expert_set, features.phi(s, a));
                for &b in &outs {
                    let g: Vec<f64> = features
                        .phi(s, a)
                        .iter()
                        .zip(features.phi(s, b))
                        .map(|(x, y)| x - y)
                        .collect();
                    push_unique(&mut local, &g);
                }
            }
            for &b in &outs {
                push_unique(&mut other_set, features.phi(s, b));
            }
        }
        let mut global = Vec::with_capacity(expert_set.len() * other_set.len());
        for e in &expert_set {
            for o in &other_set {
                let g: Vec<f64> = e.iter().zip(o).map(|(x, y)| x - y).collect();
                push_unique(&mut global, &g);
            }
        }
        let (margin, witness) = match margin_lp(&global, d)? {
            None => {
                let mut w = vec![0.0; d];
                w[0] = 1.0;
                (f64::INFINITY, Some(w))
            }
            Some((t, w)) => (t, Some(w)),
        };
        let separable = margin > MARGIN_TOL;
        let witness = if separable {
            let mut w = witness.expect("set above");
            let norm = math::norm2(&w);
            w.iter_mut().for_each(|x| *x /= norm);
            verify_witness(&w, &expert_set, &other_set)?;
            Some(w)
        } else {
            None
        };
        let per_state_margin = margin_lp(&local, d)?.map_or(f64::INFINITY, |(t, _)| t);
        stages.push(StageCertificate {
            stage: h,
            separable,
            boundary: math::abs(margin) <= MARGIN_TOL,
            margin,
            witness,
            expert_features: expert_set.len(),
            non_expert_features: other_set.len(),
            per_state_separable: per_state_margin > MARGIN_TOL,
            per_state_margin,
        });
    }
    Ok(DegeneracyReport { stages })
}

fn verify_witness(w: &[f64], experts: &[Vec<f64>], others: &[Vec<f64>]) -> Result<()> {
    let low = experts
        .iter()
        .map(|e| math::dot(w, e))
        .fold(f64::INFINITY, f64::min);
    let high = others
        .iter()
        .map(|o| math::dot(w, o))
        .fold(f64::NEG_INFINITY, f64::max);
    if low < high {
        return Err(Error::Solver(format!(
            "witness fails verification: min expert value {low} < max non-expert value {high}"
        )));
    }
    Ok(())
}

/// Outcome of scanning candidate stage weights through the exact
/// feasibility oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct StageScan {
    pub stage: usize,
    pub points: usize,
    /// Feasible points with a strictly worse non-expert action somewhere.
    pub proper_feasible: usize,
    /// Largest `‖w‖₂` among feasible points (any kind).
    pub max_feasible_norm: f64,
}

/// Tests every `w` in `grid` as a one-stage reward `⟨φ, w⟩` on the states
/// the expert visits at `stage`, using [`mdp::feasible_membership`].
pub fn stage_feasibility_scan(
    mdp: &TabularMdp,
    expert: &Policy,
    features: &FeatureMap,
    stage: usize,
    grid: &[Vec<f64>],
) -> Result<StageScan> {
    let dims = mdp.dims();
    if stage >= dims.horizon {
        return Err(Error::param("stage", "out of range"));
    }
    let occupancy = mdp::occupancy_measure(mdp, expert)?;
    let marginal: Vec<f64> = (0..dims.states)
        .map(|s| occupancy.state_mass(stage, s))
        .collect();
    let total: f64 = marginal.iter().sum();
    let one = Dims::new(dims.states, dims.actions, 1)?;
    let local = TabularMdp::new(
        one,
        marginal.iter().map(|m| m / total).collect(),
        (0..dims.states * dims.actions)
            .flat_map(|i| {
                let mut r = vec![0.0; dims.states];
                r[i / dims.actions] = 1.0;
                r
            })
            .collect(),
    )?;
    let local_expert = Policy::new(
        one,
        (0..dims.states)
            .flat_map(|s| expert.row(stage, s).to_vec())
            .collect(),
    )?;
    let support = local
        .initial()
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > SUPPORT_EPS);
    let support = mdp::Support::from_pairs(dims.states, 1, support.map(|(s, _)| (0, s)))?;
    let mut proper = 0;
    let mut max_norm: f64 = 0.0;
    for w in grid {
        check_dim("grid point", features.dim(), w.len())?;
        let reward = RewardTable::unbounded(one, features.project(w))?;
        if !mdp::feasible_membership(&local, &local_expert, &support, &reward, 1e-12)? {
            continue;
        }
        max_norm = max_norm.max(math::norm2(w));
        let strict = support.iter().any(|(_, s)| {
            let best = math::dot(
                local_expert.row(0, s),
                &reward.stage(0)[s * dims.actions..(s + 1) * dims.actions],
            );
            (0..dims.actions).any(|a| reward.get(0, s, a) < best - MARGIN_TOL)
        });
        if strict {
            proper += 1;
        }
    }
    Ok(StageScan {
        stage,
        points: grid.len(),
        proper_feasible: proper,
        max_feasible_norm: max_norm,
    })
}

/// Regular grid on `[-radius, radius]^d` with `per_axis` points per axis.
pub fn cube_grid(d: usize, per_axis: usize, radius: f64) -> Vec<Vec<f64>> {
    let step = if per_axis > 1 {
        2.0 * radius / (per_axis - 1) as f64
    } else {
        0.0
    };
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut i| {
            (0..d)
                .map(|_| {
                    let j = i % per_axis;
                    i /= per_axis;
                    if per_axis > 1 {
                        -radius + step * j as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::make_named_example;

    #[test]
    fn beta_closed_form() {
        let e = core::f64::consts::E;
        assert!((default_beta(1, 1, 0, 1.0 / e, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let b1 = default_beta(4, 5, 1000, 0.1, 1.0).unwrap();
        let hand = 5.0 * (4.0 * 1001f64.ln() + 50f64.ln()).sqrt();
        assert!((b1 - hand).abs() < 1e-12);
        assert!(default_beta(4, 5, 2000, 0.1, 1.0).unwrap() > b1);
        assert!(default_beta(1, 1, 0, 1.0, 1.0).is_err());
        assert!(default_beta(1, 1, 0, 0.0, 1.0).is_err());
    }

    #[test]
    fn feature_norm_is_enforced() {
        assert!(FeatureMap::new(2, 1, 1, vec![0.8, 0.8]).is_err());
        assert!(FeatureMap::new(2, 1, 1, vec![0.6, 0.8]).is_ok());
    }

    #[test]
    fn one_episode_scalar_estimate() {
        let features = FeatureMap::new(1, 2, 1, vec![1.0, 1.0]).unwrap();
        let mut acc = LsviAccumulator::new(&features, 2);
        acc.push(
            &features,
            &Trajectory {
                states: vec![0, 1, 0],
                actions: vec![0, 0],
            },
        )
        .unwrap();
        let est = acc.estimate().unwrap();
        assert_eq!(est.gram()[0].get(0, 0), 2.0);
        let close = |x: &[f64], y: [f64; 2]| x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-15);
        assert!(close(est.mu_hat()[0].row(0), [0.0, 0.5]));
        assert!(close(est.mu_hat()[1].row(0), [0.5, 0.0]));
        assert_eq!(est.initial(), &[1.0, 0.0]);
    }

    #[test]
    fn empty_estimate_is_identity() {
        let features = FeatureMap::one_hot(2, 2).unwrap();
        let est = LsviAccumulator::new(&features, 3).estimate().unwrap();
        for g in est.gram() {
            assert_eq!(g, &Matrix::identity(4));
        }
        let u = elliptical_bonus(&est, &features, 1.0).unwrap();
        assert!(u.values().iter().all(|x| *x == 1.0));
        let zero = elliptical_bonus(&est, &features, 0.0).unwrap();
        assert!(zero.values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn tabular_embedding_materializes_exactly() {
        let dims = Dims::new(2, 2, 2).unwrap();
        let mdp = TabularMdp::from_fn(dims, vec![0.3, 0.7], |h, s, a| {
            let p = 0.1 + 0.2 * (h + s + a) as f64;
            vec![p, 1.0 - p]
        })
        .unwrap();
        let spec = LinearMdpSpec::from_tabular(&mdp).unwrap();
        assert_eq!(spec.materialize().unwrap(), mdp);
    }

    #[test]
    fn invalid_linear_rows_name_the_triple() {
        let features = FeatureMap::new(1, 2, 1, vec![1.0, 0.5]).unwrap();
        let mu = vec![Matrix::from_rows(1, 2, vec![0.5, 0.5]).unwrap()];
        let err = LinearMdpSpec::new(features, mu, vec![0.5, 0.5]).unwrap_err();
        match err {
            Error::InvalidDistribution(msg) => assert!(msg.contains("(h=0, s=1, a=0)"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn appendix_examples_separability() {
        let non = make_named_example("nondegenerate_phi1").unwrap();
        let report =
            degeneracy_check(&non.mdp, &non.expert, non.features.as_ref().unwrap()).unwrap();
        assert!(report.stages[0].separable);
        assert!(report.stages[0].witness.as_ref().unwrap()[0] > 0.0);
        assert!(!report.degenerate());

        let deg = make_named_example("degenerate_phi2").unwrap();
        let report =
            degeneracy_check(&deg.mdp, &deg.expert, deg.features.as_ref().unwrap()).unwrap();
        assert!(!report.stages[0].separable);
        assert!(report.stages[0].boundary);
        assert!(report.degenerate());
    }

    #[test]
    fn expert_playing_everything_somewhere_is_not_separable() {
        let dims = Dims::new(2, 2, 1).unwrap();
        let mdp = TabularMdp::new(
            dims,
            vec![0.5, 0.5],
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
        )
        .unwrap();
        let features =
            FeatureMap::new(2, 2, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let expert = Policy::new(dims, vec![0.5, 0.5, 1.0, 0.0]).unwrap();
        let report = degeneracy_check(&mdp, &expert, &features).unwrap();
        assert!(!report.stages[0].separable);
    }

    #[test]
    fn grid_scan_matches_examples() {
        let grid = cube_grid(1, 101, 1.0);
        let non = make_named_example("nondegenerate_phi1").unwrap();
        let scan = stage_feasibility_scan(
            &non.mdp,
            &non.expert,
            non.features.as_ref().unwrap(),
            0,
            &grid,
        )
        .unwrap();
        assert_eq!(scan.proper_feasible, 50);
        let deg = make_named_example("degenerate_phi2").unwrap();
        let scan = stage_feasibility_scan(
            &deg.mdp,
            &deg.expert,
            deg.features.as_ref().unwrap(),
            0,
            &grid,
        )
        .unwrap();
        assert_eq!(scan.proper_feasible, 0);
        assert!(scan.max_feasible_norm <= 1e-6);
    }

    #[test]
    fn cube_grid_layout() {
        let g = cube_grid(2, 3, 1.0);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![-1.0, -1.0]);
        assert_eq!(g[4], vec![0.0, 0.0]);
        assert_eq!(g[8], vec![1.0, 1.0]);
    }
}
