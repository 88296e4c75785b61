//! Instance generators: worked examples, seeded random MDPs and the
//! lower-bound constructions (hidden-leaf tree and packing family).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::linear::{FeatureMap, LinearMdpSpec};
use crate::math;
use crate::mdp::{Dims, LinearReward, Policy, RewardSpec, RewardTable, TabularMdp};
use crate::rng::{self, StreamRng};

/// A fully specified example with its documented values.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedExample {
    pub name: String,
    pub mdp: TabularMdp,
    pub expert: Policy,
    pub features: Option<FeatureMap>,
    pub rewards: Vec<(String, RewardSpec)>,
    /// Documented quantities, e.g. `C̄(r_g) = 0.01`.
    pub expected: Vec<(String, f64)>,
}

impl NamedExample {
    pub fn reward(&self, name: &str) -> Option<&RewardSpec> {
        self.rewards.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn expected(&self, key: &str) -> Option<f64> {
        self.expected
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
    }
}

pub const NAMED_EXAMPLES: [&str; 4] = [
    "muffin",
    "nondegenerate_phi1",
    "degenerate_phi2",
    "two_state_expert",
];

fn self_loops(dims: Dims, initial: Vec<f64>) -> Result<TabularMdp> {
    TabularMdp::from_fn(dims, initial, |_, s, _| {
        let mut row = vec![0.0; dims.states];
        row[s] = 1.0;
        row
    })
}

pub fn make_named_example(name: &str) -> Result<NamedExample> {
    match name {
        "muffin" => {
            // actions: muffin, cake, soup
            let dims = Dims::new(1, 3, 1)?;
            let mdp = self_loops(dims, vec![1.0])?;
            let table = |v: [f64; 3]| RewardTable::new(dims, v.to_vec()).map(RewardSpec::Dense);
            Ok(NamedExample {
                name: name.into(),
                expert: Policy::constant(dims, 0)?,
                mdp,
                features: None,
                rewards: vec![
                    ("r_E".into(), table([1.0, 0.99, -1.0])?),
                    ("r_g".into(), table([0.99, 1.0, -1.0])?),
                    ("r_b".into(), table([-1.0, -1.0, 1.0])?),
                    ("r_b_prime".into(), table([0.99, -1.0, 1.0])?),
                ],
                expected: vec![
                    ("J*(r_E)".into(), 1.0),
                    ("C(r_E)".into(), 0.0),
                    ("C(r_g)".into(), 0.01),
                    ("C(r_b)".into(), 2.0),
                    ("C(r_b_prime)".into(), 0.01),
                ],
            })
        }
        "nondegenerate_phi1" | "degenerate_phi2" | "two_state_expert" => {
            let dims = Dims::new(2, 2, 1)?;
            let mdp = self_loops(dims, vec![0.5, 0.5])?;
            let phi = if name == "degenerate_phi2" {
                vec![1.0, 0.0, 0.0, 1.0]
            } else {
                vec![1.0, 0.0, 1.0, 0.0]
            };
            let expert = if name == "two_state_expert" {
                Policy::deterministic(dims, &[vec![0, 1]])?
            } else {
                Policy::constant(dims, 0)?
            };
            let separable = if name == "nondegenerate_phi1" {
                1.0
            } else {
                0.0
            };
            Ok(NamedExample {
                name: name.into(),
                mdp,
                expert,
                features: Some(FeatureMap::new(1, 2, 2, phi)?),
                rewards: vec![
                    (
                        "theta_pos".into(),
                        RewardSpec::Linear(LinearReward::new(vec![vec![1.0]])?),
                    ),
                    (
                        "theta_neg".into(),
                        RewardSpec::Linear(LinearReward::new(vec![vec![-1.0]])?),
                    ),
                    (
                        "theta_zero".into(),
                        RewardSpec::Linear(LinearReward::new(vec![vec![0.0]])?),
                    ),
                ],
                expected: vec![("separable".into(), separable)],
            })
        }
        _ => Err(Error::param("name", format!("unknown example `{name}`"))),
    }
}

/// Structure of a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomStructure {
    Tabular,
    Linear { dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    pub mdp: TabularMdp,
    pub spec: Option<LinearMdpSpec>,
    /// Random deterministic expert.
    pub expert: Policy,
    pub seed: u64,
}

/// Seeded random instance. Tabular rows are Dirichlet(1). Linear instances
/// draw features from the probability simplex (so `‖φ‖₂ ≤ 1`) and the rows
/// of each `μ_h` from Dirichlet(1), which makes every `⟨φ, μ_h⟩` a convex
/// combination of distributions.
pub fn random_instance(
    states: usize,
    actions: usize,
    horizon: usize,
    structure: RandomStructure,
    seed: u64,
) -> Result<RandomInstance> {
    let dims = Dims::new(states, actions, horizon)?;
    let mut g = rng::stream(seed, rng::tag::INSTANCE, 0);
    let initial = rng::dirichlet_flat(&mut g, states);
    let (mdp, spec) = match structure {
        RandomStructure::Tabular => {
            let mdp =
                TabularMdp::from_fn(dims, initial, |_, _, _| rng::dirichlet_flat(&mut g, states))?;
            (mdp, None)
        }
        RandomStructure::Linear { dim } => {
            if dim == 0 {
                return Err(Error::param("d", "must be positive"));
            }
            let phi: Vec<f64> = (0..states * actions)
                .flat_map(|_| rng::dirichlet_flat(&mut g, dim))
                .collect();
            let features = FeatureMap::new(dim, states, actions, phi)?;
            let mu = (0..horizon)
                .map(|_| {
                    let data = (0..dim)
                        .flat_map(|_| rng::dirichlet_flat(&mut g, states))
                        .collect();
                    Matrix::from_rows(dim, states, data)
                })
                .collect::<Result<Vec<_>>>()?;
            let spec = LinearMdpSpec::new(features, mu, initial)?;
            (spec.materialize()?, Some(spec))
        }
    };
    let expert = random_policy(dims, &mut g, true)?;
    Ok(RandomInstance {
        mdp,
        spec,
        expert,
        seed,
    })
}

/// Random policy: uniform actions when deterministic, Dirichlet rows
/// otherwise.
pub fn random_policy(dims: Dims, g: &mut StreamRng, deterministic: bool) -> Result<Policy> {
    if deterministic {
        let actions: Vec<Vec<usize>> = (0..dims.horizon)
            .map(|_| {
                (0..dims.states)
                    .map(|_| rng::categorical(g, &vec![1.0 / dims.actions as f64; dims.actions]))
                    .collect()
            })
            .collect();
        Policy::deterministic(dims, &actions)
    } else {
        let probs = (0..dims.horizon * dims.states)
            .flat_map(|_| rng::dirichlet_flat(g, dims.actions))
            .collect();
        Policy::new(dims, probs)
    }
}

/// Dense reward with entries uniform in `[lo, hi] ⊆ [-1, 1]`.
pub fn random_reward(dims: Dims, g: &mut StreamRng, lo: f64, hi: f64) -> Result<RewardTable> {
    RewardTable::new(
        dims,
        (0..dims.sah())
            .map(|_| lo + (hi - lo) * rng::uniform(g))
            .collect(),
    )
}

/// State indices of a tree-shaped instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeLayout {
    pub branching: usize,
    pub depth: usize,
    pub wait: usize,
    /// Number of tree nodes `(A^d − 1)/(A − 1)`.
    pub nodes: usize,
    /// Number of leaves `A^{d−1}`.
    pub leaves: usize,
}

impl TreeLayout {
    fn new(branching: usize, depth: usize, wait: usize) -> Result<Self> {
        if branching < 2 {
            return Err(Error::param("branching", "A ≥ 2 required"));
        }
        if depth == 0 {
            return Err(Error::param("depth", "d ≥ 1 required"));
        }
        let leaves = branching
            .checked_pow(depth as u32 - 1)
            .ok_or_else(|| Error::param("depth", "tree too large"))?;
        let nodes = (leaves * branching - 1) / (branching - 1);
        Ok(Self {
            branching,
            depth,
            wait,
            nodes,
            leaves,
        })
    }

    pub const WAIT_STATE: usize = 0;
    pub const WAIT_ACTION: usize = 0;

    pub fn root(&self) -> usize {
        1
    }

    /// State index of tree node `k` (root is node 0).
    pub fn node(&self, k: usize) -> usize {
        1 + k
    }

    pub fn leaf(&self, l: usize) -> usize {
        self.node(self.nodes - self.leaves + l)
    }

    /// Index of the first state after the tree.
    pub fn after_tree(&self) -> usize {
        1 + self.nodes
    }

    fn node_of(&self, s: usize) -> Option<usize> {
        (1..=self.nodes).contains(&s).then(|| s - 1)
    }

    fn leaf_of(&self, s: usize) -> Option<usize> {
        let k = self.node_of(s)?;
        (k >= self.nodes - self.leaves).then(|| k - (self.nodes - self.leaves))
    }

    /// `p(s_w | s_w, a) = 1{a = a_w, h ≤ H̄}` with 0-based `h`.
    fn waits(&self, h: usize, a: usize) -> bool {
        a == Self::WAIT_ACTION && h < self.wait
    }

    /// Next state inside the tree, `None` at leaves.
    fn child(&self, s: usize, a: usize) -> Option<usize> {
        let k = self.node_of(s)?;
        if self.leaf_of(s).is_some() {
            return None;
        }
        Some(self.node(k * self.branching + 1 + a))
    }

    /// Deterministic policy that leaves `s_w` at the right stage to play
    /// `action` at `leaf` on 0-based stage `stage`. Off-path states play
    /// `default`.
    pub fn path_policy(
        &self,
        dims: Dims,
        leaf: usize,
        action: usize,
        stage: usize,
        default: usize,
    ) -> Result<Policy> {
        if stage < self.depth || stage >= self.wait + self.depth || leaf >= self.leaves {
            return Err(Error::param(
                "triple",
                "leaf triple not reachable on a path",
            ));
        }
        let leave = stage - self.depth;
        // digits of the leaf index, most significant first
        let mut path = vec![0; self.depth - 1];
        let mut l = leaf;
        for i in (0..self.depth - 1).rev() {
            path[i] = l % self.branching;
            l /= self.branching;
        }
        let mut on_path = vec![usize::MAX; self.nodes];
        let mut k = 0;
        for &a in &path {
            on_path[k] = a;
            k = k * self.branching + 1 + a;
        }
        let exit = if self.branching > 2 || Self::WAIT_ACTION != 1 {
            1
        } else {
            0
        };
        let actions: Vec<Vec<usize>> = (0..dims.horizon)
            .map(|h| {
                (0..dims.states)
                    .map(|s| {
                        if s == Self::WAIT_STATE {
                            if h < leave {
                                Self::WAIT_ACTION
                            } else {
                                exit
                            }
                        } else if let Some(l) = self.leaf_of(s) {
                            if l == leaf {
                                action
                            } else {
                                default
                            }
                        } else if let Some(k) = self.node_of(s) {
                            if on_path[k] != usize::MAX {
                                on_path[k]
                            } else {
                                default
                            }
                        } else {
                            default
                        }
                    })
                    .collect()
            })
            .collect();
        Policy::deterministic(dims, &actions)
    }
}

/// Parameters of the hidden-leaf tree instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeInstanceParams {
    pub branching: usize,
    pub depth: usize,
    pub horizon: usize,
    /// `H̄`
    pub wait: usize,
    /// `ε'`
    pub bias: f64,
    /// `(h*, ℓ*, a*)` with 0-based stage `h* ∈ [d, H̄ + d)`; `None` gives the
    /// reference instance.
    pub hidden: Option<(usize, usize, usize)>,
    pub include_expert_state: bool,
    /// Reward of every action in `s_E`.
    pub expert_state_reward: f64,
}

impl TreeInstanceParams {
    pub fn new(branching: usize, depth: usize, horizon: usize, wait: usize) -> Self {
        Self {
            branching,
            depth,
            horizon,
            wait,
            bias: 0.0,
            hidden: None,
            include_expert_state: true,
            expert_state_reward: -1.0,
        }
    }

    /// `ε' = 2ε/(H − H̄ − d)`, the bias giving an optimal-value gap of `2ε`.
    pub fn bias_for_gap(&self, epsilon: f64) -> f64 {
        2.0 * epsilon / (self.horizon - self.wait - self.depth) as f64
    }

    pub fn states(&self) -> Result<usize> {
        let layout = TreeLayout::new(self.branching, self.depth, self.wait)?;
        Ok(layout.nodes + 3 + usize::from(self.include_expert_state))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeInstance {
    pub mdp: TabularMdp,
    pub reward: RewardTable,
    /// Enters `s_E` from `s_w` at the first stage (when `s_E` exists).
    pub expert: Policy,
    pub layout: TreeLayout,
    pub good: usize,
    pub bad: usize,
    pub expert_state: Option<usize>,
    pub expert_action: usize,
}

impl TreeInstance {
    /// `J*` in closed form: `(H − H̄ − d)(½ + ε'·1{hidden})`.
    pub fn closed_form_optimum(params: &TreeInstanceParams) -> f64 {
        let span = (params.horizon - params.wait - params.depth) as f64;
        let bias = if params.hidden.is_some() {
            params.bias
        } else {
            0.0
        };
        span * (0.5 + bias)
    }
}

pub fn make_tree_instance(params: &TreeInstanceParams) -> Result<TreeInstance> {
    let p = params;
    let layout = TreeLayout::new(p.branching, p.depth, p.wait)?;
    if p.horizon < 3 * p.depth {
        return Err(Error::param(
            "horizon",
            format!("H ≥ 3d violated: H = {}, d = {}", p.horizon, p.depth),
        ));
    }
    if p.wait == 0 || p.wait + p.depth > p.horizon {
        return Err(Error::param(
            "wait",
            format!("1 ≤ H̄ ≤ H − d violated: H̄ = {}", p.wait),
        ));
    }
    if !(0.0..=0.5).contains(&p.bias) {
        return Err(Error::param("bias", "ε' ∈ [0, 1/2] violated"));
    }
    if p.include_expert_state && p.branching < 3 {
        return Err(Error::param(
            "branching",
            "A ≥ 3 required with the expert state: the expert action must differ from both the waiting and the leaving action",
        ));
    }
    if let Some((h, l, a)) = p.hidden {
        if h < p.depth || h >= p.wait + p.depth {
            return Err(Error::param("hidden", "stage outside [d, H̄ + d)"));
        }
        if l >= layout.leaves || a >= p.branching {
            return Err(Error::param("hidden", "leaf or action out of range"));
        }
    }
    if !(-1.0..=1.0).contains(&p.expert_state_reward) {
        return Err(Error::param("expert_state_reward", "must lie in [-1, 1]"));
    }
    let good = layout.after_tree();
    let bad = good + 1;
    let expert_state = p.include_expert_state.then_some(bad + 1);
    let states = bad + 1 + usize::from(p.include_expert_state);
    let dims = Dims::new(states, p.branching, p.horizon)?;
    let expert_action = p.branching - 1;
    let mut initial = vec![0.0; states];
    initial[TreeLayout::WAIT_STATE] = 1.0;
    let mdp = TabularMdp::from_fn(dims, initial, |h, s, a| {
        let mut row = vec![0.0; states];
        if s == TreeLayout::WAIT_STATE {
            let next = match expert_state {
                Some(e) if a == expert_action => e,
                _ if layout.waits(h, a) => TreeLayout::WAIT_STATE,
                _ => layout.root(),
            };
            row[next] = 1.0;
        } else if let Some(l) = layout.leaf_of(s) {
            let bump = match p.hidden {
                Some(t) if t == (h, l, a) => p.bias,
                _ => 0.0,
            };
            row[good] = 0.5 + bump;
            row[bad] = 0.5 - bump;
        } else if let Some(c) = layout.child(s, a) {
            row[c] = 1.0;
        } else {
            row[s] = 1.0;
        }
        row
    })?;
    let first_rewarded = p.wait + p.depth;
    let reward = RewardTable::from_fn(dims, |h, s, _| {
        if s == good && h >= first_rewarded {
            1.0
        } else if Some(s) == expert_state {
            p.expert_state_reward
        } else {
            0.0
        }
    })?;
    let expert = Policy::constant(dims, expert_action)?;
    Ok(TreeInstance {
        mdp,
        reward,
        expert,
        layout,
        good,
        bad,
        expert_state,
        expert_action,
    })
}

/// A set of balanced sign vectors with the achieved size.
#[derive(Debug, Clone, PartialEq)]
pub struct PackingSet {
    pub dimension: usize,
    pub vectors: Vec<Vec<i8>>,
    /// Requested size (by default `⌈2^{D/5}⌉`).
    pub target: usize,
}

impl PackingSet {
    pub fn achieved(&self) -> usize {
        self.vectors.len()
    }

    /// Membership in `V = {v ∈ {−1, 1}^D : Σ v = 0}` and pairwise
    /// `‖v − w‖₁ ≥ D/16`.
    pub fn audit(&self) -> bool {
        let d = self.dimension;
        let member = |v: &Vec<i8>| {
            v.len() == d
                && v.iter().all(|&x| x == 1 || x == -1)
                && v.iter().map(|&x| x as i32).sum::<i32>() == 0
        };
        let min_dist = d as f64 / 16.0;
        self.vectors.iter().all(member)
            && self.vectors.iter().enumerate().all(|(i, v)| {
                self.vectors[i + 1..]
                    .iter()
                    .all(|w| l1_signs(v, w) as f64 >= min_dist)
            })
    }
}

fn l1_signs(v: &[i8], w: &[i8]) -> u32 {
    v.iter()
        .zip(w)
        .map(|(a, b)| (*a as i32 - *b as i32).unsigned_abs())
        .sum()
}

/// Every element of `V` for small even `D` (at most 20).
pub fn balanced_sign_vectors(dimension: usize) -> Result<Vec<Vec<i8>>> {
    if !dimension.is_multiple_of(2) || dimension == 0 {
        return Err(Error::param("dimension", "must be even and positive"));
    }
    if dimension > 20 {
        return Err(Error::param("dimension", "enumeration limited to D ≤ 20"));
    }
    Ok((0u32..1 << dimension)
        .filter(|m| m.count_ones() as usize == dimension / 2)
        .map(|m| {
            (0..dimension)
                .map(|i| if m >> i & 1 == 1 { 1 } else { -1 })
                .collect()
        })
        .collect())
}

/// Randomized greedy `D/16`-packing of `V`. Candidates are uniform balanced
/// sign vectors; a candidate is kept when it is at `L1` distance at least
/// `D/16` from every kept vector. Stops at `target` vectors or after
/// `64·target + 1024` candidates, reporting what it achieved.
pub fn greedy_packing(dimension: usize, seed: u64, target: Option<usize>) -> Result<PackingSet> {
    if !dimension.is_multiple_of(2) {
        return Err(Error::param("dimension", "D must be even"));
    }
    if dimension < 4 {
        return Err(Error::param("dimension", "D ≥ 4 required"));
    }
    let target =
        target.unwrap_or_else(|| math::ceil(math::powf(2.0, dimension as f64 / 5.0)) as usize);
    let min_dist = dimension as f64 / 16.0;
    let mut g = rng::stream(seed, rng::tag::PACKING, 0);
    let mut base: Vec<i8> = (0..dimension)
        .map(|i| if i < dimension / 2 { 1 } else { -1 })
        .collect();
    let mut vectors: Vec<Vec<i8>> = Vec::new();
    let attempts = 64 * target + 1024;
    for _ in 0..attempts {
        if vectors.len() >= target {
            break;
        }
        rng::shuffle(&mut g, &mut base);
        if vectors
            .iter()
            .all(|w| l1_signs(&base, w) as f64 >= min_dist)
        {
            vectors.push(base.clone());
        }
    }
    Ok(PackingSet {
        dimension,
        vectors,
        target,
    })
}

/// A leaf triple `(leaf, action, stage)` with 0-based stage.
pub type LeafTriple = (usize, usize, usize);

/// Parameters of the packing family.
#[derive(Debug, Clone, PartialEq)]
pub struct PackingFamilyParams {
    pub branching: usize,
    pub depth: usize,
    pub horizon: usize,
    pub wait: usize,
    /// `ε'`
    pub bias: f64,
    /// Accuracy the family is built for; enters the feasibility bound.
    pub epsilon: f64,
    /// `v^ι` for every triple of `I` in [`PackingFamilyParams::triples`] order.
    pub vectors: Vec<Vec<i8>>,
    /// `j̄ ∈ I`, the second rewarded triple.
    pub distinguished: LeafTriple,
}

impl PackingFamilyParams {
    /// `ī = (first leaf, first action, stage d)`.
    pub fn reference_triple(&self) -> LeafTriple {
        (0, 0, self.depth)
    }

    /// Triples of `I = Ī \ {ī}`, leaves outer, then actions, then stages.
    pub fn triples(&self) -> Result<Vec<LeafTriple>> {
        let layout = TreeLayout::new(self.branching, self.depth, self.wait)?;
        let reference = self.reference_triple();
        let mut out = Vec::new();
        for l in 0..layout.leaves {
            for a in 0..self.branching {
                for h in self.depth..self.depth + self.wait {
                    if (l, a, h) != reference {
                        out.push((l, a, h));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Assigns every triple a vector drawn uniformly from `packing`.
    pub fn random_assignment(
        branching: usize,
        depth: usize,
        horizon: usize,
        wait: usize,
        bias: f64,
        epsilon: f64,
        packing: &[Vec<i8>],
        seed: u64,
    ) -> Result<Self> {
        if packing.is_empty() {
            return Err(Error::param("packing", "empty packing set"));
        }
        let mut params = Self {
            branching,
            depth,
            horizon,
            wait,
            bias,
            epsilon,
            vectors: Vec::new(),
            distinguished: (0, 0, depth),
        };
        let triples = params.triples()?;
        if triples.is_empty() {
            return Err(Error::param("wait", "no triples besides the reference one"));
        }
        let mut g = rng::stream(seed, rng::tag::PACKING, 1);
        let uniform = vec![1.0 / packing.len() as f64; packing.len()];
        params.vectors = triples
            .iter()
            .map(|_| packing[rng::categorical(&mut g, &uniform)].clone())
            .collect();
        params.distinguished =
            triples[rng::categorical(&mut g, &vec![1.0 / triples.len() as f64; triples.len()])];
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingInstance {
    pub mdp: TabularMdp,
    pub layout: TreeLayout,
    /// Index of `s'_1`; the absorbing states are contiguous.
    pub first_absorbing: usize,
    pub params: PackingFamilyParams,
}

impl PackingInstance {
    pub fn absorbing(&self, i: usize) -> usize {
        self.first_absorbing + i
    }

    /// Reward with `1` at `ī` and `j̄`, zero elsewhere except the absorbing
    /// states, which pay the stationary `values[i]` from stage `H̄ + d` on.
    pub fn reward(&self, values: &[f64]) -> Result<RewardTable> {
        crate::error::check_dim("absorbing rewards", self.layout.leaves, values.len())?;
        let (ref_l, ref_a, ref_h) = self.params.reference_triple();
        let (j_l, j_a, j_h) = self.params.distinguished;
        let from = self.params.wait + self.params.depth;
        let layout = self.layout;
        let first = self.first_absorbing;
        RewardTable::new(self.mdp.dims(), {
            let dims = self.mdp.dims();
            let mut v = vec![0.0; dims.sah()];
            v[dims.hsa_index(ref_h, layout.leaf(ref_l), ref_a)] = 1.0;
            v[dims.hsa_index(j_h, layout.leaf(j_l), j_a)] = 1.0;
            for h in from..dims.horizon {
                for (i, &r) in values.iter().enumerate() {
                    for a in 0..dims.actions {
                        v[dims.hsa_index(h, first + i, a)] = r;
                    }
                }
            }
            v
        })
    }

    /// Deterministic policy that plays the leaf triple `t`.
    pub fn path_policy(&self, t: LeafTriple) -> Result<Policy> {
        self.layout.path_policy(self.mdp.dims(), t.0, t.1, t.2, 0)
    }

    /// `J^{π_ī}(r) = 1 + ((H − H̄ − d)/S̄) Σ_i r_i` for the rewards of
    /// [`PackingInstance::reward`].
    pub fn reference_return(&self, values: &[f64]) -> f64 {
        let p = &self.params;
        let span = (p.horizon - p.wait - p.depth) as f64;
        1.0 + span / self.layout.leaves as f64 * values.iter().sum::<f64>()
    }
}

/// `r'_i = +1` where `v_i = +1, w_i = −1`; `−1` where `v_i = −1, w_i = +1`;
/// `0` otherwise.
pub fn distinguishing_values(v: &[i8], w: &[i8]) -> Vec<f64> {
    v.iter()
        .zip(w)
        .map(|(&a, &b)| match (a, b) {
            (1, -1) => 1.0,
            (-1, 1) => -1.0,
            _ => 0.0,
        })
        .collect()
}

pub fn make_packing_instance(params: &PackingFamilyParams) -> Result<PackingInstance> {
    let p = params;
    let layout = TreeLayout::new(p.branching, p.depth, p.wait)?;
    if p.horizon < 3 * p.depth {
        return Err(Error::param(
            "horizon",
            format!("H ≥ 3d violated: H = {}, d = {}", p.horizon, p.depth),
        ));
    }
    if p.wait == 0 || p.wait + p.depth >= p.horizon {
        return Err(Error::param("wait", "1 ≤ H̄ < H − d required"));
    }
    let span = (p.horizon - p.wait - p.depth) as f64;
    if !(p.bias >= 0.0 && p.bias < (1.0 - p.epsilon) / (2.0 * span)) {
        return Err(Error::param(
            "bias",
            format!(
                "ε' < (1 − ε)/(2(H − H̄ − d)) = {} violated",
                (1.0 - p.epsilon) / (2.0 * span)
            ),
        ));
    }
    let n_leaves = layout.leaves;
    if n_leaves % 2 != 0 {
        return Err(Error::param(
            "branching",
            "the number of leaves A^{d−1} must be even",
        ));
    }
    let triples = p.triples()?;
    crate::error::check_dim("packing vectors", triples.len(), p.vectors.len())?;
    for v in &p.vectors {
        crate::error::check_dim("packing vector", n_leaves, v.len())?;
        if v.iter().any(|&x| x != 1 && x != -1) || v.iter().map(|&x| x as i32).sum::<i32>() != 0 {
            return Err(Error::param("vectors", "entries must be ±1 with zero sum"));
        }
    }
    if !triples.contains(&p.distinguished) {
        return Err(Error::param("distinguished", "j̄ must belong to I"));
    }
    let first_absorbing = layout.after_tree();
    let states = first_absorbing + n_leaves;
    let dims = Dims::new(states, p.branching, p.horizon)?;
    let mut initial = vec![0.0; states];
    initial[TreeLayout::WAIT_STATE] = 1.0;
    let mdp = TabularMdp::from_fn(dims, initial, |h, s, a| {
        let mut row = vec![0.0; states];
        if s == TreeLayout::WAIT_STATE {
            row[if layout.waits(h, a) { s } else { layout.root() }] = 1.0;
        } else if let Some(l) = layout.leaf_of(s) {
            let bias = triples
                .iter()
                .position(|&t| t == (l, a, h))
                .map(|i| &p.vectors[i]);
            for i in 0..n_leaves {
                let v = bias.map_or(0.0, |v| v[i] as f64);
                row[first_absorbing + i] = (1.0 + p.bias * v) / n_leaves as f64;
            }
        } else if let Some(c) = layout.child(s, a) {
            row[c] = 1.0;
        } else {
            row[s] = 1.0;
        }
        row
    })?;
    Ok(PackingInstance {
        mdp,
        layout,
        first_absorbing,
        params: params.clone(),
    })
}
