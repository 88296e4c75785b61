//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use irlc_core::classify::{PlanMode, Structure};
use irlc_core::instances::{
    greedy_packing, make_named_example, make_packing_instance, make_tree_instance, random_instance,
    PackingFamilyParams, RandomStructure, TreeInstanceParams,
};
use irlc_core::mdp::RewardSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::format::{Instance, InstanceProvenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub instance: InstanceConfig,
    #[serde(default)]
    pub expert: ExpertConfig,
    #[serde(default)]
    pub rewards: RewardsConfig,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub replication: ReplicationConfig,
    #[serde(default)]
    pub rates: RatesConfig,
    #[serde(default)]
    pub hardness: HardnessConfig,
    #[serde(default)]
    pub degeneracy: DegeneracyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Named,
    Random,
    File,
    Tree,
    Packing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    Tabular,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceConfig {
    pub source: InstanceSource,
    pub name: Option<String>,
    pub path: Option<PathBuf>,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub structure: DynamicsKind,
    pub dim: usize,
    /// Tree and packing instances.
    pub branching: usize,
    pub depth: usize,
    pub wait: usize,
    /// Accuracy used to set the tree bias `2ε/(H − H̄ − d)` and the packing
    /// feasibility bound.
    pub epsilon: f64,
    /// Packing bias `ε'`.
    pub bias: f64,
    /// `[stage, leaf, action]`, 0-based.
    pub hidden: Option<[usize; 3]>,
    pub expert_state: bool,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            source: InstanceSource::Named,
            name: Some("muffin".into()),
            path: None,
            states: 5,
            actions: 3,
            horizon: 5,
            structure: DynamicsKind::Tabular,
            dim: 3,
            branching: 3,
            depth: 2,
            wait: 2,
            epsilon: 0.1,
            bias: 0.01,
            hidden: None,
            expert_state: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertSource {
    /// Sample `tau_e` episodes of the instance's expert policy.
    Instance,
    /// Read a JSONL dataset.
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    pub source: ExpertSource,
    /// Policy name inside a file instance.
    pub policy: String,
    pub dataset: Option<PathBuf>,
    pub tau_e: usize,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            source: ExpertSource::Instance,
            policy: "expert".into(),
            dataset: None,
            tau_e: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSource {
    /// Rewards attached to the instance.
    Instance,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardsConfig {
    pub source: RewardSource,
    pub count: usize,
    /// Random rewards linear in the features.
    pub linear: bool,
}

impl Default for RewardsConfig {
    fn default() -> Self {
        Self {
            source: RewardSource::Instance,
            count: 100,
            linear: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureName {
    Tabular,
    LinearRewards,
    LinearMdp,
}

impl From<StructureName> for Structure {
    fn from(s: StructureName) -> Self {
        match s {
            StructureName::Tabular => Structure::Tabular,
            StructureName::LinearRewards => Structure::LinearRewards,
            StructureName::LinearMdp => Structure::LinearMdp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanModeName {
    Plain,
    Optimistic,
    Midpoint,
}

impl From<PlanModeName> for PlanMode {
    fn from(m: PlanModeName) -> Self {
        match m {
            PlanModeName::Plain => PlanMode::Plain,
            PlanModeName::Optimistic => PlanMode::Optimistic,
            PlanModeName::Midpoint => PlanMode::Midpoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmConfig {
    pub structure: StructureName,
    pub epsilon: f64,
    pub delta: f64,
    /// `Δ`
    pub threshold: f64,
    pub max_episodes: usize,
    pub bonus_constant: f64,
    pub beta_constant: f64,
    pub plan_mode: Option<PlanModeName>,
    pub small_set_threshold: Option<usize>,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            structure: StructureName::Tabular,
            epsilon: 0.2,
            delta: 0.1,
            threshold: 0.1,
            max_episodes: 10_000,
            bonus_constant: 1.0,
            beta_constant: 1.0,
            plan_mode: None,
            small_set_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplicationConfig {
    pub seeds: Vec<u64>,
}

impl Default for ReplicationConfig {
    fn default() -> Self {
        Self { seeds: vec![0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatesKind {
    /// Expert estimator error against `τ^E`.
    Expert,
    /// Planning error against the exploration budget.
    Exploration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesConfig {
    pub kind: RatesKind,
    pub budgets: Vec<usize>,
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self {
            kind: RatesKind::Expert,
            budgets: vec![100, 1000, 10_000],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardnessKind {
    Tree,
    Packing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HardnessConfig {
    pub kind: HardnessKind,
    /// Exploration episodes per run.
    pub budget: usize,
    /// Random dense rewards added to the packing comparison; by default only
    /// the family's distinguishing reward is classified.
    pub random_rewards: usize,
}

impl Default for HardnessConfig {
    fn default() -> Self {
        Self {
            kind: HardnessKind::Tree,
            budget: 1000,
            random_rewards: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegeneracyConfig {
    /// Approximate number of grid points per stage.
    pub grid_points: usize,
    pub radius: f64,
}

impl Default for DegeneracyConfig {
    fn default() -> Self {
        Self {
            grid_points: 10_000,
            radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("irlc-out"),
        }
    }
}

/// A parsed configuration with the text it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// SHA-256 of the raw text.
    pub hash: String,
    /// Directory relative paths are resolved against.
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn parse(text: &str, base: &Path) -> CliResult<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let loaded = Self {
            config,
            hash: sha256_hex(text.as_bytes()),
            base: base.to_path_buf(),
        };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn validate(&self) -> CliResult<()> {
        let c = &self.config;
        let a = &c.algorithm;
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(a.epsilon) {
            return Err(CliError::Config(format!(
                "algorithm.epsilon = {} must lie in (0, 1)",
                a.epsilon
            )));
        }
        if !open_unit(a.delta) {
            return Err(CliError::Config(format!(
                "algorithm.delta = {} must lie in (0, 1)",
                a.delta
            )));
        }
        if a.max_episodes == 0 {
            return Err(CliError::Config(
                "algorithm.max_episodes must be positive".into(),
            ));
        }
        if c.replication.seeds.is_empty() {
            return Err(CliError::Config(
                "replication.seeds must not be empty".into(),
            ));
        }
        match c.instance.source {
            InstanceSource::Named if c.instance.name.is_none() => {
                return Err(CliError::Config(
                    "instance.name is required for named instances".into(),
                ))
            }
            InstanceSource::File => {
                let p = c.instance.path.as_ref().ok_or_else(|| {
                    CliError::Config("instance.path is required for file instances".into())
                })?;
                self.require_file("instance.path", p)?;
            }
            _ => {}
        }
        if c.expert.source == ExpertSource::Dataset {
            let p = c.expert.dataset.as_ref().ok_or_else(|| {
                CliError::Config("expert.dataset is required for dataset experts".into())
            })?;
            self.require_file("expert.dataset", p)?;
        } else if c.expert.tau_e == 0 {
            return Err(CliError::Config("expert.tau_e must be positive".into()));
        }
        if c.rates.budgets.contains(&0) {
            return Err(CliError::Config("rates.budgets must be positive".into()));
        }
        Ok(())
    }

    fn require_file(&self, key: &str, p: &Path) -> CliResult<()> {
        let full = self.resolve(p);
        if full.is_file() {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "{key}: {} does not exist",
                full.display()
            )))
        }
    }

    /// Builds the configured instance for `seed`. The expert policy is stored
    /// under `"expert"` whenever the source defines one.
    pub fn build_instance(&self, seed: u64) -> CliResult<Instance> {
        build_instance(&self.config.instance, &self.base, seed)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn tree_params(c: &InstanceConfig) -> TreeInstanceParams {
    let mut p = TreeInstanceParams::new(c.branching, c.depth, c.horizon, c.wait);
    p.include_expert_state = c.expert_state;
    if let Some([h, l, a]) = c.hidden {
        p.hidden = Some((h, l, a));
        p.bias = p.bias_for_gap(c.epsilon);
    }
    p
}

pub fn build_instance(c: &InstanceConfig, base: &Path, seed: u64) -> CliResult<Instance> {
    let provenance =
        |generator: &str, params: serde_json::Value, seed: Option<u64>| InstanceProvenance {
            generator: generator.into(),
            params,
            seed,
        };
    match c.source {
        InstanceSource::Named => {
            let name = c.name.as_deref().unwrap_or_default();
            let ex = make_named_example(name)?;
            let mut inst = Instance::new(ex.mdp);
            inst.features = ex.features;
            inst.rewards = ex.rewards;
            inst.policies = vec![("expert".into(), ex.expert)];
            inst.provenance = Some(provenance(
                "named",
                serde_json::json!({ "name": name }),
                None,
            ));
            Ok(inst)
        }
        InstanceSource::Random => {
            let structure = match c.structure {
                DynamicsKind::Tabular => RandomStructure::Tabular,
                DynamicsKind::Linear => RandomStructure::Linear { dim: c.dim },
            };
            let r = random_instance(c.states, c.actions, c.horizon, structure, seed)?;
            let mut inst = Instance::new(r.mdp);
            inst.features = r.spec.as_ref().map(|s| s.features().clone());
            inst.spec = r.spec;
            inst.policies = vec![("expert".into(), r.expert)];
            let params = serde_json::json!({
                "S": c.states, "A": c.actions, "H": c.horizon,
                "structure": c.structure, "d": c.dim,
            });
            inst.provenance = Some(provenance("random", params, Some(seed)));
            Ok(inst)
        }
        InstanceSource::File => {
            let path = c
                .path
                .as_ref()
                .ok_or_else(|| CliError::Config("instance.path missing".into()))?;
            let full = if path.is_absolute() {
                path.clone()
            } else {
                base.join(path)
            };
            Instance::read(&full)
        }
        InstanceSource::Tree => {
            let p = tree_params(c);
            let t = make_tree_instance(&p)?;
            let mut inst = Instance::new(t.mdp);
            inst.rewards = vec![("tree".into(), RewardSpec::Dense(t.reward))];
            inst.policies = vec![("expert".into(), t.expert)];
            let params = serde_json::json!({
                "A": p.branching, "d": p.depth, "H": p.horizon, "wait": p.wait,
                "bias": p.bias, "hidden": c.hidden, "expert_state": p.include_expert_state,
            });
            inst.provenance = Some(provenance("tree", params, None));
            Ok(inst)
        }
        InstanceSource::Packing => {
            let (inst, _) = build_packing(c, seed)?;
            Ok(inst)
        }
    }
}

/// Packing instance with the reference path policy as expert and the
/// family's reward for `v^{j̄}` attached as `"distinguished"`.
pub fn build_packing(
    c: &InstanceConfig,
    seed: u64,
) -> CliResult<(Instance, irlc_core::instances::PackingInstance)> {
    let leaves = c.branching.pow(c.depth.saturating_sub(1) as u32);
    let packing = greedy_packing(leaves, seed, None)?;
    let params = PackingFamilyParams::random_assignment(
        c.branching,
        c.depth,
        c.horizon,
        c.wait,
        c.bias,
        c.epsilon,
        &packing.vectors,
        seed,
    )?;
    let p = make_packing_instance(&params)?;
    let triples = params.triples()?;
    let j = triples
        .iter()
        .position(|&t| t == params.distinguished)
        .expect("distinguished triple belongs to I");
    let values: Vec<f64> = params.vectors[j].iter().map(|&v| v as f64).collect();
    let mut inst = Instance::new(p.mdp.clone());
    inst.rewards = vec![(
        "distinguished".into(),
        RewardSpec::Dense(p.reward(&values)?),
    )];
    inst.policies = vec![("expert".into(), p.path_policy(params.reference_triple())?)];
    inst.provenance = Some(InstanceProvenance {
        generator: "packing".into(),
        params: serde_json::json!({
            "A": c.branching, "d": c.depth, "H": c.horizon, "wait": c.wait,
            "bias": c.bias, "epsilon": c.epsilon, "packing_size": packing.achieved(),
        }),
        seed: Some(seed),
    });
    Ok((inst, p))
}
