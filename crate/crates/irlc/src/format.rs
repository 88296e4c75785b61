//! On-disk formats: versioned instance JSON, JSONL episodes, exploration
//! dataset containers and sweep tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use irlc_core::classify::{ClassificationSweep, CompatibilityReport};
use irlc_core::exploration::{ExplorationDataset, ExploreConfig};
use irlc_core::linalg::Matrix;
use irlc_core::linear::{FeatureMap, LinearMdpSpec};
use irlc_core::mdp::{Dims, LinearReward, Policy, RewardSpec, RewardTable, TabularMdp};
use irlc_core::sampler::Trajectory;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

/// `{"version":1, "S", "A", "H", "d0", "p"[h][s][a][s'], ...}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub version: u32,
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "A")]
    pub actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub d0: Vec<f64>,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rewards: BTreeMap<String, RewardDocument>,
    /// `π[h][s][a]`
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub policies: BTreeMap<String, Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<LinearDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<InstanceProvenance>,
}

/// Dense `r[h][s][a]` or linear `{"theta": [h][k]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardDocument {
    Table(Vec<Vec<Vec<f64>>>),
    Linear { theta: Vec<Vec<f64>> },
}

/// `{"d", "phi"[s·A + a][k], "mu"[h][k][s']}`; `mu` is absent for linear
/// rewards on tabular dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearDocument {
    pub d: usize,
    pub phi: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceProvenance {
    pub generator: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
}

/// In-memory form of an [`MdpDocument`].
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub mdp: TabularMdp,
    pub features: Option<FeatureMap>,
    pub spec: Option<LinearMdpSpec>,
    pub rewards: Vec<(String, RewardSpec)>,
    pub policies: Vec<(String, Policy)>,
    pub provenance: Option<InstanceProvenance>,
}

impl Instance {
    pub fn new(mdp: TabularMdp) -> Self {
        Self {
            mdp,
            features: None,
            spec: None,
            rewards: Vec::new(),
            policies: Vec::new(),
            provenance: None,
        }
    }

    pub fn policy(&self, name: &str) -> Option<&Policy> {
        self.policies
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
    }

    pub fn to_document(&self) -> MdpDocument {
        let dims = self.mdp.dims();
        let p = (0..dims.horizon)
            .map(|h| {
                (0..dims.states)
                    .map(|s| {
                        (0..dims.actions)
                            .map(|a| self.mdp.row(h, s, a).to_vec())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let rewards = self
            .rewards
            .iter()
            .map(|(name, r)| {
                let doc = match r {
                    RewardSpec::Dense(t) => RewardDocument::Table(nest(dims, t.values())),
                    RewardSpec::Linear(l) => RewardDocument::Linear {
                        theta: l.theta.clone(),
                    },
                };
                (name.clone(), doc)
            })
            .collect();
        let policies = self
            .policies
            .iter()
            .map(|(name, pi)| (name.clone(), nest(dims, pi.probs())))
            .collect();
        let features = self.features.as_ref().map(|f| LinearDocument {
            d: f.dim(),
            phi: f.values().chunks(f.dim()).map(<[f64]>::to_vec).collect(),
            mu: self.spec.as_ref().map(|spec| {
                spec.mu()
                    .iter()
                    .map(|m| (0..m.rows()).map(|k| m.row(k).to_vec()).collect())
                    .collect()
            }),
        });
        MdpDocument {
            version: FORMAT_VERSION,
            states: dims.states,
            actions: dims.actions,
            horizon: dims.horizon,
            d0: self.mdp.initial().to_vec(),
            p,
            rewards,
            policies,
            features,
            provenance: self.provenance.clone(),
        }
    }

    /// Validates every probability row and reward bound.
    pub fn from_document(doc: MdpDocument) -> CliResult<Self> {
        if doc.version != FORMAT_VERSION {
            return Err(CliError::Format(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                doc.version
            )));
        }
        let dims = Dims::new(doc.states, doc.actions, doc.horizon)?;
        let transitions = flatten4(
            &doc.p,
            [dims.horizon, dims.states, dims.actions, dims.states],
            "p",
        )?;
        let mdp = TabularMdp::new(dims, doc.d0, transitions)?;
        let mut inst = Instance::new(mdp);
        if let Some(lin) = &doc.features {
            if lin.phi.len() != dims.states * dims.actions {
                return Err(CliError::Format(format!(
                    "phi: expected {} rows (S·A), found {}",
                    dims.states * dims.actions,
                    lin.phi.len()
                )));
            }
            let flat = flatten2(&lin.phi, lin.d, "phi")?;
            let features = FeatureMap::new(lin.d, dims.states, dims.actions, flat)?;
            if let Some(mu) = &lin.mu {
                if mu.len() != dims.horizon {
                    return Err(CliError::Format(format!(
                        "mu: expected {} stages, found {}",
                        dims.horizon,
                        mu.len()
                    )));
                }
                let mats = mu
                    .iter()
                    .map(|m| {
                        Ok(Matrix::from_rows(
                            lin.d,
                            dims.states,
                            flatten2(m, dims.states, "mu")?,
                        )?)
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                let spec = LinearMdpSpec::new(features.clone(), mats, inst.mdp.initial().to_vec())?;
                let induced = spec.materialize()?;
                let gap = induced
                    .transitions()
                    .iter()
                    .zip(inst.mdp.transitions())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if gap > 1e-6 {
                    return Err(CliError::Format(format!(
                        "p differs from ⟨φ, μ⟩ by {gap:.3e}"
                    )));
                }
                inst.spec = Some(spec);
            }
            inst.features = Some(features);
        }
        for (name, r) in doc.rewards {
            let spec = match r {
                RewardDocument::Table(t) => RewardSpec::Dense(RewardTable::new(
                    dims,
                    flatten3(&t, [dims.horizon, dims.states, dims.actions], &name)?,
                )?),
                RewardDocument::Linear { theta } => RewardSpec::Linear(LinearReward::new(theta)?),
            };
            inst.rewards.push((name, spec));
        }
        for (name, pi) in doc.policies {
            let probs = flatten3(&pi, [dims.horizon, dims.states, dims.actions], &name)?;
            inst.policies.push((name, Policy::new(dims, probs)?));
        }
        inst.provenance = doc.provenance;
        Ok(inst)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        let doc: MdpDocument = serde_json::from_str(&text)
            .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
        Self::from_document(doc)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_json(path, &self.to_document())
    }
}

fn nest(dims: Dims, flat: &[f64]) -> Vec<Vec<Vec<f64>>> {
    flat.chunks(dims.states * dims.actions)
        .map(|stage| stage.chunks(dims.actions).map(<[f64]>::to_vec).collect())
        .collect()
}

fn shape_error(what: &str, level: &str, expected: usize, found: usize) -> CliError {
    CliError::Format(format!(
        "{what}: expected {expected} entries along {level}, found {found}"
    ))
}

fn flatten2(x: &[Vec<f64>], inner: usize, what: &str) -> CliResult<Vec<f64>> {
    let mut out = Vec::with_capacity(x.len() * inner);
    for row in x {
        if row.len() != inner {
            return Err(shape_error(what, "the innermost axis", inner, row.len()));
        }
        out.extend_from_slice(row);
    }
    Ok(out)
}

fn flatten3(x: &[Vec<Vec<f64>>], shape: [usize; 3], what: &str) -> CliResult<Vec<f64>> {
    if x.len() != shape[0] {
        return Err(shape_error(what, "stages", shape[0], x.len()));
    }
    let mut out = Vec::with_capacity(shape.iter().product());
    for stage in x {
        if stage.len() != shape[1] {
            return Err(shape_error(what, "states", shape[1], stage.len()));
        }
        out.extend(flatten2(stage, shape[2], what)?);
    }
    Ok(out)
}

fn flatten4(x: &[Vec<Vec<Vec<f64>>>], shape: [usize; 4], what: &str) -> CliResult<Vec<f64>> {
    if x.len() != shape[0] {
        return Err(shape_error(what, "stages", shape[0], x.len()));
    }
    let mut out = Vec::with_capacity(shape.iter().product());
    for stage in x {
        out.extend(flatten3(stage, [shape[1], shape[2], shape[3]], what)?);
    }
    Ok(out)
}

/// One JSONL episode line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeLine {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

/// A rejected JSONL line (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parses every non-blank line; returns all malformed lines at once.
pub fn parse_episodes(text: &str, dims: Dims) -> Result<Vec<Trajectory>, Vec<LineError>> {
    let mut episodes = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<EpisodeLine>(line)
            .map_err(|e| e.to_string())
            .and_then(|ep| {
                let t = Trajectory {
                    states: ep.states,
                    actions: ep.actions,
                };
                t.validate(dims.states, dims.actions, dims.horizon)
                    .map(|_| t)
                    .map_err(|e| e.to_string())
            });
        match parsed {
            Ok(t) => episodes.push(t),
            Err(message) => errors.push(LineError {
                line: i + 1,
                message,
            }),
        }
    }
    if errors.is_empty() {
        Ok(episodes)
    } else {
        Err(errors)
    }
}

pub fn read_episodes(path: &Path, dims: Dims) -> CliResult<Vec<Trajectory>> {
    let text = read_text(path)?;
    parse_episodes(&text, dims).map_err(|errors| CliError::Lines {
        path: path.display().to_string(),
        errors,
    })
}

pub fn write_episodes(path: &Path, episodes: &[Trajectory]) -> CliResult<()> {
    let mut out = String::new();
    for e in episodes {
        let line = EpisodeLine {
            states: e.states.clone(),
            actions: e.actions.clone(),
        };
        out.push_str(&serde_json::to_string(&line).expect("plain struct"));
        out.push('\n');
    }
    write_text(path, &out)
}

/// Exploration dataset with its counts tensor and the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDocument {
    pub version: u32,
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "A")]
    pub actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    /// `N_h(s, a, s')`, flat `(h, s, a, s')`.
    pub counts: Vec<u64>,
    pub episodes: Vec<EpisodeLine>,
    pub config: DatasetConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub algorithm: String,
    pub epsilon: f64,
    pub delta: f64,
    pub max_episodes: usize,
    pub bonus_constant: f64,
    pub seed: u64,
}

impl DatasetDocument {
    pub fn new(data: &ExplorationDataset, algorithm: &str, cfg: &ExploreConfig, seed: u64) -> Self {
        let dims = data.dims();
        let mut counts = Vec::with_capacity(dims.sah() * dims.states);
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    counts.extend_from_slice(data.transition_counts(h, s, a));
                }
            }
        }
        Self {
            version: FORMAT_VERSION,
            states: dims.states,
            actions: dims.actions,
            horizon: dims.horizon,
            counts,
            episodes: data
                .episodes()
                .iter()
                .map(|e| EpisodeLine {
                    states: e.states.clone(),
                    actions: e.actions.clone(),
                })
                .collect(),
            config: DatasetConfig {
                algorithm: algorithm.into(),
                epsilon: cfg.epsilon,
                delta: cfg.delta,
                max_episodes: cfg.max_episodes,
                bonus_constant: cfg.bonus_constant,
                seed,
            },
        }
    }

    /// Rebuilds the dataset from the episode log and checks the stored
    /// counts against it.
    pub fn to_dataset(&self) -> CliResult<ExplorationDataset> {
        let dims = Dims::new(self.states, self.actions, self.horizon)?;
        let episodes = self
            .episodes
            .iter()
            .map(|e| Trajectory {
                states: e.states.clone(),
                actions: e.actions.clone(),
            })
            .collect();
        let data = ExplorationDataset::from_episodes(dims, episodes)?;
        let rebuilt = Self::new(
            &data,
            &self.config.algorithm,
            &ExploreConfig::new(0.5, 0.5, 1)?,
            0,
        );
        if rebuilt.counts != self.counts {
            return Err(CliError::Format(
                "counts tensor disagrees with the episode log".into(),
            ));
        }
        Ok(data)
    }
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub reward_id: String,
    pub j_star_hat: f64,
    pub j_expert_hat: f64,
    pub c_hat: f64,
    pub label: bool,
    pub exact_c: Option<f64>,
}

impl SweepRow {
    pub fn new(seed: u64, r: &CompatibilityReport) -> Self {
        Self {
            seed,
            reward_id: r.reward_id.clone(),
            j_star_hat: r.j_star_hat,
            j_expert_hat: r.j_expert_hat,
            c_hat: r.c_hat,
            label: r.label,
            exact_c: r.exact.map(|e| e.c),
        }
    }
}

/// Plot-ready histogram of `Ĉ` with the classification band `Δ ± ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub threshold: f64,
    pub lower_marker: f64,
    pub upper_marker: f64,
}

impl Histogram {
    pub fn new(sweep: &ClassificationSweep, bins: usize) -> Self {
        let values: Vec<f64> = sweep.reports.iter().map(|r| r.c_hat).collect();
        let lo = values
            .iter()
            .copied()
            .fold(sweep.threshold - sweep.epsilon, f64::min);
        let hi = values
            .iter()
            .copied()
            .fold(sweep.threshold + sweep.epsilon, f64::max);
        let bins = bins.max(1);
        let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let i = (((v - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Self {
            edges,
            counts,
            threshold: sweep.threshold,
            lower_marker: sweep.threshold - sweep.epsilon,
            upper_marker: sweep.threshold + sweep.epsilon,
        }
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
