//! Expert demonstrations and the estimators of the expert's return.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linear::FeatureMap;
use crate::math;
use crate::mdp::{Dims, Occupancy, Policy, RewardSpec, TabularMdp};
use crate::rng;
use crate::sampler::{self, Trajectory};

/// Batch of expert episodes `D^E`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDataset {
    dims: Dims,
    episodes: Vec<Trajectory>,
}

impl ExpertDataset {
    /// Every episode must have exactly `H` actions and in-range indices.
    pub fn new(dims: Dims, episodes: Vec<Trajectory>) -> Result<Self> {
        for e in &episodes {
            e.validate(dims.states, dims.actions, dims.horizon)?;
        }
        Ok(Self { dims, episodes })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn episodes(&self) -> &[Trajectory] {
        &self.episodes
    }

    /// `τ^E`
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// First `n` episodes.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            dims: self.dims,
            episodes: self.episodes[..n.min(self.episodes.len())].to_vec(),
        }
    }
}

/// `τ^E` i.i.d. episodes of `expert`; episode `i` uses its own stream.
pub fn sample_expert_dataset(
    mdp: &TabularMdp,
    expert: &Policy,
    tau_e: usize,
    seed: u64,
) -> Result<ExpertDataset> {
    mdp.dims().check_same(&expert.dims())?;
    Ok(ExpertDataset {
        dims: mdp.dims(),
        episodes: sampler::rollouts(mdp, expert, tau_e, seed, rng::tag::EXPERT),
    })
}

/// Estimate of the expert's behaviour used to contract rewards.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpertEstimate {
    Occupancy(Occupancy),
    /// One `ψ̂_h ∈ R^d` per stage.
    FeatureExpectation(Vec<Vec<f64>>),
}

fn visit_counts(dataset: &ExpertDataset) -> Vec<u64> {
    let dims = dataset.dims;
    let mut counts = vec![0u64; dims.sah()];
    for e in &dataset.episodes {
        for h in 0..dims.horizon {
            counts[dims.hsa_index(h, e.states[h], e.actions[h])] += 1;
        }
    }
    counts
}

/// Joint estimator `d̂_h(s, a) = (1/τ^E) Σ_i 1{s^i_h = s, a^i_h = a}`.
pub fn empirical_occupancy(dataset: &ExpertDataset) -> Result<ExpertEstimate> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.len() as f64;
    let values = visit_counts(dataset)
        .into_iter()
        .map(|c| c as f64 / n)
        .collect();
    Ok(ExpertEstimate::Occupancy(Occupancy::new(
        dataset.dims,
        values,
    )?))
}

/// Conditional estimator `π̂_h(a|s) = n_h(s, a) / n_h(s)`, uniform where
/// `n_h(s) = 0`.
pub fn empirical_policy(dataset: &ExpertDataset) -> Result<Policy> {
    let dims = dataset.dims;
    let counts = visit_counts(dataset);
    let mut probs = vec![0.0; dims.sah()];
    for (row_out, row_in) in probs
        .chunks_mut(dims.actions)
        .zip(counts.chunks(dims.actions))
    {
        let total: u64 = row_in.iter().sum();
        for (p, &c) in row_out.iter_mut().zip(row_in) {
            *p = if total == 0 {
                1.0 / dims.actions as f64
            } else {
                c as f64 / total as f64
            };
        }
    }
    Policy::new(dims, probs)
}

/// `ψ̂_h = (1/τ^E) Σ_i φ(s^i_h, a^i_h)`
pub fn empirical_feature_expectation(
    dataset: &ExpertDataset,
    features: &FeatureMap,
) -> Result<ExpertEstimate> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dims = dataset.dims;
    check_dim("feature states", dims.states, features.states())?;
    check_dim("feature actions", dims.actions, features.actions())?;
    let n = dataset.len() as f64;
    let mut psi = vec![vec![0.0; features.dim()]; dims.horizon];
    for e in &dataset.episodes {
        for (h, stage) in psi.iter_mut().enumerate() {
            for (x, f) in stage
                .iter_mut()
                .zip(features.phi(e.states[h], e.actions[h]))
            {
                *x += f;
            }
        }
    }
    psi.iter_mut().flatten().for_each(|x| *x /= n);
    Ok(ExpertEstimate::FeatureExpectation(psi))
}

/// `ψ_h = Σ_{s,a} d_h(s, a) φ(s, a)` for a known occupancy.
pub fn feature_expectation(occupancy: &Occupancy, features: &FeatureMap) -> Result<Vec<Vec<f64>>> {
    let dims = occupancy.dims();
    check_dim("feature states", dims.states, features.states())?;
    check_dim("feature actions", dims.actions, features.actions())?;
    let mut psi = vec![vec![0.0; features.dim()]; dims.horizon];
    for (h, stage) in psi.iter_mut().enumerate() {
        for s in 0..dims.states {
            for a in 0..dims.actions {
                let w = occupancy.get(h, s, a);
                if w != 0.0 {
                    for (x, f) in stage.iter_mut().zip(features.phi(s, a)) {
                        *x += w * f;
                    }
                }
            }
        }
    }
    Ok(psi)
}

/// `Ĵ^E(r)`: `Σ_h ⟨d̂_h, r_h⟩` for occupancies, `Σ_h ⟨ψ̂_h, θ_h⟩` for feature
/// expectations (linear rewards only). Linear rewards against an occupancy
/// need `features`.
pub fn estimate_expert_return(
    estimate: &ExpertEstimate,
    reward: &RewardSpec,
    features: Option<&FeatureMap>,
) -> Result<f64> {
    match (estimate, reward) {
        (ExpertEstimate::Occupancy(d), RewardSpec::Dense(r)) => d.contract(r),
        (ExpertEstimate::Occupancy(d), RewardSpec::Linear(_)) => {
            d.contract(&reward.resolve(features, false)?)
        }
        (ExpertEstimate::FeatureExpectation(psi), RewardSpec::Linear(lin)) => {
            check_dim("reward horizon", psi.len(), lin.horizon())?;
            check_dim("reward dimension", psi[0].len(), lin.dim())?;
            Ok(psi
                .iter()
                .zip(&lin.theta)
                .map(|(p, t)| math::dot(p, t))
                .sum())
        }
        (ExpertEstimate::FeatureExpectation(_), RewardSpec::Dense(_)) => Err(
            Error::VariantMismatch("feature expectations only contract linear rewards"),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::make_named_example;
    use crate::mdp::{occupancy_measure, policy_evaluation, LinearReward, RewardTable};

    #[test]
    fn muffin_dataset() {
        let ex = make_named_example("muffin").unwrap();
        let data = sample_expert_dataset(&ex.mdp, &ex.expert, 5, 1).unwrap();
        assert_eq!(data.len(), 5);
        assert!(data
            .episodes()
            .iter()
            .all(|e| e.states[0] == 0 && e.actions == vec![0]));
        let est = empirical_occupancy(&data).unwrap();
        match &est {
            ExpertEstimate::Occupancy(d) => assert_eq!(d.values(), &[1.0, 0.0, 0.0]),
            _ => unreachable!(),
        }
        let j = estimate_expert_return(&est, ex.reward("r_E").unwrap(), None).unwrap();
        assert_eq!(j, 1.0);
        assert_eq!(empirical_policy(&data).unwrap().row(0, 0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_dataset() {
        let ex = make_named_example("muffin").unwrap();
        let data = sample_expert_dataset(&ex.mdp, &ex.expert, 0, 1).unwrap();
        assert!(data.is_empty());
        assert_eq!(empirical_occupancy(&data), Err(Error::EmptyDataset));
        let features = FeatureMap::one_hot(1, 3).unwrap();
        assert_eq!(
            empirical_feature_expectation(&data, &features),
            Err(Error::EmptyDataset)
        );
        // unvisited rows fall back to uniform
        assert_eq!(empirical_policy(&data).unwrap().row(0, 0), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn single_episode_feature_expectation() {
        let dims = Dims::new(2, 2, 2).unwrap();
        let features =
            FeatureMap::new(2, 2, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.0, 1.0]).unwrap();
        let data = ExpertDataset::new(
            dims,
            vec![Trajectory {
                states: vec![1, 0],
                actions: vec![1, 0],
            }],
        )
        .unwrap();
        match empirical_feature_expectation(&data, &features).unwrap() {
            ExpertEstimate::FeatureExpectation(psi) => {
                assert_eq!(psi[0], features.phi(1, 1));
                assert_eq!(psi[1], features.phi(0, 0));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn feature_expectation_rejects_dense_rewards() {
        let est = ExpertEstimate::FeatureExpectation(vec![vec![0.5]]);
        let dense = RewardSpec::Dense(RewardTable::zeros(Dims::new(1, 1, 1).unwrap()));
        assert!(matches!(
            estimate_expert_return(&est, &dense, None),
            Err(Error::VariantMismatch(_))
        ));
        let lin = RewardSpec::Linear(LinearReward::new(vec![vec![2.0]]).unwrap());
        assert_eq!(estimate_expert_return(&est, &lin, None).unwrap(), 1.0);
    }

    #[test]
    fn exact_occupancy_gives_exact_return() {
        let ex = make_named_example("two_state_expert").unwrap();
        let d = occupancy_measure(&ex.mdp, &ex.expert).unwrap();
        let r = RewardTable::from_fn(ex.mdp.dims(), |h, s, a| {
            0.3 * h as f64 - 0.2 * s as f64 + 0.1 * a as f64
        })
        .unwrap();
        let j = estimate_expert_return(
            &ExpertEstimate::Occupancy(d),
            &RewardSpec::Dense(r.clone()),
            None,
        )
        .unwrap();
        let exact = policy_evaluation(&ex.mdp, &r, &ex.expert).unwrap().j;
        assert!((j - exact).abs() < 1e-12);
    }

    #[test]
    fn invalid_episodes_are_rejected() {
        let dims = Dims::new(2, 2, 2).unwrap();
        let bad = Trajectory {
            states: vec![0, 2],
            actions: vec![0, 0],
        };
        assert!(ExpertDataset::new(dims, vec![bad]).is_err());
        let short = Trajectory {
            states: vec![0],
            actions: vec![0],
        };
        assert!(ExpertDataset::new(dims, vec![short]).is_err());
    }
}
