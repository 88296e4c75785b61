//! Environment access.
//!
//! [`ForwardSampler`] only runs episodes from the initial distribution, which
//! is the access model of the online algorithms. [`GenerativeSampler`] can be
//! queried at any `(h, s, a)` and is reserved for oracle experiments.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularMdp};
use crate::rng::{self, StreamRng};

/// One episode: `H` actions and `H` or `H + 1` states (the final state is
/// optional for expert data).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn validate(&self, states: usize, actions: usize, horizon: usize) -> Result<()> {
        if self.actions.len() != horizon {
            return Err(Error::dims(
                "trajectory actions",
                horizon,
                self.actions.len(),
            ));
        }
        if self.states.len() != horizon && self.states.len() != horizon + 1 {
            return Err(Error::dims(
                "trajectory states",
                horizon + 1,
                self.states.len(),
            ));
        }
        if let Some(s) = self.states.iter().find(|&&s| s >= states) {
            return Err(Error::param("state", alloc::format!("{s} out of range")));
        }
        if let Some(a) = self.actions.iter().find(|&&a| a >= actions) {
            return Err(Error::param("action", alloc::format!("{a} out of range")));
        }
        Ok(())
    }
}

/// Episodic forward model. Each episode draws from its own counter-indexed
/// stream, so episode `i` is reproducible on its own.
#[derive(Debug, Clone)]
pub struct ForwardSampler<'a> {
    mdp: &'a TabularMdp,
    seed: u64,
    episodes: u64,
    rng: StreamRng,
    stage: usize,
    state: usize,
    active: bool,
}

impl<'a> ForwardSampler<'a> {
    pub fn new(mdp: &'a TabularMdp, seed: u64) -> Self {
        Self {
            mdp,
            seed,
            episodes: 0,
            rng: rng::stream(seed, rng::tag::EXPLORATION, 0),
            stage: 0,
            state: 0,
            active: false,
        }
    }

    pub fn mdp(&self) -> &TabularMdp {
        self.mdp
    }

    /// Episodes started so far.
    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Starts a new episode and returns `s_1 ∼ d0`.
    pub fn reset(&mut self) -> usize {
        self.rng = rng::stream(self.seed, rng::tag::EXPLORATION, self.episodes);
        self.episodes += 1;
        self.stage = 0;
        self.state = rng::categorical(&mut self.rng, self.mdp.initial());
        self.active = true;
        self.state
    }

    /// Plays `action` in the current state and returns the next state.
    pub fn step(&mut self, action: usize) -> Result<usize> {
        let dims = self.mdp.dims();
        if !self.active {
            return Err(Error::param("sampler", "episode finished; call reset"));
        }
        if action >= dims.actions {
            return Err(Error::param(
                "action",
                alloc::format!("{action} out of range"),
            ));
        }
        let next = rng::categorical(&mut self.rng, self.mdp.row(self.stage, self.state, action));
        self.stage += 1;
        self.state = next;
        if self.stage == dims.horizon {
            self.active = false;
        }
        Ok(next)
    }

    /// Runs a full episode, choosing actions with `choose(h, s, rng)`.
    pub fn episode(
        &mut self,
        mut choose: impl FnMut(usize, usize, &mut StreamRng) -> usize,
    ) -> Trajectory {
        let horizon = self.mdp.dims().horizon;
        let mut states = Vec::with_capacity(horizon + 1);
        let mut actions = Vec::with_capacity(horizon);
        states.push(self.reset());
        for h in 0..horizon {
            let a = choose(h, self.state, &mut self.rng);
            actions.push(a);
            states.push(self.step(a).expect("action chosen in range"));
        }
        Trajectory { states, actions }
    }

    /// Runs a full episode under `policy`.
    pub fn rollout(&mut self, policy: &Policy) -> Trajectory {
        self.episode(|h, s, r| rng::categorical(r, policy.row(h, s)))
    }
}

/// Generative model: arbitrary `(h, s, a)` queries.
#[derive(Debug, Clone)]
pub struct GenerativeSampler<'a> {
    mdp: &'a TabularMdp,
    rng: StreamRng,
}

impl<'a> GenerativeSampler<'a> {
    pub fn new(mdp: &'a TabularMdp, seed: u64) -> Self {
        Self {
            mdp,
            rng: rng::stream(seed, rng::tag::EXPLORATION, u64::MAX),
        }
    }

    pub fn sample(&mut self, h: usize, s: usize, a: usize) -> usize {
        rng::categorical(&mut self.rng, self.mdp.row(h, s, a))
    }
}

/// Sample `n` episodes of `policy` on stream `tag`, episode `i` on stream `i`.
pub fn rollouts(
    mdp: &TabularMdp,
    policy: &Policy,
    n: usize,
    seed: u64,
    tag: u64,
) -> Vec<Trajectory> {
    (0..n)
        .map(|i| rollout_on(mdp, policy, &mut rng::stream(seed, tag, i as u64)))
        .collect()
}

pub(crate) fn rollout_on(mdp: &TabularMdp, policy: &Policy, rng: &mut StreamRng) -> Trajectory {
    let dims = mdp.dims();
    let mut states = Vec::with_capacity(dims.horizon + 1);
    let mut actions = Vec::with_capacity(dims.horizon);
    let mut s = rng::categorical(rng, mdp.initial());
    states.push(s);
    for h in 0..dims.horizon {
        let a = rng::categorical(rng, policy.row(h, s));
        s = rng::categorical(rng, mdp.row(h, s, a));
        actions.push(a);
        states.push(s);
    }
    Trajectory { states, actions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Dims;

    fn chain() -> TabularMdp {
        // action 0 stays, action 1 moves right (saturating)
        let dims = Dims::new(3, 2, 3).unwrap();
        TabularMdp::from_fn(dims, vec![1.0, 0.0, 0.0], |_, s, a| {
            let mut row = vec![0.0; 3];
            row[if a == 1 { (s + 1).min(2) } else { s }] = 1.0;
            row
        })
        .unwrap()
    }

    #[test]
    fn deterministic_chain_rollout() {
        let mdp = chain();
        let pi = Policy::constant(mdp.dims(), 1).unwrap();
        let mut sampler = ForwardSampler::new(&mdp, 0);
        let t = sampler.rollout(&pi);
        assert_eq!(t.states, vec![0, 1, 2, 2]);
        assert_eq!(t.actions, vec![1, 1, 1]);
        assert!(t.validate(3, 2, 3).is_ok());
    }

    #[test]
    fn step_after_horizon_fails() {
        let mdp = chain();
        let mut sampler = ForwardSampler::new(&mdp, 0);
        assert!(sampler.step(0).is_err());
        sampler.reset();
        for _ in 0..3 {
            sampler.step(0).unwrap();
        }
        assert!(sampler.step(0).is_err());
        assert!(sampler.reset() == 0 && sampler.step(5).is_err());
    }

    #[test]
    fn same_seed_same_episodes() {
        let dims = Dims::new(3, 2, 4).unwrap();
        let mdp = TabularMdp::from_fn(dims, vec![0.2, 0.3, 0.5], |_, s, a| {
            let mut row = vec![0.1; 3];
            row[(s + a) % 3] = 0.8;
            row
        })
        .unwrap();
        let pi = Policy::uniform(dims);
        assert_eq!(rollouts(&mdp, &pi, 20, 9, 1), rollouts(&mdp, &pi, 20, 9, 1));
        assert_ne!(
            rollouts(&mdp, &pi, 20, 9, 1),
            rollouts(&mdp, &pi, 20, 10, 1)
        );
        let mut a = ForwardSampler::new(&mdp, 3);
        let mut b = ForwardSampler::new(&mdp, 3);
        for _ in 0..10 {
            assert_eq!(a.rollout(&pi), b.rollout(&pi));
        }
        assert_eq!(a.episodes(), 10);
    }
}
