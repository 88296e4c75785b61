//! Cross-checks against independent oracles: brute-force policy
//! enumeration and Monte-Carlo rollouts.

use irlc_core::expert::{
    empirical_occupancy, feature_expectation, sample_expert_dataset, ExpertEstimate,
};
use irlc_core::instances::*;
use irlc_core::mdp::*;
use irlc_core::rng;
use irlc_core::sampler::rollouts;

fn brute_force_optimum(mdp: &TabularMdp, reward: &RewardTable) -> f64 {
    let dims = mdp.dims();
    let slots = dims.states * dims.horizon;
    let count = dims.actions.pow(slots as u32);
    let mut best = f64::NEG_INFINITY;
    for code in 0..count {
        let mut c = code;
        let actions: Vec<Vec<usize>> = (0..dims.horizon)
            .map(|_| {
                (0..dims.states)
                    .map(|_| {
                        let a = c % dims.actions;
                        c /= dims.actions;
                        a
                    })
                    .collect()
            })
            .collect();
        let pi = Policy::deterministic(dims, &actions).unwrap();
        best = best.max(policy_evaluation(mdp, reward, &pi).unwrap().j);
    }
    best
}

#[test]
fn value_iteration_matches_enumeration() {
    for seed in 0..60u64 {
        let s = 1 + (seed % 3) as usize;
        let a = 1 + (seed / 3 % 2) as usize;
        let h = 1 + (seed / 6 % 3) as usize;
        let inst = random_instance(s, a, h, RandomStructure::Tabular, seed).unwrap();
        let mut g = rng::stream(seed, rng::tag::REWARDS, 0);
        let r = random_reward(inst.mdp.dims(), &mut g, -1.0, 1.0).unwrap();
        let vi = value_iteration(&inst.mdp, &r).unwrap().j;
        assert!(
            (vi - brute_force_optimum(&inst.mdp, &r)).abs() < 1e-9,
            "seed {seed}"
        );
    }
}

#[test]
fn large_instance_agrees_with_small_sibling_enumeration() {
    let big = random_instance(5, 3, 5, RandomStructure::Tabular, 42).unwrap();
    let mut g = rng::stream(42, rng::tag::REWARDS, 0);
    let r = random_reward(big.mdp.dims(), &mut g, -1.0, 1.0).unwrap();
    let j = value_iteration(&big.mdp, &r).unwrap().j;
    // greedy policy of the DP attains J*, and no random deterministic policy beats it
    let greedy = value_iteration(&big.mdp, &r).unwrap().greedy_policy();
    assert!((policy_evaluation(&big.mdp, &r, &greedy).unwrap().j - j).abs() < 1e-12);
    for i in 0..200 {
        let mut g = rng::stream(42, rng::tag::EXPERT, i);
        let pi = random_policy(big.mdp.dims(), &mut g, true).unwrap();
        assert!(policy_evaluation(&big.mdp, &r, &pi).unwrap().j <= j + 1e-12);
    }
    let small = random_instance(3, 2, 3, RandomStructure::Tabular, 42).unwrap();
    let mut g = rng::stream(42, rng::tag::REWARDS, 0);
    let rs = random_reward(small.mdp.dims(), &mut g, -1.0, 1.0).unwrap();
    let js = value_iteration(&small.mdp, &rs).unwrap().j;
    assert!((js - brute_force_optimum(&small.mdp, &rs)).abs() < 1e-9);
}

#[test]
fn policy_value_matches_monte_carlo() {
    let inst = random_instance(4, 3, 4, RandomStructure::Tabular, 8).unwrap();
    let mut g = rng::stream(8, rng::tag::REWARDS, 0);
    let r = random_reward(inst.mdp.dims(), &mut g, -1.0, 1.0).unwrap();
    let mut g = rng::stream(8, rng::tag::EXPERT, 0);
    let pi = random_policy(inst.mdp.dims(), &mut g, false).unwrap();
    let exact = policy_evaluation(&inst.mdp, &r, &pi).unwrap().j;
    let n = 40_000;
    let total: f64 = rollouts(&inst.mdp, &pi, n, 3, rng::tag::EXPERT)
        .iter()
        .map(|t| {
            (0..t.len())
                .map(|h| r.get(h, t.states[h], t.actions[h]))
                .sum::<f64>()
        })
        .sum();
    // |r| ≤ 1 per stage, so the standard error is below 4/√n
    assert!((total / n as f64 - exact).abs() < 5.0 * 4.0 / (n as f64).sqrt());
}

#[test]
fn occupancy_matches_empirical_frequencies() {
    let inst = random_instance(3, 2, 3, RandomStructure::Tabular, 12).unwrap();
    let exact = occupancy_measure(&inst.mdp, &inst.expert).unwrap();
    let data = sample_expert_dataset(&inst.mdp, &inst.expert, 50_000, 12).unwrap();
    let ExpertEstimate::Occupancy(emp) = empirical_occupancy(&data).unwrap() else {
        panic!("tabular estimate expected")
    };
    for (x, y) in exact.values().iter().zip(emp.values()) {
        assert!((x - y).abs() < 0.02);
    }
}

#[test]
fn feature_expectation_dualizes_linear_return() {
    let inst = random_instance(5, 2, 3, RandomStructure::Linear { dim: 3 }, 4).unwrap();
    let spec = inst.spec.as_ref().unwrap();
    let theta: Vec<Vec<f64>> = vec![
        vec![0.3, -0.2, 0.5],
        vec![-0.1, 0.4, 0.0],
        vec![0.2, 0.2, -0.6],
    ];
    let lin = LinearReward::new(theta.clone()).unwrap();
    let table = lin.to_table(spec.features(), false).unwrap();
    let occ = occupancy_measure(&inst.mdp, &inst.expert).unwrap();
    let psi = feature_expectation(&occ, spec.features()).unwrap();
    let dual: f64 = theta
        .iter()
        .zip(&psi)
        .map(|(t, p)| t.iter().zip(p).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    let direct = policy_evaluation(&inst.mdp, &table, &inst.expert)
        .unwrap()
        .j;
    assert!((dual - direct).abs() < 1e-12);
}

#[test]
fn packing_non_distinguished_triples_are_not_near_optimal() {
    let eps = 0.1;
    let packing = greedy_packing(8, 5, None).unwrap();
    let params =
        PackingFamilyParams::random_assignment(2, 4, 14, 2, 0.05, eps, &packing.vectors, 5)
            .unwrap();
    let inst = make_packing_instance(&params).unwrap();
    let triples = params.triples().unwrap();
    let jbar = triples
        .iter()
        .position(|&t| t == params.distinguished)
        .unwrap();
    let values: Vec<f64> = params.vectors[jbar].iter().map(|&v| v as f64).collect();
    let r = inst.reward(&values).unwrap();
    let j_star = value_iteration(&inst.mdp, &r).unwrap().j;
    // every policy reaches exactly one leaf triple; enumerate those
    let mut best = f64::NEG_INFINITY;
    for &t in triples.iter().chain([params.reference_triple()].iter()) {
        let pi = inst.path_policy(t).unwrap();
        let j = policy_evaluation(&inst.mdp, &r, &pi).unwrap().j;
        best = best.max(j);
        if t != params.distinguished && t != params.reference_triple() {
            assert!(j < j_star - eps, "triple {t:?} is ε-optimal");
        }
    }
    assert!((best - j_star).abs() < 1e-12);
}
