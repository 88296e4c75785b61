use irlc_core::instances::{random_instance, random_policy, RandomStructure};
use irlc_core::linalg::{Cholesky, Matrix};
use irlc_core::linear::{degeneracy_check, FeatureMap};
use irlc_core::lp::{maximize, LpOutcome};
use irlc_core::mdp::*;
use irlc_core::rng;
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..5, 1usize..4, 1usize..5, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cholesky_solves_gram_systems(d in 1usize..6, n in 0usize..12, seed in any::<u64>()) {
        let mut g = rng::stream(seed, 0, 0);
        let mut a = Matrix::identity(d);
        for _ in 0..n {
            a.add_outer(&rng::uniform_ball(&mut g, d, 1.0));
        }
        let b: Vec<f64> = (0..d).map(|_| rng::uniform(&mut g) - 0.5).collect();
        let x = Cholesky::new(&a).unwrap().solve(&b);
        let ax = a.mul_vec(&x);
        for (u, v) in ax.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn lp_optimum_is_feasible(m in 1usize..6, n in 1usize..4, seed in any::<u64>()) {
        let mut g = rng::stream(seed, 0, 1);
        let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng::uniform(&mut g)).collect()).collect();
        let b: Vec<f64> = (0..m).map(|_| rng::uniform(&mut g)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng::uniform(&mut g) - 0.3).collect();
        match maximize(&c, &a, &b).unwrap() {
            LpOutcome::Optimal { x, value } => {
                prop_assert!(x.iter().all(|v| *v >= -1e-9));
                for (row, bi) in a.iter().zip(&b) {
                    prop_assert!(row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-9);
                }
                let cx: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                prop_assert!((cx - value).abs() < 1e-9);
                // every vertex candidate x = t e_j is no better
                for j in 0..n {
                    let cap = a.iter().zip(&b).filter(|(r, _)| r[j] > 1e-12).map(|(r, bi)| bi / r[j]).fold(f64::INFINITY, f64::min);
                    if cap.is_finite() {
                        prop_assert!(c[j] * cap <= value + 1e-9);
                    }
                }
            }
            LpOutcome::Unbounded => prop_assert!(false, "bounded problem reported unbounded"),
        }
    }

    #[test]
    fn occupancy_stages_are_distributions((s, a, h, seed) in dims()) {
        let inst = random_instance(s, a, h, RandomStructure::Tabular, seed).unwrap();
        let mut g = rng::stream(seed, 1, 0);
        let pi = random_policy(inst.mdp.dims(), &mut g, false).unwrap();
        let occ = occupancy_measure(&inst.mdp, &pi).unwrap();
        for stage in 0..h {
            prop_assert!((occ.stage(stage).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_policy_attains_optimum((s, a, h, seed) in dims()) {
        let inst = random_instance(s, a, h, RandomStructure::Tabular, seed).unwrap();
        let mut g = rng::stream(seed, 2, 0);
        let r = irlc_core::instances::random_reward(inst.mdp.dims(), &mut g, -1.0, 1.0).unwrap();
        let sol = value_iteration(&inst.mdp, &r).unwrap();
        let j = policy_evaluation(&inst.mdp, &r, &sol.greedy_policy()).unwrap().j;
        prop_assert!((j - sol.j).abs() < 1e-12);
        prop_assert!(policy_evaluation(&inst.mdp, &r, &inst.expert).unwrap().j <= sol.j + 1e-12);
    }

    #[test]
    fn materialized_linear_instances_are_valid(s in 1usize..7, a in 1usize..4, h in 1usize..4, d in 1usize..4, seed in any::<u64>()) {
        let inst = random_instance(s, a, h, RandomStructure::Linear { dim: d }, seed).unwrap();
        let spec = inst.spec.unwrap();
        for (x, y) in spec.materialize().unwrap().transitions().iter().zip(inst.mdp.transitions()) {
            prop_assert_eq!(x, y);
        }
        for st in 0..s {
            for ac in 0..a {
                prop_assert!(irlc_core::math::norm2(spec.features().phi(st, ac)) <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn separating_witnesses_separate(s in 1usize..5, a in 2usize..4, d in 1usize..4, seed in any::<u64>()) {
        let inst = random_instance(s, a, 2, RandomStructure::Linear { dim: d }, seed).unwrap();
        let features: &FeatureMap = inst.spec.as_ref().unwrap().features();
        let report = degeneracy_check(&inst.mdp, &inst.expert, features).unwrap();
        let occ = occupancy_measure(&inst.mdp, &inst.expert).unwrap();
        for cert in &report.stages {
            let Some(w) = &cert.witness else { continue };
            prop_assert!((irlc_core::math::norm2(w) - 1.0).abs() < 1e-9);
            for st in 0..s {
                if occ.state_mass(cert.stage, st) <= irlc_core::SUPPORT_EPS {
                    continue;
                }
                let e = inst.expert.action(cert.stage, st);
                let score = |x: usize| irlc_core::math::dot(features.phi(st, x), w);
                for other in 0..a {
                    if features.phi(st, other) != features.phi(st, e) {
                        prop_assert!(score(e) > score(other));
                    }
                }
            }
        }
    }
}
