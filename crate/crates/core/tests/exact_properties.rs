mod common;

use co_mdp::affine::{sample_sigma, sample_tau};
use co_mdp::decode::{argmax, decoded_solution, greedy_decode, softmax_policy};
use co_mdp::exact::{
    bellman_apply, c_sigma_tau, compute_rho, sigma_norm, solve, tau_distance, tau_norm, TauWeights, ValueFunction,
};
use co_mdp::mdp::{build_mdp, Mdp};
use co_mdp::problems::{brute_force_optimum, evaluate, generate, Instance, ProblemKind};
use co_mdp::rng;
use common::{random_values, recursive_values};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = Instance> {
    prop_oneof![
        (1usize..=8, any::<u64>()).prop_map(|(d, s)| generate(ProblemKind::Ksp, d, s).unwrap()),
        (3usize..=6, any::<u64>()).prop_map(|(d, s)| generate(ProblemKind::Tsp, d, s).unwrap()),
        (1usize..=6, any::<u64>()).prop_map(|(d, s)| generate(ProblemKind::Spp, d, s).unwrap()),
    ]
}

fn model() -> impl Strategy<Value = (Instance, Mdp)> {
    instance().prop_map(|i| {
        let mdp = build_mdp(&i).unwrap();
        (i, mdp)
    })
}

proptest! {
    #![proptest_config(common::config(40))]

    #[test]
    fn bellman_map_contracts((_, mdp) in model(), seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[]);
        let tau = sample_tau(&mdp, &mut r);
        for _ in 0..200 {
            let v1 = random_values(&mdp, 10.0, &mut r);
            let v2 = random_values(&mdp, 10.0, &mut r);
            let lhs = tau_distance(bellman_apply(&mdp, &v1).values(), bellman_apply(&mdp, &v2).values(), &tau, &mdp);
            let rhs = tau.gamma() * tau_distance(v1.values(), v2.values(), &tau, &mdp);
            prop_assert!(lhs <= rhs + 1e-9, "{} > {}", lhs, rhs);
        }
    }

    #[test]
    fn value_iteration_matches_the_recursion((instance, mdp) in model()) {
        let v = solve(&mdp).unwrap();
        let oracle = recursive_values(&mdp);
        for s in 0..mdp.state_count() {
            prop_assert!((v[s] - oracle[s]).abs() <= 1e-9);
        }
        prop_assert!((v[mdp.initial()] - brute_force_optimum(&instance).unwrap().value).abs() <= 1e-9);
        let tau = TauWeights::default_for(&mdp);
        prop_assert!(tau_distance(bellman_apply(&mdp, &v).values(), v.values(), &tau, &mdp) <= 1e-9);
    }

    #[test]
    fn any_start_settles_within_depth_plus_one_sweeps((_, mdp) in model(), seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[]);
        let mut v = random_values(&mdp, 100.0, &mut r);
        for _ in 0..=mdp.depth() {
            v = bellman_apply(&mdp, &v);
        }
        let oracle = recursive_values(&mdp);
        for s in 0..mdp.state_count() {
            prop_assert!((v[s] - oracle[s]).abs() <= 1e-9);
        }
    }

    #[test]
    fn norm_sandwich((_, mdp) in model(), seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[]);
        let tau = sample_tau(&mdp, &mut r);
        let sigma = sample_sigma(&mdp, &mut r);
        let c = c_sigma_tau(&sigma, &tau, &mdp);
        for _ in 0..200 {
            let v = random_values(&mdp, 5.0, &mut r);
            let t = tau_norm(v.values(), &tau, &mdp);
            let s = sigma_norm(v.values(), &sigma);
            prop_assert!(c * t <= s * (1.0 + 1e-12));
            prop_assert!(s <= tau.tau0() * t * (1.0 + 1e-12));
        }
    }

    #[test]
    fn optimal_values_lie_in_the_rho_ball((_, mdp) in model(), seed in any::<u64>()) {
        let v = solve(&mdp).unwrap();
        let mut r = rng::stream(seed, &[]);
        for tau in [TauWeights::default_for(&mdp), sample_tau(&mdp, &mut r)] {
            prop_assert!(tau_norm(v.values(), &tau, &mdp) <= compute_rho(&mdp, &tau).unwrap());
        }
    }

    #[test]
    fn greedy_decode_of_vstar_is_optimal((instance, mdp) in model()) {
        let v = solve(&mdp).unwrap();
        let t = greedy_decode(&mdp, &v);
        prop_assert!(t.feasible(&mdp));
        let g = evaluate(&instance, &decoded_solution(&instance, &t.tokens)).unwrap().unwrap();
        prop_assert!((g - brute_force_optimum(&instance).unwrap().value).abs() <= 1e-9);
    }

    #[test]
    fn decoding_terminates_and_agrees_with_softmax((_, mdp) in model(), seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[]);
        let v = random_values(&mdp, 20.0, &mut r);
        let t = greedy_decode(&mdp, &v);
        prop_assert!(t.steps.len() <= mdp.depth() + 2);
        prop_assert!(t.tokens.len() <= mdp.depth() + 1);
        for step in &t.steps {
            prop_assert_eq!(argmax(&softmax_policy(&mdp, &v, step.state)), step.action);
        }
    }
}

#[test]
fn zero_rewards_give_a_zero_ball() {
    let Instance::Ksp(mut p) = common::small_knapsack() else { unreachable!() };
    p.c = vec![0.0; 3];
    let mdp = build_mdp(&Instance::Ksp(p)).unwrap();
    let tau = TauWeights::default_for(&mdp);
    assert_eq!(compute_rho(&mdp, &tau).unwrap(), 0.0);
    assert_eq!(tau_norm(solve(&mdp).unwrap().values(), &tau, &mdp), 0.0);
    let _ = ValueFunction::zeros(&mdp);
}
