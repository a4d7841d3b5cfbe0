//! Fixtures and test-side oracles shared by the integration tests.
#![allow(dead_code)]

use co_mdp::exact::{TauWeights, ValueFunction};
use co_mdp::mdp::Mdp;
use co_mdp::problems::{evaluate, generate, generate_spp, Instance, Knapsack, ProblemKind, Tour};
use co_mdp::rng::Rng;
use rand::Rng as _;

pub fn small_knapsack() -> Instance {
    Instance::Ksp(Knapsack { d: 3, n: 5, m: 1, c: vec![1.0; 3], w: vec![vec![2.0, 1.0, 2.0]], b: vec![4.0] })
}

pub fn triangle_tour() -> Instance {
    Instance::Tsp(Tour { d: 3, c: vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]] })
}

pub fn small_path() -> Instance {
    generate_spp(3, 0).unwrap()
}

/// Random instances cycling through the sizes `lo..=hi`.
pub fn family(kind: ProblemKind, lo: usize, hi: usize, count: usize, seed: u64) -> Vec<Instance> {
    (0..count).map(|i| generate(kind, lo + i % (hi - lo + 1), seed + i as u64).unwrap()).collect()
}

/// Optimal values by memoized recursion over the transition table, written
/// independently of the library's value iteration.
pub fn recursive_values(mdp: &Mdp) -> Vec<f64> {
    fn visit(mdp: &Mdp, s: usize, memo: &mut Vec<Option<f64>>) -> f64 {
        if s == mdp.absorbing() {
            return 0.0;
        }
        if let Some(v) = memo[s] {
            return v;
        }
        let mut best = f64::NEG_INFINITY;
        for a in 0..mdp.action_count() {
            let v = mdp.reward(s, a) + visit(mdp, mdp.next(s, a), memo);
            if v > best {
                best = v;
            }
        }
        memo[s] = Some(best);
        best
    }
    let mut memo = vec![None; mdp.state_count()];
    (0..mdp.state_count()).map(|s| visit(mdp, s, &mut memo)).collect()
}

/// Best objective over every token string the instance admits, without
/// any pruning. Only for tiny instances.
pub fn enumerate_optimum(instance: &Instance) -> f64 {
    let alphabet = instance.alphabet();
    let lengths: Vec<usize> = match instance {
        Instance::Ksp(p) => vec![p.d],
        Instance::Tsp(p) => vec![p.d + 1],
        Instance::Spp(p) => (1..=p.d).collect(),
    };
    let mut best = f64::NEG_INFINITY;
    for len in lengths {
        let mut x = vec![0usize; len];
        loop {
            if let Some(g) = evaluate(instance, &x).unwrap() {
                best = best.max(g);
            }
            let mut i = 0;
            while i < len {
                x[i] += 1;
                if x[i] < alphabet {
                    break;
                }
                x[i] = 0;
                i += 1;
            }
            if i == len {
                break;
            }
        }
    }
    best
}

/// `V + ε τ(s) u(s)` with `u(s)` uniform on `[−1, 1]`, so the τ-distance
/// to `V` is at most `ε`.
pub fn perturb(mdp: &Mdp, v: &ValueFunction, tau: &TauWeights, eps: f64, rng: &mut Rng) -> ValueFunction {
    let values = (0..mdp.state_count()).map(|s| v[s] + eps * tau.weight(mdp, s) * rng.random_range(-1.0..=1.0)).collect();
    ValueFunction::pinned(mdp, values)
}

/// Uniform values in `[−scale, scale]` off the absorbing state.
pub fn random_values(mdp: &Mdp, scale: f64, rng: &mut Rng) -> ValueFunction {
    let values = (0..mdp.state_count()).map(|_| rng.random_range(-scale..=scale)).collect();
    ValueFunction::pinned(mdp, values)
}

/// Fixed-seed proptest settings so every run checks the same cases.
pub fn config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5EED),
        failure_persistence: None,
        ..Default::default()
    }
}
