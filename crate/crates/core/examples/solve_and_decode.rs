//! Value iteration on random instances, the ρ-ball around V*, and the
//! decoding guarantee for perturbed value functions.
//!
//! `cargo run --release --example solve_and_decode`

use co_mdp::decode::{greedy_decode, verify_gap_against};
use co_mdp::exact::{compute_rho, tau_distance, tau_norm, value_iteration, TauWeights, ValueFunction};
use co_mdp::mdp::build_mdp;
use co_mdp::problems::{brute_force_optimum, generate, ProblemKind};
use co_mdp::rng;
use rand::Rng;

fn main() -> co_mdp::Result<()> {
    for (kind, d) in [(ProblemKind::Ksp, 8), (ProblemKind::Tsp, 6), (ProblemKind::Spp, 6)] {
        let instance = generate(kind, d, 5)?;
        let mdp = build_mdp(&instance)?;
        let tau = TauWeights::default_for(&mdp);
        let vi = value_iteration(&mdp, &ValueFunction::zeros(&mdp), &tau, 1e-12, mdp.depth() + 2)?;
        let optimum = brute_force_optimum(&instance)?.value;
        let rho = compute_rho(&mdp, &tau)?;
        println!(
            "{} d={d}: {} states, VI stopped after {} sweeps, V*(s_e) = {:.4}, oracle {:.4}",
            kind.label(),
            mdp.state_count(),
            vi.iterations,
            vi.values[mdp.initial()],
            optimum
        );
        println!("  ||V*||_tau = {:.3} <= rho = {:.3}", tau_norm(vi.values.values(), &tau, &mdp), rho);

        // perturb V* by at most eps in τ-norm and decode
        let mut r = rng::stream(5, &[rng::tag::PERTURB]);
        let mut worst: f64 = 0.0;
        for eps in [1e-3, 1e-2, 1e-1] {
            for _ in 0..20 {
                let noisy: Vec<f64> = (0..mdp.state_count())
                    .map(|s| vi.values[s] + eps * tau.weight(&mdp, s) * r.random_range(-1.0..=1.0))
                    .collect();
                let noisy = ValueFunction::pinned(&mdp, noisy);
                let dist = tau_distance(noisy.values(), vi.values.values(), &tau, &mdp);
                let check = verify_gap_against(&instance, &mdp, &greedy_decode(&mdp, &noisy), dist, &tau, optimum)?;
                assert!(check.bound_holds, "{check:?}");
                worst = worst.max(check.gap.unwrap() / check.bound.max(f64::MIN_POSITIVE));
            }
        }
        println!("  60 perturbed decodes within the gap bound, worst gap/bound {worst:.3}");
    }
    Ok(())
}
