//! Projected value iteration with random affine features: one scenario in
//! detail, then a desk-sized batch.
//!
//! `cargo run --release --example pvi_contraction`

use co_mdp::affine::{pvi_run, sample_scenario, PviOptions, Slack};
use co_mdp::harness::{run_contraction_experiment, ScenarioSpec};
use co_mdp::mdp::build_mdp;
use co_mdp::problems::{generate, ProblemKind};

fn main() -> co_mdp::Result<()> {
    let instance = generate(ProblemKind::Ksp, 8, 3)?;
    let mdp = build_mdp(&instance)?;
    let k = 6;

    for seed in 0..5 {
        let scenario = sample_scenario(&mdp, k, seed)?;
        let run = pvi_run(&mdp, &scenario, PviOptions::default())?;
        let head: Vec<String> = run.residuals.iter().take(6).map(|r| format!("{r:.2e}")).collect();
        println!("scenario {seed}: residuals {} ...", head.join(" "));
        match (run.gamma, run.slack) {
            (Some(g), Some(Slack::Value(s))) => println!(
                "  contractive, t* = {}, gamma = {g:.4}, slack = {s:.4}, box active {}, gap {:?}",
                run.t_star,
                run.box_active,
                run.rel_opt_gap.map(|r| r.gap)
            ),
            (Some(g), Some(Slack::FullyExpressive)) => println!("  contractive, gamma = {g:.4}, V* representable"),
            (g, _) => println!("  not contractive, t* = {}, gamma = {g:?}", run.t_star),
        }
    }

    // 10 instances × 10 distributions × 20 triplets
    for k in [5, 10] {
        let spec = ScenarioSpec::desk(ProblemKind::Ksp, 10, k, 2024);
        let out = run_contraction_experiment(&spec)?;
        let contractive = out.contractive_runs().count();
        let min_slack = out.contractive_runs().filter_map(|r| r.slack.and_then(Slack::value)).fold(f64::INFINITY, f64::min);
        println!(
            "KSP d=10 K={k}: {} runs, {contractive} contractive, mean chi {:.3}, min slack {min_slack:.3e}",
            out.runs.len(),
            out.mean_chi()
        );
    }
    Ok(())
}
