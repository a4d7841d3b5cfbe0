//! Fitted Q-iteration over state–action pairs.
//!
//! With one indicator per pair and census batches the fit is exact, so FQI
//! reproduces V*. The greedy max over FQI targets equals the FVI target
//! of the induced state values at every state.
//!
//! `cargo run --release --example fitted_q`

use co_mdp::exact::{bellman_apply, solve};
use co_mdp::fvi::{fqi_run, fqi_targets, greedy_values, FqiConfig, IterationPlan, PairDist, QScheme};
use co_mdp::mdp::build_mdp;
use co_mdp::problems::{generate, ProblemKind};
use co_mdp::rng;
use rand::Rng;

fn main() -> co_mdp::Result<()> {
    let mdp = build_mdp(&generate(ProblemKind::Tsp, 4, 3)?)?;
    let scheme = QScheme::identity(&mdp, 1e6);
    println!("TSP d=4: {} states, {} actions, K = {}", mdp.state_count(), mdp.action_count(), scheme.k());

    let mut r = rng::stream(9, &[]);
    let mut theta: Vec<f64> = (0..scheme.k()).map(|_| r.random_range(-3.0..3.0)).collect();
    theta[0] = 1.0;
    let y_fvi = bellman_apply(&mdp, &greedy_values(&mdp, &scheme, &theta));
    let y_fqi = fqi_targets(&mdp, &scheme, &theta);
    let a = mdp.action_count();
    let worst = mdp
        .live_states()
        .map(|s| (y_fqi[s * a..(s + 1) * a].iter().copied().fold(f64::NEG_INFINITY, f64::max) - y_fvi[s]).abs())
        .fold(0.0, f64::max);
    println!("max |max_a y_FQI(s,a) - y_FVI(s)| at a random theta: {worst:e}");

    let config = FqiConfig {
        sigma: PairDist::uniform(&mdp),
        theta0: scheme.origin(),
        plan: IterationPlan::census(mdp.depth() + 2, 1_000_000, 1e-12),
    };
    let trace = fqi_run(&mdp, &scheme, &config, 0)?;
    let vstar = solve(&mdp)?;
    for (t, th) in trace.thetas.iter().enumerate() {
        let v = greedy_values(&mdp, &scheme, th);
        let err = (0..mdp.state_count()).map(|s| (v[s] - vstar[s]).abs()).fold(0.0, f64::max);
        println!("  t = {t}: max |V_t - V*| = {err:.3e}");
    }
    Ok(())
}
