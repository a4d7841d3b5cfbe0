//! A three-item knapsack end to end: states, optimal values, decoding and
//! the brute-force check.
//!
//! `cargo run --release --example knapsack_walkthrough`

use co_mdp::decode::{decoded_solution, greedy_decode};
use co_mdp::exact::{extract_policy, solve};
use co_mdp::mdp::build_mdp;
use co_mdp::problems::{brute_force_optimum, evaluate, Instance, Knapsack};

fn main() -> co_mdp::Result<()> {
    // max x1 + x2 + x3  s.t.  2x1 + x2 + 2x3 <= 4,  x_j in {0..4}
    let instance = Instance::Ksp(Knapsack {
        d: 3,
        n: 5,
        m: 1,
        c: vec![1.0, 1.0, 1.0],
        w: vec![vec![2.0, 1.0, 2.0]],
        b: vec![4.0],
    });
    let mdp = build_mdp(&instance)?;
    println!("{} states, {} actions, depth {}, penalty {}", mdp.state_count(), mdp.action_count(), mdp.depth(), mdp.penalty());

    let vstar = solve(&mdp)?;
    let policy = extract_policy(&mdp, &vstar);
    for s in 0..mdp.state_count() {
        let label = mdp.label(s).unwrap();
        let layer = mdp.layer(s).map_or("-".to_string(), |l| l.to_string());
        println!("  {label:<10} layer {layer:>2}  V* = {:>6}  a* = {}", vstar[s], policy[s]);
    }

    let transcript = greedy_decode(&mdp, &vstar);
    let x = decoded_solution(&instance, &transcript.tokens);
    println!("decoded x = {x:?}, objective {:?}, collected {}", evaluate(&instance, &x)?, transcript.collected());

    let oracle = brute_force_optimum(&instance)?;
    println!("brute force: {} at {:?} after {} nodes", oracle.value, oracle.solution, oracle.visited);
    assert_eq!(vstar[mdp.initial()], oracle.value);
    Ok(())
}
