//! Builds one small instance of each problem family, runs the structural
//! checks and round-trips the MDP through the binary format.
//!
//! `cargo run --release --example three_families`

use co_mdp::exact::solve;
use co_mdp::mdp::{build_mdp, validate_mdp, Mdp};
use co_mdp::problems::{brute_force_optimum, generate, Instance, ProblemKind, ShortestPath, Tour};

fn show(name: &str, instance: &Instance) -> co_mdp::Result<()> {
    let mdp = build_mdp(instance)?;
    let report = validate_mdp(&mdp);
    let stats = mdp.layer_stats();
    println!(
        "{name}: {} states, layer sizes {:?}, max |r| {}, max girth {}",
        mdp.state_count(),
        stats.layer_sizes,
        stats.reward_scale,
        stats.max_girth
    );
    for check in &report.checks {
        println!("  [{}] {} {}", if check.pass { "ok" } else { "FAIL" }, check.name, check.detail);
    }

    let mut bytes = Vec::new();
    mdp.write_binary(&mut bytes)?;
    let back = Mdp::read_binary(bytes.as_slice())?;
    // labels are not stored, the transition structure is
    assert_eq!(back.state_count(), mdp.state_count());
    for s in 0..mdp.state_count() {
        for a in 0..mdp.action_count() {
            assert_eq!((back.next(s, a), back.reward(s, a)), (mdp.next(s, a), mdp.reward(s, a)));
        }
        assert_eq!((back.layer(s), back.is_final(s)), (mdp.layer(s), mdp.is_final(s)));
    }
    println!("  binary round trip: {} bytes", bytes.len());

    let v = solve(&mdp)?;
    println!("  V*(s_e) = {}, brute force {}", v[mdp.initial()], brute_force_optimum(instance)?.value);
    Ok(())
}

fn main() -> co_mdp::Result<()> {
    let triangle = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
    show("tsp d=3", &Instance::Tsp(Tour { d: 3, c: triangle }))?;

    // four vertices, walks of at most three arcs from 0 to 3
    let c = vec![
        vec![0.0, 1.0, 4.0, 9.0],
        vec![1.0, 0.0, 1.0, 5.0],
        vec![4.0, 1.0, 0.0, 1.0],
        vec![9.0, 5.0, 1.0, 0.0],
    ];
    show("spp d=3", &Instance::Spp(ShortestPath { d: 3, c, v_src: 0, v_tgt: 3 }))?;

    for kind in [ProblemKind::Ksp, ProblemKind::Tsp, ProblemKind::Spp] {
        let instance = generate(kind, 6, 11)?;
        show(&format!("random {} d=6", kind.label()), &instance)?;
    }
    Ok(())
}
