//! Fitted value iteration under the planned sample and step schedule.
//!
//! Finds a scenario where PVI contracts, derives the loss constants and the
//! schedule, then compares repeated stochastic runs against the error bound.
//!
//! `cargo run --release --example fvi_schedule`

use co_mdp::harness::{prepare_fvi, run_fvi_reps, FviStudySpec};
use co_mdp::mdp::build_mdp;
use co_mdp::problems::{generate, ProblemKind};

fn main() -> co_mdp::Result<()> {
    let instance = generate(ProblemKind::Ksp, 10, 7)?;
    let mdp = build_mdp(&instance)?;
    let spec = FviStudySpec { reps: 10, ..FviStudySpec::new(4, 7) };
    let setup = prepare_fvi(&mdp, &spec)?;
    let c = &setup.constants;
    let sch = &setup.schedule;
    println!("{} states; scenario attempt {}, PVI gamma {:.4}", mdp.state_count(), setup.attempt, c.gamma);
    println!("  L_sup {:.3}  D {:.3}  kappa* {:.3e}  omega {:.3e}  c(sigma,tau) {:.3e}", c.l_sup, c.d_theta, c.kappa_star, c.omega, c.c_sigma_tau);
    println!("  rho {:.3}  rho' {:.3}  a {:.3}  T {}", setup.rho, sch.rho_prime, sch.a, sch.iterations);
    for t in [0, sch.iterations / 2, sch.iterations - 1] {
        println!("  t = {t:>3}: eps {:.2e}  n {:.2e}  steps {:.2e}", sch.eps[t], sch.samples[t], sch.steps[t]);
    }

    let traces = run_fvi_reps(&mdp, &setup, &spec)?;
    // the bound is on the distance to the PVI limit; V* itself may lie
    // outside the scheme
    let finals: Vec<f64> = traces
        .iter()
        .map(|tr| *tr.tau_errors_to(&mdp, &setup.scheme, &setup.tau, &setup.limit).last().unwrap())
        .collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    println!("approximation gap ||V* - Pi V*||_tau = {:.3e}", setup.pvi.approx_gap);
    println!("final ||V_T - V*||_tau of the first rep = {:.3e}", traces[0].tau_err.last().unwrap());
    println!("mean final ||V_T - V~*||_tau over {} reps = {mean:.3e}, bound {:.3e}", spec.reps, setup.bound);
    assert!(mean <= setup.bound);
    Ok(())
}
