//! Desk-sized versions of both result tables, written as CSV to stdout.
//!
//! `cargo run --release --example desk_tables`

use co_mdp::harness::report::{table1_row, table2_row, write_csv};
use co_mdp::harness::{run_contraction_experiment, ScenarioSpec};
use co_mdp::problems::ProblemKind;

fn main() -> co_mdp::Result<()> {
    let mut rows1 = Vec::new();
    let mut rows2 = Vec::new();
    for (kind, d, k_low, k_high) in [(ProblemKind::Ksp, 10, 5, 10), (ProblemKind::Tsp, 6, 4, 8)] {
        let low = run_contraction_experiment(&ScenarioSpec::desk(kind, d, k_low, 2024))?;
        let high = run_contraction_experiment(&ScenarioSpec::desk(kind, d, k_high, 2024))?;
        rows1.push(table1_row(&low)?);
        rows1.push(table1_row(&high)?);
        rows2.push(table2_row(&low, &high)?);
    }
    write_csv(std::io::stdout(), &rows1)?;
    println!();
    write_csv(std::io::stdout(), &rows2)?;
    Ok(())
}
