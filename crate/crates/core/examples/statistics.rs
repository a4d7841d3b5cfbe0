//! The summary statistics behind the result tables: probability of
//! superiority, skewness with bootstrap intervals, and the slack histogram.
//!
//! `cargo run --release --example statistics -- [out.svg]`

use co_mdp::harness::report::{histogram, slack_histogram_svg, trimmed_slacks};
use co_mdp::harness::{prob_superiority, skewness, SummaryStats};
use co_mdp::rng;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

fn main() -> co_mdp::Result<()> {
    let mut r = rng::stream(1, &[rng::tag::BOOTSTRAP]);
    let low: Vec<f64> = (0..400).map(|_| StandardNormal.sample(&mut r)).collect();
    let high: Vec<f64> = (0..400).map(|_| { let z: f64 = StandardNormal.sample(&mut r); z + 0.5 }).collect();
    // P(X > Y) for a half-sigma shift is Φ(0.5/√2) ≈ 0.638
    println!("PS(high, low) = {:.3}, PS(low, high) = {:.3}", prob_superiority(&high, &low)?, prob_superiority(&low, &high)?);

    let exp: Vec<f64> = (0..5000).map(|_| Exp1.sample(&mut r)).collect();
    println!("skewness of Exp(1) sample: {:.3} (population value 2)", skewness(&exp).unwrap());
    let summary = SummaryStats::of(&exp, 3)?;
    println!("{summary:#?}");

    let slacks: Vec<f64> = (0..1000).map(|_| r.random::<f64>().powi(3) * 50.0).collect();
    let kept = trimmed_slacks(slacks);
    let (lo, hi, counts) = histogram(&kept, 10);
    println!("{} slacks kept on [{lo:.2}, {hi:.2}]: {counts:?}", kept.len());
    if let Some(path) = std::env::args().nth(1) {
        let svg = slack_histogram_svg(&kept, "synthetic slacks").expect("non-empty sample");
        std::fs::write(&path, svg)?;
        println!("wrote {path}");
    }
    Ok(())
}
