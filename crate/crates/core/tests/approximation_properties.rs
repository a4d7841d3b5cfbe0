mod common;

use co_mdp::affine::{
    pvi_run, pvi_run_with, sample_features, sample_scenario, sample_sigma, AffineScheme, ParamBox, Projector, PviOptions,
    Slack, DEFAULT_BOX,
};
use co_mdp::exact::{bellman_apply, sigma_norm, solve, tau_distance, SigmaDist, TauWeights};
use co_mdp::fvi::{
    draw_index, fqi_targets, fvi_run, fvi_targets, greedy_values, pgd_minimize, weighted_loss, FviConfig,
    IterationPlan, QScheme, QuadraticLoss,
};
use co_mdp::harness::{prepare_fvi, FviStudySpec};
use co_mdp::mdp::{build_mdp, Mdp};
use co_mdp::problems::{generate, ProblemKind};
use co_mdp::rng::{self, Rng};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng as _;

fn model() -> impl Strategy<Value = Mdp> {
    prop_oneof![
        (3usize..=7, any::<u64>()).prop_map(|(d, s)| generate(ProblemKind::Ksp, d, s).unwrap()),
        (3usize..=5, any::<u64>()).prop_map(|(d, s)| generate(ProblemKind::Tsp, d, s).unwrap()),
        (2usize..=5, any::<u64>()).prop_map(|(d, s)| generate(ProblemKind::Spp, d, s).unwrap()),
    ]
    .prop_map(|i| build_mdp(&i).unwrap())
}

fn random_theta(k: usize, scale: f64, r: &mut Rng) -> Vec<f64> {
    let mut th: Vec<f64> = (0..k).map(|_| r.random_range(-scale..=scale)).collect();
    th[0] = 1.0;
    th
}

/// Weighted least squares through the normal equations, independent of the
/// library's pseudo-inverse. Returns the minimizer and the minimal loss.
fn least_squares(scheme: &AffineScheme, weights: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
    let k = scheme.k();
    let mut g = DMatrix::<f64>::zeros(k - 1, k - 1);
    let mut h = DVector::<f64>::zeros(k - 1);
    for (s, (&w, &ys)) in weights.iter().zip(y).enumerate() {
        let phi = scheme.row(s);
        let resid = ys - phi[0];
        for i in 1..k {
            h[i - 1] += w * phi[i] * resid;
            for j in 1..k {
                g[(i - 1, j - 1)] += w * phi[i] * phi[j];
            }
        }
    }
    let free = g.lu().solve(&h).expect("regular normal equations");
    let theta: Vec<f64> = std::iter::once(1.0).chain(free.iter().copied()).collect();
    let loss = weighted_loss(|s| scheme.row(s), weights, y, &theta);
    (theta, loss)
}

/// σ over live states and a scheme with regular normal equations.
fn scenario(mdp: &Mdp, k: usize, r: &mut Rng) -> (SigmaDist, AffineScheme, Projector) {
    loop {
        let sigma = sample_sigma(mdp, r);
        let scheme = sample_features(mdp, k, DEFAULT_BOX, r).unwrap();
        if let Ok(p) = Projector::new(&scheme, &sigma) {
            return (sigma, scheme, p);
        }
    }
}

proptest! {
    #![proptest_config(common::config(32))]

    #[test]
    fn projection_is_idempotent(mdp in model(), k in 2usize..5, seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[]);
        let (_, scheme, projector) = scenario(&mdp, k, &mut r);
        for _ in 0..100 {
            let theta = random_theta(k, 10.0, &mut r);
            let back = projector.project(&scheme.values(&theta)).theta;
            let (a, b) = (scheme.values(&theta), scheme.values(&back));
            for s in 0..a.len() {
                prop_assert!((a[s] - b[s]).abs() <= 1e-8 * (1.0 + a[s].abs()));
            }
        }
    }

    #[test]
    fn projection_matches_normal_equations(mdp in model(), k in 2usize..5, seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[]);
        let (sigma, scheme, projector) = scenario(&mdp, k, &mut r);
        let w = bellman_apply(&mdp, &scheme.value(&mdp, &random_theta(k, 5.0, &mut r)));
        let (theta, _) = least_squares(&scheme, sigma.probs(), w.values());
        let ours = projector.project(w.values()).theta;
        for (a, b) in theta.iter().zip(&ours) {
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{:?} vs {:?}", theta, ours);
        }
    }

    #[test]
    fn pythagorean_inequality(mdp in model(), k in 2usize..5, seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[]);
        let (sigma, scheme, projector) = scenario(&mdp, k, &mut r);
        let w = bellman_apply(&mdp, &scheme.value(&mdp, &random_theta(k, 5.0, &mut r)));
        let star = scheme.values(&projector.project(w.values()).theta);
        let sq = |a: &[f64], b: &[f64]| {
            let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            sigma_norm(&diff, &sigma).powi(2)
        };
        for _ in 0..50 {
            let v = scheme.values(&random_theta(k, 10.0, &mut r));
            prop_assert!(sq(&v, &star) <= sq(&v, w.values()) - sq(&star, w.values()) + 1e-8);
        }
    }

    #[test]
    fn contractive_runs_respect_slack_and_residual_ratios(mdp in model(), k in 2usize..6, seed in any::<u64>()) {
        let scenario = sample_scenario(&mdp, k, seed).unwrap();
        let Ok(run) = pvi_run(&mdp, &scenario, PviOptions::default()) else { return Ok(()) };
        if run.contractive {
            let g = run.gamma.unwrap();
            if let Some(Slack::Value(s)) = run.slack {
                prop_assert!(s >= -1e-6, "slack {}", s);
            }
            for t in 1..run.t_star {
                prop_assert!(run.residuals[t] <= g * run.residuals[t - 1] + 1e-9);
            }
        }
    }

    #[test]
    fn identity_features_contract_like_the_bellman_map(mdp in model(), seed in any::<u64>()) {
        let scenario = sample_scenario(&mdp, 2, seed).unwrap();
        let scheme = AffineScheme::identity(&mdp, DEFAULT_BOX);
        let vstar = solve(&mdp).unwrap();
        let projector = Projector::new(&scheme, &scenario.sigma).unwrap();
        let theta0 = random_theta(scheme.k(), 1.0, &mut rng::stream(seed, &[1]));
        let run = pvi_run_with(&mdp, &vstar, &scheme, &projector, &scenario.tau, &theta0, PviOptions::default()).unwrap();
        prop_assert!(run.contractive);
        prop_assert!(run.gamma.unwrap() <= scenario.tau.gamma() + 0.05);
        // V* is representable up to rounding in the pseudo-inverse
        prop_assert!(run.approx_gap <= 1e-9);
        let limit = scheme.values(run.thetas.last().unwrap());
        prop_assert!(tau_distance(&limit, vstar.values(), &scenario.tau, &mdp) <= 1e-9);
        prop_assert!(run.rel_opt_gap.unwrap().gap <= 1e-12);
    }

    #[test]
    fn fqi_and_fvi_targets_coincide(mdp in model(), seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[]);
        let scheme = QScheme::identity(&mdp, DEFAULT_BOX);
        let theta = random_theta(scheme.k(), 5.0, &mut r);
        let y_fvi = bellman_apply(&mdp, &greedy_values(&mdp, &scheme, &theta));
        let y_fqi = fqi_targets(&mdp, &scheme, &theta);
        let a = mdp.action_count();
        for s in mdp.live_states() {
            let best = y_fqi[s * a..(s + 1) * a].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(best, y_fvi[s]);
        }
    }

    #[test]
    fn projected_gradient_steps_satisfy_the_descent_lemma(k in 2usize..6, seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[]);
        let rows: Vec<Vec<f64>> = (0..12).map(|_| (0..k).map(|_| r.random_range(-1.0..=1.0)).collect()).collect();
        let weights: Vec<f64> = (0..12).map(|_| r.random::<f64>()).collect();
        let targets: Vec<f64> = (0..12).map(|_| r.random_range(-5.0..=5.0)).collect();
        let loss = QuadraticLoss::new(k, |i| rows[i].as_slice(), &weights, &targets);
        let f = |th: &[f64]| weighted_loss(|i| rows[i].as_slice(), &weights, &targets, th);
        let eta = 1.0 / loss.curvature_bound();
        let bounds = ParamBox::symmetric(k - 1, 1.0);
        let mut theta = random_theta(k, 1.0, &mut r);
        for _ in 0..50 {
            let next = pgd_minimize(|th| loss.gradient(th), &bounds, &theta, 1, eta).unwrap();
            let moved: f64 = next.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert!(f(&next) <= f(&theta) - moved / (2.0 * eta) + 1e-9);
            prop_assert!(bounds.contains(&next));
            theta = next;
        }
    }
}

#[test]
fn single_sample_losses_are_unbiased() {
    for (kind, d) in [(ProblemKind::Ksp, 6), (ProblemKind::Tsp, 5), (ProblemKind::Spp, 5)] {
        let mdp = build_mdp(&generate(kind, d, 8).unwrap()).unwrap();
        let mut r = rng::stream(8, &[d as u64]);
        let (sigma, scheme, _) = scenario(&mdp, 3, &mut r);
        let y = fvi_targets(&mdp, &scheme, &random_theta(3, 2.0, &mut r));
        let theta = random_theta(3, 2.0, &mut r);
        let exact = weighted_loss(|s| scheme.row(s), sigma.probs(), y.values(), &theta);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let s = draw_index(sigma.probs(), &mut r);
                let v: f64 = scheme.row(s).iter().zip(&theta).map(|(p, t)| p * t).sum();
                (y[s] - v).powi(2)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - exact).abs() <= 3.0 * sd / (n as f64).sqrt(), "{kind:?}: {mean} vs {exact}");
    }
}

#[test]
fn sample_gaps_shrink_with_more_samples() {
    let mdp = build_mdp(&generate(ProblemKind::Ksp, 6, 4).unwrap()).unwrap();
    let mut r = rng::stream(4, &[]);
    let (sigma, scheme, _) = scenario(&mdp, 3, &mut r);
    let y = fvi_targets(&mdp, &scheme, &random_theta(3, 2.0, &mut r));
    let (_, f_star) = least_squares(&scheme, sigma.probs(), y.values());
    let mut medians = Vec::new();
    for n in [10.0, 100.0, 1000.0] {
        let mut gaps: Vec<f64> = (0..50)
            .map(|rep| {
                let mut rr = rng::stream(4, &[n as u64, rep]);
                let freq = co_mdp::fvi::sample_frequencies(sigma.probs(), n, &mut rr).unwrap();
                // a degenerate batch fits exactly
                let support = freq.iter().filter(|&&w| w > 0.0).count();
                let f_n = if support < scheme.k() { 0.0 } else { least_squares(&scheme, &freq, y.values()).1 };
                (f_n - f_star).abs()
            })
            .collect();
        gaps.sort_by(f64::total_cmp);
        medians.push((gaps[24] + gaps[25]) / 2.0);
    }
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn loss_is_lipschitz_with_the_computed_constants() {
    let mdp = build_mdp(&generate(ProblemKind::Ksp, 6, 2).unwrap()).unwrap();
    let spec = FviStudySpec::new(3, 2);
    let setup = prepare_fvi(&mdp, &spec).unwrap();
    let c = &setup.constants;
    let bounds = setup.scheme.bounds().clone();
    let mut r = rng::stream(2, &[]);
    let inside = |r: &mut Rng| {
        let mut th = vec![1.0];
        th.extend(bounds.lo.iter().zip(&bounds.hi).map(|(&lo, &hi)| r.random_range(lo..=hi)));
        th
    };
    for _ in 0..2000 {
        let base = inside(&mut r);
        let y = fvi_targets(&mdp, &setup.scheme, &base);
        let (a, b) = (inside(&mut r), inside(&mut r));
        let s = mdp.live_states().nth(r.random_range(0..mdp.state_count() - 1)).unwrap();
        let f = |th: &[f64]| {
            let v: f64 = setup.scheme.row(s).iter().zip(th).map(|(p, t)| p * t).sum();
            (y[s] - v).powi(2)
        };
        let dist = a.iter().zip(&b).map(|(x, z)| (x - z).powi(2)).sum::<f64>().sqrt();
        let kappa = c.zeta_kappa * c.lipschitz[s];
        assert!((f(&a) - f(&b)).abs() <= kappa * dist + 1e-9, "state {s}: {} > {}", (f(&a) - f(&b)).abs(), kappa * dist);
    }
}

#[test]
fn census_fvi_tracks_projected_value_iteration() {
    let mdp = build_mdp(&generate(ProblemKind::Ksp, 6, 1).unwrap()).unwrap();
    let vstar = solve(&mdp).unwrap();
    let mut found = None;
    for seed in 0..50 {
        let sc = sample_scenario(&mdp, 4, seed).unwrap();
        let Ok(projector) = Projector::new(&sc.scheme, &sc.sigma) else { continue };
        let run = pvi_run_with(&mdp, &vstar, &sc.scheme, &projector, &sc.tau, &sc.scheme.origin(), PviOptions::default()).unwrap();
        if run.contractive && !run.box_active {
            found = Some((sc, projector, run));
            break;
        }
    }
    let (sc, projector, run) = found.expect("a contractive scenario");
    let tau: &TauWeights = &sc.tau;
    let config = FviConfig { sigma: sc.sigma.clone(), theta0: sc.scheme.origin(), plan: IterationPlan::census(60, 10_000_000, 0.0) };
    let trace = fvi_run(&mdp, &sc.scheme, tau, &config, 0).unwrap();
    let mut worst: f64 = 0.0;
    for w in trace.thetas.windows(2) {
        let target = fvi_targets(&mdp, &sc.scheme, &w[0]);
        let exact = sc.scheme.values(&projector.project(target.values()).theta);
        worst = worst.max(tau_distance(sc.scheme.value(&mdp, &w[1]).values(), &exact, tau, &mdp));
    }
    assert!(worst <= 1e-8, "per-iteration error {worst:e}");
    let limit = sc.scheme.values(run.thetas.last().unwrap());
    let end = tau_distance(sc.scheme.value(&mdp, trace.last()).values(), &limit, tau, &mdp);
    assert!(end <= 1e-6, "distance to the PVI limit {end:e}");
}
