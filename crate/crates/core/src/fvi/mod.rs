//! Fitted value iteration and fitted Q-iteration.
//!
//! Each iteration regresses sampled Bellman targets onto an affine scheme by
//! projected gradient descent on the sample-average squared loss. States are
//! drawn i.i.d. from `σ`, so the loss only depends on how often each state
//! was drawn; sampling is done through multinomial counts, which keeps an
//! iteration linear in `|S|` however large `n_t` is.

mod pgd;
mod schedule;

pub use pgd::{pgd_minimize, pgd_until, PgdOutcome};
pub use schedule::{
    compute_constants, estimation_term, fvi_error_bound, iteration_count, plan_schedule, rate_exponent, Beta,
    FviConstants, ScheduleParams, KAPPA_MARGIN,
};

use rand::Rng as _;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::Serialize;

use crate::affine::{AffineScheme, ParamBox};
use crate::error::{Error, Result};
use crate::exact::{bellman_apply, solve, tau_distance, SigmaDist, TauWeights, ValueFunction};
use crate::mdp::Mdp;
use crate::rng::{self, tag, Rng};

/// Above this many draws, multinomial counts use a normal approximation.
pub const EXACT_COUNT_LIMIT: f64 = 1e15;

/// How the states of one iteration are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sampling {
    /// `n_t` i.i.d. draws from `σ`.
    Iid,
    /// Every supported state once, weighted by `σ`. Off-protocol; meant for
    /// checking against exact value iteration.
    Census,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum StepRule {
    /// `η_t` per iteration.
    Fixed(Vec<f64>),
    /// `1/λ` with `λ` a Gershgorin bound on the loss curvature.
    Curvature,
}

/// Per-iteration sample counts, PGD budgets and stepsizes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationPlan {
    pub sampling: Sampling,
    /// `n_t`; ignored under census sampling.
    pub samples: Vec<f64>,
    /// `c_t`.
    pub steps: Vec<u64>,
    pub stepsize: StepRule,
    /// PGD stops once no coordinate moves by more than this.
    pub tol: f64,
}

impl IterationPlan {
    pub fn from_schedule(schedule: &ScheduleParams) -> Self {
        IterationPlan {
            sampling: Sampling::Iid,
            samples: schedule.samples.clone(),
            steps: schedule.steps.iter().map(|&c| saturating_u64(c)).collect(),
            stepsize: StepRule::Fixed(schedule.stepsize.clone()),
            tol: 0.0,
        }
    }

    /// Census batches with PGD run until it stalls below `tol`.
    pub fn census(iterations: usize, steps: u64, tol: f64) -> Self {
        IterationPlan {
            sampling: Sampling::Census,
            samples: vec![1.0; iterations],
            steps: vec![steps; iterations],
            stepsize: StepRule::Curvature,
            tol,
        }
    }

    /// `iterations` rounds of `n` i.i.d. samples and `steps` PGD steps at `eta`.
    pub fn iid(iterations: usize, n: f64, steps: u64, eta: f64) -> Self {
        IterationPlan {
            sampling: Sampling::Iid,
            samples: vec![n; iterations],
            steps: vec![steps; iterations],
            stepsize: StepRule::Fixed(vec![eta; iterations]),
            tol: 0.0,
        }
    }

    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.iterations();
        if t == 0 {
            return Err(Error::InvalidInput("at least one iteration is required".into()));
        }
        if self.samples.len() != t {
            return Err(Error::InvalidInput("sample counts and step counts differ in length".into()));
        }
        if self.samples.iter().any(|n| !(*n >= 1.0)) {
            return Err(Error::InvalidInput("every iteration needs at least one sample".into()));
        }
        if let StepRule::Fixed(eta) = &self.stepsize {
            if eta.len() != t || eta.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(Error::InvalidInput("stepsizes must be positive, one per iteration".into()));
            }
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidInput("tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

fn saturating_u64(x: f64) -> u64 {
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FviConfig {
    pub sigma: SigmaDist,
    pub theta0: Vec<f64>,
    pub plan: IterationPlan,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub t: usize,
    pub samples: f64,
    pub step_budget: u64,
    pub steps_used: u64,
    pub stepsize: f64,
    /// Sample loss at the new iterate.
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FviTrace {
    /// `θ̃_0 … θ̃_T`.
    pub thetas: Vec<Vec<f64>>,
    pub iterations: Vec<IterationRecord>,
    /// `‖V_θ̃t − V*‖_τ` for every `t`.
    pub tau_err: Vec<f64>,
}

impl FviTrace {
    pub fn last(&self) -> &[f64] {
        self.thetas.last().expect("trace holds θ̃_0")
    }

    /// `‖V_θ̃t − reference‖_τ` along the trace.
    pub fn tau_errors_to(&self, mdp: &Mdp, scheme: &AffineScheme, tau: &TauWeights, reference: &[f64]) -> Vec<f64> {
        self.thetas.iter().map(|th| tau_distance(scheme.value(mdp, th).values(), reference, tau, mdp)).collect()
    }
}

/// `Σ w (y − φ·θ)²` up to a constant: `θᵀGθ − 2hᵀθ`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticLoss {
    k: usize,
    g: Vec<f64>,
    h: Vec<f64>,
}

impl QuadraticLoss {
    /// `rows(i)` is the feature row of item `i`; items with zero weight are
    /// skipped.
    pub fn new<'a, F>(k: usize, rows: F, weights: &[f64], targets: &[f64]) -> Self
    where
        F: Fn(usize) -> &'a [f64],
    {
        let mut g = vec![0.0; k * k];
        let mut h = vec![0.0; k];
        for (i, (&w, &y)) in weights.iter().zip(targets).enumerate() {
            if w == 0.0 {
                continue;
            }
            let phi = rows(i);
            for a in 0..k {
                let wa = w * phi[a];
                h[a] += wa * y;
                for b in a..k {
                    g[a * k + b] += wa * phi[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                g[a * k + b] = g[b * k + a];
            }
        }
        QuadraticLoss { k, g, h }
    }

    /// `2(Gθ − h)`.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|a| 2.0 * (self.g[a * self.k..(a + 1) * self.k].iter().zip(theta).map(|(g, t)| g * t).sum::<f64>() - self.h[a]))
            .collect()
    }

    /// Gershgorin bound on the top eigenvalue of the Hessian restricted to
    /// the free coordinates.
    pub fn curvature_bound(&self) -> f64 {
        (1..self.k).map(|a| (1..self.k).map(|b| 2.0 * self.g[a * self.k + b].abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// `Σ w (y − φ·θ)²`, evaluated term by term.
pub fn weighted_loss<'a, F>(rows: F, weights: &[f64], targets: &[f64], theta: &[f64]) -> f64
where
    F: Fn(usize) -> &'a [f64],
{
    weights
        .iter()
        .zip(targets)
        .enumerate()
        .filter(|(_, (w, _))| **w != 0.0)
        .map(|(i, (w, y))| {
            let v: f64 = rows(i).iter().zip(theta).map(|(p, t)| p * t).sum();
            w * (y - v).powi(2)
        })
        .sum()
}

/// Empirical frequencies of `n` i.i.d. draws from `probs`.
///
/// Counts come from sequential binomials; beyond [`EXACT_COUNT_LIMIT`] draws
/// each binomial is replaced by a rounded normal.
pub fn sample_frequencies(probs: &[f64], n: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::InvalidInput(format!("sample count {n} must be a finite number ≥ 1")));
    }
    let n = n.floor();
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    let mut out = vec![0.0; probs.len()];
    for (i, &p) in probs.iter().enumerate() {
        if left == 0.0 || p == 0.0 {
            mass -= p;
            continue;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let count = if q >= 1.0 {
            left
        } else if left <= EXACT_COUNT_LIMIT {
            Binomial::new(left as u64, q).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng) as f64
        } else {
            let z: f64 = StandardNormal.sample(rng);
            (left * q + z * (left * q * (1.0 - q)).sqrt()).round().clamp(0.0, left)
        };
        out[i] = count / n;
        left -= count;
        mass -= p;
    }
    Ok(out)
}

/// FVI targets `BV_θ(s) = max_a r(s,a) + V_θ(λ(s,a))`.
pub fn fvi_targets(mdp: &Mdp, scheme: &AffineScheme, theta: &[f64]) -> ValueFunction {
    bellman_apply(mdp, &scheme.value(mdp, theta))
}

fn batch_weights(sampling: Sampling, probs: &[f64], n: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    match sampling {
        Sampling::Census => Ok(probs.to_vec()),
        Sampling::Iid => sample_frequencies(probs, n, rng),
    }
}

/// One regression: weights, targets, warm start and PGD.
fn fit<'a, F>(
    plan: &IterationPlan,
    t: usize,
    k: usize,
    rows: F,
    weights: &[f64],
    targets: &[f64],
    bounds: &ParamBox,
    init: &[f64],
) -> Result<(PgdOutcome, f64, f64)>
where
    F: Fn(usize) -> &'a [f64] + Copy,
{
    let loss = QuadraticLoss::new(k, rows, weights, targets);
    let eta = match &plan.stepsize {
        StepRule::Fixed(eta) => eta[t],
        StepRule::Curvature => {
            let c = loss.curvature_bound();
            if c > 0.0 {
                1.0 / c
            } else {
                1.0
            }
        }
    };
    let out = pgd_until(|th| loss.gradient(th), bounds, init, plan.steps[t], eta, plan.tol)?;
    let value = weighted_loss(rows, weights, targets, &out.theta);
    Ok((out, eta, value))
}

/// FVI with `V*` computed on the spot.
pub fn fvi_run(mdp: &Mdp, scheme: &AffineScheme, tau: &TauWeights, config: &FviConfig, seed: u64) -> Result<FviTrace> {
    let vstar = solve(mdp)?;
    fvi_run_with(mdp, &vstar, scheme, tau, config, seed)
}

/// FVI against a known `V*`. Iteration `t` draws from the stream
/// `(seed, FVI, t)`.
pub fn fvi_run_with(
    mdp: &Mdp,
    vstar: &ValueFunction,
    scheme: &AffineScheme,
    tau: &TauWeights,
    config: &FviConfig,
    seed: u64,
) -> Result<FviTrace> {
    let plan = &config.plan;
    plan.validate()?;
    check_theta0(&config.theta0, scheme.k(), scheme.bounds())?;
    if config.sigma.probs().len() != mdp.state_count() || scheme.states() != mdp.state_count() {
        return Err(Error::InvalidInput("distribution, scheme and MDP cover different states".into()));
    }
    let err = |th: &[f64]| tau_distance(scheme.value(mdp, th).values(), vstar.values(), tau, mdp);
    let mut thetas = vec![config.theta0.clone()];
    let mut iterations = Vec::with_capacity(plan.iterations());
    let mut tau_err = vec![err(&config.theta0)];
    for t in 0..plan.iterations() {
        let current = thetas.last().unwrap();
        let targets = fvi_targets(mdp, scheme, current);
        let mut rng = rng::stream(seed, &[tag::FVI, t as u64]);
        let weights = batch_weights(plan.sampling, config.sigma.probs(), plan.samples[t], &mut rng)?;
        let (out, eta, loss) =
            fit(plan, t, scheme.k(), |s| scheme.row(s), &weights, targets.values(), scheme.bounds(), current)?;
        iterations.push(IterationRecord {
            t,
            samples: plan.samples[t],
            step_budget: plan.steps[t],
            steps_used: out.evaluated,
            stepsize: eta,
            loss,
        });
        tau_err.push(err(&out.theta));
        thetas.push(out.theta);
    }
    Ok(FviTrace { thetas, iterations, tau_err })
}

fn check_theta0(theta0: &[f64], k: usize, bounds: &ParamBox) -> Result<()> {
    if theta0.len() != k || theta0[0] != 1.0 {
        return Err(Error::InvalidInput("θ̃_0 must have K entries with θ[0] = 1".into()));
    }
    if !bounds.contains(theta0) {
        return Err(Error::InvalidInput("θ̃_0 lies outside the parameter box".into()));
    }
    Ok(())
}

/// Affine scheme over state–action pairs; row `s·|A| + a` is `φ(s,a)` and the
/// absorbing rows are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct QScheme {
    k: usize,
    actions: usize,
    phi: Vec<f64>,
    bounds: ParamBox,
}

impl QScheme {
    pub fn new(mdp: &Mdp, rows: Vec<Vec<f64>>, bounds: ParamBox) -> Result<Self> {
        let k = rows.first().map_or(0, |r| r.len());
        let a = mdp.action_count();
        if k < 2 {
            return Err(Error::InvalidInput("scheme needs a bias column and at least one feature".into()));
        }
        if rows.len() != mdp.state_count() * a || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("feature table shape mismatch".into()));
        }
        let s_inf = mdp.absorbing();
        if rows[s_inf * a..(s_inf + 1) * a].iter().flatten().any(|&x| x != 0.0) {
            return Err(Error::InvalidInput("absorbing state features must be zero".into()));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("features must be finite".into()));
        }
        if bounds.lo.len() != k - 1 || bounds.hi.len() != k - 1 {
            return Err(Error::InvalidInput("parameter box does not match the scheme".into()));
        }
        Ok(QScheme { k, actions: a, phi: rows.concat(), bounds })
    }

    /// Zero bias column plus one indicator per non-absorbing pair, so
    /// `K = 1 + (|S|−1)|A|`.
    pub fn identity(mdp: &Mdp, bound: f64) -> Self {
        let a = mdp.action_count();
        let k = 1 + (mdp.state_count() - 1) * a;
        let mut rows = vec![vec![0.0; k]; mdp.state_count() * a];
        let mut j = 1;
        for s in mdp.live_states() {
            for b in 0..a {
                rows[s * a + b][j] = 1.0;
                j += 1;
            }
        }
        Self::new(mdp, rows, ParamBox::symmetric(k - 1, bound)).expect("identity scheme is valid")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bounds(&self) -> &ParamBox {
        &self.bounds
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        self.pair_row(s * self.actions + a)
    }

    fn pair_row(&self, i: usize) -> &[f64] {
        &self.phi[i * self.k..(i + 1) * self.k]
    }

    pub fn origin(&self) -> Vec<f64> {
        let mut theta = vec![0.0; self.k];
        theta[0] = 1.0;
        theta
    }

    /// `Q_θ` as a flat `|S|·|A|` table.
    pub fn q_values(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.k, "parameter length");
        self.phi.chunks_exact(self.k).map(|row| row.iter().zip(theta).map(|(p, t)| p * t).sum()).collect()
    }
}

/// Distribution over state–action pairs, positive exactly off the absorbing
/// state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairDist {
    probs: Vec<f64>,
}

impl PairDist {
    pub fn new(mdp: &Mdp, probs: Vec<f64>) -> Result<Self> {
        let a = mdp.action_count();
        if probs.len() != mdp.state_count() * a {
            return Err(Error::InvalidWeights("distribution length differs from pair count".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            let off = i / a == mdp.absorbing();
            if off && p != 0.0 || !off && !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidWeights("pairs off the absorbing state need positive mass, the rest none".into()));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("masses sum to {total}")));
        }
        Ok(PairDist { probs })
    }

    pub fn uniform(mdp: &Mdp) -> Self {
        let a = mdp.action_count();
        let p = 1.0 / ((mdp.state_count() - 1) * a) as f64;
        let probs = (0..mdp.state_count() * a).map(|i| if i / a == mdp.absorbing() { 0.0 } else { p }).collect();
        PairDist { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FqiConfig {
    pub sigma: PairDist,
    pub theta0: Vec<f64>,
    pub plan: IterationPlan,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FqiTrace {
    pub thetas: Vec<Vec<f64>>,
    pub iterations: Vec<IterationRecord>,
}

/// `V(s) = max_a Q_θ(s,a)`, zero at the absorbing state.
pub fn greedy_values(mdp: &Mdp, scheme: &QScheme, theta: &[f64]) -> ValueFunction {
    let q = scheme.q_values(theta);
    let a = mdp.action_count();
    let values = (0..mdp.state_count())
        .map(|s| if s == mdp.absorbing() { 0.0 } else { q[s * a..(s + 1) * a].iter().copied().fold(f64::NEG_INFINITY, f64::max) })
        .collect();
    ValueFunction::pinned(mdp, values)
}

/// FQI targets `r(s,a) + max_a′ Q_θ(λ(s,a), a′)`; zero on absorbing pairs.
pub fn fqi_targets(mdp: &Mdp, scheme: &QScheme, theta: &[f64]) -> Vec<f64> {
    let v = greedy_values(mdp, scheme, theta);
    let a = mdp.action_count();
    let mut y = vec![0.0; mdp.state_count() * a];
    for s in mdp.live_states() {
        for b in 0..a {
            y[s * a + b] = mdp.reward(s, b) + v[mdp.next(s, b)];
        }
    }
    y
}

/// Fitted Q-iteration; iteration `t` draws from the stream `(seed, FVI, t)`.
pub fn fqi_run(mdp: &Mdp, scheme: &QScheme, config: &FqiConfig, seed: u64) -> Result<FqiTrace> {
    let plan = &config.plan;
    plan.validate()?;
    check_theta0(&config.theta0, scheme.k(), scheme.bounds())?;
    if config.sigma.probs().len() != scheme.phi.len() / scheme.k {
        return Err(Error::InvalidInput("distribution and scheme cover different pairs".into()));
    }
    let mut thetas = vec![config.theta0.clone()];
    let mut iterations = Vec::with_capacity(plan.iterations());
    for t in 0..plan.iterations() {
        let current = thetas.last().unwrap();
        let targets = fqi_targets(mdp, scheme, current);
        let mut rng = rng::stream(seed, &[tag::FVI, t as u64]);
        let weights = batch_weights(plan.sampling, config.sigma.probs(), plan.samples[t], &mut rng)?;
        let (out, eta, loss) = fit(plan, t, scheme.k(), |i| scheme.pair_row(i), &weights, &targets, scheme.bounds(), current)?;
        iterations.push(IterationRecord {
            t,
            samples: plan.samples[t],
            step_budget: plan.steps[t],
            steps_used: out.evaluated,
            stepsize: eta,
            loss,
        });
        thetas.push(out.theta);
    }
    Ok(FqiTrace { thetas, iterations })
}

/// One uniformly random index weighted by `probs`.
pub fn draw_index(probs: &[f64], rng: &mut Rng) -> usize {
    let mut u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|&p| p > 0.0).expect("some mass")
}
