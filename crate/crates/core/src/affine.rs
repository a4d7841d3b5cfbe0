//! Affine value-function schemes, σ-weighted projection and projected value
//! iteration.
//!
//! A parameter `θ` has `K` entries with `θ[0] = 1` pinned; `V_θ(s) = φ(s)·θ`
//! and the absorbing row of `Φ` is zero. Column 0 of `Φ` is the bias column.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::decode::{greedy_decode, GapReport};
use crate::error::{Error, Result};
use crate::exact::{bellman_apply, solve, tau_distance, SigmaDist, TauWeights, ValueFunction};
use crate::mdp::Mdp;
use crate::problems::{brute_force_optimum, evaluate, Instance};
use crate::rng::{self, Rng};

pub const DEFAULT_BOX: f64 = 1e6;
/// Relative singular-value threshold for the rank check.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Coordinate bounds for `θ[1..]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn symmetric(free_dim: usize, bound: f64) -> Self {
        ParamBox { lo: vec![-bound; free_dim], hi: vec![bound; free_dim] }
    }

    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta[1..].iter().zip(self.lo.iter().zip(&self.hi)).all(|(t, (l, h))| l <= t && t <= h)
    }

    pub fn clamp(&self, theta: &mut [f64]) {
        for (t, (l, h)) in theta[1..].iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *t = t.clamp(*l, *h);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineScheme {
    k: usize,
    phi: Vec<f64>,
    bounds: ParamBox,
}

impl AffineScheme {
    /// `rows[s]` is `φ(s)`; the absorbing row must be zero.
    pub fn new(mdp: &Mdp, rows: Vec<Vec<f64>>, bounds: ParamBox) -> Result<Self> {
        let k = rows.first().map_or(0, |r| r.len());
        if k < 2 {
            return Err(Error::InvalidInput("scheme needs a bias column and at least one feature".into()));
        }
        if rows.len() != mdp.state_count() || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("feature table shape mismatch".into()));
        }
        if rows[mdp.absorbing()].iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidInput("absorbing state features must be zero".into()));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("features must be finite".into()));
        }
        if bounds.lo.len() != k - 1 || bounds.hi.len() != k - 1 || bounds.lo.iter().zip(&bounds.hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidInput("parameter box does not match the scheme".into()));
        }
        Ok(AffineScheme { k, phi: rows.concat(), bounds })
    }

    /// Zero bias column plus one indicator column per non-absorbing state.
    pub fn identity(mdp: &Mdp, bound: f64) -> Self {
        let live: Vec<usize> = mdp.live_states().collect();
        let k = live.len() + 1;
        let mut rows = vec![vec![0.0; k]; mdp.state_count()];
        for (j, &s) in live.iter().enumerate() {
            rows[s][j + 1] = 1.0;
        }
        Self::new(mdp, rows, ParamBox::symmetric(k - 1, bound)).expect("identity scheme is valid")
    }

    /// Embedding dimension including the bias column.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn states(&self) -> usize {
        self.phi.len() / self.k
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.phi[s * self.k..(s + 1) * self.k]
    }

    pub fn bounds(&self) -> &ParamBox {
        &self.bounds
    }

    pub fn with_bounds(mut self, bounds: ParamBox) -> Result<Self> {
        if bounds.lo.len() != self.k - 1 || bounds.hi.len() != self.k - 1 {
            return Err(Error::InvalidInput("parameter box does not match the scheme".into()));
        }
        self.bounds = bounds;
        Ok(self)
    }

    /// Parameter with the bias weight set and all features off.
    pub fn origin(&self) -> Vec<f64> {
        let mut theta = vec![0.0; self.k];
        theta[0] = 1.0;
        theta
    }

    pub fn values(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.k, "parameter length");
        self.phi.chunks_exact(self.k).map(|row| row.iter().zip(theta).map(|(p, t)| p * t).sum()).collect()
    }

    pub fn value(&self, mdp: &Mdp, theta: &[f64]) -> ValueFunction {
        ValueFunction::pinned(mdp, self.values(theta))
    }
}

/// Precomputed σ-weighted least-squares operator of one scheme.
#[derive(Clone, Debug)]
pub struct Projector {
    k: usize,
    /// `(K−1) × |S|` map from `V − φ_0` to the free coordinates.
    op: DMatrix<f64>,
    bias: Vec<f64>,
    bounds: ParamBox,
}

/// Result of one projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub theta: Vec<f64>,
    /// Whether the unconstrained minimizer left the parameter box.
    pub box_active: bool,
}

impl Projector {
    pub fn new(scheme: &AffineScheme, sigma: &SigmaDist) -> Result<Self> {
        let n = scheme.states();
        let free = scheme.k - 1;
        if sigma.probs().len() != n {
            return Err(Error::InvalidInput("distribution and scheme cover different states".into()));
        }
        let root: Vec<f64> = sigma.probs().iter().map(|p| p.sqrt()).collect();
        let a = DMatrix::from_fn(n, free, |s, j| root[s] * scheme.row(s)[j + 1]);
        let svd = a.svd(true, true);
        let top = svd.singular_values.max();
        let bottom = svd.singular_values.min();
        if free > n || !(bottom > RANK_TOLERANCE * top) {
            return Err(Error::Singular(format!(
                "singular values span [{bottom:e}, {top:e}] over {free} columns"
            )));
        }
        let pinv = svd.pseudo_inverse(0.0).map_err(|e| Error::Numerical(e.to_string()))?;
        let op = DMatrix::from_fn(free, n, |j, s| pinv[(j, s)] * root[s]);
        let bias = (0..n).map(|s| scheme.row(s)[0]).collect();
        Ok(Projector { k: scheme.k, op, bias, bounds: scheme.bounds.clone() })
    }

    /// `argmin_θ ‖V_θ − V‖_σ` over `θ[0] = 1`.
    pub fn project(&self, v: &[f64]) -> Projection {
        let n = self.bias.len();
        let mut theta = vec![0.0; self.k];
        theta[0] = 1.0;
        for s in 0..n {
            let r = v[s] - self.bias[s];
            for (t, w) in theta[1..].iter_mut().zip(self.op.column(s).iter()) {
                *t += w * r;
            }
        }
        let box_active = !self.bounds.contains(&theta);
        Projection { theta, box_active }
    }
}

/// `project` as a free function.
pub fn project(v: &[f64], scheme: &AffineScheme, sigma: &SigmaDist) -> Result<(Vec<f64>, Vec<f64>)> {
    let theta = Projector::new(scheme, sigma)?.project(v).theta;
    let values = scheme.values(&theta);
    Ok((theta, values))
}

/// Everything one PVI run needs besides the MDP.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub sigma: SigmaDist,
    pub scheme: AffineScheme,
    pub tau: TauWeights,
    pub theta0: Vec<f64>,
}

fn simplex(rng: &mut Rng, len: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..len)
        .map(|_| loop {
            let x: f64 = Exp1.sample(rng);
            if x > 0.0 {
                break x;
            }
        })
        .collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Uniform draw from the simplex over non-absorbing states.
pub fn sample_sigma(mdp: &Mdp, rng: &mut Rng) -> SigmaDist {
    let weights = simplex(rng, mdp.state_count() - 1);
    let mut probs = vec![0.0; mdp.state_count()];
    for (s, w) in mdp.live_states().zip(weights) {
        probs[s] = w;
    }
    SigmaDist::new(mdp, probs).expect("simplex draw is a valid distribution")
}

/// Layer weights from suffix sums of a uniform simplex draw.
pub fn sample_tau(mdp: &Mdp, rng: &mut Rng) -> TauWeights {
    loop {
        let draw = simplex(rng, mdp.depth() + 2);
        let mut taus = vec![0.0; draw.len()];
        let mut acc = 0.0;
        for l in (0..draw.len()).rev() {
            acc += draw[l];
            taus[l] = acc;
        }
        // suffix sums of positive draws only tie when a draw underflows
        if let Ok(tau) = TauWeights::new(taus) {
            return tau;
        }
    }
}

/// `φ(s)` uniform in `[−1,1]^K` off the absorbing state.
pub fn sample_features(mdp: &Mdp, k: usize, bound: f64, rng: &mut Rng) -> Result<AffineScheme> {
    let rows = (0..mdp.state_count())
        .map(|s| {
            if s == mdp.absorbing() {
                vec![0.0; k]
            } else {
                (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect()
            }
        })
        .collect();
    AffineScheme::new(mdp, rows, ParamBox::symmetric(k.saturating_sub(1), bound))
}

pub fn sample_theta0(k: usize, rng: &mut Rng) -> Vec<f64> {
    let mut theta: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
    theta[0] = 1.0;
    theta
}

pub fn sample_scenario(mdp: &Mdp, k: usize, seed: u64) -> Result<Scenario> {
    if k < 2 {
        return Err(Error::InvalidInput("K must be at least 2".into()));
    }
    let mut rng = rng::stream(seed, &[rng::tag::SCENARIO]);
    let sigma = sample_sigma(mdp, &mut rng);
    let scheme = sample_features(mdp, k, DEFAULT_BOX, &mut rng)?;
    let tau = sample_tau(mdp, &mut rng);
    let theta0 = sample_theta0(k, &mut rng);
    Ok(Scenario { sigma, scheme, tau, theta0 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PviOptions {
    pub iterations: usize,
    pub eps: f64,
}

impl Default for PviOptions {
    fn default() -> Self {
        PviOptions { iterations: 200, eps: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Slack {
    Value(f64),
    /// `V*` lies in the scheme, so the ratio is undefined.
    FullyExpressive,
}

impl Slack {
    pub fn value(self) -> Option<f64> {
        match self {
            Slack::Value(x) => Some(x),
            Slack::FullyExpressive => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PviResult {
    /// `θ_0 … θ_{T−1}`.
    pub thetas: Vec<Vec<f64>>,
    /// `‖V_{t+1} − V_t‖_τ` for `t = 0 … T−2`.
    pub residuals: Vec<f64>,
    pub t_star: usize,
    /// `None` when `t* = 0` leaves no ratio to take.
    pub gamma: Option<f64>,
    pub contractive: bool,
    pub slack: Option<Slack>,
    /// Decoded from `V_{θ_{t*}}` for contractive runs. `None` when the
    /// decoded string is infeasible.
    pub rel_opt_gap: Option<GapReport>,
    pub box_active: bool,
    /// `‖V_{θ_{T−1}} − Π V*‖_τ`.
    pub limit_distance: f64,
    /// `‖V* − Π V*‖_τ`.
    pub approx_gap: f64,
}

/// Projected value iteration, computing `V*` first.
pub fn pvi_run(mdp: &Mdp, scenario: &Scenario, options: PviOptions) -> Result<PviResult> {
    let vstar = solve(mdp)?;
    let projector = Projector::new(&scenario.scheme, &scenario.sigma)?;
    pvi_run_with(mdp, &vstar, &scenario.scheme, &projector, &scenario.tau, &scenario.theta0, options)
}

/// Projected value iteration with a known `V*` and a prepared projector.
pub fn pvi_run_with(
    mdp: &Mdp,
    vstar: &ValueFunction,
    scheme: &AffineScheme,
    projector: &Projector,
    tau: &TauWeights,
    theta0: &[f64],
    options: PviOptions,
) -> Result<PviResult> {
    let t_max = options.iterations;
    if t_max < 2 {
        return Err(Error::InvalidInput("PVI needs at least two iterates".into()));
    }
    if theta0.len() != scheme.k() || theta0[0] != 1.0 {
        return Err(Error::InvalidInput("initial parameter must have K entries and bias weight 1".into()));
    }
    let mut thetas = vec![theta0.to_vec()];
    let mut values = vec![scheme.value(mdp, theta0)];
    let mut box_active = false;
    for _ in 1..t_max {
        let target = bellman_apply(mdp, values.last().unwrap());
        let p = projector.project(target.values());
        box_active |= p.box_active;
        values.push(scheme.value(mdp, &p.theta));
        thetas.push(p.theta);
    }

    let dist = |a: &ValueFunction, b: &[f64]| tau_distance(a.values(), b, tau, mdp);
    let residuals: Vec<f64> = values.windows(2).map(|w| dist(&w[1], w[0].values())).collect();
    let t_star = residuals.iter().rposition(|&r| r > options.eps).map_or(0, |t| t + 1).min(t_max - 2);

    let proj_star = scheme.values(&projector.project(vstar.values()).theta);
    let succ = (1..t_star).map(|t| residuals[t] / residuals[t - 1]);
    let toward = (0..t_star).map(|t| dist(&values[t + 1], &proj_star) / dist(&values[t], vstar.values()));
    let gamma = succ.chain(toward).reduce(f64::max);
    let contractive = gamma.is_some_and(|g| g < 1.0);

    let approx_gap = tau_distance(vstar.values(), &proj_star, tau, mdp);
    let limit_distance = dist(&values[t_max - 1], &proj_star);
    let slack = contractive.then(|| {
        let g = gamma.unwrap();
        if approx_gap <= 1e-14 {
            Slack::FullyExpressive
        } else {
            Slack::Value(g / (1.0 - g) - limit_distance / approx_gap)
        }
    });
    let rel_opt_gap = if contractive {
        let transcript = greedy_decode(mdp, &values[t_star]);
        transcript
            .feasible(mdp)
            .then(|| GapReport::between(vstar[mdp.initial()], transcript.collected()))
    } else {
        None
    };

    Ok(PviResult {
        thetas,
        residuals,
        t_star,
        gamma,
        contractive,
        slack,
        rel_opt_gap,
        box_active,
        limit_distance,
        approx_gap,
    })
}

/// Slack of a finished run.
pub fn slack(result: &PviResult) -> Result<Slack> {
    if !result.contractive {
        return Err(Error::Precondition("slack is only defined for contractive runs".into()));
    }
    Ok(result.slack.expect("contractive runs carry a slack"))
}

/// Relative optimality gap of the greedy decode of `v` against the oracle.
pub fn rel_opt_gap(instance: &Instance, mdp: &Mdp, v: &ValueFunction) -> Result<GapReport> {
    let transcript = greedy_decode(mdp, v);
    let x = crate::decode::decoded_solution(instance, &transcript.tokens);
    let achieved = evaluate(instance, &x)?
        .ok_or_else(|| Error::Numerical("greedy decode produced an infeasible string".into()))?;
    Ok(GapReport::between(brute_force_optimum(instance)?.value, achieved))
}
