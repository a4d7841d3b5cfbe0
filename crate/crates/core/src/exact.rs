//! Bellman map, weighted norms, exact value iteration and the ρ-ball radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;

/// Values indexed by state, zero at the absorbing state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction {
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(mdp: &Mdp) -> Self {
        ValueFunction { values: vec![0.0; mdp.state_count()] }
    }

    /// Rejects tables of the wrong length or with a nonzero absorbing entry.
    pub fn new(mdp: &Mdp, values: Vec<f64>) -> Result<Self> {
        if values.len() != mdp.state_count() {
            return Err(Error::InvalidInput(format!(
                "value table has {} entries for {} states",
                values.len(),
                mdp.state_count()
            )));
        }
        if values[mdp.absorbing()] != 0.0 {
            return Err(Error::InvalidInput("value at the absorbing state must be 0".into()));
        }
        Ok(ValueFunction { values })
    }

    /// Builds from `values` after forcing the absorbing entry to zero.
    pub fn pinned(mdp: &Mdp, mut values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mdp.state_count(), "value table length");
        values[mdp.absorbing()] = 0.0;
        ValueFunction { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl std::ops::Index<usize> for ValueFunction {
    type Output = f64;
    fn index(&self, s: usize) -> &f64 {
        &self.values[s]
    }
}

/// Layer weights `τ_0 > … > τ_{d_Π} > τ_∞ > 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauWeights {
    taus: Vec<f64>,
    gamma: f64,
}

impl TauWeights {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.len() < 2 {
            return Err(Error::InvalidWeights("need at least two layer weights".into()));
        }
        if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidWeights("weights must be positive and finite".into()));
        }
        if taus.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidWeights("weights must strictly decrease".into()));
        }
        let gamma = taus.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        Ok(TauWeights { taus, gamma })
    }

    /// `τ_l = g^l` for layers `0..=depth` and `τ_∞ = g^{depth+1}`.
    pub fn geometric(depth: usize, g: f64) -> Result<Self> {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::InvalidWeights(format!("ratio {g} outside (0, 1)")));
        }
        Self::new((0..=depth as i32 + 1).map(|l| g.powi(l)).collect())
    }

    pub fn default_for(mdp: &Mdp) -> Self {
        Self::geometric(mdp.depth(), 0.9).expect("geometric weights are valid")
    }

    /// Contraction modulus `max_l τ_{l+1}/τ_l`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn tau0(&self) -> f64 {
        self.taus[0]
    }

    pub fn tau_inf(&self) -> f64 {
        *self.taus.last().unwrap()
    }

    /// `τ_{d_Π}`, the weight of the deepest layer.
    pub fn tau_last_layer(&self) -> f64 {
        self.taus[self.taus.len() - 2]
    }

    fn check(&self, mdp: &Mdp) {
        assert_eq!(self.taus.len(), mdp.depth() + 2, "weights do not match MDP depth");
    }

    pub fn weight(&self, mdp: &Mdp, s: usize) -> f64 {
        match mdp.layer(s) {
            Some(l) => self.taus[l],
            None => self.tau_inf(),
        }
    }

    /// Per-state weights.
    pub fn state_weights(&self, mdp: &Mdp) -> Vec<f64> {
        self.check(mdp);
        (0..mdp.state_count()).map(|s| self.weight(mdp, s)).collect()
    }
}

/// State distribution supported on every non-absorbing state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaDist {
    probs: Vec<f64>,
}

impl SigmaDist {
    pub fn new(mdp: &Mdp, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != mdp.state_count() {
            return Err(Error::InvalidWeights("distribution length differs from state count".into()));
        }
        if probs[mdp.absorbing()] != 0.0 {
            return Err(Error::InvalidWeights("absorbing state must have zero mass".into()));
        }
        if mdp.live_states().any(|s| !(probs[s] > 0.0 && probs[s].is_finite())) {
            return Err(Error::InvalidWeights("every non-absorbing state needs positive mass".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("masses sum to {total}")));
        }
        Ok(SigmaDist { probs })
    }

    pub fn uniform(mdp: &Mdp) -> Self {
        let live = (mdp.state_count() - 1) as f64;
        let probs = (0..mdp.state_count())
            .map(|s| if s == mdp.absorbing() { 0.0 } else { 1.0 / live })
            .collect();
        SigmaDist { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// `BV(s) = max_a r(s,a) + V(λ(s,a))`, with the absorbing entry kept at zero.
pub fn bellman_apply(mdp: &Mdp, v: &ValueFunction) -> ValueFunction {
    let mut out = vec![0.0; mdp.state_count()];
    for s in mdp.live_states() {
        out[s] = (0..mdp.action_count())
            .map(|a| mdp.reward(s, a) + v[mdp.next(s, a)])
            .fold(f64::NEG_INFINITY, f64::max);
    }
    ValueFunction { values: out }
}

/// `max_s |V(s)| / τ(s)`.
pub fn tau_norm(v: &[f64], tau: &TauWeights, mdp: &Mdp) -> f64 {
    tau.check(mdp);
    v.iter().enumerate().map(|(s, x)| x.abs() / tau.weight(mdp, s)).fold(0.0, f64::max)
}

/// `‖a − b‖_τ`.
pub fn tau_distance(a: &[f64], b: &[f64], tau: &TauWeights, mdp: &Mdp) -> f64 {
    tau.check(mdp);
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(s, (x, y))| (x - y).abs() / tau.weight(mdp, s))
        .fold(0.0, f64::max)
}

/// `sqrt(Σ σ(s) V(s)²)`.
pub fn sigma_norm(v: &[f64], sigma: &SigmaDist) -> f64 {
    v.iter().zip(&sigma.probs).map(|(x, p)| p * x * x).sum::<f64>().sqrt()
}

/// `c(σ,τ) = min over the support of τ(s)·sqrt(σ(s))`.
pub fn c_sigma_tau(sigma: &SigmaDist, tau: &TauWeights, mdp: &Mdp) -> f64 {
    mdp.live_states()
        .map(|s| tau.weight(mdp, s) * sigma.probs[s].sqrt())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViOutcome {
    pub values: ValueFunction,
    pub iterations: usize,
    pub residual: f64,
}

/// Synchronous sweeps until successive iterates differ by at most `tol` in
/// τ-norm.
pub fn value_iteration(
    mdp: &Mdp,
    v0: &ValueFunction,
    tau: &TauWeights,
    tol: f64,
    max_iter: usize,
) -> Result<ViOutcome> {
    let mut v = v0.clone();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = bellman_apply(mdp, &v);
        residual = tau_distance(next.values(), v.values(), tau, mdp);
        v = next;
        if residual <= tol {
            return Ok(ViOutcome { values: v, iterations: it, residual });
        }
    }
    Err(Error::Convergence { iterations: max_iter, residual })
}

/// `V*` from the zero function with default weights and sweep budget.
pub fn solve(mdp: &Mdp) -> Result<ValueFunction> {
    let tau = TauWeights::default_for(mdp);
    Ok(value_iteration(mdp, &ValueFunction::zeros(mdp), &tau, 1e-12, mdp.depth() + 2)?.values)
}

/// Radius `R sqrt(W) γ/(1−γ) (1/τ_∞ − 1/τ_0)` of a τ-ball holding `V*`.
pub fn rho_bound(max_reward: f64, max_girth: usize, tau: &TauWeights) -> Result<f64> {
    let g = tau.gamma();
    if g >= 1.0 {
        return Err(Error::InvalidWeights("contraction modulus must be below 1".into()));
    }
    Ok(max_reward * (max_girth as f64).sqrt() * g / (1.0 - g) * (1.0 / tau.tau_inf() - 1.0 / tau.tau0()))
}

/// [`rho_bound`] with `R` the largest non-penalty reward magnitude, so the
/// ball also holds `V*` when every reward is negative.
pub fn compute_rho(mdp: &Mdp, tau: &TauWeights) -> Result<f64> {
    let stats = mdp.layer_stats();
    rho_bound(stats.reward_scale, stats.max_girth, tau)
}

/// Lowest-index maximizer of `r(s,a) + V(λ(s,a))` per state; 0 at the
/// absorbing state.
pub fn extract_policy(mdp: &Mdp, v: &ValueFunction) -> Vec<usize> {
    (0..mdp.state_count())
        .map(|s| if s == mdp.absorbing() { 0 } else { greedy_action(mdp, v.values(), s) })
        .collect()
}

pub(crate) fn greedy_action(mdp: &Mdp, v: &[f64], s: usize) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for a in 0..mdp.action_count() {
        let score = mdp.reward(s, a) + v[mdp.next(s, a)];
        if score > best_score {
            best = a;
            best_score = score;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_mdp, StateLabel};
    use crate::problems::{Instance, Knapsack, Tour};

    fn eq22(c: [f64; 3]) -> Mdp {
        build_mdp(&Instance::Ksp(Knapsack {
            d: 3,
            n: 5,
            m: 1,
            c: c.to_vec(),
            w: vec![vec![2.0, 1.0, 2.0]],
            b: vec![4.0],
        }))
        .unwrap()
    }

    #[test]
    fn one_sweep_from_zero() {
        let mdp = eq22([1.0; 3]);
        let bv = bellman_apply(&mdp, &ValueFunction::zeros(&mdp));
        assert_eq!(bv[mdp.initial()], 2.0);
        assert_eq!(bv[mdp.find(&StateLabel::Terminal).unwrap()], 0.0);
        assert_eq!(bv[mdp.absorbing()], 0.0);
    }

    #[test]
    fn knapsack_optimum_and_fixed_point() {
        let mdp = eq22([1.0; 3]);
        let tau = TauWeights::default_for(&mdp);
        let out = value_iteration(&mdp, &ValueFunction::zeros(&mdp), &tau, 1e-12, mdp.depth() + 2).unwrap();
        assert_eq!(out.values[mdp.initial()], 4.0);
        assert!(out.iterations <= mdp.depth() + 2);
        assert_eq!(bellman_apply(&mdp, &out.values), out.values);
        assert_eq!(solve(&eq22([0.0; 3])).unwrap()[0], 0.0);
    }

    #[test]
    fn policy_rollout_collects_the_optimum() {
        let mdp = eq22([1.0; 3]);
        let v = solve(&mdp).unwrap();
        let pi = extract_policy(&mdp, &v);
        let (mut s, mut total) = (mdp.initial(), 0.0);
        while !mdp.is_final(s) {
            total += mdp.reward(s, pi[s]);
            s = mdp.next(s, pi[s]);
        }
        assert_eq!(total, 4.0);
        assert_eq!(pi[mdp.absorbing()], 0);
        // with V = 0 the policy just picks the best immediate reward
        let greedy = extract_policy(&mdp, &ValueFunction::zeros(&mdp));
        assert_eq!(greedy[mdp.initial()], 2);
    }

    #[test]
    fn triangle_tour_value() {
        let mdp = build_mdp(&Instance::Tsp(Tour {
            d: 3,
            c: vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]],
        }))
        .unwrap();
        assert_eq!(solve(&mdp).unwrap()[mdp.initial()], -4.0);
    }

    #[test]
    fn rho_formula() {
        let tau = TauWeights::new(vec![1.0, 0.5, 0.25]).unwrap();
        assert_eq!(tau.gamma(), 0.5);
        assert_eq!(rho_bound(1.0, 1, &tau).unwrap(), 3.0);
        assert_eq!(rho_bound(0.0, 4, &tau).unwrap(), 0.0);
        let mdp = eq22([1.0; 3]);
        let tau = TauWeights::default_for(&mdp);
        let v = solve(&mdp).unwrap();
        assert!(tau_norm(v.values(), &tau, &mdp) <= compute_rho(&mdp, &tau).unwrap());
    }

    #[test]
    fn weights_must_strictly_decrease() {
        assert!(TauWeights::new(vec![1.0, 1.0, 0.5]).is_err());
        assert!(TauWeights::new(vec![1.0, 0.5, 0.0]).is_err());
        assert!(TauWeights::geometric(3, 1.0).is_err());
    }

    #[test]
    fn norms_on_two_states() {
        let sigma = SigmaDist { probs: vec![0.5, 0.5] };
        assert_eq!(sigma_norm(&[2.0, 0.0], &sigma), 2f64.sqrt());
        assert_eq!(sigma_norm(&[0.0, 0.0], &sigma), 0.0);
    }

    #[test]
    fn pinned_value_functions() {
        let mdp = eq22([1.0; 3]);
        let mut raw = vec![1.0; mdp.state_count()];
        assert!(ValueFunction::new(&mdp, raw.clone()).is_err());
        raw[mdp.absorbing()] = 0.0;
        assert!(ValueFunction::new(&mdp, raw).is_ok());
        assert!(ValueFunction::new(&mdp, vec![0.0; 2]).is_err());
        let uniform = SigmaDist::uniform(&mdp);
        assert!(SigmaDist::new(&mdp, uniform.probs().to_vec()).is_ok());
    }
}
