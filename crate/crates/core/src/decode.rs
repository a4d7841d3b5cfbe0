//! Greedy decoding of value functions into candidate solutions.

use serde::Serialize;

use crate::error::Result;
use crate::exact::{greedy_action, TauWeights, ValueFunction};
use crate::mdp::Mdp;
use crate::problems::{brute_force_optimum, evaluate, Instance};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecodeStep {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next: usize,
}

/// Steps taken from the initial state. The last step is the one that moves
/// into the absorbing state; its action is not part of `tokens`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeTranscript {
    pub steps: Vec<DecodeStep>,
    pub tokens: Vec<usize>,
    #[serde(rename = "terminalState")]
    pub terminal_state: usize,
}

impl DecodeTranscript {
    /// The emitted string is feasible iff the walk stopped in a final state.
    pub fn feasible(&self, mdp: &Mdp) -> bool {
        mdp.is_final(self.terminal_state)
    }

    /// Reward collected by the emitted tokens.
    pub fn collected(&self) -> f64 {
        self.steps[..self.tokens.len()].iter().map(|s| s.reward).sum()
    }
}

/// Follows `argmax_a r(s,a) + V(λ(s,a))` (lowest index on ties) until the
/// chosen action would enter the absorbing state.
pub fn greedy_decode(mdp: &Mdp, v: &ValueFunction) -> DecodeTranscript {
    let mut steps = Vec::with_capacity(mdp.depth() + 2);
    let mut s = mdp.initial();
    loop {
        let a = greedy_action(mdp, v.values(), s);
        let next = mdp.next(s, a);
        steps.push(DecodeStep { state: s, action: a, reward: mdp.reward(s, a), next });
        if next == mdp.absorbing() {
            break;
        }
        s = next;
        assert!(steps.len() <= mdp.depth() + 1, "decode did not terminate: MDP is not layered");
    }
    let tokens = steps[..steps.len() - 1].iter().map(|s| s.action).collect();
    DecodeTranscript { steps, tokens, terminal_state: s }
}

/// Tokens as a candidate solution; SPP walks lose trailing target self-loops.
pub fn decoded_solution(instance: &Instance, tokens: &[usize]) -> Vec<usize> {
    let mut x = tokens.to_vec();
    if let Instance::Spp(p) = instance {
        while x.len() > 1 && x[x.len() - 1] == p.v_tgt && x[x.len() - 2] == p.v_tgt {
            x.pop();
        }
    }
    x
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapCheck {
    pub feasible: bool,
    pub objective: Option<f64>,
    pub optimum: f64,
    pub gap: Option<f64>,
    pub bound: f64,
    #[serde(rename = "boundHolds")]
    pub bound_holds: bool,
}

/// Checks `optimum − g(y) ≤ 2 ε τ_0 (d_Π + 1)` for the decoded `y`, with
/// the optimum from the brute-force oracle.
pub fn verify_gap(
    instance: &Instance,
    mdp: &Mdp,
    transcript: &DecodeTranscript,
    eps: f64,
    tau: &TauWeights,
) -> Result<GapCheck> {
    let optimum = brute_force_optimum(instance)?.value;
    verify_gap_against(instance, mdp, transcript, eps, tau, optimum)
}

/// [`verify_gap`] with a known optimum.
pub fn verify_gap_against(
    instance: &Instance,
    mdp: &Mdp,
    transcript: &DecodeTranscript,
    eps: f64,
    tau: &TauWeights,
    optimum: f64,
) -> Result<GapCheck> {
    let objective = evaluate(instance, &decoded_solution(instance, &transcript.tokens))?;
    let bound = 2.0 * eps * tau.tau0() * (mdp.depth() + 1) as f64;
    let gap = objective.map(|g| optimum - g);
    Ok(GapCheck {
        feasible: objective.is_some(),
        objective,
        optimum,
        gap,
        bound,
        bound_holds: gap.is_some_and(|g| g <= bound + 1e-9),
    })
}

/// `P(a | s) ∝ exp(r(s,a) + V(λ(s,a)))`.
pub fn softmax_policy(mdp: &Mdp, v: &ValueFunction, state: usize) -> Vec<f64> {
    let scores: Vec<f64> =
        (0..mdp.action_count()).map(|a| mdp.reward(state, a) + v[mdp.next(state, a)]).collect();
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|x| (x - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Lowest index holding the largest entry.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Relative gap `|(g* − g)/g*|`, or the absolute gap when `g* = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub gap: f64,
    pub absolute: bool,
}

impl GapReport {
    pub fn between(optimum: f64, achieved: f64) -> Self {
        if optimum == 0.0 {
            GapReport { gap: achieved.abs(), absolute: true }
        } else {
            GapReport { gap: ((optimum - achieved) / optimum).abs(), absolute: false }
        }
    }
}
