//! Layered deterministic MDPs built from problem instances.
//!
//! States are equivalence classes of partial token strings. Every transition
//! from layer `l` lands in layer `l + 1` or in the absorbing state, which
//! loops on itself with zero reward.

mod binary;
mod build;
mod validate;

pub use build::{build_mdp, build_mdp_with_limit, DEFAULT_STATE_LIMIT};
pub use validate::{validate_mdp, Check, ValidationReport};

use serde::Serialize;

use crate::problems::ProblemKind;

/// Canonical label of a state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum StateLabel {
    Init,
    /// Knapsack prefix of `layer` items with scaled integer loads per constraint.
    Partial { layer: usize, load: Vec<i64> },
    /// Tour that has left the depot but visited nothing yet.
    Empty,
    /// Tour that visited the cities in the bitmask and stands at `last`.
    Pointed { visited: u64, last: usize },
    /// Walk of `layer` arcs ending at `vertex`.
    Mid { layer: usize, vertex: usize },
    Terminal,
    Absorbing,
}

impl std::fmt::Display for StateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StateLabel::Init => write!(f, "s_e"),
            StateLabel::Partial { layer, load } => {
                let load: Vec<String> = load.iter().map(|w| w.to_string()).collect();
                write!(f, "s_({},{})", layer, load.join(","))
            }
            StateLabel::Empty => write!(f, "s_{{}}"),
            StateLabel::Pointed { visited, last } => {
                let cities: Vec<String> =
                    (0..64).filter(|c| visited & (1u64 << c) != 0).map(|c| c.to_string()).collect();
                write!(f, "s_({{{}}},{})", cities.join(","), last)
            }
            StateLabel::Mid { layer, vertex } => write!(f, "s_({layer},{vertex})"),
            StateLabel::Terminal => write!(f, "s_T"),
            StateLabel::Absorbing => write!(f, "s_inf"),
        }
    }
}

/// Marker stored in the layer table for the absorbing state.
pub const NO_LAYER: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    pub(crate) kind: ProblemKind,
    pub(crate) depth: usize,
    pub(crate) actions: usize,
    pub(crate) initial: usize,
    pub(crate) absorbing: usize,
    pub(crate) penalty: f64,
    pub(crate) next: Vec<u32>,
    pub(crate) reward: Vec<f64>,
    pub(crate) layer: Vec<u32>,
    pub(crate) is_final: Vec<bool>,
    /// Empty when the model was loaded from a binary dump.
    pub(crate) labels: Vec<StateLabel>,
}

/// Largest reward, largest layer and every layer's size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerStats {
    pub max_reward: f64,
    /// Largest `|r(s,a)|` over transitions that do not carry the `−M`
    /// penalty. Equals `max_reward` when no reward is negative.
    pub reward_scale: f64,
    pub max_girth: usize,
    pub layer_sizes: Vec<usize>,
}

impl Mdp {
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn state_count(&self) -> usize {
        self.layer.len()
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    /// Index of the last layer, `d_Π`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn absorbing(&self) -> usize {
        self.absorbing
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    #[inline]
    pub fn next(&self, s: usize, a: usize) -> usize {
        self.next[s * self.actions + a] as usize
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.actions + a]
    }

    /// `None` for the absorbing state.
    pub fn layer(&self, s: usize) -> Option<usize> {
        (self.layer[s] != NO_LAYER).then(|| self.layer[s] as usize)
    }

    pub fn is_final(&self, s: usize) -> bool {
        self.is_final[s]
    }

    pub fn label(&self, s: usize) -> Option<&StateLabel> {
        self.labels.get(s)
    }

    pub fn find(&self, label: &StateLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Non-absorbing state indices in ascending order.
    pub fn live_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.state_count()).filter(move |&s| s != self.absorbing)
    }

    /// Follows `tokens` from the initial state.
    pub fn walk(&self, tokens: &[usize]) -> (usize, f64) {
        tokens.iter().fold((self.initial, 0.0), |(s, total), &a| {
            (self.next(s, a), total + self.reward(s, a))
        })
    }

    pub fn layer_stats(&self) -> LayerStats {
        let mut layer_sizes = vec![0; self.depth + 1];
        for s in self.live_states() {
            layer_sizes[self.layer[s] as usize] += 1;
        }
        let max_reward = self.reward.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut reward_scale: f64 = 0.0;
        for s in self.live_states() {
            for a in 0..self.actions {
                if self.is_final(s) || self.next(s, a) != self.absorbing {
                    reward_scale = reward_scale.max(self.reward(s, a).abs());
                }
            }
        }
        LayerStats {
            max_reward,
            reward_scale,
            max_girth: layer_sizes.iter().copied().max().unwrap_or(0),
            layer_sizes,
        }
    }
}
