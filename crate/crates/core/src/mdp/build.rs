use std::collections::{HashMap, VecDeque};

use super::{Mdp, StateLabel, NO_LAYER};
use crate::error::{Error, Result};
use crate::problems::{Instance, Knapsack, ShortestPath, Tour};

pub const DEFAULT_STATE_LIMIT: usize = 5_000_000;

/// One family's transition map and incremental reward.
trait Family {
    fn actions(&self) -> usize;
    fn depth(&self) -> usize;
    fn penalty(&self) -> f64;
    /// Successor (`None` is the absorbing state) and incremental reward.
    fn step(&self, s: &StateLabel, a: usize) -> (Option<StateLabel>, f64);
    fn is_final(&self, s: &StateLabel) -> bool;
    fn layer(&self, s: &StateLabel) -> usize;
}

/// The usual choices of `M` degenerate to zero on all-zero costs;
/// any positive constant dominates in that case.
fn positive_or_one(m: f64) -> f64 {
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

struct KspFamily<'a> {
    p: &'a Knapsack,
    w: Vec<Vec<i64>>,
    b: Vec<i64>,
}

impl Family for KspFamily<'_> {
    fn actions(&self) -> usize {
        self.p.n
    }
    fn depth(&self) -> usize {
        self.p.d
    }
    fn penalty(&self) -> f64 {
        positive_or_one(self.p.n as f64 * self.p.c.iter().map(|c| c.abs()).sum::<f64>())
    }
    fn step(&self, s: &StateLabel, a: usize) -> (Option<StateLabel>, f64) {
        let zero;
        let (l, load) = match s {
            StateLabel::Init => {
                zero = vec![0; self.p.m];
                (0, &zero)
            }
            StateLabel::Partial { layer, load } => (*layer, load),
            _ => return (None, 0.0),
        };
        let next: Vec<i64> = (0..self.p.m).map(|i| load[i] + self.w[i][l] * a as i64).collect();
        if next.iter().zip(&self.b).any(|(w, b)| w > b) {
            return (None, 0.0);
        }
        let reward = self.p.c[l] * a as f64;
        if l + 1 == self.p.d {
            (Some(StateLabel::Terminal), reward)
        } else {
            (Some(StateLabel::Partial { layer: l + 1, load: next }), reward)
        }
    }
    fn is_final(&self, s: &StateLabel) -> bool {
        matches!(s, StateLabel::Terminal)
    }
    fn layer(&self, s: &StateLabel) -> usize {
        match s {
            StateLabel::Partial { layer, .. } => *layer,
            StateLabel::Terminal => self.p.d,
            _ => 0,
        }
    }
}

struct TspFamily<'a> {
    p: &'a Tour,
}

impl Family for TspFamily<'_> {
    fn actions(&self) -> usize {
        self.p.d
    }
    fn depth(&self) -> usize {
        self.p.d + 1
    }
    fn penalty(&self) -> f64 {
        positive_or_one(self.p.c.iter().flatten().sum())
    }
    fn step(&self, s: &StateLabel, a: usize) -> (Option<StateLabel>, f64) {
        let d = self.p.d;
        let (visited, last) = match s {
            StateLabel::Init if a == 0 => return (Some(StateLabel::Empty), 0.0),
            StateLabel::Empty => (0u64, 0),
            StateLabel::Pointed { visited, last } => (*visited, *last),
            _ => return (None, 0.0),
        };
        let cost = self.p.c[last][a];
        if a == 0 {
            if visited.count_ones() as usize == d - 1 {
                return (Some(StateLabel::Terminal), -cost);
            }
            return (None, 0.0);
        }
        if visited & (1 << a) != 0 {
            return (None, 0.0);
        }
        (Some(StateLabel::Pointed { visited: visited | (1 << a), last: a }), -cost)
    }
    fn is_final(&self, s: &StateLabel) -> bool {
        matches!(s, StateLabel::Terminal)
    }
    fn layer(&self, s: &StateLabel) -> usize {
        match s {
            StateLabel::Init => 0,
            StateLabel::Empty => 1,
            StateLabel::Pointed { visited, .. } => visited.count_ones() as usize + 1,
            _ => self.p.d + 1,
        }
    }
}

struct SppFamily<'a> {
    p: &'a ShortestPath,
}

impl Family for SppFamily<'_> {
    fn actions(&self) -> usize {
        self.p.d + 1
    }
    fn depth(&self) -> usize {
        self.p.d
    }
    fn penalty(&self) -> f64 {
        positive_or_one(self.p.c.iter().flatten().sum())
    }
    fn step(&self, s: &StateLabel, a: usize) -> (Option<StateLabel>, f64) {
        let (l, from) = match s {
            StateLabel::Init => (0, self.p.v_src),
            StateLabel::Mid { layer, vertex } => (*layer, *vertex),
            _ => return (None, 0.0),
        };
        let reward = -self.p.c[from][a];
        if l + 1 < self.p.d {
            (Some(StateLabel::Mid { layer: l + 1, vertex: a }), reward)
        } else if a == self.p.v_tgt {
            (Some(StateLabel::Terminal), reward)
        } else {
            (None, 0.0)
        }
    }
    fn is_final(&self, s: &StateLabel) -> bool {
        match s {
            StateLabel::Terminal => true,
            StateLabel::Mid { vertex, .. } => *vertex == self.p.v_tgt,
            _ => false,
        }
    }
    fn layer(&self, s: &StateLabel) -> usize {
        match s {
            StateLabel::Mid { layer, .. } => *layer,
            StateLabel::Terminal => self.p.d,
            _ => 0,
        }
    }
}

pub fn build_mdp(instance: &Instance) -> Result<Mdp> {
    build_mdp_with_limit(instance, DEFAULT_STATE_LIMIT)
}

/// Breadth-first construction from the initial state; indices follow
/// discovery order.
pub fn build_mdp_with_limit(instance: &Instance, state_limit: usize) -> Result<Mdp> {
    instance.validate()?;
    match instance {
        Instance::Ksp(p) => {
            let (w, b) = p.scaled()?;
            assemble(instance, &KspFamily { p, w, b }, state_limit)
        }
        Instance::Tsp(p) => assemble(instance, &TspFamily { p }, state_limit),
        Instance::Spp(p) => assemble(instance, &SppFamily { p }, state_limit),
    }
}

fn assemble(instance: &Instance, family: &dyn Family, state_limit: usize) -> Result<Mdp> {
    let actions = family.actions();
    let penalty = family.penalty();
    let mut index: HashMap<StateLabel, u32> = HashMap::new();
    let mut labels = Vec::new();
    let mut queue = VecDeque::new();
    let mut next = Vec::new();
    let mut reward = Vec::new();

    let mut intern = |label: StateLabel, labels: &mut Vec<StateLabel>, queue: &mut VecDeque<usize>| {
        if let Some(&i) = index.get(&label) {
            return Ok(i);
        }
        let i = labels.len();
        if i >= state_limit {
            return Err(Error::SizeExceeded { what: "MDP state count".into(), limit: state_limit as u64 });
        }
        index.insert(label.clone(), i as u32);
        labels.push(label);
        queue.push_back(i);
        Ok(i as u32)
    };

    intern(StateLabel::Init, &mut labels, &mut queue)?;
    while let Some(s) = queue.pop_front() {
        // rows are filled in discovery order, so `s` is always the next row
        debug_assert_eq!(next.len(), s * actions);
        let label = labels[s].clone();
        for a in 0..actions {
            if label == StateLabel::Absorbing {
                next.push(s as u32);
                reward.push(0.0);
                continue;
            }
            let (succ, iota) = family.step(&label, a);
            let leaves = succ.is_none();
            let target = intern(succ.unwrap_or(StateLabel::Absorbing), &mut labels, &mut queue)?;
            next.push(target);
            reward.push(if leaves && !family.is_final(&label) { -penalty } else { iota });
        }
    }

    let absorbing = labels.iter().position(|l| *l == StateLabel::Absorbing).unwrap_or_else(|| {
        // every family has a dead end somewhere, but a self-contained model
        // needs the state even if nothing reaches it
        labels.push(StateLabel::Absorbing);
        next.extend(std::iter::repeat_n((labels.len() - 1) as u32, actions));
        reward.extend(std::iter::repeat_n(0.0, actions));
        labels.len() - 1
    });
    let layer = labels
        .iter()
        .map(|l| if *l == StateLabel::Absorbing { NO_LAYER } else { family.layer(l) as u32 })
        .collect();
    let is_final = labels.iter().map(|l| family.is_final(l)).collect();
    Ok(Mdp {
        kind: instance.kind(),
        depth: family.depth(),
        actions,
        initial: 0,
        absorbing,
        penalty,
        next,
        reward,
        layer,
        is_final,
        labels,
    })
}
