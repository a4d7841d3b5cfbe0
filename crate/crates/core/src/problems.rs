//! Problem instances, feasibility and objectives, random generators and a
//! brute-force oracle.
//!
//! A candidate solution is a token string over the alphabet `0..alphabet()`.
//! Objectives are maximized; TSP and SPP objectives are negated costs.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Largest number of DFS nodes the brute-force oracle may visit.
pub const BRUTE_FORCE_LIMIT: u64 = 100_000_000;

/// Cities are tracked in a `u64` bitmask by the TSP construction.
pub const TSP_MAX_D: usize = 63;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Ksp,
    Tsp,
    Spp,
}

impl ProblemKind {
    pub fn label(self) -> &'static str {
        match self {
            ProblemKind::Ksp => "KSP",
            ProblemKind::Tsp => "TSP",
            ProblemKind::Spp => "SPP",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ksp" => Ok(ProblemKind::Ksp),
            "tsp" => Ok(ProblemKind::Tsp),
            "spp" => Ok(ProblemKind::Spp),
            other => Err(Error::InvalidInput(format!("unknown problem kind {other:?}"))),
        }
    }
}

/// Integer knapsack: maximize `c·x` subject to `w x <= b`, `x_j ∈ {0..n-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knapsack {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub c: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// Closed tour through cities `0..d`, starting and ending at city 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    pub d: usize,
    pub c: Vec<Vec<f64>>,
}

/// Walk of at most `d` arcs from `v_src` ending at `v_tgt` over `d+1` vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortestPath {
    pub d: usize,
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "vSrc")]
    pub v_src: usize,
    #[serde(rename = "vTgt")]
    pub v_tgt: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Instance {
    Ksp(Knapsack),
    Tsp(Tour),
    Spp(ShortestPath),
}

fn finite(xs: &[f64], what: &str) -> Result<()> {
    match xs.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(Error::InvalidInput(format!("{what} contains non-finite {x}"))),
        None => Ok(()),
    }
}

fn square(c: &[Vec<f64>], size: usize, what: &str) -> Result<()> {
    if c.len() != size || c.iter().any(|r| r.len() != size) {
        return Err(Error::InvalidInput(format!("{what} must be {size}x{size}")));
    }
    for row in c {
        finite(row, what)?;
        if row.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidInput(format!("{what} has a negative entry")));
        }
    }
    Ok(())
}

impl Knapsack {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 || self.m == 0 {
            return Err(Error::InvalidInput("knapsack needs d, n, m >= 1".into()));
        }
        if self.c.len() != self.d || self.b.len() != self.m || self.w.len() != self.m {
            return Err(Error::InvalidInput("knapsack dimensions disagree".into()));
        }
        if self.w.iter().any(|r| r.len() != self.d) {
            return Err(Error::InvalidInput("each weight row needs d entries".into()));
        }
        finite(&self.c, "c")?;
        finite(&self.b, "b")?;
        for r in &self.w {
            finite(r, "w")?;
        }
        if self.b.iter().chain(self.w.iter().flatten()).any(|&x| x < 0.0) {
            return Err(Error::InvalidInput("weights and capacities must be nonnegative".into()));
        }
        Ok(())
    }

    /// Weights and capacities as integers under the smallest common scale
    /// `10^k`, `k <= 6`, that represents every value exactly.
    pub fn scaled(&self) -> Result<(Vec<Vec<i64>>, Vec<i64>)> {
        let values: Vec<f64> = self.w.iter().flatten().chain(&self.b).copied().collect();
        for k in 0..=6 {
            let s = 10f64.powi(k);
            let exact = values.iter().all(|&v| {
                let r = (v * s).round();
                r.abs() < 9.0e15 && r / s == v
            });
            if exact {
                let to = |v: f64| (v * s).round() as i64;
                let w = self.w.iter().map(|r| r.iter().map(|&v| to(v)).collect()).collect();
                let b = self.b.iter().map(|&v| to(v)).collect();
                return Ok((w, b));
            }
        }
        Err(Error::InvalidInput(
            "knapsack weights need at most 6 decimal places to index loads exactly".into(),
        ))
    }
}

impl Tour {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || self.d > TSP_MAX_D {
            return Err(Error::InvalidInput(format!("TSP needs 3 <= d <= {TSP_MAX_D}")));
        }
        square(&self.c, self.d, "c")
    }
}

impl ShortestPath {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidInput("SPP needs d >= 1".into()));
        }
        square(&self.c, self.d + 1, "c")?;
        if self.v_src > self.d || self.v_tgt > self.d {
            return Err(Error::InvalidInput("SPP endpoints out of range".into()));
        }
        Ok(())
    }
}

impl Instance {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Instance::Ksp(_) => ProblemKind::Ksp,
            Instance::Tsp(_) => ProblemKind::Tsp,
            Instance::Spp(_) => ProblemKind::Spp,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Instance::Ksp(p) => p.d,
            Instance::Tsp(p) => p.d,
            Instance::Spp(p) => p.d,
        }
    }

    /// Size of the token alphabet, which is also the MDP action count.
    pub fn alphabet(&self) -> usize {
        match self {
            Instance::Ksp(p) => p.n,
            Instance::Tsp(p) => p.d,
            Instance::Spp(p) => p.d + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Instance::Ksp(p) => p.validate(),
            Instance::Tsp(p) => p.validate(),
            Instance::Spp(p) => p.validate(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Feasibility and objective of a candidate. `Ok(None)` means infeasible.
pub fn evaluate(instance: &Instance, x: &[usize]) -> Result<Option<f64>> {
    let alphabet = instance.alphabet();
    if let Some(&token) = x.iter().find(|&&t| t >= alphabet) {
        return Err(Error::TokenOutOfAlphabet { token, alphabet });
    }
    Ok(match instance {
        Instance::Ksp(p) => {
            if x.len() != p.d {
                return Ok(None);
            }
            let fits = p.w.iter().zip(&p.b).all(|(row, &cap)| {
                row.iter().zip(x).map(|(&w, &a)| w * a as f64).sum::<f64>() <= cap
            });
            fits.then(|| p.c.iter().zip(x).map(|(&c, &a)| c * a as f64).sum())
        }
        Instance::Tsp(p) => {
            if x.len() != p.d + 1 || x[0] != 0 || x[p.d] != 0 {
                return Ok(None);
            }
            let mut seen = vec![false; p.d];
            for &v in &x[1..p.d] {
                if v == 0 || seen[v] {
                    return Ok(None);
                }
                seen[v] = true;
            }
            Some(-x.windows(2).map(|e| p.c[e[0]][e[1]]).sum::<f64>())
        }
        Instance::Spp(p) => {
            if x.is_empty() || x.len() > p.d || *x.last().unwrap() != p.v_tgt {
                return Ok(None);
            }
            let mut cost = p.c[p.v_src][x[0]];
            for e in x.windows(2) {
                cost += p.c[e[0]][e[1]];
            }
            Some(-cost)
        }
    })
}

/// Optimal objective and its lexicographically smallest maximizer.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub value: f64,
    pub solution: Vec<usize>,
    pub visited: u64,
}

struct Budget {
    visited: u64,
}

impl Budget {
    fn tick(&mut self) -> Result<()> {
        self.visited += 1;
        if self.visited > BRUTE_FORCE_LIMIT {
            return Err(Error::SizeExceeded {
                what: "brute-force enumeration".into(),
                limit: BRUTE_FORCE_LIMIT,
            });
        }
        Ok(())
    }
}

/// Exhaustive search in lexicographic order with feasibility pruning.
///
/// Ties keep the first maximizer found, which is the lexicographically
/// smallest one because the search visits strings in lexicographic order.
pub fn brute_force_optimum(instance: &Instance) -> Result<Optimum> {
    instance.validate()?;
    let mut budget = Budget { visited: 0 };
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut prefix = Vec::new();
    match instance {
        Instance::Ksp(p) => {
            let mut load = vec![0.0; p.m];
            ksp_dfs(p, &mut prefix, 0.0, &mut load, &mut best, &mut budget)?
        }
        Instance::Tsp(p) => {
            prefix.push(0);
            tsp_dfs(p, &mut prefix, 0.0, 1, &mut best, &mut budget)?
        }
        Instance::Spp(p) => spp_dfs(p, &mut prefix, 0.0, &mut best, &mut budget)?,
    }
    let (value, solution) = best.ok_or_else(|| Error::InvalidInput("instance has no feasible solution".into()))?;
    Ok(Optimum { value, solution, visited: budget.visited })
}

fn offer(best: &mut Option<(f64, Vec<usize>)>, value: f64, x: &[usize]) {
    if best.as_ref().is_none_or(|(v, _)| value > *v) {
        *best = Some((value, x.to_vec()));
    }
}

fn ksp_dfs(
    p: &Knapsack,
    prefix: &mut Vec<usize>,
    value: f64,
    load: &mut [f64],
    best: &mut Option<(f64, Vec<usize>)>,
    budget: &mut Budget,
) -> Result<()> {
    budget.tick()?;
    let j = prefix.len();
    if j == p.d {
        offer(best, value, prefix);
        return Ok(());
    }
    for a in 0..p.n {
        let next: Vec<f64> = (0..p.m).map(|i| load[i] + p.w[i][j] * a as f64).collect();
        if next.iter().zip(&p.b).any(|(l, cap)| l > cap) {
            // loads only grow with `a` since weights are nonnegative
            break;
        }
        let mut next = next;
        prefix.push(a);
        ksp_dfs(p, prefix, value + p.c[j] * a as f64, &mut next, best, budget)?;
        prefix.pop();
    }
    Ok(())
}

fn tsp_dfs(
    p: &Tour,
    prefix: &mut Vec<usize>,
    cost: f64,
    visited: u64,
    best: &mut Option<(f64, Vec<usize>)>,
    budget: &mut Budget,
) -> Result<()> {
    budget.tick()?;
    let last = *prefix.last().unwrap();
    if prefix.len() == p.d {
        prefix.push(0);
        offer(best, -(cost + p.c[last][0]), prefix);
        prefix.pop();
        return Ok(());
    }
    for v in 1..p.d {
        if visited & (1 << v) != 0 {
            continue;
        }
        prefix.push(v);
        tsp_dfs(p, prefix, cost + p.c[last][v], visited | (1 << v), best, budget)?;
        prefix.pop();
    }
    Ok(())
}

fn spp_dfs(
    p: &ShortestPath,
    prefix: &mut Vec<usize>,
    cost: f64,
    best: &mut Option<(f64, Vec<usize>)>,
    budget: &mut Budget,
) -> Result<()> {
    budget.tick()?;
    if prefix.last() == Some(&p.v_tgt) {
        offer(best, -cost, prefix);
    }
    if prefix.len() == p.d {
        return Ok(());
    }
    // Costs are nonnegative, so extensions never beat the prefix, and any
    // extension is visited after the incumbent and loses ties.
    if best.as_ref().is_some_and(|(v, _)| -cost <= *v) {
        return Ok(());
    }
    let from = prefix.last().copied().unwrap_or(p.v_src);
    for v in 0..=p.d {
        prefix.push(v);
        spp_dfs(p, prefix, cost + p.c[from][v], best, budget)?;
        prefix.pop();
    }
    Ok(())
}

/// Random knapsack: `m = 1`, `n = d`, `c_j ~ N(1, 2²)`, `w_j ~ Poisson(1)`
/// redrawn while zero, `b ~ Poisson(d)`.
pub fn generate_ksp(d: usize, seed: u64) -> Result<Instance> {
    if d == 0 {
        return Err(Error::InvalidInput("d must be positive".into()));
    }
    let mut rng = rng::stream(seed, &[rng::tag::INSTANCE, 0, d as u64]);
    let normal = Normal::new(1.0, 2.0).expect("valid normal");
    let unit = Poisson::new(1.0).expect("valid poisson");
    let cap = Poisson::new(d as f64).expect("valid poisson");
    let c: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
    let mut w = Vec::with_capacity(d);
    for _ in 0..d {
        let draw = (0..1000).map(|_| unit.sample(&mut rng)).find(|&x| x > 0.0);
        w.push(draw.ok_or_else(|| Error::Generation("1000 consecutive zero weights".into()))?);
    }
    let b = cap.sample(&mut rng);
    Ok(Instance::Ksp(Knapsack { d, n: d, m: 1, c, w: vec![w], b: vec![b] }))
}

/// Random Euclidean TSP on `d` uniform points in the unit square.
pub fn generate_tsp(d: usize, seed: u64) -> Result<Instance> {
    if !(3..=TSP_MAX_D).contains(&d) {
        return Err(Error::InvalidInput(format!("TSP needs 3 <= d <= {TSP_MAX_D}")));
    }
    let mut rng = rng::stream(seed, &[rng::tag::INSTANCE, 1, d as u64]);
    let pts: Vec<(f64, f64)> = (0..d).map(|_| (rng.random(), rng.random())).collect();
    let mut c = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i + 1..d {
            let dist = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
            c[i][j] = dist;
            c[j][i] = dist;
        }
    }
    Ok(Instance::Tsp(Tour { d, c }))
}

/// Random SPP on `d+1` vertices with arc costs in `(0, 1]`, a free self-loop
/// at the target, source `0` and target `d`.
pub fn generate_spp(d: usize, seed: u64) -> Result<Instance> {
    if d == 0 {
        return Err(Error::InvalidInput("d must be positive".into()));
    }
    let mut rng = rng::stream(seed, &[rng::tag::INSTANCE, 2, d as u64]);
    let mut c: Vec<Vec<f64>> = (0..=d)
        .map(|_| (0..=d).map(|_| 1.0 - rng.random::<f64>()).collect())
        .collect();
    c[d][d] = 0.0;
    Ok(Instance::Spp(ShortestPath { d, c, v_src: 0, v_tgt: d }))
}

pub fn generate(kind: ProblemKind, d: usize, seed: u64) -> Result<Instance> {
    match kind {
        ProblemKind::Ksp => generate_ksp(d, seed),
        ProblemKind::Tsp => generate_tsp(d, seed),
        ProblemKind::Spp => generate_spp(d, seed),
    }
}
