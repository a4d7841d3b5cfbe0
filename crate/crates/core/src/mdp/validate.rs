use serde::Serialize;

use super::Mdp;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &'static str, failure: Option<String>) -> Check {
    Check { name, pass: failure.is_none(), detail: failure.unwrap_or_else(|| "ok".into()) }
}

/// Structural checks. Failures are reported, never raised.
pub fn validate_mdp(mdp: &Mdp) -> ValidationReport {
    let inf = mdp.absorbing;
    let acts = 0..mdp.actions;
    let live: Vec<usize> = mdp.live_states().collect();

    let absorbing = acts
        .clone()
        .find(|&a| mdp.next(inf, a) != inf || mdp.reward(inf, a) != 0.0)
        .map(|a| format!("absorbing state action {a} leaves or pays"));

    let layered = live.iter().find_map(|&s| {
        let l = mdp.layer(s)?;
        if l > mdp.depth {
            return Some(format!("state {s} sits in layer {l} beyond depth {}", mdp.depth));
        }
        acts.clone().find_map(|a| {
            let t = mdp.next(s, a);
            (t != inf && mdp.layer(t) != Some(l + 1))
                .then(|| format!("transition {s} --{a}--> {t} skips a layer"))
        })
    });
    let layered = layered.or_else(|| {
        (mdp.layer(mdp.initial) != Some(0)).then(|| "initial state is not in layer 0".to_string())
    });

    // Best reward collectable on the way to a final state of the last layer.
    let mut best = vec![f64::NEG_INFINITY; mdp.state_count()];
    let mut order = live.clone();
    order.sort_by_key(|&s| std::cmp::Reverse(mdp.layer[s]));
    for &s in &order {
        if mdp.layer(s) == Some(mdp.depth) && mdp.is_final(s) {
            best[s] = 0.0;
            continue;
        }
        for a in acts.clone() {
            let t = mdp.next(s, a);
            if t != inf && best[t] > f64::NEG_INFINITY {
                best[s] = best[s].max(mdp.reward(s, a) + best[t]);
            }
        }
    }
    let extension = live.iter().find_map(|&s| {
        (mdp.is_final(s) && !(best[s] >= -1e-9))
            .then(|| format!("final state {s} cannot reach full length without losing reward (best {})", best[s]))
    });

    let mut reaches = vec![false; mdp.state_count()];
    for &s in &order {
        reaches[s] = mdp.is_final(s) || acts.clone().any(|a| {
            let t = mdp.next(s, a);
            t != inf && reaches[t]
        });
    }
    let reachability = live
        .iter()
        .find(|&&s| !reaches[s])
        .map(|s| format!("state {s} cannot reach a final state"));

    let placement = live.iter().find_map(|&s| {
        acts.clone().find_map(|a| {
            let penalized = mdp.reward(s, a) == -mdp.penalty;
            let should = !mdp.is_final(s) && mdp.next(s, a) == inf;
            (penalized != should).then(|| format!("reward of ({s},{a}) breaks the -M rule"))
        })
    });

    ValidationReport {
        checks: vec![
            check("absorbing", absorbing),
            check("layered", layered),
            check("extension", extension),
            check("reachability", reachability),
            check("penalty", placement),
        ],
    }
}
