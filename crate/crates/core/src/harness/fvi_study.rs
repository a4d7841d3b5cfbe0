//! Repeated FVI runs on one scenario under the planned schedule.

use rayon::prelude::*;
use serde::Serialize;

use crate::affine::{pvi_run_with, sample_features, sample_sigma, AffineScheme, ParamBox, PviOptions, PviResult, Projector, DEFAULT_BOX};
use crate::error::{Error, Result};
use crate::exact::{compute_rho, solve, tau_norm, SigmaDist, TauWeights, ValueFunction};
use crate::fvi::{
    compute_constants, fvi_error_bound, fvi_run_with, plan_schedule, FviConfig, FviConstants, FviTrace, IterationPlan,
    ScheduleParams,
};
use crate::mdp::Mdp;
use crate::rng::{self, tag};

/// Scenario draws tried before giving up on finding a contractive one.
pub const SCENARIO_ATTEMPTS: u64 = 50;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FviStudySpec {
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
    pub eps0: f64,
    pub delta: f64,
    pub reps: usize,
    pub seed: u64,
}

impl FviStudySpec {
    pub fn new(k: usize, seed: u64) -> Self {
        FviStudySpec { k, eps: 0.05, eps0: 0.2, delta: 1.0, reps: 20, seed }
    }
}

/// Scenario, PVI reference and schedule shared by all repetitions.
#[derive(Clone, Debug)]
pub struct FviSetup {
    pub vstar: ValueFunction,
    pub sigma: SigmaDist,
    pub scheme: AffineScheme,
    pub tau: TauWeights,
    pub pvi: PviResult,
    /// `Ṽ*`, the last PVI iterate.
    pub limit: Vec<f64>,
    pub attempt: u64,
    pub rho: f64,
    pub constants: FviConstants,
    pub schedule: ScheduleParams,
    pub bound: f64,
}

/// Draws `(σ, Φ)` until PVI contracts, then fixes the parameter box around
/// the PVI limit and plans the schedule. `τ` is geometric with ratio 0.9 and
/// `θ̃_0` sits at the origin of the box.
pub fn prepare_fvi(mdp: &Mdp, spec: &FviStudySpec) -> Result<FviSetup> {
    let vstar = solve(mdp)?;
    let tau = TauWeights::default_for(mdp);
    let rho = compute_rho(mdp, &tau)?;
    for attempt in 0..SCENARIO_ATTEMPTS {
        let mut rng = rng::stream(spec.seed, &[tag::SCENARIO, attempt]);
        let sigma = sample_sigma(mdp, &mut rng);
        let scheme = sample_features(mdp, spec.k, DEFAULT_BOX, &mut rng)?;
        let projector = match Projector::new(&scheme, &sigma) {
            Ok(p) => p,
            Err(Error::Singular(msg)) => {
                log::warn!("scenario attempt {attempt}: {msg}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let pvi = pvi_run_with(mdp, &vstar, &scheme, &projector, &tau, &scheme.origin(), PviOptions::default())?;
        let gamma = match pvi.gamma {
            Some(g) if pvi.contractive => g,
            _ => continue,
        };
        let last = pvi.thetas.last().unwrap();
        let bound = last[1..].iter().fold(1.0f64, |m, t| m.max(2.0 * t.abs()));
        let scheme = scheme.with_bounds(ParamBox::symmetric(spec.k - 1, bound))?;
        let origin = scheme.value(mdp, &scheme.origin());
        if tau_norm(origin.values(), &tau, mdp) > rho {
            continue;
        }
        let limit = scheme.values(last);
        let constants = compute_constants(mdp, &scheme, &tau, &sigma, gamma, pvi.approx_gap)?;
        let schedule = plan_schedule(spec.eps, spec.eps0, spec.delta, &constants, rho)?;
        let bound = fvi_error_bound(&constants, &schedule);
        return Ok(FviSetup { vstar, sigma, scheme, tau, pvi, limit, attempt, rho, constants, schedule, bound });
    }
    Err(Error::Assumption(format!("no contractive scenario in {SCENARIO_ATTEMPTS} draws")))
}

/// One trace per repetition, each on its own seed; repetitions run in
/// parallel.
pub fn run_fvi_reps(mdp: &Mdp, setup: &FviSetup, spec: &FviStudySpec) -> Result<Vec<FviTrace>> {
    let config = FviConfig {
        sigma: setup.sigma.clone(),
        theta0: setup.scheme.origin(),
        plan: IterationPlan::from_schedule(&setup.schedule),
    };
    (0..spec.reps)
        .into_par_iter()
        .map(|r| {
            let seed = rng::derive(spec.seed, &[tag::FVI, r as u64]);
            fvi_run_with(mdp, &setup.vstar, &setup.scheme, &setup.tau, &config, seed)
        })
        .collect()
}
