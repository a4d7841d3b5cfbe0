use rayon::prelude::*;
use serde::Serialize;

use crate::affine::{
    pvi_run_with, sample_features, sample_sigma, sample_tau, sample_theta0, AffineScheme, PviOptions, Projector, Slack,
    DEFAULT_BOX,
};
use crate::decode::GapReport;
use crate::error::{Error, Result};
use crate::exact::{solve, ValueFunction};
use crate::mdp::{build_mdp, Mdp};
use crate::problems::{generate, ProblemKind};
use crate::rng::{self, tag};

/// Upper limit on PVI runs per experiment.
pub const MAX_RUNS: usize = 2_000_000;
/// Fresh triplet draws allowed when a projection turns out singular.
pub const SINGULAR_RETRIES: u64 = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub kind: ProblemKind,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub instance_count: usize,
    pub sigma_per_instance: usize,
    pub triplets_per_scenario: usize,
    #[serde(rename = "T")]
    pub iterations: usize,
    pub eps: f64,
    pub seed: u64,
    /// Replace sampled features by one indicator column per state.
    pub identity_embedding: bool,
}

impl ScenarioSpec {
    /// 10 instances × 10 distributions × 20 triplets.
    pub fn desk(kind: ProblemKind, d: usize, k: usize, seed: u64) -> Self {
        ScenarioSpec {
            kind,
            d,
            k,
            instance_count: 10,
            sigma_per_instance: 10,
            triplets_per_scenario: 20,
            iterations: PviOptions::default().iterations,
            eps: PviOptions::default().eps,
            seed,
            identity_embedding: false,
        }
    }

    /// 50 × 50 × 50.
    pub fn full(kind: ProblemKind, d: usize, k: usize, seed: u64) -> Self {
        ScenarioSpec { instance_count: 50, sigma_per_instance: 50, triplets_per_scenario: 50, ..Self::desk(kind, d, k, seed) }
    }

    pub fn run_count(&self) -> usize {
        self.instance_count * self.sigma_per_instance * self.triplets_per_scenario
    }

    pub fn validate(&self) -> Result<()> {
        if self.instance_count == 0 || self.sigma_per_instance == 0 || self.triplets_per_scenario == 0 {
            return Err(Error::InvalidInput("all counts must be positive".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidInput("K must be at least 2".into()));
        }
        if self.iterations < 2 {
            return Err(Error::InvalidInput("T must be at least 2".into()));
        }
        if self.run_count() > MAX_RUNS {
            return Err(Error::SizeExceeded { what: "PVI run count".into(), limit: MAX_RUNS as u64 });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub scenario_id: usize,
    pub triplet_id: usize,
    pub k: usize,
    pub gamma: Option<f64>,
    pub contractive: bool,
    pub t_star: usize,
    pub slack: Option<Slack>,
    pub rel_opt_gap: Option<GapReport>,
    pub box_active: bool,
}

/// One `(instance, σ)` pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioRecord {
    pub scenario_id: usize,
    pub instance: usize,
    pub sigma: usize,
    pub contractive: usize,
    pub triplets: usize,
    pub singular_resamples: usize,
}

impl ScenarioRecord {
    /// Share of contractive runs.
    pub fn chi(&self) -> f64 {
        self.contractive as f64 / self.triplets as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub spec: ScenarioSpec,
    pub scenarios: Vec<ScenarioRecord>,
    pub runs: Vec<RunRecord>,
}

impl ExperimentOutput {
    pub fn mean_chi(&self) -> f64 {
        self.scenarios.iter().map(ScenarioRecord::chi).sum::<f64>() / self.scenarios.len() as f64
    }

    pub fn contractive_runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.contractive)
    }
}

/// Instance seed for index `i` of a spec.
pub fn instance_seed(spec: &ScenarioSpec, i: usize) -> u64 {
    rng::derive(spec.seed, &[tag::INSTANCE, i as u64])
}

/// PVI over every `(instance, σ, triplet)` of the spec. Scenarios run in
/// parallel; output order is fixed.
pub fn run_contraction_experiment(spec: &ScenarioSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let models = (0..spec.instance_count)
        .into_par_iter()
        .map(|i| {
            let instance = generate(spec.kind, spec.d, instance_seed(spec, i))?;
            let mdp = build_mdp(&instance)?;
            let vstar = solve(&mdp)?;
            Ok((mdp, vstar))
        })
        .collect::<Result<Vec<_>>>()?;
    run_on_models(spec, &models)
}

/// As [`run_contraction_experiment`] on prebuilt models; `spec.kind`, `spec.d`
/// and `spec.instance_count` are taken as given.
pub fn run_on_models(spec: &ScenarioSpec, models: &[(Mdp, ValueFunction)]) -> Result<ExperimentOutput> {
    spec.validate()?;
    if models.len() != spec.instance_count {
        return Err(Error::InvalidInput("model count differs from the instance count".into()));
    }
    let pairs: Vec<(usize, usize)> =
        (0..spec.instance_count).flat_map(|i| (0..spec.sigma_per_instance).map(move |j| (i, j))).collect();
    let options = PviOptions { iterations: spec.iterations, eps: spec.eps };
    let results = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (mdp, vstar) = &models[i];
            let scenario_id = i * spec.sigma_per_instance + j;
            let sigma = sample_sigma(mdp, &mut rng::stream(spec.seed, &[tag::SIGMA, i as u64, j as u64]));
            let identity = spec.identity_embedding.then(|| {
                let scheme = AffineScheme::identity(mdp, DEFAULT_BOX);
                let projector = Projector::new(&scheme, &sigma);
                (scheme, projector)
            });
            let mut runs = Vec::with_capacity(spec.triplets_per_scenario);
            let mut resamples = 0;
            for t in 0..spec.triplets_per_scenario {
                let mut attempt = 0;
                let run = loop {
                    let mut rng = rng::stream(spec.seed, &[tag::TRIPLET, i as u64, j as u64, t as u64, attempt]);
                    let sampled;
                    let (scheme, projector) = match &identity {
                        Some((scheme, projector)) => (scheme, projector.as_ref().map_err(|e| Error::Singular(e.to_string()))),
                        None => {
                            let scheme = sample_features(mdp, spec.k, DEFAULT_BOX, &mut rng)?;
                            let projector = Projector::new(&scheme, &sigma);
                            sampled = (scheme, projector);
                            (&sampled.0, sampled.1.as_ref().map_err(|e| Error::Singular(e.to_string())))
                        }
                    };
                    let tau = sample_tau(mdp, &mut rng);
                    let theta0 = sample_theta0(scheme.k(), &mut rng);
                    match projector {
                        Ok(p) => break pvi_run_with(mdp, vstar, scheme, p, &tau, &theta0, options)?,
                        Err(e) if attempt + 1 < SINGULAR_RETRIES && identity.is_none() => {
                            log::warn!("scenario {scenario_id} triplet {t}: {e}; resampling");
                            resamples += 1;
                            attempt += 1;
                        }
                        Err(e) => return Err(e),
                    }
                };
                runs.push(RunRecord {
                    scenario_id,
                    triplet_id: t,
                    k: if spec.identity_embedding { mdp.state_count() } else { spec.k },
                    gamma: run.gamma,
                    contractive: run.contractive,
                    t_star: run.t_star,
                    slack: run.slack,
                    rel_opt_gap: run.rel_opt_gap,
                    box_active: run.box_active,
                });
            }
            let scenario = ScenarioRecord {
                scenario_id,
                instance: i,
                sigma: j,
                contractive: runs.iter().filter(|r| r.contractive).count(),
                triplets: runs.len(),
                singular_resamples: resamples,
            };
            Ok((scenario, runs))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut scenarios = Vec::with_capacity(results.len());
    let mut runs = Vec::with_capacity(spec.run_count());
    for (s, r) in results {
        scenarios.push(s);
        runs.extend(r);
    }
    Ok(ExperimentOutput { spec: spec.clone(), scenarios, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: ProblemKind, d: usize, k: usize) -> ScenarioSpec {
        ScenarioSpec { instance_count: 2, sigma_per_instance: 2, triplets_per_scenario: 5, ..ScenarioSpec::desk(kind, d, k, 5) }
    }

    #[test]
    fn outputs_are_deterministic_and_counted() {
        let spec = tiny(ProblemKind::Ksp, 5, 3);
        let a = run_contraction_experiment(&spec).unwrap();
        let b = run_contraction_experiment(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scenarios.len(), 4);
        assert_eq!(a.runs.len(), 20);
        for s in &a.scenarios {
            let count = a.runs.iter().filter(|r| r.scenario_id == s.scenario_id && r.contractive).count();
            assert_eq!(count, s.contractive);
        }
    }

    #[test]
    fn identity_embedding_contracts_like_the_exact_map() {
        let spec = ScenarioSpec { identity_embedding: true, ..tiny(ProblemKind::Tsp, 4, 2) };
        let out = run_contraction_experiment(&spec).unwrap();
        assert!(out.scenarios.iter().all(|s| s.chi() == 1.0), "{:?}", out.scenarios);
    }

    #[test]
    fn oversized_specs_are_refused() {
        let spec = ScenarioSpec::full(ProblemKind::Ksp, 10, 5, 0);
        assert!(spec.validate().is_ok());
        let huge = ScenarioSpec { instance_count: 10_000, ..spec };
        assert!(matches!(huge.validate(), Err(Error::SizeExceeded { .. })));
    }
}
