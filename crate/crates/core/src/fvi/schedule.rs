use serde::Serialize;

use crate::affine::AffineScheme;
use crate::error::{Error, Result};
use crate::exact::{c_sigma_tau, SigmaDist, TauWeights};
use crate::mdp::Mdp;

/// Sub-Gaussian tail parameter. Only the infinite case arises for the
/// affine scheme; it removes the second branch of the sample-size rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Beta {
    Infinite,
    Finite(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FviConstants {
    /// `L(s) = ‖φ(s)‖₂`.
    pub lipschitz: Vec<f64>,
    pub l_sup: f64,
    pub l_mean: f64,
    /// `max_s L(s)/τ(s)`.
    pub l_tau: f64,
    pub d_theta: f64,
    pub zeta_kappa: f64,
    pub kappa_star: f64,
    pub kappa_hat: f64,
    pub omega: f64,
    pub beta: Beta,
    pub c_sigma_tau: f64,
    /// Free parameter count `N = K − 1`.
    pub n_params: usize,
    pub nu: f64,
    pub gamma: f64,
    pub gamma_tau: f64,
    pub approx_gap: f64,
}

/// Margin added to `κ*` to get `κ̂`.
pub const KAPPA_MARGIN: f64 = 1.0;

/// Lipschitz and sub-Gaussian constants of the per-state loss.
///
/// `gamma` is a contraction estimate of the projected Bellman map and
/// `approx_gap` is `‖V* − Π V*‖_τ`.
pub fn compute_constants(
    mdp: &Mdp,
    scheme: &AffineScheme,
    tau: &TauWeights,
    sigma: &SigmaDist,
    gamma: f64,
    approx_gap: f64,
) -> Result<FviConstants> {
    if !(gamma < 1.0 && gamma >= 0.0) {
        return Err(Error::Precondition(format!("contraction estimate {gamma} must lie in [0, 1)")));
    }
    if !(approx_gap >= 0.0) {
        return Err(Error::InvalidInput("approximation gap must be nonnegative".into()));
    }
    let lipschitz: Vec<f64> =
        (0..mdp.state_count()).map(|s| scheme.row(s).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let l_sup = lipschitz.iter().copied().fold(0.0, f64::max);
    let l_mean = lipschitz.iter().zip(sigma.probs()).map(|(l, p)| l * p).sum();
    let l_tau = (0..mdp.state_count()).map(|s| lipschitz[s] / tau.weight(mdp, s)).fold(0.0, f64::max);
    let d_theta = scheme.bounds().diameter();
    let g_tau = tau.gamma();
    let tau0 = tau.tau0();
    let zeta_kappa = 2.0
        * ((1.0 + tau0 * g_tau / tau.tau_last_layer()) * l_sup * d_theta
            + tau0 * gamma * (1.0 + g_tau) / (1.0 - gamma) * approx_gap);
    let kappa_star = zeta_kappa * l_sup;
    let n_params = scheme.k() - 1;
    Ok(FviConstants {
        l_sup,
        l_mean,
        l_tau,
        d_theta,
        zeta_kappa,
        kappa_star,
        kappa_hat: kappa_star + KAPPA_MARGIN,
        omega: zeta_kappa * d_theta * (l_sup + l_mean),
        beta: Beta::Infinite,
        c_sigma_tau: c_sigma_tau(sigma, tau, mdp),
        n_params,
        nu: 2.0 / (n_params as f64).sqrt(),
        gamma,
        gamma_tau: g_tau,
        approx_gap,
        lipschitz,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleParams {
    pub target_eps: f64,
    pub eps0: f64,
    pub delta: f64,
    pub gamma_star: f64,
    pub a: f64,
    pub rho: f64,
    pub rho_prime: f64,
    pub iterations: usize,
    pub eps: Vec<f64>,
    /// Sample counts; integral but possibly beyond any integer type.
    pub samples: Vec<f64>,
    pub steps: Vec<f64>,
    pub stepsize: Vec<f64>,
}

/// `⌈a log_{1+δ}(total/ε)⌉`, at least 1.
pub fn iteration_count(a: f64, delta: f64, total: f64, target_eps: f64) -> usize {
    let t = (a * (total / target_eps).ln() / delta.ln_1p()).ceil();
    if t.is_finite() && t >= 1.0 {
        t as usize
    } else {
        1
    }
}

/// `γ* = max{γ, 1/sqrt(1+δ)}` and `a = −2 / log_{1+δ} γ*`.
pub fn rate_exponent(gamma: f64, delta: f64) -> (f64, f64) {
    let gamma_star = gamma.max(1.0 / (1.0 + delta).sqrt());
    (gamma_star, -2.0 * delta.ln_1p() / gamma_star.ln())
}

/// `sqrt(ε)/(1−γ) (2‖L‖_τ D + 1/c(σ,τ))`.
pub fn estimation_term(c: &FviConstants, eps: f64) -> f64 {
    eps.sqrt() / (1.0 - c.gamma) * (2.0 * c.l_tau * c.d_theta + 1.0 / c.c_sigma_tau)
}

/// Per-iteration accuracy, sample and step counts.
pub fn plan_schedule(
    target_eps: f64,
    eps0: f64,
    delta: f64,
    constants: &FviConstants,
    rho: f64,
) -> Result<ScheduleParams> {
    if !(eps0 > 0.0 && eps0 < 0.25) {
        return Err(Error::InvalidInput(format!("eps0 = {eps0} must lie in (0, 1/4)")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput("growth rate must be positive".into()));
    }
    if !(target_eps > 0.0) {
        return Err(Error::InvalidInput("target accuracy must be positive".into()));
    }
    let gamma = constants.gamma;
    if !(gamma < 1.0) {
        return Err(Error::InvalidInput("contraction estimate must be below 1".into()));
    }
    let (gamma_star, a) = rate_exponent(gamma, delta);
    let rho_prime = estimation_term(constants, eps0);
    let iterations = iteration_count(a, delta, rho + rho_prime, target_eps);
    let c = constants;
    let eps: Vec<f64> = (0..iterations).map(|t| eps0 / (1.0 + delta).powi(t as i32)).collect();
    let n = c.n_params as f64;
    let samples = eps
        .iter()
        .map(|&e| {
            let first = 32.0 * c.omega.powi(2) / (e * e)
                * (n * (16.0 * c.nu * c.d_theta * c.kappa_hat / e).ln() + 0.5 * (1.0 / e).ln());
            let second = match c.beta {
                Beta::Infinite => 0.0,
                Beta::Finite(b) => (1.0 / e).ln() / (2.0 * b),
            };
            first.max(second).max(1.0).ceil()
        })
        .collect();
    let eta = 1.0 / c.kappa_star;
    let steps = eps.iter().map(|&e| (c.d_theta.powi(2) / (eta * e)).ceil().max(1.0)).collect();
    Ok(ScheduleParams {
        target_eps,
        eps0,
        delta,
        gamma_star,
        a,
        rho,
        rho_prime,
        iterations,
        eps,
        samples,
        steps,
        stepsize: vec![eta; iterations],
    })
}

/// `min_t { γ^{T−t} ρ + sqrt(ε_t)/(1−γ) (2‖L‖_τ D + 1/c(σ,τ)) }`.
pub fn fvi_error_bound(constants: &FviConstants, schedule: &ScheduleParams) -> f64 {
    let t_max = schedule.iterations;
    schedule
        .eps
        .iter()
        .enumerate()
        .map(|(t, &e)| constants.gamma.powi((t_max - t) as i32) * schedule.rho + estimation_term(constants, e))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::ParamBox;
    use crate::mdp::build_mdp;
    use crate::problems::{Instance, Knapsack};

    fn two_state() -> Mdp {
        build_mdp(&Instance::Ksp(Knapsack { d: 1, n: 1, m: 1, c: vec![1.0], w: vec![vec![1.0]], b: vec![1.0] }))
            .unwrap()
    }

    #[test]
    fn constants_by_hand() {
        let mdp = two_state();
        let mut rows = vec![vec![1.0, 0.0]; 3];
        rows[mdp.absorbing()] = vec![0.0, 0.0];
        let scheme = AffineScheme::new(&mdp, rows, ParamBox::symmetric(1, 1.0)).unwrap();
        let tau = TauWeights::new(vec![1.0, 0.5, 0.25]).unwrap();
        let mut probs = vec![0.25, 0.75, 0.75];
        probs[mdp.absorbing()] = 0.0;
        let live: Vec<usize> = mdp.live_states().collect();
        probs[live[0]] = 0.25;
        probs[live[1]] = 0.75;
        let sigma = SigmaDist::new(&mdp, probs).unwrap();
        let c = compute_constants(&mdp, &scheme, &tau, &sigma, 0.5, 0.0).unwrap();
        for s in mdp.live_states() {
            assert_eq!(c.lipschitz[s], 1.0);
        }
        assert_eq!(c.d_theta, 2.0);
        assert_eq!(c.kappa_star, c.zeta_kappa);
        // layer 0 has τ = 1 and σ = 0.25, layer 1 has τ = 0.5 and σ = 0.75
        assert_eq!(c.c_sigma_tau, 0.5f64.min(0.5 * 0.75f64.sqrt()));
        assert!(compute_constants(&mdp, &scheme, &tau, &sigma, 1.0, 0.0).is_err());
    }

    #[test]
    fn iteration_count_by_hand() {
        let (gamma_star, a) = rate_exponent(0.5, 1.0);
        assert!((gamma_star - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((a - 4.0).abs() < 1e-12);
        assert_eq!(iteration_count(4.0, 1.0, 8.0, 0.5), 16);
    }

    #[test]
    fn box_diameter() {
        assert_eq!(ParamBox::symmetric(4, 1.0).diameter(), 4.0);
    }
}
