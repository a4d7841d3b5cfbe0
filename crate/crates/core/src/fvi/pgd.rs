use crate::affine::ParamBox;
use crate::error::{Error, Result};

/// Where a PGD run stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct PgdOutcome {
    pub theta: Vec<f64>,
    /// Steps actually evaluated.
    pub evaluated: u64,
}

/// Projected gradient descent with constant stepsize on `θ[1..]`; `θ[0]`
/// is never touched. `grad` returns the full gradient.
///
/// Returns the iterate after `steps` steps. Evaluation stops early once the
/// iterates repeat with period 1 or 2, at which point the remaining steps
/// are known exactly.
pub fn pgd_minimize<G>(grad: G, bounds: &ParamBox, init: &[f64], steps: u64, stepsize: f64) -> Result<Vec<f64>>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    Ok(pgd_until(grad, bounds, init, steps, stepsize, 0.0)?.theta)
}

/// [`pgd_minimize`] that additionally stops once a step moves no coordinate
/// by more than `tol`.
pub fn pgd_until<G>(mut grad: G, bounds: &ParamBox, init: &[f64], steps: u64, stepsize: f64, tol: f64) -> Result<PgdOutcome>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    if !(stepsize > 0.0 && stepsize.is_finite()) {
        return Err(Error::InvalidInput(format!("stepsize {stepsize} must be positive")));
    }
    if bounds.lo.len() + 1 != init.len() {
        return Err(Error::InvalidInput("box and parameter dimensions differ".into()));
    }
    let mut prev: Option<Vec<f64>> = None;
    let mut theta = init.to_vec();
    for k in 0..steps {
        let g = grad(&theta);
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite gradient at step {k}")));
        }
        let mut next = theta.clone();
        for i in 1..next.len() {
            next[i] -= stepsize * g[i];
        }
        bounds.clamp(&mut next);
        let evaluated = k + 1;
        if next == theta {
            return Ok(PgdOutcome { theta: next, evaluated });
        }
        if prev.as_ref() == Some(&next) {
            // period two: the sequence alternates between `theta` and `next`
            let left = steps - evaluated;
            let theta = if left % 2 == 0 { next } else { theta };
            return Ok(PgdOutcome { theta, evaluated });
        }
        let moved = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = Some(std::mem::replace(&mut theta, next));
        if moved <= tol {
            return Ok(PgdOutcome { theta, evaluated });
        }
    }
    Ok(PgdOutcome { theta, evaluated: steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quadratic_step() {
        let b = ParamBox::symmetric(1, 10.0);
        let theta = pgd_minimize(|t| vec![0.0, 2.0 * (t[1] - 1.0)], &b, &[1.0, 0.0], 1, 0.5).unwrap();
        assert_eq!(theta, vec![1.0, 1.0]);
    }

    #[test]
    fn active_bound_is_respected() {
        let b = ParamBox::symmetric(1, 1.0);
        let theta = pgd_minimize(|t| vec![0.0, 2.0 * (t[1] - 5.0)], &b, &[1.0, 0.0], 1000, 0.1).unwrap();
        assert_eq!(theta[1], 1.0);
    }

    #[test]
    fn early_exit_matches_the_full_run() {
        let b = ParamBox::symmetric(2, 100.0);
        let grad = |t: &[f64]| vec![0.0, 2.0 * (3.0 * t[1] + t[2] - 1.0), 2.0 * (t[1] + 2.0 * t[2] + 4.0)];
        let quick = pgd_until(grad, &b, &[1.0, 0.0, 0.0], 1_000_000_000, 0.1, 0.0).unwrap();
        assert!(quick.evaluated < 100_000);
        let mut t = vec![1.0, 0.0, 0.0];
        for _ in 0..quick.evaluated + 17 {
            let g = grad(&t);
            t[1] -= 0.1 * g[1];
            t[2] -= 0.1 * g[2];
        }
        assert_eq!(t, quick.theta);
    }

    #[test]
    fn bad_gradients_and_steps_are_errors() {
        let b = ParamBox::symmetric(1, 1.0);
        assert!(pgd_minimize(|_| vec![0.0, f64::NAN], &b, &[1.0, 0.0], 3, 0.1).is_err());
        assert!(pgd_minimize(|_| vec![0.0, 0.0], &b, &[1.0, 0.0], 3, 0.0).is_err());
    }
}
