//! Finite-difference verification of analytic gradients.

use crate::error::{Error, Result};

/// Compare an analytic gradient against central finite differences.
///
/// Returns the maximum over parameters of
/// `|analytic - central| / max(1, |analytic|, |central|)`.
pub fn gradient_check<F, G>(f: F, grad_f: G, params: &[f64], eps: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if eps <= 0.0 {
        return Err(Error::Config(format!("gradient_check eps must be > 0, got {eps}")));
    }
    let analytic = grad_f(params)?;
    if analytic.len() != params.len() {
        return Err(Error::Dimension(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let mut work = params.to_vec();
    let mut max_err: f64 = 0.0;
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + eps;
        let up = f(&work)?;
        work[i] = orig - eps;
        let down = f(&work)?;
        work[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Evaluation(format!(
                "loss is non-finite near parameter {i}"
            )));
        }
        let central = (up - down) / (2.0 * eps);
        let denom = 1.0_f64.max(analytic[i].abs()).max(central.abs());
        let err = (analytic[i] - central).abs() / denom;
        if err > max_err {
            max_err = err;
        }
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_matches_central_difference() {
        // f(x) = x^2 at x = 3, analytic gradient 2x = 6
        let err = gradient_check(
            |p| Ok(p[0] * p[0]),
            |p| Ok(vec![2.0 * p[0]]),
            &[3.0],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "error {err}");
    }

    #[test]
    fn linear_is_exact() {
        // central difference is exact for linear functions
        let err = gradient_check(|p| Ok(3.0 * p[0]), |_| Ok(vec![3.0]), &[3.0], 1e-3).unwrap();
        assert!(err < 1e-10, "error {err}");
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let err = gradient_check(
            |p| Ok(p[0] * p[0]),
            |_| Ok(vec![5.0]), // wrong on purpose
            &[3.0],
            1e-5,
        )
        .unwrap();
        assert!(err > 0.1);
    }

    #[test]
    fn non_finite_loss_is_error() {
        let r = gradient_check(
            |p| Ok((p[0] - 3.0).ln()), // NaN for p slightly below 3
            |_| Ok(vec![0.0]),
            &[3.0],
            1e-5,
        );
        assert!(r.is_err());
    }

    #[test]
    fn bad_eps_is_error() {
        assert!(gradient_check(|p| Ok(p[0]), |_| Ok(vec![1.0]), &[1.0], 0.0).is_err());
    }
}
