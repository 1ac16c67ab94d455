//! Central finite-difference verification of analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Denominator floor for relative errors on near-zero coordinates.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
    pub rel_errors: Vec<f64>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the gradient returned by `loss` at `params` with central
/// differences of step `step`. The closure returns `(value, gradient)`;
/// only the value is used at perturbed points.
pub fn finite_diff_check<F>(mut loss: F, params: &[f64], step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(step > 0.0 && step <= 1e-2) {
        return Err(invalid("step", format!("{step} outside (0, 1e-2]")));
    }
    let (base, analytic) = loss(params)?;
    if !base.is_finite() {
        return Err(Error::NonFinite("loss at the base point".into()));
    }
    if analytic.len() != params.len() {
        return Err(Error::Shape(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let mut x = params.to_vec();
    let mut numeric = Vec::with_capacity(params.len());
    let mut rel_errors = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let orig = x[k];
        x[k] = orig + step;
        let up = loss(&x)?.0;
        x[k] = orig - step;
        let down = loss(&x)?.0;
        x[k] = orig;
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFinite(format!("loss when perturbing coordinate {k}")));
        }
        let g = (up - down) / (2.0 * step);
        let a = analytic[k];
        numeric.push(g);
        rel_errors.push((a - g).abs() / a.abs().max(g.abs()).max(REL_FLOOR));
    }
    let (worst_coordinate, max_rel_error) = rel_errors
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (k, e)| if e > acc.1 { (k, e) } else { acc });
    Ok(GradCheckReport {
        max_rel_error,
        worst_coordinate,
        rel_errors,
        analytic,
        numeric,
        tolerance: tol,
        passed: max_rel_error < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_norm() {
        let r = finite_diff_check(
            |x| Ok((x.iter().map(|v| v * v).sum(), x.iter().map(|v| 2.0 * v).collect())),
            &[1.0, 2.0],
            1e-5,
            1e-8,
        )
        .unwrap();
        assert!(r.max_rel_error < 1e-8, "{}", r.max_rel_error);
        assert_eq!(r.analytic, vec![2.0, 4.0]);
        assert!(r.passed);
    }

    #[test]
    fn catches_a_wrong_gradient() {
        let r = finite_diff_check(|x| Ok((x[0] * x[0], vec![3.0 * x[0]])), &[1.0], 1e-5, 1e-4).unwrap();
        assert!(!r.passed);
        assert_eq!(r.worst_coordinate, 0);
    }

    #[test]
    fn reports_non_finite_coordinate() {
        let err = finite_diff_check(
            |x| Ok((if x[1] > 1.0 { f64::NAN } else { x[1] }, vec![0.0, 1.0])),
            &[0.0, 1.0],
            1e-3,
            1e-4,
        )
        .unwrap_err();
        assert!(err.to_string().contains("coordinate 1"));
        assert!(finite_diff_check(|x| Ok((x[0], vec![1.0])), &[0.0], 0.1, 1e-4).is_err());
    }
}
