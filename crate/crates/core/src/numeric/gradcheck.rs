//! Central finite differences, the oracle for every analytic gradient in
//! the crate.

use super::{FeatureBatch, Matrix};
use crate::error::{Error, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// `(f(b + h e_ij) − f(b − h e_ij)) / 2h` for every entry.
pub fn finite_diff_grad<F>(f: F, b: &FeatureBatch, h: f64) -> Result<Matrix>
where
    F: Fn(&FeatureBatch) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {h}")));
    }
    let (n, d) = (b.n(), b.d());
    let mut grad = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let plus = f(&b.perturbed(i, j, h)?)?;
            let minus = f(&b.perturbed(i, j, -h)?)?;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFiniteEvaluation { row: i, col: j });
            }
            grad.set(i, j, (plus - minus) / (2.0 * h));
        }
    }
    Ok(grad)
}

/// `|a − g| / max(1, |a|, |g|)`.
pub fn relative_error(a: f64, g: f64) -> f64 {
    (a - g).abs() / 1f64.max(a.abs()).max(g.abs())
}

pub fn max_relative_error(a: &Matrix, g: &Matrix) -> f64 {
    assert_eq!(a.shape(), g.shape());
    a.as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::seeded_standard_normal;

    #[test]
    fn sum_gives_ones() {
        let b = seeded_standard_normal(5, 3, 1).unwrap();
        let g = finite_diff_grad(|x| Ok(x.as_slice().iter().sum()), &b, 1e-5).unwrap();
        assert!(g.as_slice().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn half_norm_gives_identity() {
        let b = seeded_standard_normal(5, 3, 2).unwrap();
        let g = finite_diff_grad(
            |x| Ok(0.5 * x.as_slice().iter().map(|v| v * v).sum::<f64>()),
            &b,
            1e-5,
        )
        .unwrap();
        for (gv, bv) in g.as_slice().iter().zip(b.as_slice()) {
            assert!((gv - bv).abs() < 1e-6);
        }
    }

    #[test]
    fn reports_non_finite() {
        let b = seeded_standard_normal(2, 2, 0).unwrap();
        let err = finite_diff_grad(|_| Ok(f64::INFINITY), &b, 1e-5).unwrap_err();
        assert!(matches!(err, Error::NonFiniteEvaluation { row: 0, col: 0 }));
        assert!(finite_diff_grad(|_| Ok(0.0), &b, 0.0).is_err());
    }
}
